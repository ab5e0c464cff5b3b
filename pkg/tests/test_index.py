import random
from collections import Counter
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from citeindex.adapters.base import AuthorKey, MetadataRow, RawCitationPair, SourceTag
from citeindex.dates import PartialDate
from citeindex.identifiers import ExternalId
from citeindex.index import (Citation, CitationIndex, CoverageReport, Oci, UnresolvedPair,
                             WrongEntityType, build_citations, classify_self_citation, coverage_stats,
                             make_oci, to_omid_pair)
from citeindex.meta import BibResource, MetaStore, Omid, UnknownOmid

CR, NIH, DC, OA, JA = (SourceTag.CROSSREF, SourceTag.NIH_OCC, SourceTag.DATACITE,
                       SourceTag.OPENAIRE, SourceTag.JALC)
ORCID = ExternalId.parse("orcid:0000-0002-1825-0097")
OTHER_ORCID = ExternalId.parse("orcid:0000-0001-5366-5194")


def eid(text):
    return ExternalId.parse(text)


def res(n, authors=(), venue=(), date=None):
    return BibResource(Omid("br", "060", n), {eid(f"doi:10.1/{n}")},
                       PartialDate.parse(date) if date else None, tuple(venue), tuple(authors))


def test_make_oci_paper_example():
    oci = make_oci(Omid.parse("omid:br/06101801781"), Omid.parse("omid:br/06180334099"))
    assert str(oci) == "oci:06101801781-06180334099"
    assert oci.endpoints() == (Omid.parse("omid:br/06101801781"), Omid.parse("omid:br/06180334099"))


def test_make_oci_is_order_sensitive_and_type_checked():
    x, y = Omid("br", "060", 1), Omid("br", "060", 2)
    assert make_oci(x, y) != make_oci(y, x)
    with pytest.raises(WrongEntityType):
        make_oci(Omid("ra", "060", 1), y)


@settings(max_examples=300)
@given(st.integers(1, 10**10), st.integers(1, 10**10), st.sampled_from(["060", "0610", "06180"]))
def test_oci_parse_inverts_make_oci(a, b, supplier):
    x, y = Omid("br", supplier, a), Omid("br", "060", b)
    oci = make_oci(x, y)
    assert Oci.parse(str(oci)) == oci == Oci.parse(oci.digits)
    assert oci.endpoints() == (x, y)


@pytest.mark.parametrize("text", ["abc", "oci:1-2", "oci:0601", "oci:0601-0600", "OCI:0601-0602"])
def test_malformed_oci(text):
    with pytest.raises(ValueError):
        Oci.parse(text)


def _mapped_store():
    store = MetaStore()
    a = store.resolve_or_mint([eid("doi:10.1/a"), eid("pmid:1")], MetadataRow((eid("doi:10.1/a"),), pub_date=PartialDate(2020)))
    b = store.resolve_or_mint([eid("doi:10.1/b"), eid("pmid:2")], MetadataRow((eid("doi:10.1/b"),), pub_date=PartialDate(2019)))
    return store, a, b


def test_to_omid_pair_cases():
    store, a, b = _mapped_store()
    parked: list[UnresolvedPair] = []
    pair = lambda x, y, s=CR: RawCitationPair(eid(x), eid(y), s)
    assert to_omid_pair(pair("doi:10.1/a", "doi:10.1/b"), store, parked) == (a, b)
    assert to_omid_pair(pair("pmid:1", "pmid:2", NIH), store, parked) == (a, b)
    assert to_omid_pair(pair("doi:10.1/a", "doi:10.1/zz"), store, parked) is None
    assert to_omid_pair(pair("doi:10.1/zz", "doi:10.1/a"), store, parked) is None
    assert to_omid_pair(pair("doi:10.1/y", "doi:10.1/zz"), store, parked) is None
    assert to_omid_pair(pair("doi:10.1/a", "pmid:1", OA), store, parked) is None
    assert [p.reason for p in parked] == ["cited-unmapped", "citing-unmapped", "both-unmapped", "same-resource"]


@pytest.mark.parametrize("citing,cited,expected", [
    (res(1, [AuthorKey("rossi,a", ORCID)]), res(2, [AuthorKey("verdi,b", ORCID)]), (True, False)),
    (res(1, [AuthorKey("rossi,a")], ["issn:0378-5955"]), res(2, [AuthorKey("li,w")], ["issn:0378-5955"]), (False, True)),
    (res(1, [], ["issn:0378-5955"]), res(2, [AuthorKey("rossi,a")]), (False, False)),
    (res(1, [AuthorKey("rossi,a")]), res(2, [AuthorKey("rossi,a")]), (True, False)),
    # a name match does not count when either author has an ORCID
    (res(1, [AuthorKey("rossi,a", ORCID)]), res(2, [AuthorKey("rossi,a")]), (False, False)),
    (res(1, [AuthorKey("rossi,a", ORCID)]), res(2, [AuthorKey("rossi,a", OTHER_ORCID)]), (False, False)),
    (res(1, venue=["abbr:j x", "issn:0378-5955"]), res(2, venue=["abbr:j x"]), (False, True)),
])
def test_classify_self_citation(citing, cited, expected):
    assert classify_self_citation(citing, cited) == expected


def _store_with(resources):
    store = MetaStore()
    for r in resources:
        store.adopt(r.omid, r.ids)
        store.resources[r.omid] = r
    return store


def test_build_new_extension_and_idempotence():
    r1, r2 = res(1, date="2021-03-10"), res(2, date="2015-03-09")
    store, index = _store_with([r1, r2]), CitationIndex()
    first = build_citations([(r1.omid, r2.omid, CR)], store, index)
    assert len(first.new) == 1 and not first.extensions and first.origins == {first.new[0].oci: CR}
    c = first.new[0]
    assert (str(c.creation_date), str(c.timespan)) == ("2021-03-10", "P6Y0M1D")
    second = build_citations([(r1.omid, r2.omid, NIH)], store, index)
    assert not second.new and [(e.oci, e.source) for e in second.extensions] == [(c.oci, NIH)]
    again = build_citations([(r1.omid, r2.omid, CR), (r1.omid, r2.omid, NIH)], store, index)
    assert not again.new and not again.extensions
    assert len(index) == 1 and index.get(c.oci).sources == {CR, NIH}


def test_first_writer_wins_for_metadata():
    r1, r2 = res(1, date="2021"), res(2, date="2015")
    store, index = _store_with([r1, r2]), CitationIndex()
    build_citations([(r1.omid, r2.omid, CR)], store, index)
    r1.pub_date = PartialDate(2022, 1, 1)
    build_citations([(r1.omid, r2.omid, NIH)], store, index)
    stored = index.get(make_oci(r1.omid, r2.omid))
    assert str(stored.creation_date) == "2021" and str(stored.timespan) == "P6Y"


def test_missing_dates_give_no_timespan():
    r1, r2 = res(1, date="2021"), res(2)
    store = _store_with([r1, r2])
    (c,) = build_citations([(r1.omid, r2.omid, CR)], store, CitationIndex()).new
    assert c.creation_date == PartialDate(2021) and c.timespan is None


def test_unknown_omid_aborts():
    r1 = res(1)
    with pytest.raises(UnknownOmid):
        build_citations([(r1.omid, Omid("br", "060", 99), CR)], _store_with([r1]), CitationIndex())


def test_creation_date_agrees_with_citing_resource():
    rng = random.Random(8)
    resources = [res(n, date=rng.choice([None, "2001", "2002-03", "2003-04-05"])) for n in range(1, 40)]
    store = _store_with(resources)
    pairs = [(a.omid, b.omid, rng.choice(list(SourceTag)))
             for a, b in (rng.sample(resources, 2) for _ in range(300))]
    index = CitationIndex()
    build_citations(pairs, store, index)
    for c in index:
        assert c.creation_date == store.get_resource(c.citing).pub_date
    assert len({c.oci for c in index}) == len(index)


# --- coverage ------------------------------------------------------------------

def _cit(n, *sources):
    a, b = Omid("br", "060", n), Omid("br", "060", n + 100000)
    return Citation(make_oci(a, b), a, b, sources=set(sources))


def test_coverage_spec_example():
    cits = [_cit(1, CR), _cit(2, CR), _cit(3, CR), _cit(4, NIH), _cit(5, NIH), _cit(6, CR, NIH)]
    report = coverage_stats(cits)
    assert report.total == 6
    assert (report.source_total(CR), report.exclusive(CR)) == (4, 3)
    assert (report.source_total(NIH), report.exclusive(NIH)) == (3, 2)


def test_coverage_empty_and_single_source():
    empty = coverage_stats([])
    assert empty.total == 0 and all(empty.source_total(s) == 0 for s in SourceTag)
    one = coverage_stats([_cit(n, DC) for n in range(1, 6)])
    assert one.exclusive(DC) == one.source_total(DC) == 5
    assert one.to_json()["overlaps"] == []


_source_sets = st.sets(st.sampled_from(list(SourceTag)), min_size=1)


@settings(max_examples=200)
@given(st.lists(_source_sets, max_size=60))
def test_coverage_matches_brute_force_partition(source_sets):
    cits = [_cit(n + 1, *s) for n, s in enumerate(source_sets)]
    report = coverage_stats(cits)
    oracle = Counter(frozenset(s) for s in source_sets)
    assert dict(report.combinations) == dict(oracle)
    assert sum(report.combinations.values()) == report.total == len(cits)
    for s in SourceTag:
        assert report.exclusive(s) + report.shared(s) == report.source_total(s)
        assert report.exclusive(s) <= report.source_total(s)
        assert report.source_total(s) == sum(s in ss for ss in source_sets)
    for a, b in combinations(SourceTag, 2):
        assert report.overlap(a, b) == sum({a, b} <= ss for ss in source_sets)
    assert CoverageReport.from_json(report.to_json()) == report


@settings(max_examples=100)
@given(st.lists(_source_sets, max_size=30), st.lists(_source_sets, max_size=30))
def test_coverage_merge_is_a_monoid(left, right):
    a = coverage_stats([_cit(n + 1, *s) for n, s in enumerate(left)])
    b = coverage_stats([_cit(n + 1000, *s) for n, s in enumerate(right)])
    both = coverage_stats([_cit(n + 1, *s) for n, s in enumerate(left)]
                          + [_cit(n + 1000, *s) for n, s in enumerate(right)])
    assert a.merge(b).combinations == b.merge(a).combinations == both.combinations
    assert a.merge(CoverageReport()).combinations == a.combinations
