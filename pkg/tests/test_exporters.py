import gzip
import hashlib
import json
import random

import pytest
import rdflib
from rdflib.compare import isomorphic

from citeindex.adapters.base import SourceTag
from citeindex.dates import PartialDate, Timespan
from citeindex.identifiers import ExternalId
from citeindex.index import Citation, make_oci
from citeindex.meta import MetaStore, Omid
from citeindex.exporters import (CSV_COLUMNS, citation_triples, export_csv, export_ntriples,
                                 export_scholix, read_citations_csv, shard_name, write_manifest)

from helpers import GOLDEN, NT_LINE, check_ntriples, random_citations

GOLDEN_ROW = "06101801781-06180334099,omid:br/06101801781,omid:br/06180334099,2021-03-10,P6Y0M1D,no,no"


def golden_citation():
    a, b = Omid.parse("omid:br/06101801781"), Omid.parse("omid:br/06180334099")
    return Citation(make_oci(a, b), a, b, PartialDate(2021, 3, 10), Timespan.parse("P6Y0M1D"),
                    sources={SourceTag.CROSSREF})


def test_shard_name():
    assert shard_name("index", "csv", "2024-05-01", 3, True) == "index-csv-2024-05-01-00003.csv.gz"
    assert shard_name("index", "scholix", "2024-05-01", 0, False) == "index-scholix-2024-05-01-00000.json"


def test_golden_csv_row(tmp_path):
    (shard,) = export_csv([golden_citation()], tmp_path, run_date="2024-01-01", compress=False)
    assert shard.path.read_text().splitlines() == [",".join(CSV_COLUMNS), GOLDEN_ROW]
    assert shard.records == 1


def test_optional_sources_column(tmp_path):
    (shard,) = export_csv([golden_citation()], tmp_path, run_date="d", compress=False, with_sources=True)
    assert shard.path.read_text().splitlines()[1] == GOLDEN_ROW + ",crossref"
    assert read_citations_csv(shard.path) == [golden_citation()]


def test_empty_exports(tmp_path):
    (csv_shard,) = export_csv([], tmp_path, run_date="d", compress=False)
    assert csv_shard.path.read_text() == ",".join(CSV_COLUMNS) + "\n"
    (nt_shard,) = export_ntriples([], tmp_path, run_date="d", compress=False)
    assert nt_shard.path.read_text() == ""
    (sx_shard,) = export_scholix([], None, tmp_path, run_date="d", compress=False)
    assert json.loads(sx_shard.path.read_text()) == []
    assert read_citations_csv(csv_shard.path) == []


def test_golden_ntriples_match_turtle(tmp_path):
    (shard,) = export_ntriples([golden_citation()], tmp_path, run_date="d", compress=False)
    text = shard.path.read_text()
    assert check_ntriples(text) == 5
    got = rdflib.Graph().parse(data=text, format="nt")
    want = rdflib.Graph().parse(GOLDEN / "citation.ttl", format="turtle")
    assert isomorphic(got, want) and set(got) == set(want)


def test_self_citation_and_precision_typing():
    c = golden_citation()
    c.author_self, c.journal_self = True, False
    assert len(citation_triples(c)) == 6
    c.journal_self = True
    assert len(citation_triples(c)) == 7
    c.creation_date = PartialDate(2021)
    c.timespan = Timespan.parse("P6Y")
    (creation,) = [o for _, p, o in citation_triples(c) if p.endswith("hasCitationCreationDate")]
    assert (creation.lexical, creation.datatype) == ("2021", "http://www.w3.org/2001/XMLSchema#gYear")
    c.creation_date = PartialDate(2021, 3)
    (creation,) = [o for _, p, o in citation_triples(c) if p.endswith("hasCitationCreationDate")]
    assert creation.datatype.endswith("#gYearMonth")


def _expected_triples(c):
    return (3 + (c.creation_date is not None) + (c.timespan is not None)
            + c.author_self + c.journal_self)


def test_csv_round_trip_and_nt_counts(tmp_path):
    rng = random.Random(21)
    for trial in range(30):
        cits = random_citations(rng, rng.randint(0, 60))
        out = tmp_path / str(trial)
        shards = export_csv(cits, out, run_date="d", shard_size=rng.randint(1, 25), with_sources=True)
        assert sorted(read_citations_csv([s.path for s in shards]), key=lambda c: c.oci) == sorted(cits, key=lambda c: c.oci)
        nt = export_ntriples(cits, out, run_date="d", shard_size=17)
        total = sum(check_ntriples(gzip.decompress(s.path.read_bytes()).decode()) for s in nt)
        assert total == sum(_expected_triples(c) for c in cits) == sum(s.records for s in nt)


def test_sharding_respects_size(tmp_path):
    cits = random_citations(random.Random(2), 25)
    shards = export_csv(cits, tmp_path, run_date="d", shard_size=10, compress=False)
    assert [s.records for s in shards] == [10, 10, 5]
    ocis = [row.split(",")[0] for s in shards for row in s.path.read_text().splitlines()[1:]]
    assert ocis == sorted(c.oci.digits for c in cits)


def test_gzip_output_is_byte_deterministic(tmp_path):
    cits = random_citations(random.Random(3), 100)
    a = export_ntriples(cits, tmp_path / "a", run_date="d")
    b = export_ntriples(list(reversed(cits)), tmp_path / "b", run_date="d")
    assert [s.path.read_bytes() for s in a] == [s.path.read_bytes() for s in b]
    assert a[0].path.read_bytes()[4:8] == b"\0\0\0\0"  # zero mtime


def test_manifest_checksums(tmp_path):
    shards = export_csv(random_citations(random.Random(4), 30), tmp_path, run_date="d", shard_size=7)
    manifest = write_manifest(tmp_path / "manifest.json", shards, dataset="index")
    assert json.loads((tmp_path / "manifest.json").read_text()) == manifest
    for entry in manifest["files"]:
        data = (tmp_path / entry["file"]).read_bytes()
        assert entry["sha256"] == hashlib.sha256(data).hexdigest() and entry["bytes"] == len(data)


def _store():
    store = MetaStore()
    a = store.resolve_or_mint([ExternalId.parse("doi:10.1/a"), ExternalId.parse("pmid:12")])
    b = store.resolve_or_mint([ExternalId.parse("doi:10.1/b")])
    store.get_resource(b).pub_date = PartialDate(2019, 4)
    return store, a, b


def test_scholix_links(tmp_path):
    store, a, b = _store()
    orphan = Omid("br", "060", 77)
    cits = [Citation(make_oci(a, b), a, b, sources={SourceTag.NIH_OCC, SourceTag.CROSSREF}),
            Citation(make_oci(a, orphan), a, orphan)]
    (shard,) = export_scholix(cits, store, tmp_path, run_date="d", compress=False,
                              link_dates={cits[0].oci: "2024-01-02"})
    first, second = json.loads(shard.path.read_text())
    assert first["RelationshipType"]["Name"] == "References"
    assert {(i["IDScheme"], i["ID"]) for i in first["Source"]["Identifier"]} == {("doi", "10.1/a"), ("pmid", "12")}
    assert first["Target"]["Identifier"][0]["IDURL"] == "https://doi.org/10.1/b"
    assert first["Target"]["PublicationDate"] == "2019-04" and "PublicationDate" not in first["Source"]
    assert [p["Name"] for p in first["LinkProvider"]] == ["citeindex", "crossref", "nih_occ"]
    assert first["LinkPublicationDate"] == "2024-01-02" and "LinkPublicationDate" not in second
    assert second["Target"]["Identifier"] == [{"ID": orphan.digits, "IDScheme": "omid",
                                               "IDURL": f"https://w3id.org/oc/meta/br/{orphan.digits}"}]


def test_cross_format_oci_sets_agree(tmp_path):
    cits = random_citations(random.Random(5), 200)
    csv_ocis = {c.oci.digits for c in read_citations_csv(
        [s.path for s in export_csv(cits, tmp_path, run_date="d", shard_size=50)])}
    nt_text = "".join(gzip.decompress(s.path.read_bytes()).decode()
                      for s in export_ntriples(cits, tmp_path, run_date="d", shard_size=50))
    # rdflib rejects negative durations mixing years and days, so read subjects off the lines
    typed = [NT_LINE.fullmatch(l) for l in nt_text.splitlines()]
    nt_ocis = {m["s"][1:-1].rsplit("/", 1)[1] for m in typed
               if m["o"] == "<http://purl.org/spar/cito/Citation>"}
    links = [link for s in export_scholix(cits, None, tmp_path, run_date="d", shard_size=50)
             for link in json.loads(gzip.decompress(s.path.read_bytes()))]
    sx_ocis = {f"{l['Source']['Identifier'][0]['ID']}-{l['Target']['Identifier'][0]['ID']}" for l in links}
    assert csv_ocis == nt_ocis == sx_ocis and len(csv_ocis) == len(cits) == len(links)


def test_bad_shard_size(tmp_path):
    with pytest.raises(ValueError):
        export_csv([golden_citation()], tmp_path, run_date="d", shard_size=0)


def test_fast_ntriples_path_matches_term_serializer():
    from citeindex.exporters import citation_ntriples
    from citeindex.rdf import line
    for c in random_citations(random.Random(6), 500):
        assert citation_ntriples(c) == "".join(line(*t) for t in citation_triples(c))


def test_fast_scholix_path_matches_link_builder():
    from citeindex.exporters import _scholix_end, scholix_json, scholix_link
    store, a, b = _store()
    orphan = Omid("br", "060", 77)
    end = lambda omid: json.dumps(_scholix_end(store, omid), ensure_ascii=False, sort_keys=True)
    for c, when in [(Citation(make_oci(a, b), a, b, sources={SourceTag.JALC, SourceTag.CROSSREF}), "2024-01-02"),
                    (Citation(make_oci(orphan, a), orphan, a), None)]:
        want = json.dumps(scholix_link(c, store, when), ensure_ascii=False, sort_keys=True)
        assert scholix_json(c, end, when) == want
