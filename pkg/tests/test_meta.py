import random
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from citeindex.adapters.base import AuthorKey, MetadataRow
from citeindex.dates import PartialDate
from citeindex.identifiers import ExternalId
from citeindex.meta import MetaStore, Omid, StoreCorrupt, UnknownOmid, read_mapping_csv


def eid(text):
    return ExternalId.parse(text)


def row(*ids, date=None, venue=(), authors=()):
    return MetadataRow(tuple(eid(i) for i in ids), pub_date=PartialDate.parse(date) if date else None,
                       venue=tuple(venue), authors=tuple(authors))


def test_omid_text_form_and_supplier_parsing():
    assert str(Omid("br", "060", 1)) == "omid:br/0601"
    a, b = Omid.parse("omid:br/06101801781"), Omid.parse("omid:br/06180334099")
    assert (a.supplier, a.counter) == ("0610", 1801781)
    assert (b.supplier, b.counter) == ("06180", 334099)
    with pytest.raises(ValueError):
        Omid.parse("omid:br/0600")
    with pytest.raises(ValueError):
        Omid("b", "060", 1)


@settings(max_examples=300)
@given(st.from_regex(r"0[1-9]{1,3}0", fullmatch=True), st.integers(1, 10**12))
def test_omid_digits_round_trip(supplier, counter):
    omid = Omid("br", supplier, counter)
    assert Omid.parse(str(omid)) == omid


def test_first_encounter_mints():
    store = MetaStore()
    omid = store.resolve_or_mint([eid("doi:10.1/a")])
    assert omid == Omid("br", "060", 1) and len(store) == 1


def test_second_encounter_extends_mapping():
    store = MetaStore()
    first = store.resolve_or_mint([eid("doi:10.1/a")])
    second = store.resolve_or_mint([eid("doi:10.1/a"), eid("pmid:7")])
    assert first == second and store.lookup(eid("pmid:7")) == first
    assert store.stats.mints == 1 and store.counters["br"] == 1


def test_conflict_lowest_counter_wins_and_alias_is_recorded():
    store = MetaStore()
    o1 = store.resolve_or_mint([eid("doi:10.1/a")], row("doi:10.1/a", date="2020"))
    o2 = store.resolve_or_mint([eid("pmid:9")], row("pmid:9", date="2020-02-03", venue=["issn:0378-5955"]))
    merged = store.resolve_or_mint([eid("doi:10.1/a"), eid("pmid:9")])
    assert merged == o1 and store.aliases == {o2: o1}
    assert store.stats.merges == 1 and len(store.stats.conflicts) == 1
    assert store.lookup(eid("pmid:9")) == o1
    resource = store.get_resource(o1)
    assert resource.ids == {eid("doi:10.1/a"), eid("pmid:9")}
    assert resource.pub_date == PartialDate(2020, 2, 3) and resource.venue == ("issn:0378-5955",)
    with pytest.raises(UnknownOmid) as info:
        store.get_resource(o2)
    assert info.value.canonical == o1 and str(o1) in str(info.value)


def test_lookup_unmapped_is_none():
    assert MetaStore().lookup(eid("doi:10.1/zz")) is None


def test_merge_keeps_most_precise_date_and_fills_absent_fields():
    store = MetaStore()
    author = AuthorKey("rossi,a")
    omid = store.resolve_or_mint([eid("doi:10.1/a")], row("doi:10.1/a", date="2020-02-03"))
    store.resolve_or_mint([eid("doi:10.1/a")], row("doi:10.1/a", date="2020", venue=["abbr:j"], authors=[author]))
    store.resolve_or_mint([eid("doi:10.1/a")], row("doi:10.1/a", venue=["issn:0378-5955"]))
    r = store.get_resource(omid)
    assert (r.pub_date, r.venue, r.authors) == (PartialDate(2020, 2, 3), ("abbr:j",), (author,))


def test_ingest_is_idempotent():
    rows = [row("doi:10.1/a", "pmid:1"), row("doi:10.1/b"), row("pmid:1", "pmc:PMC5")]
    store = MetaStore()
    store.ingest(rows)
    size, counter = len(store), store.counters["br"]
    store.ingest(rows)
    assert (len(store), store.counters["br"]) == (size, counter) == (4, 2)


def test_cross_source_convergence():
    store = MetaStore()
    store.ingest([row("doi:10.1/a")])
    store.ingest([row("doi:10.1/a", "pmid:55")])
    assert store.lookup(eid("doi:10.1/a")) == store.lookup(eid("pmid:55"))
    assert len(store.resources) == 1


def test_concurrent_resolution_yields_one_omid():
    store = MetaStore()
    got = []
    barrier = threading.Barrier(12)

    def work(n):
        barrier.wait()
        got.append(store.resolve_or_mint([eid("doi:10.1/shared"), eid(f"pmid:{n + 1}")]))

    threads = [threading.Thread(target=work, args=(n,)) for n in range(12)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(set(got)) == 1 and store.counters["br"] == 1


def _random_store(rng, n):
    store = MetaStore()
    for k in range(n):
        ids = [f"doi:10.{rng.randint(1000, 1010)}/{rng.randint(0, n)}"]
        if rng.random() < 0.4:
            ids.append(f"pmid:{rng.randint(1, n * 2)}")
        date = rng.choice([None, "1999", "2001-05", "2010-10-10"])
        authors = [AuthorKey(f"a{rng.randint(0, 9)},b", eid("orcid:0000-0002-1825-0097") if rng.random() < 0.2 else None)]
        store.resolve_or_mint([eid(i) for i in ids], row(*ids, date=date, venue=["abbr:ü ñ"], authors=authors))
    return store


def test_randomized_round_trip(tmp_path):
    store = _random_store(random.Random(3), 1000)
    assert store.aliases  # the generator produces conflicts
    store.persist(tmp_path / "s.jsonl")
    loaded = MetaStore.load(tmp_path / "s.jsonl")
    assert loaded == store
    loaded.persist(tmp_path / "t.jsonl")
    assert (tmp_path / "s.jsonl").read_bytes() == (tmp_path / "t.jsonl").read_bytes()


def test_empty_round_trip_and_counter_monotonicity(tmp_path):
    store = MetaStore(supplier="0610")
    store.persist(tmp_path / "a")
    assert MetaStore.load(tmp_path / "a") == store
    store.resolve_or_mint([eid("doi:10.1/a")])
    store.persist(tmp_path / "b")
    header = lambda p: (tmp_path / p).read_text().splitlines()[0]
    assert header("a") == '{"counters":{"br":0},"format":"citeindex-store","supplier":"0610","version":1}'
    assert MetaStore.load(tmp_path / "b").counters["br"] - MetaStore.load(tmp_path / "a").counters["br"] == 1


@pytest.mark.parametrize("content,where", [
    ("", ":1:"),
    ('{"format":"citeindex-store","version":1,"supplier":"060","counters":{"br":1}}\n{"omid": oops}\n', ":2:"),
    ('{"format":"other"}\n', ":1:"),
    ('{"counters":{"br":1},"format":"citeindex-store","supplier":"060","version":1}\n'
     '{"authors":[],"ids":["doi:10.1/a"],"omid":"omid:br/0601","pub_date":null,"venue":[]}\n'
     '{"authors":[],"ids":["doi:10.1/a"],"omid":"omid:br/0602","pub_date":null,"venue":[]}\n', ":3:"),
])
def test_corrupt_store_reports_position(tmp_path, content, where):
    path = tmp_path / "bad.jsonl"
    path.write_text(content)
    with pytest.raises(StoreCorrupt, match=where):
        MetaStore.load(path)


def test_mapping_csv_export_and_adoption(tmp_path):
    store = _random_store(random.Random(4), 200)
    store.export_mapping_csv(tmp_path / "m.csv")
    mapping = read_mapping_csv(tmp_path / "m.csv")
    assert len(mapping) == len(store)
    assert len(set(mapping)) == len(mapping)
    fresh = MetaStore()
    fresh.import_mapping_csv(tmp_path / "m.csv")
    assert all(fresh.lookup(eid(k)) == Omid.parse(v) for k, v in mapping.items())
    assert fresh.counters["br"] == max(Omid.parse(v).counter for v in mapping.values())


def test_adopted_foreign_supplier_does_not_move_counter():
    store = MetaStore()
    store.adopt(Omid.parse("omid:br/06101801781"), [eid("doi:10.1/a")])
    assert store.counters["br"] == 0
    assert store.resolve_or_mint([eid("doi:10.1/b")]) == Omid("br", "060", 1)


def test_no_external_id_maps_to_two_resources():
    store = _random_store(random.Random(5), 500)
    seen = {}
    for omid, resource in store.resources.items():
        for id in resource.ids:
            assert id not in seen, f"{id} in {seen.get(id)} and {omid}"
            seen[id] = omid
    assert set(seen) == {eid(k) for k, _ in store.kv.items()}
