"""Citation dumps: CSV, N-Triples and Scholix, sharded with a checksum manifest.

Shard files are named ``{dataset}-{format}-{run_date}-{shard:05}.{ext}[.gz]``.
Gzip members carry no file name and a zero mtime, so equal input gives
byte-equal output.
"""

from __future__ import annotations

import csv
import gzip
import hashlib
import io
import json
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence

from .adapters.base import SourceTag, dict_rows
from .dates import DAY, MONTH, PartialDate, Timespan
from .index import Citation, Oci
from .meta import MetaStore, Omid, UnknownOmid
from .provenance import CC0, DEFAULT_BASE, PROVENANCE_COLUMNS, ProvenanceSnapshot
from .rdf import CITO, IRI, RDF_TYPE, XSD, Literal, Triple

CSV_COLUMNS = ["oci", "citing", "cited", "creation", "timespan", "author_sc", "journal_sc"]
DEFAULT_SHARD_SIZE = 10_000_000
DEFAULT_BR_BASE = "https://w3id.org/oc/meta/br/"
ENGINE_NAME = "citeindex"
GZIP_LEVEL = 1
EXTENSIONS = {"csv": "csv", "nt": "nt", "scholix": "json"}
ID_URLS = {
    "doi": "https://doi.org/{}",
    "pmid": "https://pubmed.ncbi.nlm.nih.gov/{}",
    "pmc": "https://www.ncbi.nlm.nih.gov/pmc/articles/{}",
    "arxiv": "https://arxiv.org/abs/{}",
}


@dataclass
class ShardInfo:
    path: Path
    format: str
    records: int
    byte_size: int
    sha256: str

    def to_json(self) -> dict[str, Any]:
        return {"file": self.path.name, "format": self.format, "records": self.records,
                "bytes": self.byte_size, "sha256": self.sha256}


def shard_name(dataset: str, fmt: str, run_date: str, shard: int, compress: bool) -> str:
    return f"{dataset}-{fmt}-{run_date}-{shard:05d}.{EXTENSIONS.get(fmt, fmt)}" + (".gz" if compress else "")


@contextmanager
def _open_out(path: Path, compress: bool):
    if compress:
        raw = open(path, "wb")
        gz = gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0, compresslevel=GZIP_LEVEL)
        text = io.TextIOWrapper(io.BufferedWriter(gz, 1 << 20), encoding="utf-8", newline="")
        try:
            yield text
        finally:
            text.close()
            raw.close()
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _finish(path: Path, fmt: str, records: int) -> ShardInfo:
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    return ShardInfo(path, fmt, records, path.stat().st_size, digest)


def _chunks(items: Sequence[Any], size: int) -> Iterator[Sequence[Any]]:
    if size < 1:
        raise ValueError("shard size must be positive")
    if not items:
        yield items
        return
    for start in range(0, len(items), size):
        yield items[start:start + size]


def _write_sharded(items: Sequence[Any], out_dir: Path, dataset: str, fmt: str, run_date: str,
                   shard_size: int, compress: bool,
                   write: Callable[[Any, Sequence[Any]], int]) -> list[ShardInfo]:
    out_dir.mkdir(parents=True, exist_ok=True)
    shards = []
    for n, chunk in enumerate(_chunks(items, shard_size)):
        path = out_dir / shard_name(dataset, fmt, run_date, n, compress)
        with _open_out(path, compress) as fh:
            count = write(fh, chunk)
        shards.append(_finish(path, fmt, count))
    return shards


# --- CSV -------------------------------------------------------------------

def citation_row(c: Citation, with_sources: bool = False) -> list[str]:
    row = [
        c.oci.digits,
        str(c.citing),
        str(c.cited),
        str(c.creation_date) if c.creation_date else "",
        str(c.timespan) if c.timespan else "",
        "yes" if c.author_self else "no",
        "yes" if c.journal_self else "no",
    ]
    if with_sources:
        row.append(" ".join(sorted(s.value for s in c.sources)))
    return row


def write_citations_csv(fh, citations: Iterable[Citation], with_sources: bool = False) -> int:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS + (["sources"] if with_sources else []))
    n = 0
    for c in citations:
        writer.writerow(citation_row(c, with_sources))
        n += 1
    return n


def export_csv(citations: Iterable[Citation], out_dir: str | Path, *, dataset: str = "index",
               run_date: str, shard_size: int = DEFAULT_SHARD_SIZE, compress: bool = True,
               with_sources: bool = False) -> list[ShardInfo]:
    ordered = sorted(citations, key=lambda c: c.oci)
    return _write_sharded(ordered, Path(out_dir), dataset, "csv", run_date, shard_size, compress,
                          lambda fh, chunk: write_citations_csv(fh, chunk, with_sources))


def parse_citation_row(row: Mapping[str, str]) -> Citation:
    oci = Oci.parse(row["oci"])
    sources = row.get("sources")
    return Citation(
        oci=oci,
        citing=Omid.parse(row["citing"]),
        cited=Omid.parse(row["cited"]),
        creation_date=PartialDate.parse(row["creation"]) if row.get("creation") else None,
        timespan=Timespan.parse(row["timespan"]) if row.get("timespan") else None,
        author_self=row["author_sc"] == "yes",
        journal_self=row["journal_sc"] == "yes",
        sources={SourceTag(s) for s in sources.split()} if sources else set(),
    )


def read_citations_csv(paths: str | Path | Iterable[str | Path]) -> list[Citation]:
    """Inverse of :func:`export_csv`: reads plain or gzipped shards."""
    if isinstance(paths, (str, Path)):
        paths = [paths]
    out = []
    for path in paths:
        path = Path(path)
        opener = gzip.open if path.suffix == ".gz" else open
        with opener(path, "rt", encoding="utf-8", newline="") as fh:
            out.extend(parse_citation_row(row) for _, row in dict_rows(fh))
    return out


# --- N-Triples -------------------------------------------------------------

_TYPE = IRI(RDF_TYPE)
_CITATION, _AUTHOR_SC, _JOURNAL_SC = (IRI(CITO + n) for n in
                                      ("Citation", "AuthorSelfCitation", "JournalSelfCitation"))
_CITING, _CITED, _CREATION, _TIMESPAN = (IRI(CITO + n) for n in (
    "hasCitingEntity", "hasCitedEntity", "hasCitationCreationDate", "hasCitationTimeSpan"))
_DATE_TYPES = {DAY: "date", MONTH: "gYearMonth"}


def date_literal(d: PartialDate) -> Literal:
    kind = _DATE_TYPES.get(d.precision, "gYear")
    return Literal(str(d), XSD + kind)


def citation_triples(c: Citation, base: str = DEFAULT_BASE,
                     br_base: str = DEFAULT_BR_BASE) -> list[Triple]:
    ci = IRI(f"{base}ci/{c.oci.digits}")
    out: list[Triple] = [(ci, _TYPE, _CITATION)]
    if c.author_self:
        out.append((ci, _TYPE, _AUTHOR_SC))
    if c.journal_self:
        out.append((ci, _TYPE, _JOURNAL_SC))
    out.append((ci, _CITING, IRI(br_base + c.citing.digits)))
    out.append((ci, _CITED, IRI(br_base + c.cited.digits)))
    if c.creation_date is not None:
        out.append((ci, _CREATION, date_literal(c.creation_date)))
    if c.timespan is not None:
        out.append((ci, _TIMESPAN, Literal(str(c.timespan), XSD + "duration")))
    return out


def citation_ntriples(c: Citation, base: str = DEFAULT_BASE, br_base: str = DEFAULT_BR_BASE) -> str:
    """The lines of :func:`citation_triples`, built without intermediate terms.

    Safe because OMID digits, dates and durations never need escaping;
    ``base`` and ``br_base`` are checked by the caller.
    """
    ci = f"<{base}ci/{c.oci.digits}>"
    out = [f"{ci} <{_TYPE}> <{_CITATION}> .\n"]
    if c.author_self:
        out.append(f"{ci} <{_TYPE}> <{_AUTHOR_SC}> .\n")
    if c.journal_self:
        out.append(f"{ci} <{_TYPE}> <{_JOURNAL_SC}> .\n")
    out.append(f"{ci} <{_CITING}> <{br_base}{c.citing.digits}> .\n")
    out.append(f"{ci} <{_CITED}> <{br_base}{c.cited.digits}> .\n")
    if c.creation_date is not None:
        kind = _DATE_TYPES.get(c.creation_date.precision, "gYear")
        out.append(f'{ci} <{_CREATION}> "{c.creation_date}"^^<{XSD}{kind}> .\n')
    if c.timespan is not None:
        out.append(f'{ci} <{_TIMESPAN}> "{c.timespan}"^^<{XSD}duration> .\n')
    return "".join(out)


def _write_lines(fh, text_of: Callable[[Any], str], chunk: Sequence[Any]) -> int:
    n = 0
    for item in chunk:
        text = text_of(item)
        fh.write(text)
        n += text.count("\n")
    return n


def export_ntriples(citations: Iterable[Citation], out_dir: str | Path, *, dataset: str = "index",
                    run_date: str, shard_size: int = DEFAULT_SHARD_SIZE, compress: bool = True,
                    base: str = DEFAULT_BASE, br_base: str = DEFAULT_BR_BASE) -> list[ShardInfo]:
    """Shard size counts citations; each shard holds whole citations."""
    IRI(base), IRI(br_base)  # reject unusable bases before writing anything
    ordered = sorted(citations, key=lambda c: c.oci)
    return _write_sharded(ordered, Path(out_dir), dataset, "nt", run_date, shard_size, compress,
                          lambda fh, chunk: _write_lines(fh, lambda c: citation_ntriples(c, base, br_base), chunk))


def export_provenance(snapshots: Iterable[ProvenanceSnapshot], out_dir: str | Path, *,
                      dataset: str = "index", run_date: str,
                      shard_size: int = DEFAULT_SHARD_SIZE, compress: bool = True,
                      base: str = DEFAULT_BASE) -> list[ShardInfo]:
    """Provenance dumps in CSV and N-Triples under ``{dataset}_prov``."""
    IRI(base)
    snaps = sorted(snapshots, key=lambda s: (s.entity_oci, s.snapshot_number))

    def write_csv(fh, chunk):
        writer = csv.writer(fh, lineterminator="\n", quoting=csv.QUOTE_ALL)
        writer.writerow(PROVENANCE_COLUMNS)
        for s in chunk:
            writer.writerow(s.to_csv().values())
        return len(chunk)

    prov = f"{dataset}_prov"
    return (
        _write_sharded(snaps, Path(out_dir), prov, "csv", run_date, shard_size, compress, write_csv)
        + _write_sharded(snaps, Path(out_dir), prov, "nt", run_date, shard_size, compress,
                         lambda fh, chunk: _write_lines(fh, lambda s: s.ntriples(base), chunk))
    )


# --- Scholix ---------------------------------------------------------------

def _scholix_end(store: MetaStore | None, omid: Omid) -> dict[str, Any]:
    ids: list[dict[str, str]] = []
    date = None
    if store is not None:
        try:
            resource = store.get_resource(omid)
        except UnknownOmid:
            resource = None
        if resource is not None:
            date = resource.pub_date
            for id in sorted(resource.ids):
                entry = {"ID": id.value, "IDScheme": id.scheme.value}
                template = ID_URLS.get(id.scheme.value)
                entry["IDURL"] = template.format(id.value) if template else (
                    id.value if id.scheme.value == "url" else "")
                ids.append(entry)
    if not ids:
        ids = [{"ID": omid.digits, "IDScheme": "omid",
                "IDURL": f"https://w3id.org/oc/meta/{omid.entity_type}/{omid.digits}"}]
    end: dict[str, Any] = {"Identifier": ids, "Type": {"Name": "literature"}}
    if date is not None:
        end["PublicationDate"] = str(date)
    return end


def scholix_link(c: Citation, store: MetaStore | None, link_date: str | None = None) -> dict[str, Any]:
    link: dict[str, Any] = {
        "LinkProvider": [{"Name": ENGINE_NAME}] + [{"Name": s.value} for s in sorted(c.sources)],
        "RelationshipType": {"Name": "References", "SubType": "Cites",
                             "SubTypeSchema": "http://purl.org/spar/cito/"},
        "LicenseURL": CC0,
        "Source": _scholix_end(store, c.citing),
        "Target": _scholix_end(store, c.cited),
    }
    if link_date:
        link["LinkPublicationDate"] = link_date
    return link


def export_scholix(citations: Iterable[Citation], store: MetaStore | None, out_dir: str | Path, *,
                   dataset: str = "index", run_date: str, shard_size: int = DEFAULT_SHARD_SIZE,
                   compress: bool = True,
                   link_dates: Mapping[Oci, str] | None = None) -> list[ShardInfo]:
    """One Scholix link per citation; each shard is a JSON array.

    ``link_dates`` optionally gives the date each link entered the index.
    """
    ordered = sorted(citations, key=lambda c: c.oci)
    link_dates = link_dates or {}
    ends: dict[Omid, str] = {}

    def end(omid: Omid) -> str:
        if omid not in ends:
            ends[omid] = _dumps(_scholix_end(store, omid))
        return ends[omid]

    def write(fh, chunk):
        fh.write("[")
        for n, c in enumerate(chunk):
            if n:
                fh.write(",\n")
            fh.write(scholix_json(c, end, link_dates.get(c.oci)))
        fh.write("]\n")
        return len(chunk)

    return _write_sharded(ordered, Path(out_dir), dataset, "scholix", run_date, shard_size, compress, write)


def _dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


_RELATIONSHIP = _dumps({"Name": "References", "SubType": "Cites",
                        "SubTypeSchema": "http://purl.org/spar/cito/"})


def scholix_json(c: Citation, end: Callable[[Omid], str], link_date: str | None = None) -> str:
    """``_dumps(scholix_link(...))`` assembled from pre-serialized endpoint blocks."""
    providers = _dumps([{"Name": ENGINE_NAME}] + [{"Name": s.value} for s in sorted(c.sources)])
    date = f'"LinkPublicationDate": {_dumps(link_date)}, ' if link_date else ""
    return (f'{{"LicenseURL": "{CC0}", "LinkProvider": {providers}, {date}'
            f'"RelationshipType": {_RELATIONSHIP}, "Source": {end(c.citing)}, "Target": {end(c.cited)}}}')


def write_manifest(path: str | Path, shards: Iterable[ShardInfo], **extra: Any) -> dict[str, Any]:
    manifest = {**extra, "files": [s.to_json() for s in shards]}
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest
