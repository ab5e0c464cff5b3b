"""Stage runners shared by the CLI and the tests.

Every stage writes a ``report.json`` into its output directory.  Reports
carry a ``run_id`` and the ids of the upstream reports they consumed
(``parents``), so a dump can be traced back to the preprocess runs behind it.

Index state directory layout::

    citations.csv    every citation, export columns plus a ``sources`` column
    provenance.csv   every snapshot of every citation
    unresolved.csv   pairs from the last run that could not be mapped
    delta.csv        append-only log of source extensions
    coverage.json    coverage report of the current citation set
    report.json      the last index run
"""

from __future__ import annotations

import csv
import json
import logging
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from .adapters import INPUT_PATTERNS, PARSERS
from .adapters.base import (Admit, RunReport, SourceTag, input_files, iter_csv_rows,
                            iter_json_records, read_citation_csv, read_metadata_csv,
                            write_citation_csv, write_metadata_csv)
from .exporters import (DEFAULT_BR_BASE, DEFAULT_SHARD_SIZE, ShardInfo, export_csv,
                        export_ntriples, export_provenance, export_scholix, read_citations_csv,
                        write_citations_csv, write_manifest)
from .identifiers import utcnow
from .index import CitationIndex, CoverageReport, UnresolvedPair, build_citations, coverage_stats, to_omid_pair
from .meta import DEFAULT_SUPPLIER, MetaStore
from .provenance import DEFAULT_AGENT, DEFAULT_BASE, Distribution, ProvenanceLog, emit_dataset_descriptor
from .rdf import write_triples

log = logging.getLogger(__name__)

REPORT = "report.json"
CITATIONS = "citations.csv"
PROVENANCE = "provenance.csv"
UNRESOLVED = "unresolved.csv"
DELTA = "delta.csv"
COVERAGE = "coverage.json"
FORMATS = ("csv", "nt", "scholix")


class PipelineError(RuntimeError):
    """A stage cannot run (missing store, unreadable input and the like)."""


def new_run_id() -> str:
    return uuid.uuid4().hex


def write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_report(directory: str | Path) -> dict[str, Any] | None:
    path = Path(directory) / REPORT
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


def _parents(dirs: Iterable[str | Path]) -> list[str]:
    ids = []
    for d in dirs:
        report = read_report(d)
        if report and report.get("run_id"):
            ids.append(report["run_id"])
    return ids


# --- preprocess ------------------------------------------------------------

def _records(path: Path):
    if path.name.endswith((".csv", ".csv.gz")):
        return iter_csv_rows(path)
    return iter_json_records(path)


def _one_file(source: SourceTag, path: Path, out_dir: Path, n: int,
              admit: Admit | None) -> tuple[RunReport, list[str]]:
    report = RunReport(source)
    rows, pairs = PARSERS[source](_records(path), admit=admit, report=report)
    meta_path = out_dir / f"{source.value}-metadata-{n:05d}.csv"
    pair_path = out_dir / f"{source.value}-citations-{n:05d}.csv"
    write_metadata_csv(meta_path, rows)
    write_citation_csv(pair_path, pairs)
    return report, [meta_path.name, pair_path.name]


def preprocess(source: SourceTag | str, input_dir: str | Path, output_dir: str | Path, *,
               admit: Admit | None = None, jobs: int = 1) -> dict[str, Any]:
    """Run one adapter over every matching file of ``input_dir``.

    Each input file yields one metadata CSV and one citation CSV, numbered in
    sorted file order.  Previous shards of the same source are removed first.
    """
    source = SourceTag(source)
    input_dir, output_dir = Path(input_dir), Path(output_dir)
    if not input_dir.is_dir():
        raise PipelineError(f"input directory not found: {input_dir}")
    output_dir.mkdir(parents=True, exist_ok=True)
    for stale in output_dir.glob(f"{source.value}-*-[0-9][0-9][0-9][0-9][0-9].csv"):
        stale.unlink()
    files = input_files(input_dir, INPUT_PATTERNS[source])
    total = RunReport(source)
    outputs: list[str] = []
    if not files:
        write_metadata_csv(output_dir / f"{source.value}-metadata-00000.csv", [])
        write_citation_csv(output_dir / f"{source.value}-citations-00000.csv", [])
        outputs = [f"{source.value}-metadata-00000.csv", f"{source.value}-citations-00000.csv"]
    else:
        work = [(source, path, output_dir, n, admit) for n, path in enumerate(files)]
        try:
            if jobs > 1:
                with ThreadPoolExecutor(max_workers=jobs) as pool:
                    results = list(pool.map(lambda args: _one_file(*args), work))
            else:
                results = [_one_file(*args) for args in work]
        except OSError as exc:
            raise PipelineError(f"cannot read input: {exc}") from exc
        for report, names in results:
            total.merge(report)
            outputs += names
    summary = {
        "run_id": new_run_id(),
        "stage": "preprocess",
        "parents": [],
        "source": source.value,
        "inputs": [str(p.relative_to(input_dir)) for p in files],
        "outputs": outputs,
        "counters": total.to_json(),
    }
    write_json(output_dir / REPORT, summary)
    return summary


# --- meta ------------------------------------------------------------------

def _shards(directory: Path, kind: str) -> list[Path]:
    return sorted(directory.glob(f"*-{kind}-[0-9][0-9][0-9][0-9][0-9].csv"))


def run_meta(metadata_dirs: Sequence[str | Path], store_path: str | Path, *,
             supplier: str = DEFAULT_SUPPLIER, seed_mapping: str | Path | None = None,
             pairs_dirs: Sequence[str | Path] = (), mapping_csv: str | Path | None = None,
             report_dir: str | Path | None = None) -> dict[str, Any]:
    """Resolve or mint OMIDs for every metadata row, then persist the store.

    ``seed_mapping`` adopts an existing ``id,omid`` export before anything is
    minted.  Endpoints of ``pairs_dirs`` that no metadata row covers get an
    id-only resource so that the index stage can still place them.
    """
    store_path = Path(store_path)
    store = MetaStore.load(store_path) if store_path.exists() else MetaStore(supplier)
    if seed_mapping is not None:
        store.import_mapping_csv(seed_mapping)
    files = 0
    for directory in metadata_dirs:
        for path in _shards(Path(directory), "metadata"):
            files += 1
            store.ingest(read_metadata_csv(path))
    stubs = 0
    for directory in pairs_dirs:
        source = _pairs_source(Path(directory), None)
        for path in _shards(Path(directory), "citations"):
            for pair in read_citation_csv(path, source):
                for id in (pair.citing, pair.cited):
                    if store.lookup(id) is None:
                        store.resolve_or_mint([id])
                        stubs += 1
    store_path.parent.mkdir(parents=True, exist_ok=True)
    store.persist(store_path)
    mapping_csv = Path(mapping_csv) if mapping_csv else store_path.with_suffix(".mapping.csv")
    mapped = store.export_mapping_csv(mapping_csv)
    summary = {
        "run_id": new_run_id(),
        "stage": "meta",
        "parents": _parents([*metadata_dirs, *pairs_dirs]),
        "store": str(store_path),
        "mapping": str(mapping_csv),
        "counters": {
            "files": files,
            "rows": store.stats.rows,
            "mints": store.stats.mints,
            "hits": store.stats.hits,
            "merges": store.stats.merges,
            "stubs": stubs,
            "resources": len(store.resources),
            "mapped_ids": mapped,
        },
        "conflicts": store.stats.conflicts,
    }
    write_json(Path(report_dir) / REPORT if report_dir else store_path.with_suffix(".report.json"),
               summary)
    return summary


# --- index -----------------------------------------------------------------

def _pairs_source(directory: Path, override: SourceTag | str | None) -> SourceTag:
    if override is not None:
        return SourceTag(override)
    report = read_report(directory)
    if report and report.get("source"):
        return SourceTag(report["source"])
    raise PipelineError(f"cannot tell which source produced {directory}; pass it explicitly")


@dataclass
class IndexState:
    """Citations and provenance as kept between index runs."""

    index: CitationIndex
    log: ProvenanceLog

    @classmethod
    def load(cls, directory: Path, log: ProvenanceLog) -> "IndexState":
        citations = directory / CITATIONS
        index = CitationIndex(read_citations_csv(citations) if citations.exists() else ())
        if (directory / PROVENANCE).exists():
            log.load_csv(directory / PROVENANCE)
        return cls(index, log)

    def save(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / CITATIONS, "w", encoding="utf-8", newline="") as fh:
            write_citations_csv(fh, self.index.sorted(), with_sources=True)
        self.log.write_csv(directory / PROVENANCE)


def run_index(pairs: Sequence[tuple[str | Path, SourceTag | str | None]], store_path: str | Path,
              out_dir: str | Path, *, agent: str = DEFAULT_AGENT, base: str = DEFAULT_BASE,
              now: Callable[[], datetime] = utcnow) -> dict[str, Any]:
    """Turn preprocessed pair CSVs into citations with provenance.

    ``pairs`` lists (directory, source) tuples; a None source is read from
    the directory's preprocess report.
    """
    store_path, out_dir = Path(store_path), Path(out_dir)
    if not store_path.exists():
        raise PipelineError(f"meta store not found: {store_path}")
    store = MetaStore.load(store_path)
    state = IndexState.load(out_dir, ProvenanceLog(agent=agent, base=base, now=now))
    unresolved: list[UnresolvedPair] = []
    resolved = []
    seen = 0
    for directory, override in pairs:
        directory = Path(directory)
        source = _pairs_source(directory, override)
        for path in _shards(directory, "citations"):
            for pair in read_citation_csv(path, source):
                seen += 1
                omids = to_omid_pair(pair, store, unresolved)
                if omids is not None:
                    resolved.append((*omids, source))
    result = build_citations(resolved, store, state.index)
    # creations first: an extension in this batch always follows its creation
    for citation in result.new:
        state.log.record_new(citation.oci, result.origins[citation.oci])
    for ext in result.extensions:
        state.log.record_extension(ext.oci, ext.source)

    if result.new or result.extensions or not (out_dir / CITATIONS).exists():
        state.save(out_dir)
    with open(out_dir / UNRESOLVED, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["citing", "cited", "source", "reason"])
        for u in unresolved:
            writer.writerow([str(u.pair.citing), str(u.pair.cited), u.pair.source.value, u.reason])
    delta = out_dir / DELTA
    fresh = not delta.exists()
    with open(delta, "a", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if fresh:
            writer.writerow(["oci", "added_source", "timestamp"])
        for ext in result.extensions:
            writer.writerow([ext.oci.digits, ext.source.value,
                             state.log.current(ext.oci).generated_at.isoformat()])
    coverage = coverage_stats(state.index)
    write_json(out_dir / COVERAGE, coverage.to_json())
    reasons: dict[str, int] = {}
    for u in unresolved:
        reasons[u.reason] = reasons.get(u.reason, 0) + 1
    summary = {
        "run_id": new_run_id(),
        "stage": "index",
        "parents": _parents([d for d, _ in pairs]),
        "store": str(store_path),
        "counters": {
            "pairs": seen,
            "resolved": len(resolved),
            "unresolved": len(unresolved),
            "unresolved_reasons": dict(sorted(reasons.items())),
            "new_citations": len(result.new),
            "source_extensions": len(result.extensions),
            "citations": len(state.index),
        },
    }
    write_json(out_dir / REPORT, summary)
    return summary


# --- export ----------------------------------------------------------------

@dataclass
class ExportOptions:
    dataset: str = "index"
    run_date: str = field(default_factory=lambda: date.today().isoformat())
    shard_size: int = DEFAULT_SHARD_SIZE
    compress: bool = True
    with_sources: bool = False
    provenance: bool = True
    base: str = DEFAULT_BASE
    br_base: str = DEFAULT_BR_BASE
    download_base: str | None = None
    title: str = "Citation index"


def _clear(out_dir: Path, dataset: str, fmt: str, run_date: str) -> None:
    for stale in out_dir.glob(f"{dataset}-{fmt}-{run_date}-*"):
        stale.unlink()


def run_export(index_dir: str | Path, out_dir: str | Path, formats: Iterable[str] = FORMATS, *,
               store_path: str | Path | None = None,
               options: ExportOptions | None = None) -> dict[str, Any]:
    """Write the requested dumps, provenance dumps, descriptor and manifest.

    The dataset's first publication date is remembered in ``dataset.json``
    inside ``out_dir`` so later runs only move the modification date.
    """
    opts = options or ExportOptions()
    index_dir, out_dir = Path(index_dir), Path(out_dir)
    formats = list(dict.fromkeys(formats))
    for fmt in formats:
        if fmt not in FORMATS:
            raise PipelineError(f"unknown export format: {fmt}")
    citations_path = index_dir / CITATIONS
    citations = read_citations_csv(citations_path) if citations_path.exists() else []
    log = ProvenanceLog(base=opts.base)
    if (index_dir / PROVENANCE).exists():
        log.load_csv(index_dir / PROVENANCE)
    store = None
    if "scholix" in formats:
        if store_path is None or not Path(store_path).exists():
            raise PipelineError("scholix export needs the meta store (--store)")
        store = MetaStore.load(store_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    common = dict(dataset=opts.dataset, run_date=opts.run_date, shard_size=opts.shard_size,
                  compress=opts.compress)
    shards: list[ShardInfo] = []
    for fmt in formats:
        _clear(out_dir, opts.dataset, fmt, opts.run_date)
        if fmt == "csv":
            shards += export_csv(citations, out_dir, with_sources=opts.with_sources, **common)
        elif fmt == "nt":
            shards += export_ntriples(citations, out_dir, base=opts.base, br_base=opts.br_base, **common)
        else:
            link_dates = {oci: chain[0].generated_at.date().isoformat()
                          for oci, chain in log.chains.items() if chain}
            shards += export_scholix(citations, store, out_dir, link_dates=link_dates, **common)
    if opts.provenance:
        for fmt in ("csv", "nt"):
            _clear(out_dir, f"{opts.dataset}_prov", fmt, opts.run_date)
        shards += export_provenance(log.snapshots(), out_dir, base=opts.base, **common)

    state_path = out_dir / "dataset.json"
    state = json.loads(state_path.read_text(encoding="utf-8")) if state_path.exists() else {}
    modified = date.fromisoformat(opts.run_date)
    published = date.fromisoformat(state.get("published", opts.run_date))
    if modified < published:
        published = modified
    write_json(state_path, {"published": published.isoformat()})

    media = {"csv": "csv", "nt": "ntriples", "scholix": "scholix"}
    download = opts.download_base or out_dir.resolve().as_uri() + "/"
    dists = [Distribution(media[s.format], download + s.path.name, s.byte_size, opts.compress)
             for s in shards]
    descriptor = emit_dataset_descriptor(coverage_stats(citations), dists, modified=modified,
                                         published=published, base=opts.base, title=opts.title)
    descriptor_path = out_dir / f"{opts.dataset}-descriptor-{opts.run_date}.nt"
    with open(descriptor_path, "w", encoding="utf-8", newline="") as fh:
        write_triples(fh, descriptor.triples())

    summary = write_manifest(
        out_dir / "manifest.json", shards,
        run_id=new_run_id(), stage="export", parents=_parents([index_dir]),
        dataset=opts.dataset, run_date=opts.run_date, citations=len(citations),
        descriptor=descriptor_path.name,
    )
    write_json(out_dir / REPORT, {k: v for k, v in summary.items() if k != "files"}
               | {"shards": len(shards)})
    return summary


def read_coverage(index_dir: str | Path) -> CoverageReport:
    index_dir = Path(index_dir)
    path = index_dir / COVERAGE
    if path.exists():
        return CoverageReport.from_json(json.loads(path.read_text(encoding="utf-8")))
    citations = index_dir / CITATIONS
    if not citations.exists():
        raise PipelineError(f"no index found in {index_dir}")
    return coverage_stats(read_citations_csv(citations))
