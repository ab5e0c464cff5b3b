"""Rows, run reports and file I/O shared by the source adapters.

Canonical CSV layouts (UTF-8, RFC-4180 quoting, LF line endings):

metadata
    ``ids,title,pub_date,venue,authors,type,alt_title`` where ``ids`` is a
    space-separated list of ``scheme:value``; ``venue`` and ``authors`` are
    ``"; "``-separated lists.  A venue entry is an external id or an
    ``abbr:<abbreviated title>`` key.  An author entry is
    ``family,initials [orcid:XXXX-XXXX-XXXX-XXXX]`` with either part optional.

citations
    ``citing,cited`` (both ``scheme:value``).
"""

from __future__ import annotations

import csv
import enum
import gzip
import io
import json
import logging
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator

from ..dates import PartialDate
from ..identifiers import ExternalId, IdentifierScheme, MalformedIdentifier, normalize, validate_syntax

log = logging.getLogger(__name__)

METADATA_COLUMNS = ["ids", "title", "pub_date", "venue", "authors", "type", "alt_title"]
CITATION_COLUMNS = ["citing", "cited"]

Admit = Callable[[ExternalId], bool]


class SourceTag(str, enum.Enum):
    CROSSREF = "crossref"
    NIH_OCC = "nih_occ"
    DATACITE = "datacite"
    OPENAIRE = "openaire"
    JALC = "jalc"

    def __str__(self) -> str:
        return self.value


LEGAL_SCHEMES = {
    SourceTag.CROSSREF: {IdentifierScheme.DOI},
    SourceTag.DATACITE: {IdentifierScheme.DOI},
    SourceTag.JALC: {IdentifierScheme.DOI},
    SourceTag.NIH_OCC: {IdentifierScheme.PMID},
    SourceTag.OPENAIRE: {IdentifierScheme.DOI, IdentifierScheme.PMC,
                         IdentifierScheme.PMID, IdentifierScheme.ARXIV},
}


class MalformedRecord(ValueError):
    pass


def name_key(family: str | None, given: str | None = None) -> str | None:
    """Approximate author key: lowercase, diacritic-folded ``family,initials``."""

    def fold(text: str) -> str:
        text = unicodedata.normalize("NFKD", text)
        text = "".join(c for c in text if not unicodedata.combining(c))
        return re.sub(r"\s+", " ", re.sub(r"[^\w\s-]", "", text.lower())).strip()

    family = fold(family or "")
    if not family:
        return None
    initials = "".join(part[0] for part in re.split(r"[\s-]+", fold(given or "")) if part)
    return f"{family},{initials}"


def split_full_name(name: str) -> tuple[str, str]:
    """Split "Family, Given" or "Given Family" into (family, given)."""
    if "," in name:
        family, _, given = name.partition(",")
        return family.strip(), given.strip()
    parts = name.split()
    if not parts:
        return "", ""
    return parts[-1], " ".join(parts[:-1])


@dataclass(frozen=True, order=True)
class AuthorKey:
    name: str | None = None
    orcid: ExternalId | None = None

    def __str__(self) -> str:
        if self.orcid is None:
            return self.name or ""
        if self.name is None:
            return f"[{self.orcid}]"
        return f"{self.name} [{self.orcid}]"

    @classmethod
    def parse(cls, text: str) -> "AuthorKey":
        m = re.fullmatch(r"(.*?)\s*(?:\[(orcid:[^\]]+)\])?", text.strip())
        name, orcid = m.group(1) or None, m.group(2)
        return cls(name, ExternalId.parse(orcid) if orcid else None)


@dataclass(frozen=True)
class MetadataRow:
    ids: tuple[ExternalId, ...]
    title: str | None = None
    pub_date: PartialDate | None = None
    venue: tuple[str, ...] = ()
    authors: tuple[AuthorKey, ...] = ()
    type: str | None = None
    alt_title: str | None = None

    def to_csv(self) -> dict[str, str]:
        return {
            "ids": " ".join(str(i) for i in self.ids),
            "title": self.title or "",
            "pub_date": str(self.pub_date) if self.pub_date else "",
            "venue": "; ".join(self.venue),
            "authors": "; ".join(str(a) for a in self.authors),
            "type": self.type or "",
            "alt_title": self.alt_title or "",
        }

    @classmethod
    def from_csv(cls, row: dict[str, str]) -> "MetadataRow":
        def listed(text: str | None) -> list[str]:
            return [x for x in (text or "").split("; ") if x]

        return cls(
            ids=tuple(ExternalId.parse(x) for x in row["ids"].split()),
            title=row.get("title") or None,
            pub_date=PartialDate.parse(row["pub_date"]) if row.get("pub_date") else None,
            venue=tuple(listed(row.get("venue"))),
            authors=tuple(AuthorKey.parse(x) for x in listed(row.get("authors"))),
            type=row.get("type") or None,
            alt_title=row.get("alt_title") or None,
        )


@dataclass(frozen=True)
class RawCitationPair:
    citing: ExternalId
    cited: ExternalId
    source: SourceTag

    def is_legal(self) -> bool:
        legal = LEGAL_SCHEMES[self.source]
        return (self.citing.scheme in legal and self.cited.scheme in legal
                and self.citing != self.cited)


@dataclass
class RunReport:
    """Per-source counters.  ``pairs_emitted + sum(pair_skips) == pairs_seen``."""

    source: SourceTag
    records: int = 0
    records_skipped: Counter = field(default_factory=Counter)
    metadata_rows: int = 0
    pairs_seen: int = 0
    pairs_emitted: int = 0
    pair_skips: Counter = field(default_factory=Counter)

    def skip_record(self, reason: str, where: Any = None) -> None:
        self.records_skipped[reason] += 1
        log.warning("%s: skipped record at %s: %s", self.source, where, reason)

    def skip_pair(self, reason: str) -> None:
        self.pair_skips[reason] += 1

    def merge(self, other: "RunReport") -> "RunReport":
        self.records += other.records
        self.records_skipped.update(other.records_skipped)
        self.metadata_rows += other.metadata_rows
        self.pairs_seen += other.pairs_seen
        self.pairs_emitted += other.pairs_emitted
        self.pair_skips.update(other.pair_skips)
        return self

    def to_json(self) -> dict[str, Any]:
        return {
            "source": self.source.value,
            "records": self.records,
            "records_skipped": dict(sorted(self.records_skipped.items())),
            "metadata_rows": self.metadata_rows,
            "pairs_seen": self.pairs_seen,
            "pairs_emitted": self.pairs_emitted,
            "pair_skips": dict(sorted(self.pair_skips.items())),
        }


class Collector:
    """Accumulates one adapter run: rows, pairs and the report."""

    def __init__(self, source: SourceTag, admit: Admit | None = None,
                 report: RunReport | None = None):
        self.source = source
        self.admit = admit or validate_syntax
        self.report = report or RunReport(source)
        self.rows: list[MetadataRow] = []
        self.pairs: list[RawCitationPair] = []

    def ident(self, scheme: IdentifierScheme | str, raw: Any) -> ExternalId | None:
        """Normalize and admit one identifier; None when it is unusable."""
        if raw is None or not str(raw).strip():
            return None
        try:
            id = normalize(scheme, str(raw))
        except MalformedIdentifier:
            return None
        return id if self.admit(id) else None

    def add_row(self, ids: Iterable[ExternalId | None], **fields) -> None:
        unique = tuple(dict.fromkeys(i for i in ids if i is not None))
        if not unique:
            return
        fields["venue"] = tuple(dict.fromkeys(fields.get("venue") or ()))
        fields["authors"] = tuple(fields.get("authors") or ())
        self.rows.append(MetadataRow(unique, **fields))
        self.report.metadata_rows += 1

    def add_pair(self, citing: ExternalId | None, cited: ExternalId | None,
                 missing: str = "missing-id") -> bool:
        self.report.pairs_seen += 1
        if citing is None or cited is None:
            self.report.skip_pair(missing)
            return False
        pair = RawCitationPair(citing, cited, self.source)
        if citing == cited:
            self.report.skip_pair("self-loop")
            return False
        if not pair.is_legal():
            self.report.skip_pair("illegal-scheme")
            return False
        self.pairs.append(pair)
        self.report.pairs_emitted += 1
        return True

    @property
    def result(self) -> tuple[list[MetadataRow], list[RawCitationPair]]:
        return self.rows, self.pairs


def located(records: Iterable[Any]) -> Iterator[tuple[Any, Any]]:
    """Accept plain records or ``(offset, record)`` pairs from the file readers."""
    for n, item in enumerate(records):
        if isinstance(item, tuple) and len(item) == 2:
            yield item
        else:
            yield n, item


class BadLine:
    """Placeholder yielded by readers for undecodable input."""

    def __init__(self, error: str):
        self.error = error


def open_text(path: Path) -> io.TextIOBase:
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="")
    return open(path, encoding="utf-8", newline="")


def iter_json_records(path: str | Path) -> Iterator[tuple[int, Any]]:
    """Yield ``(byte_offset, record)`` from a JSON dump file.

    ``*.jsonl``/``*.ndjson`` (optionally gzipped) are read line by line.
    ``*.json`` files hold a list, an object with an ``items`` list (the
    Crossref dump layout) or a single record; offsets are then item
    positions.  A ``*.json`` file that is not one JSON document is read as
    lines.  Undecodable input yields :class:`BadLine`.
    """
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    kind = Path(path.stem).suffix if path.suffix == ".gz" else path.suffix
    if kind == ".json":
        with opener(path, "rb") as fh:
            blob = fh.read()
        try:
            data = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            data = None
        if data is not None:
            if isinstance(data, dict):
                data = data.get("message", data)
                items = data["items"] if isinstance(data.get("items"), list) else [data]
            else:
                items = data
            yield from enumerate(items)
            return
    with opener(path, "rb") as fh:
        offset = 0
        for raw in fh:
            if raw.strip():
                try:
                    yield offset, json.loads(raw.decode("utf-8"))
                except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                    yield offset, BadLine(str(exc))
            offset += len(raw)


def dict_rows(fh) -> Iterator[tuple[int, dict[str, str]]]:
    """Like ``csv.DictReader`` with line numbers, minus its per-row overhead."""
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None:
        return
    width = len(header)
    for row in reader:
        if not row:
            continue
        if len(row) < width:
            row += [""] * (width - len(row))
        yield reader.line_num, dict(zip(header, row))


def iter_csv_rows(path: str | Path) -> Iterator[tuple[int, dict[str, str]]]:
    with open_text(Path(path)) as fh:
        yield from dict_rows(fh)


def input_files(directory: str | Path, patterns: Iterable[str]) -> list[Path]:
    directory = Path(directory)
    found: set[Path] = set()
    for pattern in patterns:
        found.update(p for p in directory.rglob(pattern) if p.is_file())
    return sorted(found)


def write_metadata_csv(path: str | Path, rows: Iterable[MetadataRow]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, METADATA_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row.to_csv())
            n += 1
    return n


def write_citation_csv(path: str | Path, pairs: Iterable[RawCitationPair]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CITATION_COLUMNS)
        for pair in pairs:
            writer.writerow([str(pair.citing), str(pair.cited)])
            n += 1
    return n


def read_metadata_csv(path: str | Path) -> Iterator[MetadataRow]:
    for lineno, row in iter_csv_rows(path):
        try:
            yield MetadataRow.from_csv(row)
        except (ValueError, KeyError) as exc:
            log.warning("%s:%d: bad metadata row: %s", path, lineno, exc)


def read_citation_csv(path: str | Path, source: SourceTag) -> Iterator[RawCitationPair]:
    for lineno, row in iter_csv_rows(path):
        try:
            yield RawCitationPair(ExternalId.parse(row["citing"]), ExternalId.parse(row["cited"]), source)
        except (ValueError, KeyError) as exc:
            log.warning("%s:%d: bad citation row: %s", path, lineno, exc)
