"""Crossref work records (REST API / dump JSON) to canonical rows."""

from __future__ import annotations

from typing import Any, Iterable

from ..dates import PartialDate
from ..identifiers import IdentifierScheme
from .base import (Admit, AuthorKey, BadLine, Collector, MetadataRow, RawCitationPair,
                   RunReport, SourceTag, located, name_key)

_DATE_FIELDS = ("issued", "published", "published-print", "published-online", "created")


def crossref_date(record: dict[str, Any]) -> PartialDate | None:
    for key in _DATE_FIELDS:
        parts = (record.get(key) or {}).get("date-parts") or []
        if parts and parts[0] and parts[0][0] is not None:
            date = PartialDate.from_parts(parts[0])
            if date is not None:
                return date
    return None


def _first(value: Any) -> str | None:
    if isinstance(value, list):
        return value[0] if value else None
    return value


def crossref_authors(col: Collector, people: Iterable[dict[str, Any]]) -> list[AuthorKey]:
    authors = []
    for person in people or ():
        orcid = col.ident(IdentifierScheme.ORCID, person.get("ORCID"))
        key = name_key(person.get("family") or person.get("name"), person.get("given"))
        if key or orcid:
            authors.append(AuthorKey(key, orcid))
    return authors


def parse_crossref(records: Iterable[Any], admit: Admit | None = None,
                   report: RunReport | None = None) -> tuple[list[MetadataRow], list[RawCitationPair]]:
    """One metadata row per work; one DOI-to-DOI pair per reference with a DOI.

    ``records`` holds work objects (or ``(offset, work)`` pairs).  References
    lacking a DOI are counted under ``pair_skips["no-doi"]``.
    """
    col = Collector(SourceTag.CROSSREF, admit, report)
    for where, record in located(records):
        if isinstance(record, BadLine):
            col.report.skip_record("undecodable", where)
            continue
        if not isinstance(record, dict):
            col.report.skip_record("not-an-object", where)
            continue
        col.report.records += 1
        doi = col.ident(IdentifierScheme.DOI, record.get("DOI"))
        if doi is None:
            col.report.skip_record("missing-or-invalid-doi", where)
            continue
        venue = [col.ident(IdentifierScheme.ISSN, x) for x in record.get("ISSN") or ()]
        venue += [col.ident(IdentifierScheme.ISBN, x) for x in record.get("ISBN") or ()]
        col.add_row(
            [doi],
            title=_first(record.get("title")),
            pub_date=crossref_date(record),
            venue=[str(v) for v in venue if v is not None],
            authors=crossref_authors(col, record.get("author")),
            type=record.get("type"),
        )
        for ref in record.get("reference") or ():
            if not isinstance(ref, dict) or not ref.get("DOI"):
                col.report.pairs_seen += 1
                col.report.skip_pair("no-doi")
                continue
            cited = col.ident(IdentifierScheme.DOI, ref.get("DOI"))
            col.add_pair(doi, cited, missing="invalid-doi")
    return col.result
