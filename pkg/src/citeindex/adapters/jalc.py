"""Japan Link Center records (bilingual metadata, DOI citations)."""

from __future__ import annotations

from typing import Any, Iterable

from ..dates import PartialDate
from ..identifiers import IdentifierScheme
from .base import (Admit, AuthorKey, BadLine, Collector, MetadataRow, RawCitationPair,
                   RunReport, SourceTag, located, name_key)

_VENUE = {"issn": IdentifierScheme.ISSN, "jid": IdentifierScheme.JID,
          "isbn": IdentifierScheme.ISBN}


def _by_lang(entries, key: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for entry in entries or ():
        value = entry.get(key)
        if value:
            out.setdefault(entry.get("lang", ""), value)
    return out


def _date(pub: dict[str, Any] | None) -> PartialDate | None:
    if not pub:
        return None
    parts = [pub.get("publication_year"), pub.get("publication_month"), pub.get("publication_day")]
    try:
        return PartialDate.from_parts(p for p in parts if p)
    except ValueError:
        return None


def _creators(col: Collector, creators) -> list[AuthorKey]:
    out = []
    for person in creators or ():
        names = {n.get("lang", ""): n for n in person.get("names") or ()}
        name = names.get("en") or next(iter(names.values()), {})
        orcid = None
        for rid in person.get("researcher_id_list") or ():
            if str(rid.get("type", "")).upper() == "ORCID":
                orcid = col.ident(IdentifierScheme.ORCID, rid.get("id_code"))
        key = name_key(name.get("last_name"), name.get("first_name"))
        if key or orcid:
            out.append(AuthorKey(key, orcid))
    return out


def parse_jalc(records: Iterable[Any], admit: Admit | None = None,
               report: RunReport | None = None) -> tuple[list[MetadataRow], list[RawCitationPair]]:
    """English title preferred, Japanese kept in ``alt_title``.  Only
    references carrying a DOI produce pairs.
    """
    col = Collector(SourceTag.JALC, admit, report)
    for where, record in located(records):
        if isinstance(record, BadLine) or not isinstance(record, dict):
            col.report.skip_record("undecodable", where)
            continue
        record = record.get("data", record)
        col.report.records += 1
        doi = col.ident(IdentifierScheme.DOI, record.get("doi"))
        if doi is None:
            col.report.skip_record("missing-or-invalid-doi", where)
            continue
        titles = _by_lang(record.get("title_list"), "title")
        english, japanese = titles.get("en"), titles.get("ja")
        title = english or japanese or next(iter(titles.values()), None)
        venue = []
        for jid in record.get("journal_id_list") or ():
            scheme = _VENUE.get(str(jid.get("type", "")).lower())
            if scheme:
                venue.append(col.ident(scheme, jid.get("journal_id")))
        col.add_row(
            [doi],
            title=title,
            pub_date=_date(record.get("publication_date")),
            venue=[str(v) for v in venue if v is not None],
            authors=_creators(col, record.get("creator_list")),
            type=record.get("content_type"),
            alt_title=japanese if english and japanese else None,
        )
        for ref in record.get("citation_list") or ():
            if not ref.get("doi"):
                col.report.pairs_seen += 1
                col.report.skip_pair("no-doi")
                continue
            col.add_pair(doi, col.ident(IdentifierScheme.DOI, ref["doi"]), missing="invalid-doi")
    return col.result
