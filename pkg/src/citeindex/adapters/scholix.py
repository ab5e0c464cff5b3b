"""OpenAIRE ScholeXplorer link records in Scholix layout."""

from __future__ import annotations

from itertools import product
from typing import Any, Iterable

from ..dates import PartialDate
from ..identifiers import ExternalId, IdentifierScheme
from .base import (Admit, AuthorKey, BadLine, Collector, LEGAL_SCHEMES, MetadataRow,
                   RawCitationPair, RunReport, SourceTag, located, name_key, split_full_name)

FORWARD = {"references", "cites"}
INVERSE = {"isreferencedby", "iscitedby"}

_SCHEMES = {
    "doi": IdentifierScheme.DOI,
    "pmid": IdentifierScheme.PMID,
    "pubmed": IdentifierScheme.PMID,
    "pmc": IdentifierScheme.PMC,
    "pmcid": IdentifierScheme.PMC,
    "arxiv": IdentifierScheme.ARXIV,
    "url": IdentifierScheme.URL,
}
_PAIRABLE = LEGAL_SCHEMES[SourceTag.OPENAIRE]


def _get(obj: dict[str, Any], *keys: str, default=None):
    for key in keys:
        if key in obj:
            return obj[key]
    return default


def _identifiers(col: Collector, end: dict[str, Any]) -> list[ExternalId]:
    ids = []
    for entry in _get(end, "Identifier", "identifier", default=[]) or ():
        scheme = str(_get(entry, "IDScheme", "schema", "scheme", default="")).lower()
        value = _get(entry, "ID", "identifier", "id")
        if scheme == "handle":
            # no Handle scheme in the closed enumeration: kept as its resolver URL
            ids.append(col.ident(IdentifierScheme.URL, f"https://hdl.handle.net/{value}"))
        elif scheme in _SCHEMES:
            ids.append(col.ident(_SCHEMES[scheme], value))
    return [i for i in dict.fromkeys(ids) if i is not None]


def _end_row(col: Collector, end: dict[str, Any], ids: list[ExternalId]) -> None:
    date = None
    raw_date = _get(end, "PublicationDate", "publicationDate")
    if raw_date:
        try:
            date = PartialDate.parse(str(raw_date)[:10])
        except ValueError:
            date = None
    authors = []
    for person in _get(end, "Creator", "creator", default=[]) or ():
        name = _get(person, "Name", "name")
        if name:
            authors.append(AuthorKey(name_key(*split_full_name(name))))
    kind = _get(end, "Type", "type", default={})
    col.add_row(
        ids,
        title=_get(end, "Title", "title"),
        pub_date=date,
        authors=[a for a in authors if a.name],
        type=(_get(kind, "Name", "name") if isinstance(kind, dict) else kind) or None,
    )


def parse_scholix(records: Iterable[Any], admit: Admit | None = None,
                  report: RunReport | None = None) -> tuple[list[MetadataRow], list[RawCitationPair]]:
    """Every pairable (DOI, PMC, PMID, arXiv) id of the citing end is linked
    to every pairable id of the cited end.  Handles are kept as URL ids on
    the metadata rows and never paired.
    """
    col = Collector(SourceTag.OPENAIRE, admit, report)
    for where, link in located(records):
        if isinstance(link, BadLine) or not isinstance(link, dict):
            col.report.skip_record("undecodable", where)
            continue
        col.report.records += 1
        rel = _get(link, "RelationshipType", "relationship_type", "relationshipType", default={}) or {}
        names = {str(_get(rel, "Name", "name", default="")).lower(),
                 str(_get(rel, "SubType", "subType", "sub_type", default="") or "").lower()}
        source = _get(link, "Source", "source", default={}) or {}
        target = _get(link, "Target", "target", default={}) or {}
        source_ids, target_ids = _identifiers(col, source), _identifiers(col, target)
        # a Handle alone does not make a resource; it rides along as an alternate id
        for end, ids in ((source, source_ids), (target, target_ids)):
            if any(i.scheme in _PAIRABLE for i in ids):
                _end_row(col, end, ids)
        if names & FORWARD:
            citing, cited = source_ids, target_ids
        elif names & INVERSE:
            citing, cited = target_ids, source_ids
        else:
            col.report.skip_record("not-a-citation", where)
            continue
        citing = [i for i in citing if i.scheme in _PAIRABLE]
        cited = [i for i in cited if i.scheme in _PAIRABLE]
        if not citing or not cited:
            col.report.pairs_seen += 1
            col.report.skip_pair("no-supported-id")
            col.report.skip_record("no-supported-id", where)
            continue
        for a, b in product(citing, cited):
            col.add_pair(a, b)
    return col.result
