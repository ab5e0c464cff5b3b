"""DataCite resources (one JSON document per line)."""

from __future__ import annotations

from typing import Any, Iterable

from ..dates import PartialDate
from ..identifiers import IdentifierScheme
from .base import (Admit, AuthorKey, BadLine, Collector, MetadataRow, RawCitationPair,
                   RunReport, SourceTag, located, name_key, split_full_name)

FORWARD = {"cites", "references"}
INVERSE = {"iscitedby", "isreferencedby"}
_VENUE_SCHEMES = {"issn": IdentifierScheme.ISSN, "eissn": IdentifierScheme.ISSN,
                  "isbn": IdentifierScheme.ISBN}


def _date(attrs: dict[str, Any]) -> PartialDate | None:
    for entry in attrs.get("dates") or ():
        if str(entry.get("dateType", "")).lower() == "issued":
            try:
                return PartialDate.parse(str(entry.get("date", ""))[:10])
            except ValueError:
                pass
    year = attrs.get("publicationYear")
    try:
        return PartialDate(int(year)) if year else None
    except ValueError:
        return None


def _creators(col: Collector, creators) -> list[AuthorKey]:
    out = []
    for person in creators or ():
        if person.get("nameType") == "Organizational":
            continue
        orcid = None
        for ni in person.get("nameIdentifiers") or ():
            if str(ni.get("nameIdentifierScheme", "")).upper() == "ORCID":
                orcid = col.ident(IdentifierScheme.ORCID, ni.get("nameIdentifier"))
        family, given = person.get("familyName"), person.get("givenName")
        if not family and person.get("name"):
            family, given = split_full_name(person["name"])
        key = name_key(family, given)
        if key or orcid:
            out.append(AuthorKey(key, orcid))
    return out


def parse_datacite(records: Iterable[Any], admit: Admit | None = None,
                   report: RunReport | None = None) -> tuple[list[MetadataRow], list[RawCitationPair]]:
    """Direct relations (cites, references) give ``this -> related``; inverse
    ones (isCitedBy, isReferencedBy) give ``related -> this``.  Only DOI
    related identifiers yield pairs; other relation types are ignored.
    """
    col = Collector(SourceTag.DATACITE, admit, report)
    for where, record in located(records):
        if isinstance(record, BadLine) or not isinstance(record, dict):
            col.report.skip_record("undecodable", where)
            continue
        col.report.records += 1
        attrs = record.get("attributes", record)
        doi = col.ident(IdentifierScheme.DOI, attrs.get("doi") or record.get("id"))
        if doi is None:
            col.report.skip_record("missing-or-invalid-doi", where)
            continue
        venue = []
        container = attrs.get("container") or {}
        scheme = _VENUE_SCHEMES.get(str(container.get("identifierType", "")).lower())
        if scheme:
            venue.append(col.ident(scheme, container.get("identifier")))
        for rel in attrs.get("relatedIdentifiers") or ():
            relation = str(rel.get("relationType", "")).lower()
            id_type = str(rel.get("relatedIdentifierType", "")).lower()
            if relation == "ispartof" and id_type in _VENUE_SCHEMES:
                venue.append(col.ident(_VENUE_SCHEMES[id_type], rel.get("relatedIdentifier")))
            if relation not in FORWARD | INVERSE:
                continue
            if id_type != "doi":
                col.report.pairs_seen += 1
                col.report.skip_pair("non-doi-related")
                continue
            other = col.ident(IdentifierScheme.DOI, rel.get("relatedIdentifier"))
            if relation in FORWARD:
                col.add_pair(doi, other, missing="invalid-doi")
            else:
                col.add_pair(other, doi, missing="invalid-doi")
        titles = attrs.get("titles") or []
        col.add_row(
            [doi],
            title=titles[0].get("title") if titles else None,
            pub_date=_date(attrs),
            venue=[str(v) for v in venue if v is not None],
            authors=_creators(col, attrs.get("creators")),
            type=((attrs.get("types") or {}).get("resourceTypeGeneral") or "").lower() or None,
        )
    return col.result
