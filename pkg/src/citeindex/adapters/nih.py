"""NIH Open Citation Collection: citation table plus iCite metadata."""

from __future__ import annotations

import re
from typing import Any, Iterable

from ..dates import PartialDate
from ..identifiers import IdentifierScheme
from .base import (Admit, AuthorKey, Collector, MetadataRow, RawCitationPair, RunReport,
                   SourceTag, located, name_key, split_full_name)


def _pmid(col: Collector, raw: Any):
    raw = (raw or "").strip()
    if not raw.isdigit():
        return None
    return col.ident(IdentifierScheme.PMID, raw)


def parse_nih(rows: Iterable[Any], admit: Admit | None = None,
              report: RunReport | None = None) -> tuple[list[MetadataRow], list[RawCitationPair]]:
    """Citation rows carry ``citing``/``referenced``; metadata rows carry ``pmid``.

    Both kinds may be mixed in one stream.  Dates are kept at year precision
    and the journal becomes an ``abbr:`` venue key.
    """
    col = Collector(SourceTag.NIH_OCC, admit, report)
    for where, row in located(rows):
        col.report.records += 1
        if "citing" in row and "referenced" in row:
            citing, cited = _pmid(col, row["citing"]), _pmid(col, row["referenced"])
            if citing is None or cited is None:
                col.report.skip_record("non-numeric-pmid", where)
            col.add_pair(citing, cited, missing="non-numeric-pmid")
            continue
        pmid = _pmid(col, row.get("pmid"))
        if pmid is None:
            col.report.skip_record("non-numeric-pmid", where)
            continue
        year = (row.get("year") or "").strip()
        journal = re.sub(r"\s+", " ", (row.get("journal") or "").strip().lower())
        authors = []
        for name in (row.get("authors") or "").split(","):
            if name.strip():
                authors.append(AuthorKey(name_key(*split_full_name(name.strip()))))
        col.add_row(
            [pmid, col.ident(IdentifierScheme.DOI, row.get("doi"))],
            title=(row.get("title") or "").strip() or None,
            pub_date=PartialDate(int(year)) if year.isdigit() else None,
            venue=[f"abbr:{journal}"] if journal else [],
            authors=[a for a in authors if a.name],
            type="journal-article",
        )
    return col.result
