"""OMID-to-OMID citations: OCIs, citation metadata, deduplication, coverage."""

from __future__ import annotations

import re
import threading
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Iterator

from .adapters.base import RawCitationPair, SourceTag
from .dates import PartialDate, Timespan, compute_timespan
from .meta import BibResource, MetaStore, Omid

# each digit group is an OMID body: supplier prefix then a positive counter
_OCI_RE = re.compile(r"(?:oci:)?(0[1-9]+0[1-9][0-9]*)-(0[1-9]+0[1-9][0-9]*)")


class WrongEntityType(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Oci:
    citing_digits: str
    cited_digits: str

    def __str__(self) -> str:
        return f"oci:{self.digits}"

    @property
    def digits(self) -> str:
        return f"{self.citing_digits}-{self.cited_digits}"

    @classmethod
    def parse(cls, text: str) -> "Oci":
        """Accepts ``oci:A-B`` or the bare ``A-B`` digit pair."""
        m = _OCI_RE.fullmatch(text.strip())
        if not m:
            raise ValueError(f"not an OCI: {text!r}")
        return cls(m.group(1), m.group(2))

    def endpoints(self) -> tuple[Omid, Omid]:
        return Omid.from_digits("br", self.citing_digits), Omid.from_digits("br", self.cited_digits)


def make_oci(citing: Omid, cited: Omid) -> Oci:
    for omid in (citing, cited):
        if omid.entity_type != "br":
            raise WrongEntityType(f"{omid} is not a bibliographic resource")
    return Oci(citing.digits, cited.digits)


@dataclass
class Citation:
    oci: Oci
    citing: Omid
    cited: Omid
    creation_date: PartialDate | None = None
    timespan: Timespan | None = None
    author_self: bool = False
    journal_self: bool = False
    sources: set[SourceTag] = field(default_factory=set)


@dataclass(frozen=True)
class UnresolvedPair:
    pair: RawCitationPair
    reason: str


@dataclass(frozen=True)
class SourceExtension:
    oci: Oci
    source: SourceTag


def to_omid_pair(pair: RawCitationPair, mapping: MetaStore,
                 unresolved: list[UnresolvedPair] | None = None) -> tuple[Omid, Omid] | None:
    """Both endpoints through the mapping, or None (parked in ``unresolved``)."""
    citing, cited = mapping.lookup(pair.citing), mapping.lookup(pair.cited)
    reason = None
    if citing is None and cited is None:
        reason = "both-unmapped"
    elif citing is None:
        reason = "citing-unmapped"
    elif cited is None:
        reason = "cited-unmapped"
    elif citing == cited:
        reason = "same-resource"
    if reason is not None:
        if unresolved is not None:
            unresolved.append(UnresolvedPair(pair, reason))
        return None
    return citing, cited


def classify_self_citation(citing: BibResource, cited: BibResource) -> tuple[bool, bool]:
    """(author_self, journal_self).

    ORCIDs are compared where both authors have one; name keys only count
    when neither author has an ORCID.  Missing data gives False.
    """
    author_self = False
    for a in citing.authors:
        for b in cited.authors:
            if a.orcid is not None and b.orcid is not None:
                same = a.orcid == b.orcid
            elif a.orcid is None and b.orcid is None:
                same = a.name is not None and a.name == b.name
            else:
                same = False
            if same:
                author_self = True
                break
        if author_self:
            break
    journal_self = bool(set(citing.venue) & set(cited.venue))
    return author_self, journal_self


def describe(citing: BibResource, cited: BibResource, source: SourceTag | None = None) -> Citation:
    creation = citing.pub_date
    timespan = None
    if citing.pub_date is not None and cited.pub_date is not None:
        timespan = compute_timespan(citing.pub_date, cited.pub_date)
    author_self, journal_self = classify_self_citation(citing, cited)
    return Citation(make_oci(citing.omid, cited.omid), citing.omid, cited.omid, creation,
                    timespan, author_self, journal_self, {source} if source else set())


class CitationIndex:
    """The set of known citations keyed by OCI, with atomic test-and-insert."""

    def __init__(self, citations: Iterable[Citation] = ()):
        self._by_oci: dict[Oci, Citation] = {}
        self._lock = threading.Lock()
        for c in citations:
            self._by_oci[c.oci] = c

    def __len__(self) -> int:
        return len(self._by_oci)

    def __contains__(self, oci: object) -> bool:
        return oci in self._by_oci

    def __iter__(self) -> Iterator[Citation]:
        return iter(self.sorted())

    def get(self, oci: Oci) -> Citation | None:
        return self._by_oci.get(oci)

    def sorted(self) -> list[Citation]:
        return [self._by_oci[k] for k in sorted(self._by_oci)]

    def insert_or_extend(self, citation: Citation, source: SourceTag) -> tuple[Citation, bool, bool]:
        """Returns (stored citation, created, source newly added)."""
        with self._lock:
            existing = self._by_oci.get(citation.oci)
            if existing is None:
                citation.sources.add(source)
                self._by_oci[citation.oci] = citation
                return citation, True, True
            if source in existing.sources:
                return existing, False, False
            existing.sources.add(source)
            return existing, False, True


@dataclass
class BuildResult:
    new: list[Citation] = field(default_factory=list)
    extensions: list[SourceExtension] = field(default_factory=list)
    # source that first asserted each new citation
    origins: dict[Oci, SourceTag] = field(default_factory=dict)


def build_citations(pairs: Iterable[tuple[Omid, Omid, SourceTag]], store: MetaStore,
                    index: CitationIndex) -> BuildResult:
    """Turn resolved OMID pairs into citations, deduplicating by OCI.

    An OCI seen before only gains the new source (reported as a
    :class:`SourceExtension`); its dates and flags stay as first written.
    Raises :class:`~citeindex.meta.UnknownOmid` when the store lacks a
    resource the mapping pointed at.
    """
    result = BuildResult()
    for citing, cited, source in pairs:
        oci = make_oci(citing, cited)
        existing = index.get(oci)
        if existing is not None:
            if source in existing.sources:
                continue
            candidate = existing
        else:
            candidate = describe(store.get_resource(citing), store.get_resource(cited))
        stored, created, added = index.insert_or_extend(candidate, source)
        if created:
            result.new.append(stored)
            result.origins[oci] = source
        elif added:
            result.extensions.append(SourceExtension(oci, source))
    return result


@dataclass
class CoverageReport:
    """Citation counts per exact source combination.

    ``combinations`` maps a frozenset of sources to the number of citations
    found in exactly those sources; every other figure derives from it.
    """

    combinations: Counter = field(default_factory=Counter)

    @property
    def total(self) -> int:
        return sum(self.combinations.values())

    def source_total(self, source: SourceTag) -> int:
        return sum(n for combo, n in self.combinations.items() if source in combo)

    def exclusive(self, source: SourceTag) -> int:
        return self.combinations.get(frozenset({source}), 0)

    def shared(self, source: SourceTag) -> int:
        return self.source_total(source) - self.exclusive(source)

    def overlap(self, *sources: SourceTag) -> int:
        """Citations present in at least all of ``sources``."""
        want = set(sources)
        return sum(n for combo, n in self.combinations.items() if want <= combo)

    def merge(self, other: "CoverageReport") -> "CoverageReport":
        return CoverageReport(self.combinations + other.combinations)

    def to_json(self) -> dict:
        combos = sorted(self.combinations.items(),
                        key=lambda kv: (len(kv[0]), sorted(s.value for s in kv[0])))
        tags = list(SourceTag)
        intersections = []
        for size in range(2, len(tags) + 1):
            for group in combinations(tags, size):
                n = self.overlap(*group)
                if n:
                    intersections.append({"sources": [s.value for s in group], "count": n})
        return {
            "total": self.total,
            "sources": {
                s.value: {"total": self.source_total(s), "exclusive": self.exclusive(s),
                          "shared": self.shared(s)}
                for s in tags
            },
            "combinations": [{"sources": sorted(s.value for s in combo), "count": n}
                             for combo, n in combos if n],
            "overlaps": intersections,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CoverageReport":
        return cls(Counter({frozenset(SourceTag(s) for s in row["sources"]): row["count"]
                            for row in obj.get("combinations", [])}))


def coverage_stats(citations: Iterable[Citation]) -> CoverageReport:
    return CoverageReport(Counter(frozenset(c.sources) for c in citations if c.sources))
