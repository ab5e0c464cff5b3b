"""Per-citation provenance snapshots and dataset-level metadata."""

from __future__ import annotations

import csv
import re
import threading
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Callable, Iterable, Iterator

from .adapters.base import SourceTag, dict_rows
from .identifiers import utcnow
from .index import Oci
from .rdf import DCAT, DCTERMS, IRI, OCO, PROV, RDF_TYPE, VOID, XSD, Literal, Triple, escape

DEFAULT_BASE = "https://w3id.org/oc/index/"
DEFAULT_AGENT = "https://w3id.org/oc/index/prov/pa/1"
CC0 = "http://creativecommons.org/publicdomain/zero/1.0/"
SOURCE_IRIS = {
    SourceTag.CROSSREF: "https://api.crossref.org/",
    SourceTag.NIH_OCC: "https://icite.od.nih.gov/",
    SourceTag.DATACITE: "https://api.datacite.org/",
    SourceTag.OPENAIRE: "https://scholexplorer.openaire.eu/",
    SourceTag.JALC: "https://japanlinkcenter.org/",
}
PROVENANCE_COLUMNS = ["oci", "snapshot", "created", "invalidated", "agent", "source",
                      "location", "update_query"]
MEDIA_TYPES = {"csv": "text/csv", "ntriples": "application/n-triples",
               "scholix": "application/json"}


class SnapshotExists(ValueError):
    pass


class UnknownEntity(KeyError):
    pass


def citation_iri(oci: Oci, base: str = DEFAULT_BASE) -> str:
    return f"{base}ci/{oci.digits}"


def collection_iri(source: SourceTag, base: str = DEFAULT_BASE) -> str:
    return f"{base}{source.value}/"


@dataclass
class ProvenanceSnapshot:
    entity_oci: Oci
    snapshot_number: int
    generated_at: datetime
    agent: str
    primary_source: str
    location: str
    invalidated_at: datetime | None = None
    update_query: str | None = None

    def iri(self, base: str = DEFAULT_BASE) -> str:
        return f"{citation_iri(self.entity_oci, base)}/prov/se/{self.snapshot_number}"

    def to_csv(self) -> dict[str, str]:
        return {
            "oci": self.entity_oci.digits,
            "snapshot": str(self.snapshot_number),
            "created": self.generated_at.isoformat(),
            "invalidated": self.invalidated_at.isoformat() if self.invalidated_at else "",
            "agent": self.agent,
            "source": self.primary_source,
            "location": self.location,
            "update_query": self.update_query or "",
        }

    @classmethod
    def from_csv(cls, row: dict[str, str]) -> "ProvenanceSnapshot":
        return cls(
            entity_oci=Oci.parse(row["oci"]),
            snapshot_number=int(row["snapshot"]),
            generated_at=datetime.fromisoformat(row["created"]),
            invalidated_at=datetime.fromisoformat(row["invalidated"]) if row["invalidated"] else None,
            agent=row["agent"],
            primary_source=row["source"],
            location=row["location"],
            update_query=row["update_query"] or None,
        )

    def triples(self, base: str = DEFAULT_BASE) -> list[Triple]:
        se = IRI(self.iri(base))
        out: list[Triple] = [
            (se, _TYPE, _ENTITY),
            (se, _SPECIALIZATION_OF, IRI(citation_iri(self.entity_oci, base))),
            (se, _GENERATED_AT, Literal(self.generated_at.isoformat(), _DATETIME)),
        ]
        if self.invalidated_at is not None:
            out.append((se, _INVALIDATED_AT, Literal(self.invalidated_at.isoformat(), _DATETIME)))
        out += [
            (se, _ATTRIBUTED_TO, IRI(self.agent)),
            (se, _PRIMARY_SOURCE, IRI(self.primary_source)),
            (se, _AT_LOCATION, IRI(self.location)),
        ]
        if self.snapshot_number > 1:
            out.append((se, _DERIVED_FROM,
                        IRI(self.iri(base).rsplit("/", 1)[0] + f"/{self.snapshot_number - 1}")))
        if self.update_query:
            out.append((se, _UPDATE_QUERY, Literal(self.update_query, XSD + "string")))
        return out

    def ntriples(self, base: str = DEFAULT_BASE) -> str:
        """The lines of :meth:`triples`, formatted directly."""
        se = f"<{self.iri(base)}>"
        out = [f"{se} <{_TYPE}> <{_ENTITY}> .\n",
               f"{se} <{_SPECIALIZATION_OF}> <{citation_iri(self.entity_oci, base)}> .\n",
               f'{se} <{_GENERATED_AT}> "{self.generated_at.isoformat()}"^^<{_DATETIME}> .\n']
        if self.invalidated_at is not None:
            out.append(f'{se} <{_INVALIDATED_AT}> "{self.invalidated_at.isoformat()}"^^<{_DATETIME}> .\n')
        out += [f"{se} <{_ATTRIBUTED_TO}> <{IRI(self.agent)}> .\n",
                f"{se} <{_PRIMARY_SOURCE}> <{IRI(self.primary_source)}> .\n",
                f"{se} <{_AT_LOCATION}> <{IRI(self.location)}> .\n"]
        if self.snapshot_number > 1:
            prior = f"{citation_iri(self.entity_oci, base)}/prov/se/{self.snapshot_number - 1}"
            out.append(f"{se} <{_DERIVED_FROM}> <{prior}> .\n")
        if self.update_query:
            out.append(f'{se} <{_UPDATE_QUERY}> "{escape(self.update_query)}"^^<{XSD}string> .\n')
        return "".join(out)


_TYPE, _ENTITY = IRI(RDF_TYPE), IRI(PROV + "Entity")
(_SPECIALIZATION_OF, _GENERATED_AT, _INVALIDATED_AT, _ATTRIBUTED_TO, _PRIMARY_SOURCE,
 _AT_LOCATION, _DERIVED_FROM) = (IRI(PROV + n) for n in (
    "specializationOf", "generatedAtTime", "invalidatedAtTime", "wasAttributedTo",
    "hadPrimarySource", "atLocation", "wasDerivedFrom"))
_UPDATE_QUERY = IRI(OCO + "hasUpdateQuery")
_DATETIME = XSD + "dateTime"


def update_query(oci: Oci, added: Iterable[str] = (), removed: Iterable[str] = (),
                 base: str = DEFAULT_BASE) -> str:
    """SPARQL Update text inserting/deleting ``prov:atLocation`` collection links."""
    ci = citation_iri(oci, base)
    parts = []
    removed, added = sorted(removed), sorted(added)
    if removed:
        body = " ".join(f"<{ci}> <{PROV}atLocation> <{iri}> ." for iri in removed)
        parts.append(f"DELETE DATA {{ {body} }}")
    if added:
        body = " ".join(f"<{ci}> <{PROV}atLocation> <{iri}> ." for iri in added)
        parts.append(f"INSERT DATA {{ {body} }}")
    return " ; ".join(parts)


_UPDATE_RE = re.compile(r"(INSERT|DELETE) DATA \{ (.*?) \}")
_TRIPLE_RE = re.compile(r"<([^>]+)> <([^>]+)> <([^>]+)> \.")


def replay(initial: set[tuple[str, str, str]], queries: Iterable[str]) -> set[tuple[str, str, str]]:
    """Apply INSERT/DELETE DATA queries of the form produced by :func:`update_query`."""
    state = set(initial)
    for query in queries:
        for op, body in _UPDATE_RE.findall(query):
            triples = set(_TRIPLE_RE.findall(body))
            state = state | triples if op == "INSERT" else state - triples
    return state


class ProvenanceLog:
    """Snapshot chains keyed by OCI.  Updates to one OCI are serialized."""

    def __init__(self, agent: str = DEFAULT_AGENT, base: str = DEFAULT_BASE,
                 now: Callable[[], datetime] = utcnow,
                 source_iris: dict[SourceTag, str] | None = None):
        self.agent = agent
        self.base = base
        self.now = now
        self.source_iris = {**SOURCE_IRIS, **(source_iris or {})}
        self.chains: dict[Oci, list[ProvenanceSnapshot]] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.chains)

    def __contains__(self, oci: object) -> bool:
        return oci in self.chains

    def current(self, oci: Oci) -> ProvenanceSnapshot:
        chain = self.chains.get(oci)
        if not chain:
            raise UnknownEntity(str(oci))
        return chain[-1]

    def snapshot_create(self, oci: Oci, source_iri: str, agent: str | None = None,
                        location: str | None = None) -> ProvenanceSnapshot:
        with self._lock:
            if oci in self.chains:
                raise SnapshotExists(str(oci))
            snap = ProvenanceSnapshot(oci, 1, self.now(), agent or self.agent, source_iri,
                                      location or self.base)
            self.chains[oci] = [snap]
            return snap

    def snapshot_update(self, oci: Oci, added_locations: Iterable[str] = (),
                        removed_locations: Iterable[str] = (), source_iri: str | None = None,
                        location: str | None = None) -> ProvenanceSnapshot:
        with self._lock:
            chain = self.chains.get(oci)
            if not chain:
                raise UnknownEntity(str(oci))
            prior = chain[-1]
            stamp = self.now()
            if stamp < prior.generated_at:
                stamp = prior.generated_at
            prior.invalidated_at = stamp
            snap = ProvenanceSnapshot(
                oci, prior.snapshot_number + 1, stamp, self.agent,
                source_iri or prior.primary_source, location or prior.location,
                update_query=update_query(oci, added_locations, removed_locations, self.base),
            )
            chain.append(snap)
            return snap

    def record_new(self, oci: Oci, source: SourceTag) -> ProvenanceSnapshot:
        return self.snapshot_create(oci, self.source_iris[source], location=collection_iri(source, self.base))

    def record_extension(self, oci: Oci, source: SourceTag) -> ProvenanceSnapshot:
        where = collection_iri(source, self.base)
        return self.snapshot_update(oci, added_locations=[where],
                                    source_iri=self.source_iris[source], location=where)

    def snapshots(self) -> Iterator[ProvenanceSnapshot]:
        for oci in sorted(self.chains):
            yield from self.chains[oci]

    def write_csv(self, path: str | Path) -> int:
        n = 0
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n", quoting=csv.QUOTE_ALL)
            writer.writerow(PROVENANCE_COLUMNS)
            for snap in self.snapshots():
                writer.writerow(snap.to_csv().values())
                n += 1
        return n

    def load_csv(self, path: str | Path) -> None:
        with open(path, encoding="utf-8", newline="") as fh:
            for _, row in dict_rows(fh):
                snap = ProvenanceSnapshot.from_csv(row)
                self.chains.setdefault(snap.entity_oci, []).append(snap)
        for chain in self.chains.values():
            chain.sort(key=lambda s: s.snapshot_number)

    def located_sources(self, oci: Oci) -> set[str]:
        """Collections the citation sits in, replayed from its snapshot chain."""
        chain = self.chains[oci]
        ci = citation_iri(oci, self.base)
        state = {(ci, PROV + "atLocation", chain[0].location)}
        state = replay(state, (s.update_query for s in chain[1:] if s.update_query))
        return {o for s, p, o in state if s == ci and p == PROV + "atLocation"}


@dataclass
class Distribution:
    format: str
    location: str
    byte_size: int
    compressed: bool = False
    license: str = CC0

    @property
    def media_type(self) -> str:
        return MEDIA_TYPES[self.format]


@dataclass
class DatasetDescriptor:
    title: str
    description: str
    publication_date: date
    modified_date: date
    webpage: str
    sparql_endpoint: str | None = None
    subjects: list[str] = field(default_factory=list)
    distributions: list[Distribution] = field(default_factory=list)
    iri: str = DEFAULT_BASE

    def __post_init__(self):
        if self.modified_date < self.publication_date:
            raise ValueError("modified date precedes publication date")

    def triples(self) -> list[Triple]:
        ds = IRI(self.iri)
        out: list[Triple] = [
            (ds, IRI(RDF_TYPE), IRI(DCAT + "Dataset")),
            (ds, IRI(RDF_TYPE), IRI(VOID + "Dataset")),
            (ds, IRI(DCTERMS + "title"), Literal(self.title, XSD + "string")),
            (ds, IRI(DCTERMS + "description"), Literal(self.description, XSD + "string")),
            (ds, IRI(DCTERMS + "issued"), Literal(self.publication_date.isoformat(), XSD + "date")),
            (ds, IRI(DCTERMS + "modified"), Literal(self.modified_date.isoformat(), XSD + "date")),
            (ds, IRI(DCAT + "landingPage"), IRI(self.webpage)),
            (ds, IRI(DCTERMS + "license"), IRI(CC0)),
        ]
        if self.sparql_endpoint:
            out.append((ds, IRI(VOID + "sparqlEndpoint"), IRI(self.sparql_endpoint)))
        for subject in self.subjects:
            out.append((ds, IRI(DCAT + "theme"), IRI(subject)))
        for n, dist in enumerate(self.distributions, 1):
            node = IRI(f"{self.iri}distribution/{n}")
            out += [
                (ds, IRI(DCAT + "distribution"), node),
                (node, IRI(RDF_TYPE), IRI(DCAT + "Distribution")),
                (node, IRI(DCTERMS + "license"), IRI(dist.license)),
                (node, IRI(DCAT + "mediaType"), Literal(dist.media_type, XSD + "string")),
                (node, IRI(DCAT + "byteSize"), Literal(str(dist.byte_size), XSD + "decimal")),
                (node, IRI(DCAT + "downloadURL"), IRI(dist.location)),
            ]
            if dist.compressed:
                out.append((node, IRI(DCAT + "compressFormat"), Literal("application/gzip", XSD + "string")))
        return out


def emit_dataset_descriptor(report, dumps: Iterable[Distribution], *, modified: date,
                            published: date | None = None, base: str = DEFAULT_BASE,
                            title: str = "Citation index",
                            webpage: str | None = None,
                            sparql_endpoint: str | None = None) -> DatasetDescriptor:
    """Describe one export run.  ``report`` (a CoverageReport) feeds the description."""
    return DatasetDescriptor(
        title=title,
        description=f"{report.total} unique citations from "
                    f"{sum(1 for s in SourceTag if report.source_total(s))} sources.",
        publication_date=published or modified,
        modified_date=modified,
        webpage=webpage or base,
        sparql_endpoint=sparql_endpoint,
        subjects=["http://purl.org/spar/cito/Citation"],
        distributions=list(dumps),
        iri=base,
    )
