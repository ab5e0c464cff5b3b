"""Deduplicated bibliographic resources behind internal OMIDs.

Store file format (UTF-8 JSON lines, ``\\n`` terminated, keys sorted,
separators ``,`` and ``:``, non-ASCII written literally):

* line 1, header::

    {"counters":{"br":<int>},"format":"citeindex-store","supplier":"<digits>","version":1}

* then one line per retired alias, ascending by retired OMID::

    {"alias":"<retired omid>","canonical":"<canonical omid>"}

* then one line per resource, ascending by OMID::

    {"authors":[...],"ids":[...],"omid":"omid:br/...","pub_date":"YYYY[-MM[-DD]]"|null,"venue":[...]}

``ids`` are ``scheme:value`` strings, sorted; ``authors`` keep their merge
order; the external-id mapping is rebuilt from the ``ids`` lists on load.
"""

from __future__ import annotations

import csv
import json
import re
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator

from .adapters.base import AuthorKey, MetadataRow
from .dates import PartialDate
from .identifiers import ExternalId

DEFAULT_SUPPLIER = "060"
_OMID_RE = re.compile(r"omid:([a-z]{2})/(0[1-9]+0)([1-9][0-9]*)")
_ENTITY_TYPE_RE = re.compile(r"[a-z]{2}")
_SUPPLIER_RE = re.compile(r"0[1-9]+0")


class UnknownOmid(KeyError):
    def __init__(self, omid: "Omid", canonical: "Omid | None" = None):
        self.omid, self.canonical = omid, canonical
        msg = f"unknown OMID {omid}"
        if canonical is not None:
            msg = f"{omid} was merged into {canonical}"
        super().__init__(msg)

    def __str__(self) -> str:
        return self.args[0]


class MappingConflict(Exception):
    """Ids of one resource already point at different OMIDs."""

    def __init__(self, canonical: "Omid", retired: list["Omid"]):
        self.canonical, self.retired = canonical, retired
        super().__init__(f"merged {', '.join(map(str, retired))} into {canonical}")


class StoreCorrupt(ValueError):
    pass


@dataclass(frozen=True)
class Omid:
    entity_type: str
    supplier: str
    counter: int

    def __post_init__(self):
        if not _ENTITY_TYPE_RE.fullmatch(self.entity_type):
            raise ValueError(f"bad entity type {self.entity_type!r}")
        if not _SUPPLIER_RE.fullmatch(self.supplier):
            raise ValueError(f"bad supplier prefix {self.supplier!r}")
        if self.counter < 1:
            raise ValueError("counter must be positive")

    @property
    def digits(self) -> str:
        return f"{self.supplier}{self.counter}"

    def __str__(self) -> str:
        return f"omid:{self.entity_type}/{self.digits}"

    def sort_key(self) -> tuple[int, str]:
        return self.counter, self.digits

    @classmethod
    def parse(cls, text: str) -> "Omid":
        return _parse_omid(text)

    @classmethod
    def from_digits(cls, entity_type: str, digits: str) -> "Omid":
        return cls.parse(f"omid:{entity_type}/{digits}")


@lru_cache(maxsize=1 << 18)
def _parse_omid(text: str) -> Omid:
    m = _OMID_RE.fullmatch(text.strip())
    if not m:
        raise ValueError(f"not an OMID: {text!r}")
    return Omid(m.group(1), m.group(2), int(m.group(3)))


@dataclass
class BibResource:
    omid: Omid
    ids: set[ExternalId]
    pub_date: PartialDate | None = None
    venue: tuple[str, ...] = ()
    authors: tuple[AuthorKey, ...] = ()

    def merge(self, row: MetadataRow) -> None:
        """Fill absent fields; keep the most precise publication date."""
        if row.pub_date is not None and (
            self.pub_date is None or row.pub_date.precision > self.pub_date.precision
        ):
            self.pub_date = row.pub_date
        if not self.venue and row.venue:
            self.venue = tuple(row.venue)
        if not self.authors and row.authors:
            self.authors = tuple(row.authors)

    def absorb(self, other: "BibResource") -> None:
        self.ids |= other.ids
        self.merge(MetadataRow(tuple(other.ids), pub_date=other.pub_date,
                               venue=other.venue, authors=other.authors))

    def to_json(self) -> dict:
        return {
            "omid": str(self.omid),
            "ids": sorted(str(i) for i in self.ids),
            "pub_date": str(self.pub_date) if self.pub_date else None,
            "venue": list(self.venue),
            "authors": [str(a) for a in self.authors],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BibResource":
        return cls(
            omid=Omid.parse(obj["omid"]),
            ids={ExternalId.parse(i) for i in obj["ids"]},
            pub_date=PartialDate.parse(obj["pub_date"]) if obj.get("pub_date") else None,
            venue=tuple(obj.get("venue") or ()),
            authors=tuple(AuthorKey.parse(a) for a in obj.get("authors") or ()),
        )


class KeyValueStore(ABC):
    """String-keyed mapping with atomic insert-if-absent."""

    @abstractmethod
    def get(self, key: str) -> str | None: ...

    @abstractmethod
    def set(self, key: str, value: str) -> None: ...

    @abstractmethod
    def set_if_absent(self, key: str, value: str) -> str:
        """Store ``value`` unless ``key`` exists; return the stored value."""

    @abstractmethod
    def items(self) -> Iterator[tuple[str, str]]: ...

    @abstractmethod
    def __len__(self) -> int: ...


class MemoryKV(KeyValueStore):
    def __init__(self):
        self._data: dict[str, str] = {}
        self._lock = threading.Lock()

    def get(self, key):
        return self._data.get(key)

    def set(self, key, value):
        with self._lock:
            self._data[key] = value

    def set_if_absent(self, key, value):
        with self._lock:
            return self._data.setdefault(key, value)

    def items(self):
        return iter(list(self._data.items()))

    def __len__(self):
        return len(self._data)


@dataclass
class MetaCounters:
    rows: int = 0
    mints: int = 0
    hits: int = 0
    merges: int = 0
    conflicts: list[str] = field(default_factory=list)


class MetaStore:
    """External-id to OMID mapping plus the resources it points at.

    All writes go through one lock, so resolution is linearizable per id.
    """

    def __init__(self, supplier: str = DEFAULT_SUPPLIER, kv: KeyValueStore | None = None,
                 entity_type: str = "br"):
        Omid(entity_type, supplier, 1)  # validates the prefix
        self.supplier = supplier
        self.entity_type = entity_type
        self.kv = kv if kv is not None else MemoryKV()
        self.resources: dict[Omid, BibResource] = {}
        self.aliases: dict[Omid, Omid] = {}
        self.counters: dict[str, int] = {entity_type: 0}
        self.stats = MetaCounters()
        self._lock = threading.RLock()

    def __len__(self) -> int:
        return len(self.kv)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MetaStore):
            return NotImplemented
        return (self.supplier == other.supplier and self.counters == other.counters
                and self.aliases == other.aliases
                and dict(self.kv.items()) == dict(other.kv.items())
                and self.resources == other.resources)

    def _mint(self) -> Omid:
        self.counters[self.entity_type] += 1
        return Omid(self.entity_type, self.supplier, self.counters[self.entity_type])

    def canonical(self, omid: Omid) -> Omid:
        while omid in self.aliases:
            omid = self.aliases[omid]
        return omid

    def lookup(self, id: ExternalId) -> Omid | None:
        value = self.kv.get(str(id))
        return self.canonical(Omid.parse(value)) if value else None

    def get_resource(self, omid: Omid) -> BibResource:
        resource = self.resources.get(omid)
        if resource is None:
            raise UnknownOmid(omid, self.canonical(omid) if omid in self.aliases else None)
        return resource

    def resolve_or_mint(self, ids: Iterable[ExternalId], meta: MetadataRow | None = None) -> Omid:
        """Return the OMID shared by ``ids``, minting one when none is known.

        When the ids already point at several OMIDs the lowest counter wins,
        the others become aliases and their resources are folded into it.
        The merge is recorded in ``stats.conflicts``.
        """
        ids = list(dict.fromkeys(ids))
        if not ids:
            raise ValueError("at least one identifier is required")
        with self._lock:
            self.stats.rows += 1
            found = sorted({o for o in map(self.lookup, ids) if o is not None}, key=Omid.sort_key)
            if not found:
                omid = self._mint()
                self.resources[omid] = BibResource(omid, set())
                self.stats.mints += 1
            else:
                omid = found[0]
                self.stats.hits += 1
                if len(found) > 1:
                    self._retire(omid, found[1:])
            resource = self.resources[omid]
            for id in ids:
                if self.kv.set_if_absent(str(id), str(omid)) != str(omid):
                    self.kv.set(str(id), str(omid))
                resource.ids.add(id)
            if meta is not None:
                resource.merge(meta)
            return omid

    def _retire(self, canonical: Omid, losers: list[Omid]) -> None:
        target = self.resources[canonical]
        for loser in losers:
            self.aliases[loser] = canonical
            retired = self.resources.pop(loser)
            target.absorb(retired)
            for id in retired.ids:
                self.kv.set(str(id), str(canonical))
        self.stats.merges += len(losers)
        self.stats.conflicts.append(str(MappingConflict(canonical, losers)))

    def adopt(self, omid: Omid, ids: Iterable[ExternalId]) -> Omid:
        """Register an OMID issued elsewhere (e.g. an upstream mapping export).

        Ids that are already mapped are left alone; the mint counter is
        raised past the adopted counter when it shares our supplier prefix.
        """
        with self._lock:
            omid = self.canonical(omid)
            resource = self.resources.setdefault(omid, BibResource(omid, set()))
            for id in ids:
                if self.kv.set_if_absent(str(id), str(omid)) == str(omid):
                    resource.ids.add(id)
            if omid.supplier == self.supplier and omid.entity_type == self.entity_type:
                self.counters[self.entity_type] = max(self.counters[self.entity_type], omid.counter)
            if not resource.ids:
                del self.resources[omid]
            return omid

    def ingest(self, rows: Iterable[MetadataRow]) -> MetaCounters:
        for row in rows:
            self.resolve_or_mint(row.ids, row)
        return self.stats

    # --- persistence -----------------------------------------------------

    def persist(self, path: str | Path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        dump = lambda obj: json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        with self._lock, open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dump({"format": "citeindex-store", "version": 1,
                           "supplier": self.supplier, "counters": self.counters}) + "\n")
            for retired in sorted(self.aliases, key=Omid.sort_key):
                fh.write(dump({"alias": str(retired), "canonical": str(self.aliases[retired])}) + "\n")
            for omid in sorted(self.resources, key=Omid.sort_key):
                fh.write(dump(self.resources[omid].to_json()) + "\n")
        tmp.replace(path)

    @classmethod
    def load(cls, path: str | Path, kv: KeyValueStore | None = None) -> "MetaStore":
        path = Path(path)
        store = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                try:
                    obj = json.loads(line)
                    if store is None:
                        if obj.get("format") != "citeindex-store" or obj.get("version") != 1:
                            raise ValueError("not a citeindex store header")
                        store = cls(obj["supplier"], kv)
                        store.counters = {k: int(v) for k, v in obj["counters"].items()}
                    elif "alias" in obj:
                        store.aliases[Omid.parse(obj["alias"])] = Omid.parse(obj["canonical"])
                    else:
                        resource = BibResource.from_json(obj)
                        if resource.omid in store.resources:
                            raise ValueError(f"duplicate resource {resource.omid}")
                        store.resources[resource.omid] = resource
                        for id in resource.ids:
                            if store.kv.set_if_absent(str(id), str(resource.omid)) != str(resource.omid):
                                raise ValueError(f"{id} mapped to two resources")
                except json.JSONDecodeError as exc:
                    raise StoreCorrupt(f"{path}:{lineno}:{exc.colno}: {exc.msg}") from None
                except (ValueError, KeyError, TypeError, AttributeError) as exc:
                    raise StoreCorrupt(f"{path}:{lineno}: {exc}") from None
        if store is None:
            raise StoreCorrupt(f"{path}:1: empty store file")
        return store

    def export_mapping_csv(self, path: str | Path) -> int:
        """Write ``id,omid`` rows sorted by id; returns the row count."""
        rows = sorted(self.kv.items())
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["id", "omid"])
            writer.writerows(rows)
        return len(rows)

    def import_mapping_csv(self, path: str | Path) -> int:
        """Adopt every ``id,omid`` row of a mapping export."""
        grouped: dict[str, list[ExternalId]] = {}
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                grouped.setdefault(row["omid"], []).append(ExternalId.parse(row["id"]))
        for omid, ids in grouped.items():
            self.adopt(Omid.parse(omid), ids)
        return sum(len(v) for v in grouped.values())


def read_mapping_csv(path: str | Path) -> dict[str, str]:
    with open(path, encoding="utf-8", newline="") as fh:
        return {row["id"]: row["omid"] for row in csv.DictReader(fh)}
