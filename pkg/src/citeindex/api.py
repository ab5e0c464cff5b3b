"""Read-only HTTP lookups over an exported or indexed citation set.

The whole index is held in memory as adjacency maps built once per load;
a reload builds a fresh :class:`CitationService` and swaps a single
reference, so a request sees either the old or the new index.  Memory is
the scaling limit: roughly a few hundred bytes per citation.

Responses reuse the CSV column names (``oci`` is the bare digit pair) plus
``sources``.  List endpoints take ``limit`` (default 1000, at most 10000)
and ``offset``; they also send the full result size in ``X-Total-Count``.
"""

from __future__ import annotations

import threading
from collections import Counter, defaultdict
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Any, Callable, Iterable

from fastapi import FastAPI, HTTPException, Query, Request, Response

from . import __version__
from .exporters import read_citations_csv
from .identifiers import ExternalId, MalformedIdentifier
from .index import Citation, Oci, coverage_stats
from .meta import Omid, read_mapping_csv

DEFAULT_LIMIT = 1000
MAX_LIMIT = 10_000
TOKEN_HEADER = "access-token"
DIAGNOSTIC_HEADER = "X-Citeindex-Diagnostic"


def citation_json(c: Citation) -> dict[str, Any]:
    return {
        "oci": c.oci.digits,
        "citing": str(c.citing),
        "cited": str(c.cited),
        "creation": str(c.creation_date) if c.creation_date else "",
        "timespan": str(c.timespan) if c.timespan else "",
        "author_sc": "yes" if c.author_self else "no",
        "journal_sc": "yes" if c.journal_self else "no",
        "sources": sorted(s.value for s in c.sources),
    }


class CitationService:
    """Immutable lookup tables over one citation set."""

    def __init__(self, citations: Iterable[Citation], mapping: dict[str, str] | None = None):
        citations = sorted(citations, key=lambda c: c.oci)
        self.by_oci: dict[Oci, Citation] = {c.oci: c for c in citations}
        incoming: dict[Omid, list[Citation]] = defaultdict(list)
        outgoing: dict[Omid, list[Citation]] = defaultdict(list)
        for c in citations:
            incoming[c.cited].append(c)
            outgoing[c.citing].append(c)
        self.incoming = dict(incoming)
        self.outgoing = dict(outgoing)
        self.mapping = {k: Omid.parse(v) for k, v in (mapping or {}).items()}
        self.coverage = coverage_stats(citations).to_json()

    def __len__(self) -> int:
        return len(self.by_oci)

    def resolve(self, text: str) -> Omid | None:
        """OMID for an ``omid:`` or ``scheme:value`` id; None when unmapped.

        Raises ValueError when ``text`` is not an identifier at all.
        """
        if text.startswith("omid:"):
            return Omid.parse(text)
        id = ExternalId.parse(text)
        return self.mapping.get(str(id))


def index_files(index_dir: Path) -> list[Path]:
    """The index state file, or else the CSV dump shards (provenance excluded)."""
    state = index_dir / "citations.csv"
    if state.exists():
        return [state]
    shards = [p for p in sorted(index_dir.glob("*-csv-*.csv*")) if "_prov-" not in p.name]
    if not shards:
        raise FileNotFoundError(f"no citations.csv or CSV dump in {index_dir}")
    return shards


def load_service(index_dir: str | Path, mapping_file: str | Path | None = None) -> CitationService:
    citations = read_citations_csv(index_files(Path(index_dir)))
    mapping = read_mapping_csv(mapping_file) if mapping_file else {}
    return CitationService(citations, mapping)


class ServiceHolder:
    """Atomic reference to the current service; None until the first load."""

    def __init__(self, service: CitationService | None = None):
        self.service = service
        self.usage: Counter = Counter()
        self._usage_lock = threading.Lock()

    def swap(self, service: CitationService) -> None:
        self.service = service

    def count(self, token: str | None) -> None:
        with self._usage_lock:
            self.usage[token or "anonymous"] += 1


def create_app(service: CitationService | None = None,
               loader: Callable[[], CitationService] | None = None) -> FastAPI:
    """Build the app.  With ``loader`` the index is loaded in a background
    thread at startup; requests get 503 until it is in place."""
    holder = ServiceHolder(service)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        if loader is not None:
            threading.Thread(target=lambda: holder.swap(loader()), daemon=True).start()
        yield

    app = FastAPI(title="citeindex", version=__version__, lifespan=lifespan)
    app.state.holder = holder

    def current(request: Request) -> CitationService:
        holder.count(request.headers.get(TOKEN_HEADER))
        svc = holder.service
        if svc is None:
            raise HTTPException(503, "index is still loading")
        return svc

    def endpoint(svc: CitationService, text: str, response: Response) -> Omid | None:
        try:
            omid = svc.resolve(text)
        except (MalformedIdentifier, ValueError):
            raise HTTPException(400, f"not an identifier: {text}") from None
        if omid is None:
            response.headers[DIAGNOSTIC_HEADER] = "identifier not mapped to an OMID"
        return omid

    def listing(table: str, text: str, request: Request, response: Response,
                limit: int, offset: int) -> list[dict[str, Any]]:
        svc = current(request)
        omid = endpoint(svc, text, response)
        found = getattr(svc, table).get(omid, []) if omid else []
        response.headers["X-Total-Count"] = str(len(found))
        return [citation_json(c) for c in found[offset:offset + limit]]

    def counting(table: str, text: str, request: Request, response: Response) -> dict[str, Any]:
        svc = current(request)
        omid = endpoint(svc, text, response)
        return {"id": text, "count": len(getattr(svc, table).get(omid, [])) if omid else 0}

    @app.get("/health")
    def health(request: Request) -> dict[str, Any]:
        svc = current(request)
        return {"status": "ok", "version": __version__, "citations": len(svc)}

    @app.get("/stats")
    def stats(request: Request) -> dict[str, Any]:
        return current(request).coverage

    @app.get("/citation/{oci}")
    def citation(oci: str, request: Request) -> dict[str, Any]:
        svc = current(request)
        try:
            key = Oci.parse(oci)
        except ValueError:
            raise HTTPException(400, f"malformed OCI: {oci}") from None
        found = svc.by_oci.get(key)
        if found is None:
            raise HTTPException(404, f"unknown OCI: {oci}")
        return citation_json(found)

    @app.get("/citations/{id:path}")
    def citations(id: str, request: Request, response: Response,
                  limit: int = Query(DEFAULT_LIMIT, ge=1, le=MAX_LIMIT),
                  offset: int = Query(0, ge=0)) -> list[dict[str, Any]]:
        return listing("incoming", id, request, response, limit, offset)

    @app.get("/references/{id:path}")
    def references(id: str, request: Request, response: Response,
                   limit: int = Query(DEFAULT_LIMIT, ge=1, le=MAX_LIMIT),
                   offset: int = Query(0, ge=0)) -> list[dict[str, Any]]:
        return listing("outgoing", id, request, response, limit, offset)

    @app.get("/citation-count/{id:path}")
    def citation_count(id: str, request: Request, response: Response) -> dict[str, Any]:
        return counting("incoming", id, request, response)

    @app.get("/reference-count/{id:path}")
    def reference_count(id: str, request: Request, response: Response) -> dict[str, Any]:
        return counting("outgoing", id, request, response)

    return app
