"""Persistent identifier handling: normalization, syntax checks, existence checks.

Every identifier travelling through the pipeline is an :class:`ExternalId`,
written canonically as ``scheme:value``.  Prefix table:

============  =====================================  ==========================
scheme        canonical value                        syntax rule
============  =====================================  ==========================
doi           lowercase, ``10.<registrant>/<sfx>``   prefix ``10.``, non-empty suffix
pmid          digits, no leading zero                1 to 8 digits
pmc           ``PMC`` + digits, no leading zero      ``PMC[1-9][0-9]*``
viaf          digits                                 1 to 22 digits
wikidata      ``Q`` + digits                         ``Q[1-9][0-9]*``
wikipedia     page id digits                         ``[1-9][0-9]*``
ror           lowercase 9 chars                      ``0[a-z0-9]{6}[0-9]{2}``
orcid         ``NNNN-NNNN-NNNN-NNNC``                ISO 7064 mod 11-2
arxiv         lowercase, version kept                new or old style
jid           trimmed token                          ``[A-Za-z0-9][A-Za-z0-9_.-]*``
issn          ``NNNN-NNNC``                          weighted mod 11
isbn          10 or 13 chars, no separators          mod 11 / alternating 1-3 mod 10
url           scheme lowercased, no trailing slash   http(s)/ftp with a host
============  =====================================  ==========================
"""

from __future__ import annotations

import enum
import logging
import re
import threading
from dataclasses import dataclass
from functools import lru_cache
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterator, Protocol
from urllib.parse import unquote, urlsplit, urlunsplit

log = logging.getLogger(__name__)


class MalformedIdentifier(ValueError):
    """Raw identifier text cannot be coerced to its scheme's shape."""


class UnknownScheme(MalformedIdentifier):
    pass


class ClientUnavailable(RuntimeError):
    """The existence-check backend could not be reached."""


class IdentifierScheme(str, enum.Enum):
    DOI = "doi"
    PMID = "pmid"
    PMC = "pmc"
    VIAF = "viaf"
    WIKIDATA = "wikidata"
    WIKIPEDIA = "wikipedia"
    ROR = "ror"
    ORCID = "orcid"
    ARXIV = "arxiv"
    JID = "jid"
    ISSN = "issn"
    ISBN = "isbn"
    URL = "url"

    @classmethod
    def parse(cls, text: str) -> "IdentifierScheme":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise UnknownScheme(f"unknown identifier scheme {text!r}") from None

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, order=True)
class ExternalId:
    scheme: IdentifierScheme
    value: str

    def __str__(self) -> str:
        return f"{self.scheme.value}:{self.value}"

    @classmethod
    def parse(cls, text: str) -> "ExternalId":
        """Parse ``scheme:value`` text, normalizing the value."""
        return _parse_id(text)


@lru_cache(maxsize=1 << 18)
def _parse_id(text: str) -> ExternalId:
    scheme, sep, value = text.strip().partition(":")
    if not sep:
        raise MalformedIdentifier(f"missing scheme prefix in {text!r}")
    return normalize(IdentifierScheme.parse(scheme), value)


# --- normalization -----------------------------------------------------------

_DOI_PREFIXES = re.compile(
    r"^(?:https?://(?:dx\.)?doi\.org/|doi\.org/|doi:\s*|info:doi/)", re.IGNORECASE
)
_ORCID_PREFIXES = re.compile(r"^(?:https?://(?:www\.)?orcid\.org/|orcid:)", re.IGNORECASE)
_ARXIV_PREFIXES = re.compile(r"^(?:https?://(?:www\.)?arxiv\.org/(?:abs|pdf)/|arxiv:)", re.IGNORECASE)


def _strip_label(raw: str, label: str) -> str:
    if raw.lower().startswith(label + ":"):
        return raw[len(label) + 1:].strip()
    return raw


def _digits(raw: str, scheme: str) -> str:
    if not raw.isdigit():
        raise MalformedIdentifier(f"{scheme} must be numeric: {raw!r}")
    value = raw.lstrip("0")
    if not value:
        raise MalformedIdentifier(f"{scheme} cannot be zero: {raw!r}")
    return value


def _norm_doi(raw: str) -> str:
    doi = re.sub(r"\s+", "", unquote(_DOI_PREFIXES.sub("", raw)))
    if not doi.startswith("10."):
        raise MalformedIdentifier(f"DOI must start with '10.': {raw!r}")
    return doi.lower()


def _norm_pmid(raw: str) -> str:
    raw = re.sub(r"^(?:pmid:?\s*|https?://pubmed\.ncbi\.nlm\.nih\.gov/)", "", raw, flags=re.I)
    return _digits(raw.rstrip("/"), "PMID")


def _norm_pmc(raw: str) -> str:
    raw = _strip_label(raw, "pmc")
    if raw[:3].upper() == "PMC":
        raw = raw[3:]
    return "PMC" + _digits(raw, "PMC")


def _norm_issn(raw: str) -> str:
    body = re.sub(r"[^0-9X]", "", _strip_label(raw, "issn").upper())
    if len(body) != 8 or "X" in body[:7]:
        raise MalformedIdentifier(f"ISSN needs 7 digits plus a check character: {raw!r}")
    return f"{body[:4]}-{body[4:]}"


def _norm_isbn(raw: str) -> str:
    body = re.sub(r"[\s-]", "", _strip_label(raw, "isbn")).upper()
    if not (
        re.fullmatch(r"[0-9]{9}[0-9X]", body) or re.fullmatch(r"[0-9]{13}", body)
    ):
        raise MalformedIdentifier(f"ISBN must have 10 or 13 characters: {raw!r}")
    return body


def _norm_orcid(raw: str) -> str:
    body = re.sub(r"[\s-]", "", _ORCID_PREFIXES.sub("", raw)).upper()
    if not re.fullmatch(r"[0-9]{15}[0-9X]", body):
        raise MalformedIdentifier(f"ORCID needs 16 characters: {raw!r}")
    return "-".join(body[i:i + 4] for i in range(0, 16, 4))


def _norm_arxiv(raw: str) -> str:
    value = _ARXIV_PREFIXES.sub("", raw).strip().lower()
    if not value or re.search(r"\s", value):
        raise MalformedIdentifier(f"bad arXiv id: {raw!r}")
    return value


def _norm_url(raw: str) -> str:
    parts = urlsplit(_strip_label(raw, "url"))
    if not parts.scheme or not parts.netloc:
        raise MalformedIdentifier(f"URL needs a scheme and a host: {raw!r}")
    url = urlunsplit(parts._replace(scheme=parts.scheme.lower()))
    return url.rstrip("/")


def _norm_viaf(raw: str) -> str:
    raw = re.sub(r"^https?://(?:www\.)?viaf\.org/viaf/", "", _strip_label(raw, "viaf"), flags=re.I)
    return _digits(raw.rstrip("/"), "VIAF")


def _norm_wikidata(raw: str) -> str:
    raw = re.sub(r"^https?://(?:www\.)?wikidata\.org/(?:wiki|entity)/", "", _strip_label(raw, "wikidata"), flags=re.I)
    raw = raw.upper()
    if not raw.startswith("Q"):
        raise MalformedIdentifier(f"Wikidata ids start with Q: {raw!r}")
    return "Q" + _digits(raw[1:], "Wikidata")


def _norm_wikipedia(raw: str) -> str:
    return _digits(_strip_label(raw, "wikipedia"), "Wikipedia")


def _norm_ror(raw: str) -> str:
    value = re.sub(r"^https?://(?:www\.)?ror\.org/", "", _strip_label(raw, "ror"), flags=re.I)
    value = value.rstrip("/").lower()
    if not re.fullmatch(r"[a-z0-9]+", value):
        raise MalformedIdentifier(f"bad ROR id: {raw!r}")
    return value


def _norm_jid(raw: str) -> str:
    value = _strip_label(raw, "jid")
    if not value or re.search(r"\s", value):
        raise MalformedIdentifier(f"bad JID: {raw!r}")
    return value


_NORMALIZERS: dict[IdentifierScheme, Callable[[str], str]] = {
    IdentifierScheme.DOI: _norm_doi,
    IdentifierScheme.PMID: _norm_pmid,
    IdentifierScheme.PMC: _norm_pmc,
    IdentifierScheme.VIAF: _norm_viaf,
    IdentifierScheme.WIKIDATA: _norm_wikidata,
    IdentifierScheme.WIKIPEDIA: _norm_wikipedia,
    IdentifierScheme.ROR: _norm_ror,
    IdentifierScheme.ORCID: _norm_orcid,
    IdentifierScheme.ARXIV: _norm_arxiv,
    IdentifierScheme.JID: _norm_jid,
    IdentifierScheme.ISSN: _norm_issn,
    IdentifierScheme.ISBN: _norm_isbn,
    IdentifierScheme.URL: _norm_url,
}


def normalize(scheme: IdentifierScheme | str, raw: str) -> ExternalId:
    """Return the canonical :class:`ExternalId` for ``raw`` under ``scheme``.

    Raises :class:`MalformedIdentifier` when the text cannot take the
    scheme's shape.  Normalizing an already normalized value is the identity.
    """
    if not isinstance(scheme, IdentifierScheme):
        scheme = IdentifierScheme.parse(scheme)
    if raw is None or not str(raw).strip():
        raise MalformedIdentifier(f"empty {scheme.value} identifier")
    return ExternalId(scheme, _NORMALIZERS[scheme](str(raw).strip()))


# --- syntax and check digits -------------------------------------------------

def issn_check_char(body: str) -> str:
    """Check character for the first seven ISSN digits."""
    total = sum(int(d) * w for d, w in zip(body, range(8, 1, -1)))
    check = (11 - total % 11) % 11
    return "X" if check == 10 else str(check)


def isbn10_check_char(body: str) -> str:
    total = sum(int(d) * w for d, w in zip(body, range(10, 1, -1)))
    check = (11 - total % 11) % 11
    return "X" if check == 10 else str(check)


def isbn13_check_digit(body: str) -> str:
    total = sum(int(d) * (3 if i % 2 else 1) for i, d in enumerate(body))
    return str((10 - total % 10) % 10)


def orcid_check_char(body: str) -> str:
    """ISO 7064 MOD 11-2 check character over the 15 base digits."""
    total = 0
    for d in body:
        total = (total + int(d)) * 2
    check = (12 - total % 11) % 11
    return "X" if check == 10 else str(check)


_SYNTAX: dict[IdentifierScheme, re.Pattern[str]] = {
    IdentifierScheme.DOI: re.compile(r"10\.[^\s/]+/\S+"),
    IdentifierScheme.PMID: re.compile(r"[1-9][0-9]{0,7}"),
    IdentifierScheme.PMC: re.compile(r"PMC[1-9][0-9]*"),
    IdentifierScheme.VIAF: re.compile(r"[1-9][0-9]{0,21}"),
    IdentifierScheme.WIKIDATA: re.compile(r"Q[1-9][0-9]*"),
    IdentifierScheme.WIKIPEDIA: re.compile(r"[1-9][0-9]*"),
    IdentifierScheme.ROR: re.compile(r"0[a-z0-9]{6}[0-9]{2}"),
    IdentifierScheme.ORCID: re.compile(r"[0-9]{4}-[0-9]{4}-[0-9]{4}-[0-9]{3}[0-9X]"),
    IdentifierScheme.ARXIV: re.compile(
        r"[0-9]{4}\.[0-9]{4,5}(?:v[0-9]+)?|[a-z-]+(?:\.[a-z]{2})?/[0-9]{7}(?:v[0-9]+)?"
    ),
    IdentifierScheme.JID: re.compile(r"[A-Za-z0-9][A-Za-z0-9_.-]*"),
    IdentifierScheme.ISSN: re.compile(r"[0-9]{4}-[0-9]{3}[0-9X]"),
    IdentifierScheme.ISBN: re.compile(r"[0-9]{9}[0-9X]|[0-9]{13}"),
}


def validate_syntax(id: ExternalId) -> bool:
    """True iff the normalized value satisfies its scheme's structural rule."""
    value = id.value
    if id.scheme is IdentifierScheme.URL:
        parts = urlsplit(value)
        return parts.scheme in ("http", "https", "ftp") and bool(parts.netloc) and " " not in value
    if not _SYNTAX[id.scheme].fullmatch(value):
        return False
    if id.scheme is IdentifierScheme.ISSN:
        return issn_check_char(value[:4] + value[5:8]) == value[8]
    if id.scheme is IdentifierScheme.ORCID:
        digits = value.replace("-", "")
        return orcid_check_char(digits[:15]) == digits[15]
    if id.scheme is IdentifierScheme.ISBN:
        if len(value) == 10:
            return isbn10_check_char(value[:9]) == value[9]
        return isbn13_check_digit(value[:12]) == value[12]
    return True


# --- existence checks --------------------------------------------------------

class Status(str, enum.Enum):
    VALID = "valid"
    INVALID = "invalid"
    UNKNOWN = "unknown"


class Origin(str, enum.Enum):
    SYNTAX_ONLY = "syntax-only"
    CACHE = "cache"
    EXTERNAL = "external-service"


@dataclass(frozen=True)
class ExistenceVerdict:
    status: Status
    checked_at: datetime
    origin: Origin


def utcnow() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


class ValidationCache:
    """Thread-safe verdict cache, optionally backed by an append-only TSV file.

    File records are ``scheme<TAB>value<TAB>status<TAB>iso-timestamp``.  On
    reload the first final (valid/invalid) record for an id wins; unknown
    records are superseded by anything later.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[ExternalId, tuple[Status, datetime]] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                try:
                    scheme, value, status, stamp = line.split("\t")
                    key = ExternalId(IdentifierScheme.parse(scheme), value)
                    entry = (Status(status), datetime.fromisoformat(stamp))
                except ValueError as exc:
                    raise ValueError(f"{self.path}:{lineno}: bad cache record: {exc}") from None
                prior = self._entries.get(key)
                if prior is None or prior[0] is Status.UNKNOWN:
                    self._entries[key] = entry

    def get(self, id: ExternalId) -> tuple[Status, datetime] | None:
        return self._entries.get(id)

    def put(self, id: ExternalId, status: Status, checked_at: datetime) -> tuple[Status, datetime]:
        """Insert unless a final verdict is already stored; return what is stored."""
        with self._lock:
            prior = self._entries.get(id)
            if prior is not None and prior[0] is not Status.UNKNOWN:
                return prior
            self._entries[id] = (status, checked_at)
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
                    fh.write(f"{id.scheme.value}\t{id.value}\t{status.value}\t{checked_at.isoformat()}\n")
            return status, checked_at

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, id: object) -> bool:
        return id in self._entries

    def __iter__(self) -> Iterator[ExternalId]:
        return iter(list(self._entries))


class ExistenceClient(Protocol):
    def exists(self, id: ExternalId) -> bool | None:
        """True/False when known, None when the backend cannot say.

        Raises :class:`ClientUnavailable` when the backend is offline.
        """


class StubClient:
    """Answers from a fixed table, falling back to ``default``."""

    def __init__(self, default: bool | None = True, answers: dict[str, bool] | None = None,
                 online: bool = True):
        self.default = default
        self.answers = dict(answers or {})
        self.online = online
        self.calls = 0

    def exists(self, id: ExternalId) -> bool | None:
        self.calls += 1
        if not self.online:
            raise ClientUnavailable("stub client is offline")
        return self.answers.get(str(id), self.default)


class FixtureClient:
    """Reads ``scheme:value<TAB>valid|invalid`` lines; unlisted ids are unknown."""

    def __init__(self, path: str | Path):
        self.answers: dict[str, bool] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, status = line.partition("\t")
                self.answers[str(ExternalId.parse(key))] = status.strip() == "valid"

    def exists(self, id: ExternalId) -> bool | None:
        return self.answers.get(str(id))


class HttpClient:
    """Best-effort lookups against public registries.

    Only DOI, PMID and ORCID are checked; other schemes yield None.
    """

    ENDPOINTS = {
        IdentifierScheme.DOI: "https://doi.org/api/handles/{}",
        IdentifierScheme.PMID: "https://pubmed.ncbi.nlm.nih.gov/{}/",
        IdentifierScheme.ORCID: "https://pub.orcid.org/v3.0/{}",
    }

    def __init__(self, client=None, timeout: float = 10.0):
        import httpx

        self._httpx = httpx
        self._client = client or httpx.Client(timeout=timeout, follow_redirects=True)

    def exists(self, id: ExternalId) -> bool | None:
        template = self.ENDPOINTS.get(id.scheme)
        if template is None:
            return None
        try:
            response = self._client.get(template.format(id.value))
        except self._httpx.HTTPError as exc:
            raise ClientUnavailable(str(exc)) from exc
        if response.status_code >= 500:
            raise ClientUnavailable(f"{response.status_code} from {response.url}")
        if id.scheme is IdentifierScheme.DOI:
            if response.status_code != 200:
                return False if response.status_code == 404 else None
            return response.json().get("responseCode") == 1
        if response.status_code == 200:
            return True
        return False if response.status_code == 404 else None


def check_existence(id: ExternalId, cache: ValidationCache, client: ExistenceClient,
                    now: Callable[[], datetime] = utcnow) -> ExistenceVerdict:
    """Look the id up in ``cache`` first, then ask ``client`` and remember the answer."""
    if not validate_syntax(id):
        raise ValueError(f"{id} fails its syntax check")
    if id.scheme is IdentifierScheme.URL:
        return ExistenceVerdict(Status.VALID, now(), Origin.SYNTAX_ONLY)
    cached = cache.get(id)
    if cached is not None and cached[0] is not Status.UNKNOWN:
        return ExistenceVerdict(cached[0], cached[1], Origin.CACHE)
    try:
        answer = client.exists(id)
    except ClientUnavailable as exc:
        log.warning("existence check for %s unavailable: %s", id, exc)
        answer = None
    status = Status.UNKNOWN if answer is None else Status.VALID if answer else Status.INVALID
    stored_status, stored_at = cache.put(id, status, now())
    if stored_status is not status:
        # a concurrent worker stored a final verdict first
        return ExistenceVerdict(stored_status, stored_at, Origin.CACHE)
    return ExistenceVerdict(status, stored_at, Origin.EXTERNAL)


class IdentifierChecker:
    """Admission gate used by the source adapters.

    Rejects ids that fail the syntax check or that the existence check
    declares invalid.  Without a client only the syntax is checked.
    """

    def __init__(self, cache: ValidationCache | None = None, client: ExistenceClient | None = None):
        self.cache = cache if cache is not None else ValidationCache()
        self.client = client

    def __call__(self, id: ExternalId) -> bool:
        if not validate_syntax(id):
            return False
        if self.client is None:
            return True
        return check_existence(id, self.cache, self.client).status is not Status.INVALID
