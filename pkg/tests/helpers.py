"""Shared test utilities: a strict N-Triples line checker, random citation
sets and a fixed-clock runner for the five-source fixture pipeline."""

from __future__ import annotations

import random
import re
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

from citeindex.adapters.base import SourceTag
from citeindex.dates import PartialDate, compute_timespan
from citeindex.index import Citation, make_oci
from citeindex.meta import Omid
from citeindex.pipeline import preprocess, run_index, run_meta

FIXTURES = Path(__file__).parent / "fixtures"
PIPELINE = FIXTURES / "pipeline"
GOLDEN = FIXTURES / "golden"
SOURCE_ORDER = ["crossref", "nih_occ", "datacite", "openaire", "jalc"]

# W3C N-Triples productions, transcribed independently of the writer
_UCHAR = r"(?:\\u[0-9A-Fa-f]{4}|\\U[0-9A-Fa-f]{8})"
_ECHAR = r"\\[tbnrf\"'\\]"
_IRIREF = rf"<(?:[^\x00-\x20<>\"{{}}|^`\\]|{_UCHAR})*>"
_BNODE = r"_:[A-Za-z0-9_](?:[A-Za-z0-9_.\-]*[A-Za-z0-9_\-])?"
_LANG = r"@[a-zA-Z]+(?:-[a-zA-Z0-9]+)*"
_LITERAL = rf"\"(?:[^\x22\x5C\x0A\x0D]|{_ECHAR}|{_UCHAR})*\"(?:\^\^{_IRIREF}|{_LANG})?"
NT_LINE = re.compile(
    rf"(?P<s>{_IRIREF}|{_BNODE})[ \t]+(?P<p>{_IRIREF})[ \t]+(?P<o>{_IRIREF}|{_BNODE}|{_LITERAL})[ \t]*\."
)


# --- independent check-digit oracles (verification-form sums) --------------

def _val(c):
    return 10 if c == "X" else int(c)


def oracle_issn(s):
    return sum(_val(c) * w for c, w in zip(s, [8, 7, 6, 5, 4, 3, 2, 1])) % 11 == 0


def oracle_isbn10(s):
    return sum(i * _val(c) for i, c in enumerate(s, 1)) % 11 == 0


def oracle_isbn13(s):
    return sum(int(c) * (1, 3)[i % 2] for i, c in enumerate(s)) % 10 == 0


def oracle_orcid(s):
    return (sum(_val(c) * 2 ** (15 - i) for i, c in enumerate(s))) % 11 == 1


def candidates(rng, n, body_len, checks, oracle):
    """Half random check characters, half the one the oracle accepts."""
    out = []
    for k in range(n):
        body = "".join(rng.choice("0123456789") for _ in range(body_len))
        if k % 2:
            good = [c for c in checks if oracle(body + c)]
            out.append(body + rng.choice(good))
        else:
            out.append(body + rng.choice(checks))
    return out


def check_ntriples(text: str) -> int:
    """Number of triples in ``text``; AssertionError on any bad line or CR."""
    assert "\r" not in text, "CR found; N-Triples dumps use LF only"
    assert text == "" or text.endswith("\n")
    count = 0
    for n, line in enumerate(text.split("\n")[:-1], 1):
        assert NT_LINE.fullmatch(line), f"line {n} is not a valid triple: {line!r}"
        count += 1
    return count


def clock(start: datetime | None = None, step: timedelta = timedelta(seconds=1)):
    """A deterministic ``now`` that advances by ``step`` per call."""
    state = {"t": start or datetime(2024, 1, 1, tzinfo=timezone.utc)}

    def now() -> datetime:
        t = state["t"]
        state["t"] = t + step
        return t

    return now


def random_date(rng: random.Random, full: bool = False) -> PartialDate:
    d = date(1900, 1, 1) + timedelta(days=rng.randint(0, 130 * 365))
    roll = 1.0 if full else rng.random()
    if roll < 0.2:
        return PartialDate(d.year)
    if roll < 0.4:
        return PartialDate(d.year, d.month)
    return PartialDate(d.year, d.month, d.day)


def random_omid(rng: random.Random, supplier: str = "060") -> Omid:
    return Omid("br", supplier, rng.randint(1, 10**7))


def random_citations(rng: random.Random, n: int) -> list[Citation]:
    out: dict = {}
    while len(out) < n:
        a, b = random_omid(rng), random_omid(rng)
        if a == b:
            continue
        da = random_date(rng) if rng.random() < 0.9 else None
        db = random_date(rng) if rng.random() < 0.9 else None
        sources = set(rng.sample(list(SourceTag), rng.randint(0, 3)))
        c = Citation(make_oci(a, b), a, b, da,
                     compute_timespan(da, db) if da and db else None,
                     rng.random() < 0.2, rng.random() < 0.2, sources)
        out[c.oci] = c
    return list(out.values())


def run_fixture_pipeline(work: Path, now=None, sources=SOURCE_ORDER) -> dict:
    """preprocess x5, meta, index over the five-source fixture."""
    for s in sources:
        preprocess(s, PIPELINE / s, work / "pre" / s)
    meta = run_meta([work / "pre" / s for s in sources], work / "store.jsonl")
    index = run_index([(work / "pre" / s, None) for s in sources], work / "store.jsonl",
                      work / "idx", now=now or clock())
    return {"meta": meta, "index": index}


# the fixture's citations, by DOI, with the sources that assert each
FIXTURE_ORACLE = {
    ("10.1000/p1", "10.1000/p2"): {"crossref", "nih_occ"},
    ("10.1000/p1", "10.1000/p3"): {"crossref", "openaire"},
    ("10.1000/p3", "10.1000/p2"): {"crossref"},
    ("10.1000/p6", "10.1000/p2"): {"nih_occ"},
    ("10.1000/p4", "10.1000/p2"): {"datacite", "openaire"},
    ("10.1000/p4", "10.1000/p3"): {"datacite"},
    ("10.1000/p5", "10.1000/p1"): {"jalc"},
    ("10.1000/p5", "10.1000/p2"): {"jalc"},
}


def write_synthetic_corpus(directory: Path, works: int, refs_per_work: int, seed: int = 0,
                           files: int = 4) -> int:
    """Crossref-style JSON lines: ``works`` records each citing ``refs_per_work``
    distinct other works.  Returns the number of citation pairs written."""
    import json

    rng = random.Random(seed)
    directory.mkdir(parents=True, exist_ok=True)
    handles = [open(directory / f"part-{k}.jsonl", "w", encoding="utf-8") for k in range(files)]
    pairs = 0
    try:
        for n in range(works):
            d = date(1950, 1, 1) + timedelta(days=rng.randint(0, 70 * 365))
            refs = rng.sample(range(works), refs_per_work + 1)
            refs = [r for r in refs if r != n][:refs_per_work]
            record = {
                "DOI": f"10.5555/w{n}",
                "type": "journal-article",
                "title": [f"Work {n}"],
                "issued": {"date-parts": [[d.year, d.month, d.day]]},
                "reference": [{"key": f"r{r}", "DOI": f"10.5555/w{r}"} for r in refs],
            }
            handles[n % files].write(json.dumps(record) + "\n")
            pairs += len(refs)
    finally:
        for fh in handles:
            fh.close()
    return pairs
