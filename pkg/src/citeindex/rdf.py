"""Minimal N-Triples serialization: IRIs, typed literals, one triple per line."""

from __future__ import annotations

import re
from typing import Iterable, TextIO

RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
XSD = "http://www.w3.org/2001/XMLSchema#"
CITO = "http://purl.org/spar/cito/"
PROV = "http://www.w3.org/ns/prov#"
OCO = "https://w3id.org/oc/ontology/"
DCAT = "http://www.w3.org/ns/dcat#"
DCTERMS = "http://purl.org/dc/terms/"
VOID = "http://rdfs.org/ns/void#"
FOAF = "http://xmlns.com/foaf/0.1/"

RDF_TYPE = RDF + "type"

_BAD_IRI = re.compile(r'[\x00-\x20<>"{}|^`\\]')
_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t",
            "\b": "\\b", "\f": "\\f"}
_NEEDS_ESCAPE = re.compile(r'[\\"\x00-\x1f\x7f]')


class IRI(str):
    """A string that serializes as ``<...>``."""

    __slots__ = ()

    def __new__(cls, value: str):
        if not value or _BAD_IRI.search(value):
            raise ValueError(f"not a valid IRI: {value!r}")
        return super().__new__(cls, value)


class Literal:
    __slots__ = ("lexical", "datatype", "lang")

    def __init__(self, lexical: str, datatype: str | None = None, lang: str | None = None):
        if datatype and lang:
            raise ValueError("a literal has a datatype or a language tag, not both")
        self.lexical = str(lexical)
        self.datatype = IRI(datatype) if datatype else None
        self.lang = lang

    def __eq__(self, other):
        return (isinstance(other, Literal) and self.lexical == other.lexical
                and self.datatype == other.datatype and self.lang == other.lang)

    def __hash__(self):
        return hash((self.lexical, self.datatype, self.lang))

    def __repr__(self):
        return f"Literal({self.lexical!r}, {self.datatype!r})"


def escape(text: str) -> str:
    """Escape a literal's lexical form for N-Triples."""
    return _NEEDS_ESCAPE.sub(lambda m: _ESCAPES.get(m.group(0)) or f"\\u{ord(m.group(0)):04X}", text)


def term(value: IRI | Literal) -> str:
    if isinstance(value, Literal):
        text = f'"{escape(value.lexical)}"'
        if value.lang:
            return f"{text}@{value.lang}"
        if value.datatype:
            return f"{text}^^<{value.datatype}>"
        return text
    if isinstance(value, IRI):
        return f"<{value}>"
    raise TypeError(f"cannot serialize {value!r} as an N-Triples term")


Triple = tuple[IRI, IRI, "IRI | Literal"]


def line(s: IRI, p: IRI, o: IRI | Literal) -> str:
    return f"{term(s)} {term(p)} {term(o)} .\n"


def write_triples(fh: TextIO, triples: Iterable[Triple]) -> int:
    n = 0
    for s, p, o in triples:
        fh.write(line(s, p, o))
        n += 1
    return n
