"""Source adapters: native dumps to canonical metadata and citation-pair rows."""

from .base import (AuthorKey, MetadataRow, RawCitationPair, RunReport, SourceTag,
                   iter_csv_rows, iter_json_records, read_citation_csv, read_metadata_csv,
                   write_citation_csv, write_metadata_csv)
from .crossref import parse_crossref
from .datacite import parse_datacite
from .jalc import parse_jalc
from .nih import parse_nih
from .scholix import parse_scholix

PARSERS = {
    SourceTag.CROSSREF: parse_crossref,
    SourceTag.NIH_OCC: parse_nih,
    SourceTag.DATACITE: parse_datacite,
    SourceTag.OPENAIRE: parse_scholix,
    SourceTag.JALC: parse_jalc,
}

# file patterns each adapter reads from an input directory
INPUT_PATTERNS = {
    SourceTag.CROSSREF: ("*.json", "*.json.gz", "*.jsonl", "*.jsonl.gz"),
    SourceTag.NIH_OCC: ("*.csv", "*.csv.gz"),
    SourceTag.DATACITE: ("*.ndjson", "*.ndjson.gz", "*.jsonl", "*.jsonl.gz", "*.json", "*.json.gz"),
    SourceTag.OPENAIRE: ("*.json", "*.json.gz", "*.jsonl", "*.jsonl.gz"),
    SourceTag.JALC: ("*.json", "*.json.gz", "*.jsonl", "*.jsonl.gz"),
}

__all__ = [
    "AuthorKey", "MetadataRow", "PARSERS", "INPUT_PATTERNS", "RawCitationPair", "RunReport",
    "SourceTag", "iter_csv_rows", "iter_json_records", "parse_crossref", "parse_datacite",
    "parse_jalc", "parse_nih", "parse_scholix", "read_citation_csv", "read_metadata_csv",
    "write_citation_csv", "write_metadata_csv",
]
