"""Citation index construction: identifiers, OMID deduplication, OCI citations and dumps."""

from importlib.metadata import PackageNotFoundError, version

DISTRIBUTION = "artifact"

try:
    __version__ = version(DISTRIBUTION)
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0.0.0+unknown"
