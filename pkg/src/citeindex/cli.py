"""``citeindex`` command line: preprocess, meta, index, export, stats, serve.

Options may also come from a TOML file given with ``--config``.  Each table
is named after a subcommand and holds option names as keys, dashes or
underscores alike; flags on the command line win::

    [preprocess]
    jobs = 4

    [export]
    format = ["csv", "nt"]
    shard-size = 500000

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click

from . import __version__
from .adapters.base import SourceTag
from .identifiers import FixtureClient, HttpClient, IdentifierChecker, StubClient, ValidationCache
from .meta import DEFAULT_SUPPLIER, StoreCorrupt, UnknownOmid
from .pipeline import FORMATS, ExportOptions, PipelineError, preprocess, read_coverage, run_export, run_index, run_meta
from .provenance import DEFAULT_AGENT, DEFAULT_BASE

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SOURCES = [s.value for s in SourceTag]


def load_config(path: str | Path, group: click.Group) -> dict:
    """Read the TOML file into a click ``default_map``.

    Keys are option names (``shard-size``, ``format``) or parameter names
    (``shard_size``, ``formats``).
    """
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise click.BadParameter(str(exc), param_hint="--config") from exc
    config = {}
    for command, options in raw.items():
        sub = group.commands.get(command)
        if sub is None or not isinstance(options, dict):
            raise click.BadParameter(f"{command!r} is not a subcommand table", param_hint="--config")
        names = {}
        for param in sub.params:
            names[param.name] = param.name
            for opt in param.opts:
                names[opt.lstrip("-").replace("-", "_")] = param.name
        config[command] = {}
        for key, value in options.items():
            name = names.get(key.replace("-", "_"))
            if name is None:
                raise click.BadParameter(f"unknown option {key!r} for {command}", param_hint="--config")
            config[command][name] = value
    return config


def _echo_json(obj) -> None:
    click.echo(json.dumps(obj, indent=2, sort_keys=True))


def _fail(exc: Exception) -> click.ClickException:
    return click.ClickException(str(exc))


@click.group()
@click.version_option(__version__, prog_name="citeindex")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), help="TOML options file.")
@click.option("-v", "--verbose", count=True, help="More logging; repeat for debug.")
@click.pass_context
def main(ctx: click.Context, config: str | None, verbose: int) -> None:
    """Build a citation index from bibliographic source dumps."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if config:
        ctx.default_map = load_config(config, main)


@main.command("preprocess")
@click.option("--source", required=True, type=click.Choice(SOURCES))
@click.option("--input", "input_dir", required=True, type=click.Path(file_okay=False))
@click.option("--output", "output_dir", required=True, type=click.Path(file_okay=False))
@click.option("--jobs", type=int, default=lambda: os.cpu_count() or 1, show_default="all cores")
@click.option("--id-cache", type=click.Path(dir_okay=False),
              help="Validation cache file; enables existence checks.")
@click.option("--existence-fixture", type=click.Path(exists=True, dir_okay=False),
              help="Answer existence checks from a fixture file instead of the network.")
@click.option("--online/--offline", default=False, help="Ask registries over HTTP.")
def preprocess_cmd(source, input_dir, output_dir, jobs, id_cache, existence_fixture, online):
    """Extract metadata and citation-pair CSVs from one source's dump."""
    admit = None
    if id_cache or existence_fixture or online:
        if existence_fixture:
            client = FixtureClient(existence_fixture)
        elif online:
            client = HttpClient()
        else:
            client = StubClient(default=None)
        admit = IdentifierChecker(ValidationCache(id_cache), client)
    try:
        report = preprocess(source, input_dir, output_dir, admit=admit, jobs=jobs)
    except (PipelineError, OSError) as exc:
        raise _fail(exc) from exc
    _echo_json(report["counters"])


@main.command("meta")
@click.option("--metadata", multiple=True, type=click.Path(exists=True, file_okay=False),
              help="Preprocess output directory; repeatable.")
@click.option("--store", required=True, type=click.Path(dir_okay=False))
@click.option("--supplier", default=DEFAULT_SUPPLIER, show_default=True)
@click.option("--seed-mapping", type=click.Path(exists=True, dir_okay=False),
              help="Adopt an existing id,omid mapping before minting.")
@click.option("--pairs", multiple=True, type=click.Path(exists=True, file_okay=False),
              help="Also mint id-only resources for unmapped pair endpoints.")
@click.option("--mapping-csv", type=click.Path(dir_okay=False))
def meta_cmd(metadata, store, supplier, seed_mapping, pairs, mapping_csv):
    """Resolve or mint OMIDs and persist the meta store."""
    try:
        report = run_meta(metadata, store, supplier=supplier, seed_mapping=seed_mapping,
                          pairs_dirs=pairs, mapping_csv=mapping_csv)
    except (PipelineError, StoreCorrupt, OSError, ValueError) as exc:
        raise _fail(exc) from exc
    _echo_json(report["counters"])


@main.command("index")
@click.option("--pairs", required=True, multiple=True, type=click.Path(exists=True, file_okay=False),
              help="Preprocess output directory; repeatable.")
@click.option("--source", type=click.Choice(SOURCES),
              help="Source of every --pairs directory (default: read from its report).")
@click.option("--store", required=True, type=click.Path(dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--agent", default=DEFAULT_AGENT, show_default=True)
@click.option("--base", default=DEFAULT_BASE, show_default=True)
def index_cmd(pairs, source, store, out, agent, base):
    """Build citations and provenance from pair CSVs."""
    try:
        report = run_index([(p, source) for p in pairs], store, out, agent=agent, base=base)
    except (PipelineError, StoreCorrupt, UnknownOmid, OSError) as exc:
        raise _fail(exc) from exc
    _echo_json(report["counters"])


@main.command("export")
@click.option("--index", "index_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--format", "formats", multiple=True, type=click.Choice(FORMATS),
              help="Dump format; repeatable (default: all).")
@click.option("--store", type=click.Path(dir_okay=False), help="Meta store, needed for scholix.")
@click.option("--dataset", default="index", show_default=True)
@click.option("--run-date", help="Date stamped on the dumps (default: today).")
@click.option("--shard-size", type=click.IntRange(min=1), default=ExportOptions.shard_size, show_default=True)
@click.option("--compress/--no-compress", default=True, show_default=True)
@click.option("--with-sources", is_flag=True, help="Add a sources column to the CSV dump.")
@click.option("--provenance/--no-provenance", default=True, show_default=True)
@click.option("--base", default=DEFAULT_BASE, show_default=True)
@click.option("--download-base", help="URL prefix of the published dump files.")
def export_cmd(index_dir, out, formats, store, dataset, run_date, shard_size, compress,
               with_sources, provenance, base, download_base):
    """Write CSV, N-Triples and/or Scholix dumps plus a dataset descriptor."""
    opts = ExportOptions(dataset=dataset, shard_size=shard_size, compress=compress,
                         with_sources=with_sources, provenance=provenance, base=base,
                         download_base=download_base)
    if run_date:
        opts.run_date = run_date
    try:
        manifest = run_export(index_dir, out, formats or FORMATS, store_path=store, options=opts)
    except (PipelineError, StoreCorrupt, OSError, ValueError) as exc:
        raise _fail(exc) from exc
    click.echo(f"{manifest['citations']} citations, {len(manifest['files'])} files")


@main.command("stats")
@click.option("--index", "index_dir", required=True, type=click.Path(exists=True, file_okay=False))
def stats_cmd(index_dir):
    """Print the coverage report as JSON."""
    try:
        _echo_json(read_coverage(index_dir).to_json())
    except (PipelineError, OSError, ValueError) as exc:
        raise _fail(exc) from exc


@main.command("serve")
@click.option("--index-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--mapping-file", type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve_cmd(index_dir, mapping_file, host, port):
    """Serve the REST lookup API."""
    import uvicorn

    from .api import create_app, load_service

    app = create_app(loader=lambda: load_service(index_dir, mapping_file))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
