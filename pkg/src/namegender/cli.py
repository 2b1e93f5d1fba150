"""Command-line interface.

Subcommands: ingest, combine, stats, split, train, infer, eval, analyze.
Every command that writes artifacts also writes a run manifest (command
line, input digests, seed, version, timestamp) next to them. All
randomness flows through the single --seed value recorded in the manifest,
so any command is byte-reproducible from identical inputs and seed; the
manifest itself is the only file carrying a timestamp.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import __version__
from . import analysis, corpus, evaluation, mle
from .corpus import CsvSchema, NameType
from .ensemble import (
    DEFAULT_DEFER_BAND,
    TwoStageConfig,
    TwoStageInferrer,
    VotingConfig,
    VotingInferrer,
)
from .inferrers import (
    HttpAdapter,
    Inferrer,
    MleInferrer,
    MockInferrer,
    parse_adapter_config,
    parse_kv_file,
)

logger = logging.getLogger("namegender")

_CONFIG_KEYS = {
    "seed": int,
    "out_dir": str,
    "format": str,
    "tau": float,
    "test_fraction": float,
    "bins": int,
}
_BUILTIN_DEFAULTS = {
    "seed": None,
    "out_dir": ".",
    "format": "tsv",
    "tau": mle.DEFAULT_TAU,
    "test_fraction": 0.1,
    "bins": None,
}


@dataclass
class RunManifest:
    """Reproducibility record written alongside every output artifact."""

    command: list[str]
    seed: int | None
    tool_version: str
    timestamp: str
    input_digests: dict[str, str] = field(default_factory=dict)
    config_digests: dict[str, str] = field(default_factory=dict)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_manifest(
    args: argparse.Namespace,
    out_dir: Path,
    name: str,
    inputs: Sequence[str | Path] = (),
    configs: Sequence[str | Path] = (),
) -> None:
    manifest = RunManifest(
        command=list(args._argv),
        seed=args.seed,
        tool_version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(),
        input_digests={str(p): _sha256(p) for p in inputs},
        config_digests={str(p): _sha256(p) for p in configs},
    )
    manifest.write(out_dir / f"{name}.manifest.json")


# --- inferrer specs -----------------------------------------------------------
#
# SPEC := [id=]kind:arg
#   mle:MODEL_FILE        trained frequency model
#   mock:JSON_FILE        fixed name -> prediction map
#   http:CONFIG_FILE      external service adapter
#   twostage:CONFIG_FILE  two-stage ensemble (see _build_twostage)


def _build_twostage(path: str, id: str | None, config_paths: list[Path]) -> Inferrer:
    """Two-stage config file keys:

    model = MODEL_FILE            stage-1 frequency model
    band = 0.25, 0.75             defer band (optional)
    fallback = SPEC               single fallback inferrer, or
    voters = SPEC; SPEC; SPEC     exactly three voting fallbacks
    id = NAME                     optional inferrer id
    """
    fields = parse_kv_file(path)
    if "model" not in fields:
        raise ValueError(f"{path}: two-stage config requires model =")
    base = Path(path).parent
    model_path = (base / fields["model"]).resolve() if not Path(fields["model"]).is_absolute() else Path(fields["model"])
    config_paths.append(Path(model_path))
    model = mle.load_model(model_path)
    band = DEFAULT_DEFER_BAND
    if "band" in fields:
        lo, hi = (float(x) for x in fields["band"].split(","))
        band = (lo, hi)
    if "voters" in fields:
        voters = tuple(
            build_inferrer(spec.strip(), config_paths) for spec in fields["voters"].split(";")
        )
        if len(voters) != 3:
            raise ValueError(f"{path}: voters must list exactly 3 specs")
        fallback: Inferrer = VotingInferrer(VotingConfig(voters))  # type: ignore[arg-type]
    elif "fallback" in fields:
        fallback = build_inferrer(fields["fallback"], config_paths)
    else:
        raise ValueError(f"{path}: two-stage config requires fallback = or voters =")
    spec_id = id or fields.get("id")
    return TwoStageInferrer(TwoStageConfig(model, fallback, band), id=spec_id)


def build_inferrer(spec: str, config_paths: list[Path] | None = None) -> Inferrer:
    """Construct an inferrer from a [id=]kind:arg spec string."""
    if config_paths is None:
        config_paths = []
    id = None
    if "=" in spec.split(":", 1)[0]:
        id, spec = spec.split("=", 1)
    kind, sep, arg = spec.partition(":")
    if not sep:
        raise ValueError(f"bad inferrer spec {spec!r} (expected kind:arg)")
    if kind == "mle":
        config_paths.append(Path(arg))
        model = mle.load_model(arg)
        return MleInferrer(model, id=id)
    if kind == "mock":
        config_paths.append(Path(arg))
        return MockInferrer.from_json(arg, id=id)
    if kind == "http":
        config_paths.append(Path(arg))
        config = parse_adapter_config(arg)
        adapter = HttpAdapter(config)
        if id is not None:
            adapter.id = id
        return adapter
    if kind == "twostage":
        config_paths.append(Path(arg))
        return _build_twostage(arg, id, config_paths)
    raise ValueError(f"unknown inferrer kind {kind!r}")


# --- commands -----------------------------------------------------------------


def _write_ingest_report(report: corpus.IngestReport, path: Path) -> None:
    lines = [f"# ingest-report\tsource={report.source}"]
    lines.append(f"total_rows\t{report.total_rows}")
    lines.append(f"retained\t{report.retained}")
    for reason in corpus.Rejection:
        lines.append(f"rejected.{reason.value}\t{report.rejections.get(reason, 0)}")
    lines.append(f"unmappable_gender\t{report.unmappable_gender}")
    lines.append(f"malformed\t{len(report.malformed)}")
    for line_no, message in report.malformed:
        lines.append(f"malformed.line\t{line_no}\t{message}")
    for year in report.missing_years:
        lines.append(f"missing_year\t{year}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_years(text: str) -> range:
    start, sep, end = text.partition("-")
    if not sep:
        year = int(start)
        return range(year, year + 1)
    return range(int(start), int(end) + 1)


def cmd_ingest(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.csv:
        if not args.name_col or not args.gender_col:
            raise ValueError("--csv requires --name-col and --gender-col")
        schema = CsvSchema(args.name_col, args.gender_col, args.count_col)
        table, report = corpus.ingest_labeled_csv(
            args.csv,
            schema,
            name_type=NameType(args.name_type),
            source_id=args.source_id,
        )
        inputs = [args.csv]
    else:
        if not args.years:
            raise ValueError("--ssa-dir requires --years")
        years = _parse_years(args.years)
        table, report = corpus.ingest_ssa_years(args.ssa_dir, years, source_id=args.source_id)
        inputs = sorted(
            str(p) for p in Path(args.ssa_dir).glob("yob*.txt") if int(p.stem[3:]) in years
        )
    table_path = out_dir / f"{table.source_id}.table.tsv"
    corpus.write_table(table, table_path)
    _write_ingest_report(report, out_dir / f"{table.source_id}.ingest-report.tsv")
    _write_manifest(args, out_dir, "ingest", inputs=inputs)
    logger.info(
        "ingested %s: %d unique names, %d records retained, %d dropped",
        table.source_id,
        len(table),
        report.retained,
        report.dropped_total(),
    )
    return 0


def cmd_combine(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tables = []
    for path in args.tables:
        table = corpus.read_table(path)
        if table.name_type is NameType.FULL:
            if not args.split_full:
                raise ValueError(f"{path}: full-name table; rerun with --split-full")
            table = corpus.to_first_names(table)
        tables.append(table)
    merged = corpus.merge_tables(tables)
    if args.id:
        merged = corpus.FrequencyTable(merged.entries, merged.name_type, args.id)
    corpus.write_table(merged, out_dir / f"{merged.source_id}.table.tsv")
    _write_manifest(args, out_dir, "combine", inputs=args.tables)
    logger.info("combined %d tables into %s (%d unique names)", len(tables), merged.source_id, len(merged))
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tables = [corpus.read_table(p) for p in args.tables]
    stats = [corpus.dataset_stats(t) for t in tables]

    if args.format == "structured":
        document: dict[str, object] = {
            "datasets": [
                {"source_id": t.source_id, "name_type": t.name_type.value, **vars(s)}
                for t, s in zip(tables, stats)
            ]
        }
        if len(tables) >= 2:
            uniqueness = corpus.cross_dataset_uniqueness(tables)
            document["uniqueness"] = [
                {"source_id": t.source_id, "unique_across_all": c, "percentage": pct}
                for t, (c, pct) in zip(tables, uniqueness)
            ]
            overlap = corpus.pairwise_overlap(tables)
            document["overlap"] = [
                {
                    "source_id": t.source_id,
                    "cells": [{"count": c, "percentage": pct} for c, pct in row],
                }
                for t, row in zip(tables, overlap)
            ]
        (out_dir / "stats.json").write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    else:
        lines = ["source_id\tname_type\ttotal_names\tunique_names\tunique_first\tunique_last\tambiguous"]
        for t, s in zip(tables, stats):
            lines.append(
                f"{t.source_id}\t{t.name_type.value}\t{s.total_names}\t{s.unique_names}"
                f"\t{s.unique_first}\t{s.unique_last}\t{s.ambiguous}"
            )
        (out_dir / "stats.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        if len(tables) >= 2:
            uniqueness = corpus.cross_dataset_uniqueness(tables)
            lines = ["source_id\tunique_across_all\tpercentage"]
            for t, (count, pct) in zip(tables, uniqueness):
                lines.append(f"{t.source_id}\t{count}\t{pct:.2f}")
            (out_dir / "uniqueness.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
            overlap = corpus.pairwise_overlap(tables)
            header = "source_id\t" + "\t".join(t.source_id for t in tables)
            lines = [header]
            for t, row in zip(tables, overlap):
                cells = [f"{count} ({pct:.1f}%)" for count, pct in row]
                lines.append(t.source_id + "\t" + "\t".join(cells))
            (out_dir / "overlap.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    if args.bins:
        for table in tables:
            try:
                hist = corpus.ambiguity_histogram(table, args.bins)
            except ValueError as exc:
                logger.warning("skipping ambiguity histogram: %s", exc)
                continue
            lines = [
                f"# ambiguity\tsource={table.source_id}\tcount={hist.count}"
                f"\tp25={hist.p25:.6f}\tp50={hist.p50:.6f}\tp75={hist.p75:.6f}",
                "bin_lo\tbin_hi\tpercentage",
            ]
            for i, pct in enumerate(hist.percentages):
                lines.append(f"{hist.bin_edges[i]:.6f}\t{hist.bin_edges[i + 1]:.6f}\t{pct:.4f}")
            (out_dir / f"ambiguity-{table.source_id}.tsv").write_text(
                "\n".join(lines) + "\n", encoding="utf-8"
            )
    _write_manifest(args, out_dir, "stats", inputs=args.tables)
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    if args.seed is None:
        raise ValueError("split requires --seed")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = corpus.read_table(args.table)
    result = evaluation.split_dataset(table, args.test_fraction, args.seed)
    corpus.write_table(result.train, out_dir / f"{result.train.source_id}.table.tsv")
    evaluation.write_testset(result.test, out_dir / f"{result.test.id}.test.tsv")
    ties_path = out_dir / f"{result.test.id}.ties.txt"
    ties_path.write_text("".join(f"{name}\n" for name in result.ties), encoding="utf-8")
    _write_manifest(args, out_dir, "split", inputs=[args.table])
    logger.info(
        "split %s: %d train, %d test, %d tied names excluded",
        table.source_id,
        len(result.train),
        result.test.size,
        len(result.ties),
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = corpus.read_table(args.table)
    model = mle.train(table, args.tau, args.model_id)
    model_path = out_dir / f"{table.source_id}.model.tsv"
    mle.save_model(model, model_path)
    _write_manifest(args, out_dir, "train", inputs=[args.table])
    logger.info("trained %s on %d names (tau=%g)", model.model_id, len(table), model.tau)
    return 0


def _read_names(source: str) -> list[str]:
    if source == "-":
        lines = sys.stdin.read().splitlines()
    else:
        lines = Path(source).read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines if line.strip()]


def cmd_infer(args: argparse.Namespace) -> int:
    config_paths: list[Path] = []
    if args.model:
        inferrer: Inferrer = MleInferrer(mle.load_model(args.model))
        config_paths.append(Path(args.model))
    elif args.inferrer:
        inferrer = build_inferrer(args.inferrer, config_paths)
    else:
        raise ValueError("infer requires --model or --inferrer")
    names = _read_names(args.names)
    if not names:
        raise ValueError("no names to infer")
    predictions = inferrer.infer_batch(names)

    if args.format == "structured":
        out_lines = [
            json.dumps(
                {"name": n, "label": p.label.value, "p_female": p.p_female, "source": p.source},
                sort_keys=True,
            )
            for n, p in zip(names, predictions)
        ]
    else:
        out_lines = ["name\tlabel\tp_female\tsource"]
        for n, p in zip(names, predictions):
            p_cell = "NA" if p.p_female is None else f"{p.p_female:.6f}"
            out_lines.append(f"{n}\t{p.label.value}\t{p_cell}\t{p.source}")
    text = "\n".join(out_lines) + "\n"
    if args.out:
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(text, encoding="utf-8")
        inputs = [] if args.names == "-" else [Path(args.names)]
        _write_manifest(args, out_path.parent, "infer", inputs=inputs, configs=config_paths)
    else:
        sys.stdout.write(text)
    return 0


def _tie_notes(inferrers: Sequence[Inferrer]) -> list[str]:
    notes = []
    for inferrer in inferrers:
        candidates = [inferrer, getattr(getattr(inferrer, "config", None), "fallback", None)]
        for obj in candidates:
            ties = getattr(obj, "tie_count", 0)
            if obj is not None and ties:
                notes.append(f"{inferrer.id}: vote ties = {ties}")
    return notes


def cmd_eval(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    testsets = [evaluation.read_testset(p) for p in args.test]
    config_paths: list[Path] = []
    inferrers = [build_inferrer(spec, config_paths) for spec in args.inferrer]
    skip: dict[str, set[str]] = {}
    for item in args.na or []:
        inferrer_id, sep, dataset_id = item.partition("=")
        if not sep:
            raise ValueError(f"bad --na value {item!r} (expected inferrer=dataset)")
        skip.setdefault(inferrer_id, set()).add(dataset_id)
    report = evaluation.evaluate_run(testsets, inferrers, skip)
    report.notes.extend(_tie_notes(inferrers))
    if args.format == "structured":
        document = {"records": report.to_records(), "notes": report.notes}
        (out_dir / "report.json").write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    else:
        (out_dir / "report.tsv").write_text(report.to_tsv(), encoding="utf-8")
        (out_dir / "report.txt").write_text(report.to_text(), encoding="utf-8")
    _write_manifest(args, out_dir, "eval", inputs=list(args.test), configs=config_paths)
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    testset = evaluation.read_testset(args.test)
    config_paths: list[Path] = []
    inferrer = build_inferrer(args.inferrer, config_paths)
    predictions = inferrer.infer_batch([name for name, _ in testset.names])
    rated = analysis.assign_rate_types(testset, predictions)
    if not rated:
        raise ValueError("no decided predictions to analyze")
    analysis.write_length_export(analysis.length_histograms(rated), out_dir / "lengths.tsv")
    analysis.write_non_english_export(rated, out_dir / "non_english.tsv")
    for n, filename in ((2, "bigrams.tsv"), (3, "trigrams.tsv")):
        try:
            inventory = analysis.ngram_inventory(rated, n)
        except ValueError as exc:
            logger.warning("skipping %s: %s", filename, exc)
            continue
        analysis.write_ngram_export(inventory, out_dir / filename)
    _write_manifest(args, out_dir, "analyze", inputs=[args.test], configs=config_paths)
    return 0


# --- argument parsing ---------------------------------------------------------


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="seed for any randomness")
    parser.add_argument("--config", default=None, help="key=value file of default option values")
    parser.add_argument("--out-dir", default=None, help="directory for output artifacts")
    parser.add_argument(
        "--format", choices=("tsv", "structured"), default=None, help="output format"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="namegender",
        description="Build name-gender frequency models, infer, and evaluate inferrers.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a frequency table from a labeled corpus")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--csv", help="labeled CSV file (header row required)")
    group.add_argument("--ssa-dir", help="directory of yobYYYY.txt files")
    p.add_argument("--name-col", help="CSV column holding the name")
    p.add_argument("--gender-col", help="CSV column holding the gender tag")
    p.add_argument("--count-col", help="CSV column holding an occurrence count")
    p.add_argument("--name-type", choices=("first", "full"), default="first")
    p.add_argument("--years", help="year range for --ssa-dir, e.g. 1937-1999")
    p.add_argument("--source-id", help="identifier recorded in the table header")
    _common_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("combine", help="merge first-name tables by adding counts")
    p.add_argument("tables", nargs="+", help="table files to merge")
    p.add_argument("--id", help="source id for the merged table")
    p.add_argument("--split-full", action="store_true", help="reduce full-name tables to first names")
    _common_flags(p)
    p.set_defaults(func=cmd_combine)

    p = sub.add_parser("stats", help="dataset statistics, uniqueness, and overlap")
    p.add_argument("tables", nargs="+", help="table files")
    p.add_argument("--bins", type=int, default=None, help="also export ambiguity histograms")
    _common_flags(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("split", help="split a table into train table and test set")
    p.add_argument("table", help="table file")
    p.add_argument("--test-fraction", type=float, default=None)
    _common_flags(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a thresholded frequency model")
    p.add_argument("table", help="table file")
    p.add_argument("--tau", type=float, default=None, help="decision threshold")
    p.add_argument("--model-id", default=None)
    _common_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="label names from a file or standard input")
    p.add_argument("names", help="file of names, one per line, or - for stdin")
    p.add_argument("--model", help="model file (shorthand for an mle: spec)")
    p.add_argument("--inferrer", help="inferrer spec [id=]kind:arg")
    p.add_argument("--out", help="write predictions to this file instead of stdout")
    _common_flags(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score inferrers against labeled test sets")
    p.add_argument("--test", action="append", required=True, help="test-set file (repeatable)")
    p.add_argument("--inferrer", action="append", required=True, help="inferrer spec (repeatable)")
    p.add_argument(
        "--na",
        action="append",
        help="inferrer=dataset cell to mark NA (e.g. trained on that data)",
    )
    _common_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", help="error analysis exports for one inferrer")
    p.add_argument("--test", required=True, help="test-set file")
    p.add_argument("--inferrer", required=True, help="inferrer spec")
    _common_flags(p)
    p.set_defaults(func=cmd_analyze)

    return parser


def _apply_config(args: argparse.Namespace) -> None:
    """Fill unset options from --config values, then built-in defaults."""
    config: dict[str, str] = {}
    if args.config:
        raw = parse_kv_file(args.config)
        for key, value in raw.items():
            attr = key.replace("-", "_")
            if attr not in _CONFIG_KEYS:
                raise ValueError(f"{args.config}: unknown config key {key!r}")
            config[attr] = value
    for attr, builtin in _BUILTIN_DEFAULTS.items():
        if getattr(args, attr, None) is None:
            if attr in config:
                setattr(args, attr, _CONFIG_KEYS[attr](config[attr]))
            elif hasattr(args, attr):
                setattr(args, attr, builtin)


def main(argv: Sequence[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    args._argv = ["namegender", *argv]
    try:
        _apply_config(args)
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"namegender: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
