"""Command-line driver: ``mmsplit <command> MODEL [options]``.

Exit codes: 0 success, 1 validation violations (or diagnostics under
``--strict``), 2 unreadable input, model errors or bad flags.  Human-facing
messages go to stderr; the artifact goes to stdout or ``--output``.
"""

from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import yaml

from mmsplit import __version__
from mmsplit.decompose import DecompositionResult, decompose
from mmsplit.model import ModelError, MonolithModel, ValidationReport, parse_model, validate_model
from mmsplit.recommend import AmbiguousRouteError, Recommendation, recommend
from mmsplit.report import (
    OutputFormat,
    RenderOptions,
    emit_architecture_dot,
    emit_dfd_dot,
    emit_merge_trace,
    emit_recommendations_text,
    emit_service_list,
    emit_summary,
    emit_validation_text,
)

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_USAGE = 2

COMMANDS = ("validate", "decompose", "recommend", "report")


@dataclass(frozen=True)
class CliConfig:
    command: str
    model_path: Path
    format: OutputFormat
    output_path: Path | None
    include_evidence: bool
    cluster_by_context: bool
    strict: bool

    @property
    def render_options(self) -> RenderOptions:
        return RenderOptions(self.format, self.include_evidence, self.cluster_by_context)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmsplit", description="Split a monolith model into microservice candidates.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS, help="pipeline stage to run")
    parser.add_argument("model_path", type=Path, help="model document (YAML)")
    parser.add_argument(
        "--format", choices=[f.value for f in OutputFormat], default=OutputFormat.TEXT.value, help="artifact format"
    )
    parser.add_argument("-o", "--output", dest="output_path", type=Path, help="write the artifact here instead of stdout")
    parser.add_argument("--include-evidence", action="store_true", help="attach merge evidence to the artifact")
    parser.add_argument("--cluster-by-context", action="store_true", help="group diagram nodes by bounded context")
    parser.add_argument("--strict", action="store_true", help="treat diagnostics as failures")
    return parser


def parse_args(argv: Sequence[str]) -> CliConfig:
    ns = build_parser().parse_args(list(argv))
    return CliConfig(
        command=ns.command,
        model_path=ns.model_path,
        format=OutputFormat(ns.format),
        output_path=ns.output_path,
        include_evidence=ns.include_evidence,
        cluster_by_context=ns.cluster_by_context,
        strict=ns.strict,
    )


def _err(message: str) -> None:
    print(message, file=sys.stderr)


def _render(cfg: CliConfig, m: MonolithModel, r: DecompositionResult, recs: list[Recommendation]) -> str:
    opts = cfg.render_options
    if cfg.command == "decompose":
        recs = []
    if cfg.format is OutputFormat.STRUCTURED:
        return emit_summary(m, r, recs, opts)
    if cfg.format is OutputFormat.DOT:
        arch = emit_architecture_dot(r, recs, opts)
        return emit_dfd_dot(m, opts) + arch if cfg.command == "report" else arch
    if cfg.command == "decompose":
        return emit_merge_trace(r) + "\n" + emit_service_list(r)
    if cfg.command == "recommend":
        return emit_service_list(r) + "\n" + emit_recommendations_text(recs)
    return emit_merge_trace(r) + "\n" + emit_service_list(r) + "\n" + emit_recommendations_text(recs)


def _validation_tree(report: ValidationReport) -> str:
    tree = {
        "valid": report.ok,
        "violations": [{"rule": v.rule, "location": v.location, "message": v.message} for v in report.violations],
    }
    return yaml.safe_dump(tree, sort_keys=True, default_flow_style=False)


def _write(cfg: CliConfig, text: str) -> bool:
    if cfg.output_path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return True
    try:
        cfg.output_path.write_text(text, encoding="utf-8")
    except OSError as exc:
        _err(f"error: cannot write {cfg.output_path}: {exc}")
        return False
    return True


def _execute(cfg: CliConfig) -> int:
    try:
        text = cfg.model_path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        _err(f"error: cannot read {cfg.model_path}: {exc}")
        return EXIT_USAGE
    try:
        m = parse_model(text)
    except ModelError as exc:
        _err(f"error: {cfg.model_path}: {exc}")
        return EXIT_USAGE

    report = validate_model(m)
    if cfg.command == "validate" and cfg.format is OutputFormat.STRUCTURED:
        if not _write(cfg, _validation_tree(report)):
            return EXIT_USAGE
    if not report.ok:
        sys.stderr.write(emit_validation_text(report))
        _err(f"{len(report.violations)} violation(s) in {cfg.model_path}")
        return EXIT_VIOLATIONS

    r = decompose(m)
    try:
        recs = recommend(m, r) if cfg.command in ("recommend", "report") else []
    except AmbiguousRouteError as exc:
        _err(f"error: {exc}")
        return EXIT_USAGE

    for note in r.diagnostics:
        _err(f"note: {note}")

    if cfg.command == "validate":
        _err(f"{cfg.model_path}: valid ({len(m.contexts)} contexts)")
    elif not _write(cfg, _render(cfg, m, r, recs)):
        return EXIT_USAGE

    if cfg.strict and r.diagnostics:
        _err(f"strict: {len(r.diagnostics)} diagnostic(s) treated as failures")
        return EXIT_VIOLATIONS
    return EXIT_OK


def run(args: Sequence[str]) -> int:
    """Run one CLI invocation and return its exit code."""
    try:
        cfg = parse_args(args)
    except SystemExit as exc:
        # --help/--version exit 0, bad flags exit 2
        return int(exc.code or 0) if isinstance(exc.code, int) else EXIT_USAGE
    return _execute(cfg)


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
