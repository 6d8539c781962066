"""Command-line driver: ``bifrom <subcommand> --workspace DIR [--config FILE]``.

Exit codes: 0 success, 2 configuration error, 3 convergence failure,
4 missing artifact. All messages go to standard error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import pipeline
from .errors import BifromError, MissingArtifactError
from .config import load_config
from .evaluation import (
    bifurcation_diagram,
    read_diagram_csv,
    reference_diagram,
    write_diagram_csv,
    write_diagram_svg,
    write_diagram_text,
    write_errors_csv,
    write_points_csv,
)
from .fom import parameter_grid
from .selection import Criterion
from .workspace import Workspace

log = logging.getLogger("bifrom")

CRITERIA = [c.value for c in Criterion]


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workspace", "-w", default="workspace", help="workspace directory (default: ./workspace)")
    common.add_argument("--config", "-c", help="key=value configuration file")
    common.add_argument("--quiet", "-q", action="store_true", help="only report warnings and errors")

    method = argparse.ArgumentParser(add_help=False)
    method.add_argument("--method", choices=["global", "local", "podnn"], default="local")
    method.add_argument("--criterion", choices=CRITERIA, default="regression")
    method.add_argument("--overlap", choices=["on", "off"], default="on")

    p = argparse.ArgumentParser(prog="bifrom", description="Local reduced-order models for a pitchfork bifurcation.")
    sub = p.add_subparsers(dest="command", required=True)

    for name, what in (("snapshots", "training"), ("reference", "reference")):
        s = sub.add_parser(name, parents=[common], help=f"solve the FOM on the {what} grid")
        s.add_argument("--n1", type=int, help="points in mu1 (overrides the config)")
        s.add_argument("--n2", type=int, help="points in mu2 (overrides the config)")

    sub.add_parser("build", parents=[common, method], help="run the offline stages of a method")

    ev = sub.add_parser("evaluate", parents=[common], help="bifurcation diagram of a built method -> diagram.csv")
    ev.add_argument("--method", choices=["global", "local", "podnn", "reference"], default="local")
    ev.add_argument("--criterion", choices=CRITERIA, default="regression")
    ev.add_argument("--overlap", choices=["on", "off"], default="on")
    ev.add_argument("--output", help="output CSV (default: <workspace>/reports/diagram.csv)")

    cmp_ = sub.add_parser("compare", parents=[common], help="errors of built methods on the reference grid -> errors.csv")
    cmp_.add_argument("--methods", nargs="+", metavar="TAG", help="method tags (default: every built method)")

    pl = sub.add_parser("plot", parents=[common], help="diagram.csv -> diagram.svg and columnar text")
    pl.add_argument("--input", help="diagram CSV (default: <workspace>/reports/diagram.csv)")
    return p


def _config(args):
    cfg = load_config(args.config)
    if args.command == "snapshots":
        cfg = replace(cfg, snap_n1=args.n1 or cfg.snap_n1, snap_n2=args.n2 or cfg.snap_n2)
    elif args.command == "reference":
        cfg = replace(cfg, ref_n1=args.n1 or cfg.ref_n1, ref_n2=args.n2 or cfg.ref_n2)
    return cfg


def _tag(args) -> str:
    return pipeline.make_tag(args.method, args.criterion, args.overlap == "on")


def _run(args) -> None:
    ws = Workspace(args.workspace, _config(args))
    reports = ws.root / "reports"
    cmd = args.command

    if cmd in ("snapshots", "reference", "build"):
        with ws.lock():
            if cmd == "build":
                pipeline.build_method(ws, _tag(args))
                log.info("built %s", _tag(args))
            else:
                snaps = pipeline.ensure_snapshots(ws, cmd)
                log.info("%s: %d states at %dx%d parameters", cmd, snaps.count, snaps.n1, snaps.n2)
        return

    if cmd == "evaluate":
        if args.method == "reference":
            diagram = reference_diagram(ws.load_snapshots("reference"))
        else:
            method = pipeline.load_method(ws, _tag(args))
            grid = parameter_grid(ws.fom, ws.cfg.ref_n1, ws.cfg.ref_n2)
            diagram = bifurcation_diagram(method, grid)
        out = Path(args.output) if args.output else reports / "diagram.csv"
        out.parent.mkdir(parents=True, exist_ok=True)
        write_diagram_csv(out, diagram)
        failed = int((~diagram.converged).sum())
        log.info("wrote %s (%d points, %d unconverged)", out, len(diagram.values), failed)
        return

    if cmd == "compare":
        ws.require("reference")
        tags = args.methods or pipeline.built_tags(ws)
        if not tags:
            raise MissingArtifactError("no method has been built; run `bifrom build` first")
        results = pipeline.compare(ws, tags)
        reports.mkdir(exist_ok=True)
        write_errors_csv(reports / "errors.csv", results)
        for r in results:
            write_points_csv(reports / f"method_{r.tag}_points.csv", r)
        for r in results:
            print(f"{r.tag:34s} samples={r.samples} mean_l2={r.mean_l2:.4e} mean_linf={r.mean_linf:.4e}", file=sys.stderr)
        return

    if cmd == "plot":
        src = Path(args.input) if args.input else reports / "diagram.csv"
        if not src.exists():
            raise MissingArtifactError(f"{src} not found; run `bifrom evaluate` first")
        diagram = read_diagram_csv(src, source=src.stem)
        write_diagram_svg(src.with_suffix(".svg"), diagram)
        write_diagram_text(src.with_suffix(".txt"), diagram)
        log.info("wrote %s and %s", src.with_suffix(".svg"), src.with_suffix(".txt"))


def run_cli(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors, matching the configuration exit code
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        _run(args)
    except BifromError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


def main() -> None:
    sys.exit(run_cli())
