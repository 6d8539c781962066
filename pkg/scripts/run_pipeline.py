"""Run the full desk-scale pipeline through the CLI and print the error table.

    python scripts/run_pipeline.py --workspace runs/ws [--config my.cfg]
"""

import argparse
import sys

from bifrom.cli import run_cli
from bifrom.selection import Criterion

NOOVERLAP = ("centroid", "snapshot", "classifier", "oracle")


def steps(common):
    yield ["snapshots", *common]
    yield ["reference", *common]
    yield ["build", "--method", "global", *common]
    for c in Criterion:
        yield ["build", "--method", "local", "--criterion", c.value, *common]
    for c in NOOVERLAP:
        yield ["build", "--method", "local", "--criterion", c, "--overlap", "off", *common]
    yield ["build", "--method", "podnn", *common]
    yield ["compare", *common]
    yield ["evaluate", "--method", "local", "--criterion", "regression", *common]
    yield ["plot", *common]


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--workspace", "-w", default="workspace")
    p.add_argument("--config", "-c")
    args = p.parse_args(argv)
    common = ["--workspace", args.workspace, "--quiet"]
    if args.config:
        common += ["--config", args.config]
    for argv_ in steps(common):
        code = run_cli(argv_)
        if code:
            print(f"step {' '.join(argv_[:3])} failed with exit code {code}", file=sys.stderr)
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
