"""`make-figures` entry point: one figure kind per invocation."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import plots, schema

KINDS = {
    "mse_vs_n0": ("summary", plots.plot_mse_vs_n0),
    "rounds_vs_n0": ("summary", plots.plot_rounds_vs_n0),
    "mse_vs_rounds": ("summary", plots.plot_mse_vs_rounds),
    "info_trace": ("trace", plots.plot_info_trace),
    "posterior_heatmap": ("belief", plots.plot_posterior_heatmap),
    "estimate_evolution": ("belief", plots.plot_estimate_evolution),
}


def render(kind: str, in_path, out_path) -> None:
    """Load the input for `kind`, build the figure, save it."""
    if kind not in KINDS:
        raise schema.SchemaError(
            f"unknown figure kind {kind!r}; expected one of {sorted(KINDS)}"
        )
    source, builder = KINDS[kind]
    if source == "summary":
        fig = builder(schema.load_summary(in_path))
    elif source == "trace":
        fig = builder(schema.load_trace(in_path))
    else:
        rounds, joints = schema.load_belief(in_path)
        fig = builder(rounds, joints)
    # strip the writer metadata so identical inputs give identical bytes
    fig.savefig(out_path, dpi=150, metadata={"Software": None})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="make-figures",
        description="Render figures from loop-detector simulation exports",
    )
    parser.add_argument("--kind", required=True, choices=sorted(KINDS))
    parser.add_argument("--in", dest="in_path", type=Path, required=True)
    parser.add_argument("--out", type=Path, required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        render(args.kind, args.in_path, args.out)
    except (schema.SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
