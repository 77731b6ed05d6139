"""Render accuracy-vs-iteration figures from metrics CSVs.

Usage: feelplot plot --out FIG.png [--window N] CSV[:LABEL]...

Writes both PNG and SVG next to each other. Labels default to the file
stem; an optional ``:LABEL`` suffix overrides (checked against the
filesystem first, so paths that really contain colons still work).
"""

import argparse
import os
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .curves import CurveSpec, SchemaError, moving_average, read_metrics

__all__ = ["render", "parse_curve_arg", "main"]


def render(curves, out_path):
    """One figure, one labeled accuracy line per curve; saves PNG and SVG."""
    if not curves:
        raise ValueError("need at least one curve")
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for spec in curves:
        data = read_metrics(spec.path)
        y = moving_average(data["acc"], spec.window)
        ax.plot(data["round"], y, label=spec.label, linewidth=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("test accuracy")
    ax.set_ylim(0.0, 1.0)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=160)
    fig.savefig(out_path.with_suffix(".svg"))
    return fig


def parse_curve_arg(arg: str, window: int) -> CurveSpec:
    if ":" in arg and not os.path.exists(arg):
        path, label = arg.rsplit(":", 1)
    else:
        path, label = arg, Path(arg).stem
    return CurveSpec(label=label, path=path, window=window)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="feelplot")
    sub = parser.add_subparsers(dest="command", required=True)
    plot_p = sub.add_parser("plot", help="render curves from metrics CSVs")
    plot_p.add_argument("--out", required=True, help="output PNG path")
    plot_p.add_argument("--window", type=int, default=1,
                        help="moving-average window in rounds (1 = raw)")
    plot_p.add_argument("curves", nargs="+", metavar="CSV[:LABEL]")
    args = parser.parse_args(argv)

    specs = [parse_curve_arg(a, args.window) for a in args.curves]
    try:
        fig = render(specs, args.out)
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    plt.close(fig)
    print(f"wrote {args.out} and {Path(args.out).with_suffix('.svg')}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
