"""qpt-fig <figure-id> --in <csv> [--in2 <csv>] --out <png>"""

from __future__ import annotations

import argparse
import sys

from .render import FIGURE_IDS, FigureSpec, SchemaError, render


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="qpt-fig", description=__doc__)
    ap.add_argument("figure_id", choices=FIGURE_IDS)
    ap.add_argument("--in", dest="in1", required=True, help="input CSV")
    ap.add_argument("--in2", help="second input CSV (comparing, q4_fourier overlay)")
    ap.add_argument("--out", required=True, help="output PNG path")
    ns = ap.parse_args(sys.argv[1:] if argv is None else argv)
    inputs = (ns.in1,) if ns.in2 is None else (ns.in1, ns.in2)
    try:
        info = render(FigureSpec(ns.figure_id, inputs, ns.out))
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    print(f"{info.figure_id}: wrote {info.output} "
          f"({info.n_series} series, {info.n_overlays} overlays)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
