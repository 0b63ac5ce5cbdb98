"""mixnoise-plot: render figures from persisted experiment artifacts."""
from __future__ import annotations

import argparse
import sys

from .io import PlotInputError
from .render import KINDS, PlotJob, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mixnoise-plot", description=__doc__)
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="inputs", required=True, nargs="+",
                        help="artifact files or run directories")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(sys.argv[1:] if argv is None else argv)
    try:
        result = render(PlotJob(kind=args.kind, inputs=args.inputs, output=args.out))
    except PlotInputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {result.path} ({result.panels} panels, {result.overlays} overlays, "
          f"{result.width_px}x{result.height_px}px)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
