"""Command-line entry point: CSV in, figures + fit summary out."""

from __future__ import annotations

import argparse
import sys

from .figures import render_figures
from .fitting import fit_scaling
from .frame import AnalysisError, SweepFrame


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="popcd-analysis",
        description="Fit scaling laws and render figures from a sweep CSV.",
    )
    parser.add_argument("csv", help="trial CSV produced by the experiment harness")
    parser.add_argument("--out-dir", default="figures", help="output directory")
    parser.add_argument(
        "--protocol", default=None, help="protocol label for figure captions"
    )
    parser.add_argument(
        "--input", default=None, help="restrict the scaling fit to one input kind"
    )
    args = parser.parse_args(argv)
    try:
        frame = SweepFrame.from_csv(args.csv, protocol=args.protocol)
        written = render_figures(frame, args.out_dir)
        try:
            fit = fit_scaling(frame, input_kind=args.input)
            print(
                f"scaling fit: slope {fit.slope:.4f}, R^2 {fit.r_squared:.4f}, "
                f"reference constant {fit.ref_constant:.4g} "
                f"(log2 rmse {fit.ref_rmse_log2:.4f})"
            )
        except AnalysisError as exc:
            print(f"scaling fit skipped: {exc}")
        for path in written:
            print(f"wrote {path}")
    except AnalysisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
