"""Command-line harness: seeded trials, sweeps, calibration, state audits.

Four subcommands::

    run        one trial, CSV row (or JSON) on stdout, optional event trace
    sweep      trials x n-grid with derived per-cell seeds, CSV + summary
    states     per-population maxima of the state-bit audit over full runs
    calibrate  sweep one tunable constant, emit a JSON calibration report

Exit status: 0 on success, 1 on usage/input errors, 2 when a run trips an
internal invariant.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from collections.abc import Sequence

from . import studies
from .engine import TrialResult, run_trial, write_csv, write_json
from .params import ESTIMATORS, MODES, PROTOCOLS, ProtocolParams
from .rng import derive_seed
from .state import InputError, InvariantViolation


class _UsageError(Exception):
    """Raised instead of argparse's default exit-status-2 behavior."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # noqa: D102 - argparse hook
        raise _UsageError(message)


def _parse_offsets(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("offsets must be two comma-separated integers")
    try:
        lo, hi = (int(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("offsets must be integers") from exc
    return lo, hi


def _parse_n_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(p) for p in text.split(",") if p)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("n-list must be comma-separated integers") from exc
    if not values:
        raise argparse.ArgumentTypeError("n-list must not be empty")
    return values


def _add_param_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--eta", type=float, default=1.0, help="per-segment repetition multiplier")
    parser.add_argument("--m", type=int, default=16, help="phase-clock timer modulus")
    parser.add_argument("--estimator", choices=ESTIMATORS, default="ideal")
    parser.add_argument(
        "--offsets", type=_parse_offsets, default=None, metavar="CL,CU",
        help="bound offsets around the size estimate (default per estimator)",
    )
    parser.add_argument("--mode", choices=MODES, default="randomized")
    parser.add_argument("--budget", type=int, default=None, help="step budget (default 50*n^2)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None, metavar="PATH", help="output file")
    parser.add_argument("--json", action="store_true", help="emit JSON instead of CSV")


def _params_from(args: argparse.Namespace) -> ProtocolParams:
    return ProtocolParams(
        eta=args.eta,
        m=args.m,
        mode=args.mode,
        estimator=args.estimator,
        offsets=args.offsets,
    )


def _emit_results(args: argparse.Namespace, results: Sequence[TrialResult]) -> None:
    if args.out is None:
        return
    if args.json:
        write_json(args.out, results)
    else:
        write_csv(args.out, results)


def cmd_run(args: argparse.Namespace) -> int:
    trace: list | None = [] if args.trace else None
    result = run_trial(
        args.protocol,
        args.n,
        params=_params_from(args),
        seed=args.seed,
        input_kind=args.input,
        budget=args.budget,
        trace=trace,
        trace_limit=args.trace_limit,
    )
    if trace is not None:
        for rec in trace:
            tags = ",".join(sorted(rec.events)) or "-"
            print(f"step={rec.step_index} initiator={rec.initiator} "
                  f"responder={rec.responder} events={tags}")
    print(result.json_line() if args.json else result.csv_row())
    _emit_results(args, [result])
    return 0


def _median_steps(results: Sequence[TrialResult]) -> float | None:
    reached = sorted(
        r.steps_to_stable for r in results
        if r.steps_to_stable is not None and r.steps_to_stable > 0
    )
    if not reached:
        return None
    mid = len(reached) // 2
    if len(reached) % 2 == 1:
        return float(reached[mid])
    return (reached[mid - 1] + reached[mid]) / 2.0


def fit_log_slope(points: Sequence[tuple[float, float]]) -> float:
    """OLS slope of log2(y) against log2(x)."""
    if len(points) < 2:
        raise InputError("slope fit needs at least two points")
    xs = [math.log2(x) for x, _ in points]
    ys = [math.log2(y) for _, y in points]
    mean_x = sum(xs) / len(xs)
    mean_y = sum(ys) / len(ys)
    sxx = sum((x - mean_x) ** 2 for x in xs)
    if sxx == 0:
        raise InputError("slope fit needs distinct x values")
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    return sxy / sxx


def _run_grid(args: argparse.Namespace) -> tuple[list[TrialResult], dict[int, list[TrialResult]]]:
    if args.trials < 1:
        raise InputError(f"trials must be >= 1, got {args.trials}")
    if any(b <= a for a, b in zip(args.n_list, args.n_list[1:])):
        raise InputError(f"n-list must be strictly increasing, got {list(args.n_list)}")
    params = _params_from(args)
    all_rows: list[TrialResult] = []
    by_n: dict[int, list[TrialResult]] = {}
    for n in args.n_list:
        rows = []
        for t in range(args.trials):
            cell_seed = derive_seed(args.seed, n, t)
            rows.append(
                run_trial(
                    args.protocol, n,
                    params=params, seed=cell_seed,
                    input_kind=args.input, budget=args.budget,
                )
            )
        by_n[n] = rows
        all_rows.extend(rows)
    return all_rows, by_n


def cmd_sweep(args: argparse.Namespace) -> int:
    all_rows, by_n = _run_grid(args)
    # rows go to --out when given, else to stdout; the summary goes to the
    # remaining stream so the two never interleave
    summary_stream = sys.stdout if args.out else sys.stderr
    if args.out:
        _emit_results(args, all_rows)
    else:
        from .engine import CSV_HEADER

        print(",".join(CSV_HEADER))
        for row in all_rows:
            print(row.json_line() if args.json else row.csv_row())
    medians: list[tuple[float, float]] = []
    for n, rows in by_n.items():
        reached = sorted(
            r.steps_to_stable for r in rows if r.steps_to_stable not in (None, 0)
        )
        missing = sum(1 for r in rows if r.steps_to_stable is None)
        flagged = sum(1 for r in rows if r.detection_channel != "none")
        if reached:
            median = _median_steps(rows)
            mean = sum(reached) / len(reached)
            p95 = reached[min(len(reached) - 1, math.ceil(0.95 * len(reached)) - 1)]
            print(
                f"n={n} trials={len(rows)} median={median:.0f} mean={mean:.1f} "
                f"p95={p95} not_reached={missing} flagged={flagged}",
                file=summary_stream,
            )
            medians.append((float(n), float(median)))
        else:
            print(
                f"n={n} trials={len(rows)} median=n/a mean=n/a p95=n/a "
                f"not_reached={missing} flagged={flagged}",
                file=summary_stream,
            )
    if len(medians) >= 2:
        slope = fit_log_slope(medians)
        print(f"slope={slope:.4f} (log2 median steps vs log2 n)", file=summary_stream)
    return 0


def cmd_states(args: argparse.Namespace) -> int:
    all_rows, by_n = _run_grid(args)
    _emit_results(args, all_rows)
    maxima: list[tuple[int, int]] = []
    for n, rows in by_n.items():
        peak = max(r.max_state_bits for r in rows)
        maxima.append((n, peak))
        print(f"n={n} max_state_bits={peak}")
    for (n_lo, bits_lo), (n_hi, bits_hi) in zip(maxima, maxima[1:]):
        if n_hi == 2 * n_lo:
            print(f"doubling {n_lo}->{n_hi}: +{bits_hi - bits_lo} bits")
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    driver = studies.CALIBRATION_TARGETS[args.target]
    kwargs: dict = {"seed": args.seed}
    if args.trials is not None:
        kwargs["trials"] = args.trials
    if args.n is not None:
        kwargs["n"] = args.n
    if args.n_list is not None:
        kwargs["n_list"] = args.n_list
    try:
        report = driver(**kwargs)
    except TypeError as exc:
        raise InputError(f"flag not supported by target {args.target}: {exc}") from exc
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="popcd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one trial")
    p_run.add_argument("--protocol", choices=PROTOCOLS, default="cold")
    p_run.add_argument("--n", type=int, required=True)
    p_run.add_argument("--input", default="distinct", metavar="KIND",
                       help="distinct | pair | dup:X | file:PATH")
    p_run.add_argument("--trace", action="store_true", help="print interaction records")
    p_run.add_argument("--trace-limit", type=int, default=None)
    _add_param_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a trials x n-grid sweep")
    p_sweep.add_argument("--protocol", choices=PROTOCOLS, default="cold")
    p_sweep.add_argument("--n-list", type=_parse_n_list, required=True, metavar="N1,N2,...")
    p_sweep.add_argument("--trials", type=int, default=30)
    p_sweep.add_argument("--input", default="pair", metavar="KIND")
    _add_param_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_states = sub.add_parser("states", help="audit per-agent state bits")
    p_states.add_argument("--protocol", choices=PROTOCOLS, default="cold")
    p_states.add_argument("--n-list", type=_parse_n_list, required=True, metavar="N1,N2,...")
    p_states.add_argument("--trials", type=int, default=3)
    p_states.add_argument("--input", default="pair", metavar="KIND")
    _add_param_flags(p_states)
    p_states.set_defaults(func=cmd_states)

    p_cal = sub.add_parser("calibrate", help="sweep one tunable constant")
    p_cal.add_argument("target", choices=sorted(studies.CALIBRATION_TARGETS))
    p_cal.add_argument("--n", type=int, default=None)
    p_cal.add_argument("--n-list", type=_parse_n_list, default=None, metavar="N1,N2,...")
    p_cal.add_argument("--trials", type=int, default=None)
    p_cal.add_argument("--seed", type=int, default=0)
    p_cal.add_argument("--out", default=None, metavar="PATH")
    p_cal.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2
    except AssertionError as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
