#!/usr/bin/env python3
"""Reproduce the headline sweeps and write their CSV artifacts.

Produces, under --out-dir (default ``data/``):

* ``scaling_pair.csv``   — composed protocol, single-duplicate inputs over
  the doubling grid; the log-log slope of median steps comes from this.
* ``clean_distinct.csv`` — duplicate-free runs over the same grid (full
  horizon; the false-positive column is the point).
* ``state_bits.csv``     — per-n state-bit audit rows (composed protocol).

These are the inputs the separate analysis package consumes; rerunning
with the same seed reproduces the files byte for byte.

Usage::

    python3 scripts/scaling_sweep.py [--out-dir data] [--seed 0] [--quick]
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from popcd.engine import run_trial, write_csv  # noqa: E402
from popcd.params import ProtocolParams  # noqa: E402
from popcd.rng import derive_seed  # noqa: E402

FULL_GRID = (512, 1024, 2048, 4096, 8192)
FULL_TRIALS = 30
QUICK_GRID = (128, 256, 512)
QUICK_TRIALS = 5
# duplicate-free horizon: same scheduler load as the stabilizing runs
# without waiting out the full 50 n^2 safety budget at every size
CLEAN_BUDGET_FACTOR = 2


def sweep(protocol, grid, trials, seed, input_kind, budget_of=None, **params):
    rows = []
    p = ProtocolParams(**params)
    for n in grid:
        t0 = time.time()
        for t in range(trials):
            rows.append(
                run_trial(
                    protocol, n,
                    params=p,
                    seed=derive_seed(seed, n, t),
                    input_kind=input_kind,
                    budget=None if budget_of is None else budget_of(n),
                )
            )
        print(
            f"  {protocol} {input_kind} n={n}: {trials} trials "
            f"in {time.time() - t0:.1f}s", flush=True,
        )
    return rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="data")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--quick", action="store_true")
    args = parser.parse_args(argv)

    grid = QUICK_GRID if args.quick else FULL_GRID
    trials = QUICK_TRIALS if args.quick else FULL_TRIALS
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    print("pair-input scaling sweep", flush=True)
    pair_rows = sweep("cold", grid, trials, args.seed, "pair")
    write_csv(str(out_dir / "scaling_pair.csv"), pair_rows)

    print("duplicate-free horizon sweep", flush=True)
    clean_rows = sweep(
        "cold", grid, max(3, trials // 6), args.seed, "distinct",
        budget_of=lambda n: CLEAN_BUDGET_FACTOR * n * n,
    )
    write_csv(str(out_dir / "clean_distinct.csv"), clean_rows)

    print("state-bit audit sweep", flush=True)
    bit_rows = sweep("cold", grid, 3, args.seed, "pair")
    write_csv(str(out_dir / "state_bits.csv"), bit_rows)

    print(f"artifacts in {out_dir}/", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
