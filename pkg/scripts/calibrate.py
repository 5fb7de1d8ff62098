#!/usr/bin/env python3
"""Run every calibration target and freeze the results.

Writes one JSON report per target plus the merged ``calibration.json``
the acceptance suite's frozen constants were taken from.  Runtime is
dominated by the detection-modulus scan (billions of interactions); expect
tens of minutes on one core.

Usage::

    python3 scripts/calibrate.py [--out-dir calibration] [--target NAME] [--quick]
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from popcd import studies  # noqa: E402

# per-target keyword overrides at full (frozen) scale
FULL_SCALE: dict[str, dict] = {
    "epidemic-d": {"trials": 500},
    "phaseclock-m-d1-d2": {"epochs": 200, "trials": 40},
    "proliferation-c": {"trials": 5},
    "countfin-cfin": {"trials": 200},
    "detection-m": {"min_epochs": 120},
    "backup-c": {"trials": 200},
}

# reduced scale for a fast smoke of the calibration pipeline itself
QUICK_SCALE: dict[str, dict] = {
    "epidemic-d": {"trials": 40, "n_list": (256, 1024)},
    "phaseclock-m-d1-d2": {"epochs": 40, "trials": 5, "m_grid": (8, 16)},
    "proliferation-c": {"trials": 2},
    "countfin-cfin": {"trials": 30, "grid": (8, 32, 128)},
    "detection-m": {"n": 1024, "m_grid": (16,), "min_epochs": 30},
    "backup-c": {"trials": 40},
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="calibration")
    parser.add_argument("--target", choices=sorted(studies.CALIBRATION_TARGETS))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--quick", action="store_true")
    args = parser.parse_args(argv)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scale = QUICK_SCALE if args.quick else FULL_SCALE
    targets = [args.target] if args.target else sorted(studies.CALIBRATION_TARGETS)

    merged: dict[str, dict] = {}
    merged_path = out_dir / "calibration.json"
    if merged_path.exists():
        merged = json.loads(merged_path.read_text())

    for name in targets:
        driver = studies.CALIBRATION_TARGETS[name]
        kwargs = dict(scale.get(name, {}))
        kwargs["seed"] = args.seed
        print(f"[{time.strftime('%H:%M:%S')}] calibrating {name} {kwargs} ...", flush=True)
        t0 = time.time()
        report = driver(**kwargs)
        report["wall_seconds"] = round(time.time() - t0, 1)
        (out_dir / f"{name}.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        merged[name] = report
        merged_path.write_text(json.dumps(merged, indent=2, sort_keys=True) + "\n")
        print(f"[{time.strftime('%H:%M:%S')}] {name} done in {report['wall_seconds']}s", flush=True)
    print(f"reports in {out_dir}/", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
