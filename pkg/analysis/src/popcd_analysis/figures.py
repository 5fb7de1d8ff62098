"""Figure rendering and the JSON fit summary.

Three fixed-name images per frame — stabilization scaling, detector-epoch
histogram, state-bits growth — plus ``fit_summary.json`` holding every
fitted parameter.  The pipeline is random-free and the files carry fixed
metadata, so re-rendering the same CSV reproduces the outputs byte for
byte.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .fitting import fit_scaling, reference_curve  # noqa: E402
from .frame import AnalysisError, SweepFrame  # noqa: E402

#: fixed PNG metadata so the bytes do not depend on the library build date
_PNG_METADATA = {"Software": "popcd-analysis"}

_FIGSIZE = (6.4, 4.2)
_DPI = 120


def _save(fig, path: Path) -> None:
    fig.savefig(path, dpi=_DPI, metadata=_PNG_METADATA)
    plt.close(fig)


def _caption(frame: SweepFrame, base: str) -> str:
    return f"{base} — {frame.protocol}" if frame.protocol else base


def _fit_constant(ns: list[int], ys: list[float], exponent_log: float) -> float:
    shape = [reference_curve(n, exponent_log) for n in ns]
    return sum(y * g for y, g in zip(ys, shape)) / sum(g * g for g in shape)


def _render_scaling(frame: SweepFrame, path: Path, summary: dict) -> None:
    medians = frame.median_steps()
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.set_title(_caption(frame, "stabilization steps vs population size"))
    ax.set_xlabel("population size n")
    ax.set_ylabel("median steps to stable")
    if medians:
        ns = sorted(medians)
        ys = [medians[n] for n in ns]
        ax.loglog(ns, ys, "o-", label="measured medians")
        if len(ns) >= 2:
            low = _fit_constant(ns, ys, 0.5)
            high = _fit_constant(ns, ys, 1.5)
            grid = [ns[0] * (ns[-1] / ns[0]) ** (i / 63) for i in range(64)]
            ax.loglog(
                grid, [low * reference_curve(g, 0.5) for g in grid],
                "--", label="c·n^1.5·(log2 n)^0.5",
            )
            ax.loglog(
                grid, [high * reference_curve(g, 1.5) for g in grid],
                ":", label="c·n^1.5·(log2 n)^1.5",
            )
            summary["reference_curves"] = {
                "sqrt_log_constant": low,
                "three_halves_log_constant": high,
            }
        ax.legend()
        try:
            fit = fit_scaling(frame)
            summary["scaling"] = {
                "slope": fit.slope,
                "intercept": fit.intercept,
                "r_squared": fit.r_squared,
                "ref_constant": fit.ref_constant,
                "ref_rmse_log2": fit.ref_rmse_log2,
                "n_values": list(fit.n_values),
                "medians": list(fit.medians),
            }
            ax.set_title(
                _caption(frame, f"stabilization scaling (log-log slope {fit.slope:.3f})")
            )
        except AnalysisError:
            summary["scaling"] = None
    else:
        ax.text(
            0.5, 0.5, "no stabilized runs in this frame",
            ha="center", va="center", transform=ax.transAxes,
        )
        summary["scaling"] = None
    _save(fig, path)


def _render_detection(frame: SweepFrame, path: Path, summary: dict) -> None:
    detector_rows = [
        r.epochs_elapsed for r in frame.rows if r.detection_channel == "cdwb"
    ]
    backup_rows = sum(1 for r in frame.rows if r.detection_channel == "backup")
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.set_title(_caption(frame, "epochs elapsed at detector-channel stabilization"))
    ax.set_xlabel("epochs elapsed")
    ax.set_ylabel("trials")
    annotations = []
    if detector_rows:
        bins = max(5, min(30, len(set(detector_rows))))
        ax.hist(detector_rows, bins=bins)
        mean_epochs = sum(detector_rows) / len(detector_rows)
        implied = 1.0 / mean_epochs if mean_epochs > 0 else 0.0
        annotations.append(
            f"{len(detector_rows)} detector-channel runs, mean {mean_epochs:.1f} "
            f"epochs (implied per-epoch hazard {implied:.4f})"
        )
        summary["detection"] = {
            "detector_runs": len(detector_rows),
            "backup_runs": backup_rows,
            "mean_epochs": mean_epochs,
            "implied_per_epoch_hazard": implied,
        }
    else:
        ax.text(
            0.5, 0.55, "no detector-channel stabilizations in this frame",
            ha="center", va="center", transform=ax.transAxes,
        )
        summary["detection"] = {
            "detector_runs": 0,
            "backup_runs": backup_rows,
            "mean_epochs": None,
            "implied_per_epoch_hazard": None,
        }
    clean = frame.duplicate_free_rows()
    if clean:
        fp = sum(
            1 for r in frame.rows if r.input_kind == "distinct" and r.false_positive
        )
        annotations.append(f"{fp} false positives over {clean} duplicate-free runs")
        summary["false_positives"] = {"duplicate_free_runs": clean, "flags": fp}
    for i, text in enumerate(annotations):
        ax.annotate(
            text, xy=(0.02, 0.02 + 0.07 * i), xycoords="axes fraction", fontsize=8
        )
    _save(fig, path)


def _render_state_bits(frame: SweepFrame, path: Path, summary: dict) -> None:
    peak: dict[int, int] = {}
    for row in frame.rows:
        peak[row.n] = max(peak.get(row.n, 0), row.max_state_bits)
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.set_title(_caption(frame, "peak per-agent state bits vs population size"))
    ax.set_xlabel("population size n")
    ax.set_ylabel("peak state bits (rank excluded)")
    ns = sorted(peak)
    ys = [peak[n] for n in ns]
    ax.semilogx(ns, ys, "o-", label="measured peak bits")
    if len(ns) >= 2:
        xs = [math.log2(n) for n in ns]
        mean_x = sum(xs) / len(xs)
        mean_y = sum(ys) / len(ys)
        sxx = sum((x - mean_x) ** 2 for x in xs)
        slope = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys)) / sxx
        intercept = mean_y - slope * mean_x
        ax.semilogx(
            ns, [slope * x + intercept for x in xs],
            "--", label=f"{slope:.2f}·log2(n) + {intercept:.1f}",
        )
        summary["state_bits"] = {
            "bits_per_doubling": slope,
            "intercept": intercept,
            "peaks": {str(n): peak[n] for n in ns},
        }
    else:
        summary["state_bits"] = {
            "bits_per_doubling": None,
            "intercept": None,
            "peaks": {str(n): peak[n] for n in ns},
        }
    ax.legend()
    _save(fig, path)


def render_figures(frame: SweepFrame, out_dir: str | Path) -> list[Path]:
    """Render the three figures plus the JSON fit summary into ``out_dir``."""
    if len(frame) == 0:
        raise AnalysisError("cannot render figures from an empty frame")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary: dict = {
        "rows": len(frame),
        "protocol": frame.protocol,
        "n_values": list(frame.n_values()),
        "input_kinds": list(frame.input_kinds()),
    }
    paths = [out / "scaling.png", out / "detection_rate.png", out / "state_bits.png"]
    _render_scaling(frame, paths[0], summary)
    _render_detection(frame, paths[1], summary)
    _render_state_bits(frame, paths[2], summary)
    summary_path = out / "fit_summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return paths + [summary_path]
