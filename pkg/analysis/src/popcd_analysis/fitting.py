"""Scaling-exponent fits over sweep medians.

The headline fit is ordinary least squares on (log2 n, log2 median-steps).
Because the expected growth law carries a polylog factor that a pure
power-law slope cannot express, the fit also reports how well the medians
follow c · n^1.5 · (log2 n)^0.5 with c chosen by least squares — the
residual there says whether the data is consistent with that shape even
when the raw slope sits away from 1.5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .frame import AnalysisError, SweepFrame


@dataclass(frozen=True)
class ScalingFit:
    """Result of one scaling fit."""

    slope: float
    intercept: float
    r_squared: float
    #: least-squares constant for the c * n^1.5 * sqrt(log2 n) reference
    ref_constant: float
    #: root-mean-square log2 residual of the medians against that reference
    ref_rmse_log2: float
    n_values: tuple[int, ...]
    medians: tuple[float, ...]


def _ols(xs: list[float], ys: list[float]) -> tuple[float, float, float]:
    count = len(xs)
    mean_x = sum(xs) / count
    mean_y = sum(ys) / count
    sxx = sum((x - mean_x) ** 2 for x in xs)
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    syy = sum((y - mean_y) ** 2 for y in ys)
    if sxx == 0:
        raise AnalysisError("cannot fit a slope: all n values equal")
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x
    r_squared = 1.0 if syy == 0 else (sxy * sxy) / (sxx * syy)
    return slope, intercept, r_squared


def reference_curve(n: float, exponent_log: float = 0.5) -> float:
    """The n^1.5 * (log2 n)^exponent_log growth shape, unit constant."""
    return n**1.5 * math.log2(n) ** exponent_log


def fit_scaling(frame: SweepFrame, *, input_kind: str | None = None) -> ScalingFit:
    """Fit the log-log slope of median steps-to-stable against n.

    Requires medians at four or more distinct population sizes; fewer
    points cannot distinguish the candidate growth laws.
    """
    medians = frame.median_steps(input_kind)
    if len(medians) < 4:
        raise AnalysisError(
            f"need medians at >=4 distinct n values to fit a slope, "
            f"got {len(medians)}"
        )
    ns = sorted(medians)
    ys = [medians[n] for n in ns]
    slope, intercept, r_squared = _ols(
        [math.log2(n) for n in ns], [math.log2(y) for y in ys]
    )
    shape = [reference_curve(n) for n in ns]
    ref_constant = sum(y * g for y, g in zip(ys, shape)) / sum(g * g for g in shape)
    ref_rmse_log2 = math.sqrt(
        sum((math.log2(y) - math.log2(ref_constant * g)) ** 2 for y, g in zip(ys, shape))
        / len(ns)
    )
    return ScalingFit(
        slope=slope,
        intercept=intercept,
        r_squared=r_squared,
        ref_constant=ref_constant,
        ref_rmse_log2=ref_rmse_log2,
        n_values=tuple(ns),
        medians=tuple(ys),
    )
