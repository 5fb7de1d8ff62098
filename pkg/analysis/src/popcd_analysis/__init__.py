"""Post-processing for collision-detection sweep CSVs.

Ingests the simulator's nine-column trial CSV (the only interface between
the two packages), fits the stabilization scaling law, and renders the
summary figures.
"""

from .figures import render_figures
from .fitting import ScalingFit, fit_scaling, reference_curve
from .frame import EXPECTED_HEADER, AnalysisError, SweepFrame, TrialRow

__all__ = [
    "AnalysisError",
    "EXPECTED_HEADER",
    "ScalingFit",
    "SweepFrame",
    "TrialRow",
    "fit_scaling",
    "reference_curve",
    "render_figures",
]

__version__ = "0.1.0"
