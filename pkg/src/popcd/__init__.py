"""Population-protocol simulator for collision detection under a uniform
random pairwise scheduler.

The package provides four protocols over a shared agent state:

- ``epidemic``: one-way infection spread, the basic propagation primitive.
- ``phaseclock``: a leader-driven modular timer that partitions the run
  into epochs of Theta(n log n) interactions each.
- ``cdwb``: collision detection between agents holding equal inputs, given
  lower/upper bounds on the population size.
- ``cold``: the composed, always-correct detector that acquires its size
  bounds from an in-model estimator and restarts detection as the
  estimate grows.

Entry points: :func:`run_trial` for single seeded trials,
:mod:`popcd.experiments` (``python -m popcd``) for the CLI harness, and
:func:`popcd.kernels.run_kernel` for the compiled fast path.
"""

from .composed import composed_step, reset_detector_fields
from .detector import SegmentParams, derive_params, detector_step
from .engine import (
    CSV_HEADER,
    InteractionRecord,
    Simulation,
    TrialResult,
    generate_ranks,
    read_csv,
    run_trial,
    write_csv,
    write_json,
)
from .params import ESTIMATORS, MODES, PROTOCOLS, ProtocolParams
from .primitives import epidemic_step, phase_clock_step, ring_max, timer_is_ahead
from .rng import RngStream, derive_seed
from .sizing import (
    bounds_from_estimate,
    geometric_estimator_step,
    ideal_estimator_step,
)
from .state import Agent, InputError, InvariantViolation

__all__ = [
    "Agent",
    "CSV_HEADER",
    "ESTIMATORS",
    "InputError",
    "InteractionRecord",
    "InvariantViolation",
    "MODES",
    "PROTOCOLS",
    "ProtocolParams",
    "RngStream",
    "SegmentParams",
    "Simulation",
    "TrialResult",
    "bounds_from_estimate",
    "composed_step",
    "derive_params",
    "derive_seed",
    "detector_step",
    "epidemic_step",
    "generate_ranks",
    "geometric_estimator_step",
    "ideal_estimator_step",
    "phase_clock_step",
    "read_csv",
    "reset_detector_fields",
    "ring_max",
    "run_trial",
    "timer_is_ahead",
    "write_csv",
    "write_json",
]

__version__ = "0.1.0"
