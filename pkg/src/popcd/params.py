"""Run-level protocol configuration.

``ProtocolParams`` collects every tunable knob shared by the four protocols.
Defaults follow the constants used throughout the experiment suite; anything
protocol-specific that is derived from the population bounds lives in
:mod:`popcd.detector` instead.
"""

from __future__ import annotations

from dataclasses import dataclass

from .state import InputError

PROTOCOLS = ("epidemic", "phaseclock", "cdwb", "cold")
MODES = ("randomized", "derandomized")
ESTIMATORS = ("ideal", "geometric")

#: default (lower, upper) power-of-two slack around the size estimate
DEFAULT_OFFSETS = {"ideal": (1, 1), "geometric": (2, 2)}


@dataclass(frozen=True)
class ProtocolParams:
    """Knobs for a single trial.

    eta
        Repetition multiplier for the per-segment epoch budget.
    m
        Phase-clock timer modulus.
    mode
        ``randomized`` draws group-id nonces from the shared coin;
        ``derandomized`` derives them from the next interaction role.
    estimator
        Size-estimation layer used by the composed protocol.
    offsets
        ``(c_lower, c_upper)`` slack applied to the size estimate when
        deriving detector bounds; ``None`` picks the per-estimator default.
    c_fin
        Countdown multiplier for the geometric estimator's finish timer.
        The default is the calibrated value (see the committed calibration
        report): smaller multipliers let low-draw candidates finish their
        countdown in the opening interactions, before the true maximum has
        spread, marking the estimate final prematurely in almost every run.
    n_lower / n_upper
        Standalone detector bounds; ``None`` defaults both to the exact
        population size.
    phase_cap
        Standalone phase-clock epoch cap; ``None`` derives the detector's
        cap for the same population size.
    leaders
        Agent indices pre-marked as leaders; ``None`` means agent 0.
        (Programmatic only — used by adversarial fixtures.)
    reset_collision
        When true, a fresh size estimate also clears the responder's
        collision flag.  The default keeps the flag: a raised flag is
        permanent proof of a duplicate, and the backup channel re-raises
        it anyway under the inclusive reading, so both settings stabilize
        correctly; the exclusive default keeps the output monotone.
    """

    eta: float = 1.0
    m: int = 16
    mode: str = "randomized"
    estimator: str = "ideal"
    offsets: tuple[int, int] | None = None
    c_fin: int = 32
    n_lower: int | None = None
    n_upper: int | None = None
    phase_cap: int | None = None
    leaders: tuple[int, ...] | None = None
    reset_collision: bool = False

    def resolved_offsets(self) -> tuple[int, int]:
        if self.offsets is not None:
            return self.offsets
        return DEFAULT_OFFSETS[self.estimator]

    def validate(self) -> None:
        if self.eta <= 0:
            raise InputError(f"eta must be positive, got {self.eta}")
        if self.m < 4 or self.m % 2 != 0:
            raise InputError(f"timer modulus must be an even integer >= 4, got {self.m}")
        if self.mode not in MODES:
            raise InputError(f"unknown mode {self.mode!r}")
        if self.estimator not in ESTIMATORS:
            raise InputError(f"unknown estimator {self.estimator!r}")
        if self.offsets is not None:
            c_lo, c_hi = self.offsets
            if c_lo < 0 or c_hi < 0:
                raise InputError(f"offsets must be non-negative, got {self.offsets}")
        if self.c_fin < 1:
            raise InputError(f"c_fin must be >= 1, got {self.c_fin}")
        if (self.n_lower is None) != (self.n_upper is None):
            raise InputError("n_lower and n_upper must be given together")
        if self.n_lower is not None and self.n_upper is not None:
            if not 2 <= self.n_lower <= self.n_upper:
                raise InputError(
                    f"need 2 <= n_lower <= n_upper, got ({self.n_lower}, {self.n_upper})"
                )
        if self.phase_cap is not None and self.phase_cap < 1:
            raise InputError(f"phase_cap must be >= 1, got {self.phase_cap}")
