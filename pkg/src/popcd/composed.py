"""Always-correct composition: size estimator + bounded detector + backup.

The composed protocol never trusts the size estimate for *safety*: the
unconditional same-rank backup and the collision epidemic run on every
interaction, so a raised flag always witnesses a real duplicate.  The
estimate only gates *when* the detector layer is allowed to act: two agents
run a detector interaction only if they agree on ``(level,
log_population)`` and both consider the estimate final.  Whenever an
agent's level rises, its detector state restarts from scratch under the
parameters derived from the new estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .detector import SegmentParams, derive_params, detector_step
from .params import ProtocolParams
from .rng import RngStream
from .sizing import bounds_from_estimate, geometric_estimator_step, ideal_estimator_step
from .state import (
    EV_BACKUP_HIT,
    EV_FLAG_FROM_BACKUP,
    EV_FLAG_FROM_SPREAD,
    EV_RESET,
    NULL_OFFSET,
    Agent,
)


@dataclass
class ComposedContext:
    """Per-run cache of detector geometries keyed by log2 size estimate."""

    params: ProtocolParams
    offsets: tuple[int, int] = field(init=False)
    _segments: dict[int, SegmentParams] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.offsets = self.params.resolved_offsets()

    def segment_for(self, log_population: int) -> SegmentParams:
        seg = self._segments.get(log_population)
        if seg is None:
            n_lower, n_upper = bounds_from_estimate(log_population, *self.offsets)
            seg = derive_params(n_lower, n_upper, self.params.eta)
            self._segments[log_population] = seg
        return seg


def reset_detector_fields(agent: Agent, modulus: int, include_collision: bool = False) -> None:
    """Restart an agent's detector layer after its estimate changed.

    By default the collision flag is left alone: once raised it is
    permanent proof.  ``include_collision`` switches to the stricter
    everything-restarts reading (still correct — the backup channel
    re-raises the flag — but the output is no longer monotone).
    """
    agent.timer = 0 if agent.leader == 1 else modulus - 1
    agent.epoch = 0
    agent.gid_offset = NULL_OFFSET
    agent.gid_nonce = 0
    agent.infectivity = 0
    agent.waiting = 0
    if include_collision:
        agent.collision = 0


def composed_step(a: Agent, b: Agent, ctx: ComposedContext, rng: RngStream) -> int:
    """One interaction of the composed protocol; returns the event bitmask."""
    params = ctx.params
    if params.estimator == "ideal":
        events, level_up = ideal_estimator_step(a, b)
    else:
        events, level_up = geometric_estimator_step(a, b, rng, params.c_fin)
    if level_up:
        reset_detector_fields(b, params.m, params.reset_collision)
        events |= EV_RESET
    if (
        a.level == b.level
        and a.log_population == b.log_population
        and a.count_finished == 1
        and b.count_finished == 1
    ):
        seg = ctx.segment_for(a.log_population)
        events |= detector_step(a, b, seg, params.m, params.mode, rng)
    if a.rank == b.rank:
        events |= EV_BACKUP_HIT
        if b.collision == 0:
            b.collision = 1
            events |= EV_FLAG_FROM_BACKUP
    if a.collision == 1 and b.collision == 0:
        b.collision = 1
        events |= EV_FLAG_FROM_SPREAD
    return events
