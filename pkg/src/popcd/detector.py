"""Square-root-decomposition collision detector for ranked populations.

Given population bounds ``n_lower <= n <= n_upper``, the rank space
``[1, n_upper]`` is cut into segments of length about
``sqrt(n_lower * log2(n_lower))``.  A leader-driven phase clock dedicates
each epoch to one segment in round-robin order; agents whose rank falls in
the active segment form a group id ``(offset, nonce)`` from their in-segment
offset plus one random bit, seed a bounded broadcast with it, and any
meeting of equal offsets with different nonces proves a duplicate rank.
A same-rank meeting is always accepted as direct proof (the backup channel),
and the ``collision`` flag spreads by one-way epidemic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .primitives import phase_clock_step
from .rng import RngStream
from .state import (
    EV_BACKUP_HIT,
    EV_EPOCH_INCREASE,
    EV_FLAG_FROM_BACKUP,
    EV_FLAG_FROM_MISMATCH,
    EV_FLAG_FROM_SPREAD,
    EV_MISMATCH_HIT,
    NULL_OFFSET,
    Agent,
    InputError,
)

#: tolerance for snapping float ceil/floor at representation boundaries
_EPS = 1e-9


@dataclass(frozen=True)
class SegmentParams:
    """Geometry derived from population bounds.

    segment_len
        Ranks per segment: ``ceil(sqrt(n_lower * log2(n_lower)))``.
    segment_count
        Segments covering ``[1, n_upper]``: ``ceil(n_upper / segment_len)``.
    repetitions
        Dedicated epochs per segment: ``ceil(3 * eta * log2(n_upper))``.
    epoch_cap
        Total epochs: ``repetitions * segment_count + 1`` (epoch 0 is a
        warm-up with no active segment).
    max_infectivity
        Broadcast budget exponent:
        ``max(0, floor(log2(n_lower) - log2(segment_len)) - 2)``, so a
        group id is copied into at most ``2^max_infectivity`` agents.
    """

    n_lower: int
    n_upper: int
    eta: float
    segment_len: int
    segment_count: int
    repetitions: int
    epoch_cap: int
    max_infectivity: int


def derive_params(n_lower: int, n_upper: int, eta: float = 1.0) -> SegmentParams:
    if not 2 <= n_lower <= n_upper:
        raise InputError(f"need 2 <= n_lower <= n_upper, got ({n_lower}, {n_upper})")
    if eta <= 0:
        raise InputError(f"eta must be positive, got {eta}")
    segment_len = math.ceil(math.sqrt(n_lower * math.log2(n_lower)) - _EPS)
    segment_count = -(-n_upper // segment_len)
    repetitions = math.ceil(3.0 * eta * math.log2(n_upper) - _EPS)
    epoch_cap = repetitions * segment_count + 1
    max_infectivity = max(
        0, math.floor(math.log2(n_lower) - math.log2(segment_len) + _EPS) - 2
    )
    return SegmentParams(
        n_lower=n_lower,
        n_upper=n_upper,
        eta=eta,
        segment_len=segment_len,
        segment_count=segment_count,
        repetitions=repetitions,
        epoch_cap=epoch_cap,
        max_infectivity=max_infectivity,
    )


def active_segment(epoch: int, segment_count: int) -> int:
    """Segment index served by a positive epoch (round-robin)."""
    return (epoch - 1) % segment_count


def offset_in_segment(rank: int, segment: int, seg: SegmentParams) -> int:
    """1-based offset of ``rank`` inside ``segment``, or NULL_OFFSET if outside."""
    lo = segment * seg.segment_len + 1
    hi = min((segment + 1) * seg.segment_len, seg.n_upper)
    if lo <= rank <= hi:
        return rank - segment * seg.segment_len
    return NULL_OFFSET


def enter_epoch(agent: Agent, seg: SegmentParams, rng: RngStream) -> None:
    """Re-initialize an agent's group id for its (new) current epoch.

    Draws the one-bit nonce only when the agent's rank lies in the active
    segment (binding draw-order contract).
    """
    offset = offset_in_segment(agent.rank, active_segment(agent.epoch, seg.segment_count), seg)
    if offset != NULL_OFFSET:
        agent.gid_offset = offset
        agent.gid_nonce = rng.bit()
        agent.infectivity = seg.max_infectivity
    else:
        agent.gid_offset = NULL_OFFSET
        agent.gid_nonce = 0
        agent.infectivity = 0
    agent.waiting = 0


def complete_waiting(agent: Agent, seg: SegmentParams, role_bit: int) -> None:
    """Finish a deferred epoch entry, deriving the nonce from the agent's
    role in the current interaction (0 = initiator, 1 = responder)."""
    offset = offset_in_segment(agent.rank, active_segment(agent.epoch, seg.segment_count), seg)
    if offset != NULL_OFFSET:
        agent.gid_offset = offset
        agent.gid_nonce = role_bit
        agent.infectivity = seg.max_infectivity
    else:
        agent.gid_offset = NULL_OFFSET
        agent.gid_nonce = 0
        agent.infectivity = 0
    agent.waiting = 0


def detector_step(
    a: Agent,
    b: Agent,
    seg: SegmentParams,
    modulus: int,
    mode: str,
    rng: RngStream,
) -> int:
    """One detector interaction; returns the event bitmask.

    Order: same-rank backup, phase clock, group-id (re-)initialization,
    bounded proliferation, nonce-mismatch check, collision epidemic.
    """
    events = 0
    if a.rank == b.rank:
        events |= EV_BACKUP_HIT
        if b.collision == 0:
            b.collision = 1
            events |= EV_FLAG_FROM_BACKUP
    if phase_clock_step(a, b, modulus, seg.epoch_cap):
        events |= EV_EPOCH_INCREASE
        if mode == "derandomized":
            # defer the nonce to b's next interaction, where its role
            # supplies the bit
            b.gid_offset = NULL_OFFSET
            b.gid_nonce = 0
            b.infectivity = 0
            b.waiting = 1
        else:
            enter_epoch(b, seg, rng)
    elif b.waiting == 1:
        complete_waiting(b, seg, 1)
    if a.waiting == 1:
        complete_waiting(a, seg, 0)
    if a.epoch == b.epoch and a.epoch > 0:
        if a.gid_offset != NULL_OFFSET and a.infectivity > 0 and b.gid_offset == NULL_OFFSET:
            b.gid_offset = a.gid_offset
            b.gid_nonce = a.gid_nonce
            a.infectivity -= 1
            b.infectivity = a.infectivity
        if (
            a.gid_offset != NULL_OFFSET
            and a.gid_offset == b.gid_offset
            and a.gid_nonce != b.gid_nonce
        ):
            events |= EV_MISMATCH_HIT
            if b.collision == 0:
                b.collision = 1
                events |= EV_FLAG_FROM_MISMATCH
    if a.collision == 1 and b.collision == 0:
        b.collision = 1
        events |= EV_FLAG_FROM_SPREAD
    return events
