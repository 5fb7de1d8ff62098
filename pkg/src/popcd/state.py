"""Shared agent state record, event bits, and error types.

One flat record per agent holds the union of all protocol variables; each
protocol only reads and writes its own slice.  ``rank`` is the read-only
input.  ``collision`` is the one-bit output every detector variant drives.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


class InputError(ValueError):
    """A malformed input or configuration (CLI exit status 1)."""


class InvariantViolation(AssertionError):
    """A runtime protocol invariant failed during a run (CLI exit status 2)."""


#: gid offset value meaning "no group id" (the null marker).
NULL_OFFSET = 0

# Event bits returned by transition functions (internal; the engine maps the
# user-facing subset onto InteractionRecord tags).
EV_EPOCH_INCREASE = 1 << 0  # responder's detector epoch increased
EV_RESET = 1 << 1  # responder's detector fields were re-initialized
EV_COUNTFIN = 1 << 2  # some agent's count_finished went 0 -> 1
EV_BACKUP_HIT = 1 << 3  # a same-rank meeting occurred (proof of collision)
EV_MISMATCH_HIT = 1 << 4  # equal-offset, unequal-nonce group ids met
EV_FLAG_FROM_BACKUP = 1 << 5  # collision bit newly set by a same-rank rule
EV_FLAG_FROM_MISMATCH = 1 << 6  # collision bit newly set by the nonce mismatch
EV_FLAG_FROM_SPREAD = 1 << 7  # collision bit newly copied by the closing epidemic


@dataclass(slots=True)
class Agent:
    """Full variable record of one agent.

    Fields are grouped by the protocol layer that owns them; unused layers
    stay at their zero values.
    """

    # immutable input
    rank: int = 0
    # shared output
    collision: int = 0
    # standalone max-epidemic payload
    value: int = 0
    # leader-driven phase clock
    timer: int = 0
    epoch: int = 0
    leader: int = 0
    # group-id detector
    gid_offset: int = NULL_OFFSET  # 0 = null, else 1..segment_len
    gid_nonce: int = 0
    infectivity: int = 0
    waiting: int = 0  # derandomized mode: nonce pending at next interaction
    # size estimator interface
    level: int = 0
    log_population: int = 0
    count_finished: int = 0
    # geometric size estimator internals
    own_draw: int = 0  # 0 = not yet drawn
    own_key: int = 0
    max_draw: int = 0
    max_key: int = 0
    countdown: int = 0

    def copy(self) -> "Agent":
        return replace(self)
