"""Size-estimation layers feeding the composed protocol.

Both estimators publish the same three-field interface on each agent:

* ``level`` — monotone progress counter; the detector treats any level
  increase as "my estimate changed, start over".
* ``log_population`` — the current log2 size estimate; frozen whenever
  ``count_finished`` is 1.
* ``count_finished`` — set once the estimate is final enough to act on;
  it spreads (initiator to responder) among agents whose ``(level,
  log_population)`` agree and resets to 0 only when the level increases.

The *ideal* layer starts every agent with the exact ``floor(log2 n)`` and a
single pre-elected leader, so its only job is to originate and spread the
``count_finished`` bit.  The *geometric* layer estimates the size in-model:
each agent draws a geometric sample at its first interaction as responder,
the maximum sample (with a random tie-break key) spreads by one-way
epidemic, and the current maximum holder counts down interactions before
declaring the estimate final.
"""

from __future__ import annotations

from .rng import RngStream
from .state import EV_COUNTFIN, Agent

#: width of the random tie-break key attached to each geometric draw
KEY_BITS = 16


def bounds_from_estimate(log_population: int, c_lower: int, c_upper: int) -> tuple[int, int]:
    """Map a log2 size estimate to (n_lower, n_upper) detector bounds.

    The lower bound is clamped to 2 when the estimate minus the slack
    drops below 1 bit.
    """
    low_bits = log_population - c_lower
    n_lower = 2 if low_bits < 1 else 2**low_bits
    n_upper = max(n_lower, 2 ** (log_population + c_upper))
    return n_lower, n_upper


def _spread_count_finished(a: Agent, b: Agent) -> int:
    """One-way spread of the finished bit among agreeing estimates."""
    if (
        a.count_finished == 1
        and b.count_finished == 0
        and a.level == b.level
        and a.log_population == b.log_population
    ):
        b.count_finished = 1
        return EV_COUNTFIN
    return 0


def ideal_estimator_step(a: Agent, b: Agent) -> tuple[int, bool]:
    """Pre-seeded exact estimate: only the finished bit moves.

    The pre-elected leader originates ``count_finished`` the first time it
    responds; afterwards the bit spreads epidemically.  Levels never change,
    so the second return value is always False.
    """
    events = 0
    if b.leader == 1 and b.count_finished == 0:
        b.count_finished = 1
        events |= EV_COUNTFIN
    events |= _spread_count_finished(a, b)
    return events, False


def geometric_estimator_step(a: Agent, b: Agent, rng: RngStream, c_fin: int) -> tuple[int, bool]:
    """In-model size estimation from the maximum of geometric draws.

    Returns ``(events, level_increased)`` where ``level_increased`` reports
    whether ``b`` adopted a strictly larger maximum this step.

    Draw order (binding for kernel equivalence): when ``b`` participates as
    responder for the first time it draws its geometric sample (one coin
    flip per doubling) followed by one ``KEY_BITS``-bit key.
    """
    events = 0
    prev_max = b.max_draw
    if b.own_draw == 0:
        b.own_draw = rng.geometric()
        b.own_key = rng.randbelow(1 << KEY_BITS)
        if (b.own_draw, b.own_key) > (b.max_draw, b.max_key):
            b.max_draw = b.own_draw
            b.max_key = b.own_key
    if (a.max_draw, a.max_key) > (b.max_draw, b.max_key):
        b.max_draw = a.max_draw
        b.max_key = a.max_key
    level_up = b.max_draw > prev_max
    if level_up:
        b.level = b.max_draw
        b.log_population = b.max_draw
        b.count_finished = 0
        b.countdown = c_fin * b.max_draw * b.max_draw
    # leadership == currently holding the maximum sample it drew itself
    b.leader = (
        1
        if (b.own_draw > 0 and b.own_draw == b.max_draw and b.own_key == b.max_key)
        else 0
    )
    # both participants burn one countdown tick; a fresh maximum restarts b's
    if a.countdown > 0:
        a.countdown -= 1
    if a.countdown == 0 and a.leader == 1 and a.count_finished == 0:
        a.count_finished = 1
        events |= EV_COUNTFIN
    if not level_up:
        if b.countdown > 0:
            b.countdown -= 1
        if b.countdown == 0 and b.leader == 1 and b.count_finished == 0:
            b.count_finished = 1
            events |= EV_COUNTFIN
    events |= _spread_count_finished(a, b)
    return events, level_up
