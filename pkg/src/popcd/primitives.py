"""Pairwise building blocks: max-epidemic, ring order, leader-driven clock.

All transition helpers follow one convention: the *initiator* ``a`` is
read-only, the *responder* ``b`` is updated in place, and the return value
reports what changed.  Composite protocols chain these helpers in a fixed
order so that the Python reference path and the compiled kernels stay
step-for-step identical.
"""

from __future__ import annotations

from .state import Agent


def epidemic_step(a: Agent, b: Agent) -> bool:
    """One-way max-epidemic on ``value``; returns True if ``b`` advanced."""
    if a.value > b.value:
        b.value = a.value
        return True
    return False


def timer_is_ahead(x: int, y: int, modulus: int) -> bool:
    """True iff timer ``x`` is ahead of timer ``y`` on the ring of size
    ``modulus``.

    ``x`` is ahead when it lies in the window of ``modulus // 2`` positions
    reached from ``y`` by moving forward (with wrap-around):
    either ``x <= y - ceil(modulus / 2)`` or ``y < x <= y + modulus // 2``
    taken modulo ``modulus``.
    """
    half_forward = modulus // 2
    half_back = (modulus + 1) // 2
    if x <= y - half_back:
        return True
    hi = y + half_forward
    if y < x <= hi:
        return True
    # the forward window wraps past modulus - 1
    if hi >= modulus and x <= hi - modulus:
        return True
    return False


def ring_max(x: int, y: int, modulus: int) -> int:
    """The later of two timer values under the ring order."""
    return x if timer_is_ahead(x, y, modulus) else y


def phase_clock_step(a: Agent, b: Agent, modulus: int, epoch_cap: int) -> bool:
    """Leader-driven phase clock with epoch epidemic.

    A leader responder meeting its own timer value increments it, bumping
    its epoch (up to ``epoch_cap``) each time the timer wraps to 0.  A
    non-leader responder synchronizes its timer to the ring-max.  Finally
    every responder adopts a larger epoch by epidemic.

    Returns True iff ``b``'s epoch increased.
    """
    increased = False
    if b.leader == 1:
        if a.timer == b.timer:
            b.timer = (b.timer + 1) % modulus
            if b.timer == 0 and b.epoch < epoch_cap:
                b.epoch += 1
                increased = True
    else:
        b.timer = ring_max(a.timer, b.timer, modulus)
    if a.epoch > b.epoch:
        b.epoch = a.epoch
        increased = True
    return increased
