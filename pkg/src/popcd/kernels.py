"""Compiled stepping loops (numba) for large populations.

Each protocol gets one monolithic kernel over a struct-of-rows ``int64``
state matrix.  The kernels re-implement the exact transition and RNG
contract of the pure-Python reference path in :mod:`popcd.engine`:

* splitmix64 stream, bitmask-rejection ``randbelow``, identical draw order;
* identical rule order inside each interaction;
* identical stability bookkeeping (responder-only terminal transitions).

Equivalence is enforced by tests that compare full state trajectories
between backends.  Two representation limits are invisible at any
reachable scale but documented here: size estimates are tabulated up to
``_TABLE_SIZE`` (a run whose estimate exceeds it aborts with an error
code), and per-estimate population upper bounds are clamped to ``2**62``
(only distinguishable with ranks above ``2**62``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from numba.types import uint64

from . import engine
from .detector import derive_params
from .sizing import KEY_BITS, bounds_from_estimate
from .state import Agent, InputError, InvariantViolation

# state matrix columns
(
    RANK,
    COLLISION,
    VALUE,
    TIMER,
    EPOCH,
    LEADER,
    GID_OFF,
    GID_NONCE,
    INFECT,
    WAITING,
    LEVEL,
    LOGNUM,
    COUNTFIN,
    OWN_DRAW,
    OWN_KEY,
    MAX_DRAW,
    MAX_KEY,
    COUNTDOWN,
) = range(18)
N_FIELDS = 18

# out-array slots
(
    OUT_STEPS,
    OUT_STABLE,
    OUT_FLAG_STEP,
    OUT_CHANNEL,
    OUT_MAX_BITS,
    OUT_EPOCHS,
    OUT_ERROR,
) = range(7)
N_OUT = 7

CHANNEL_NONE = 0
CHANNEL_BACKUP = 1
CHANNEL_CDWB = 2

#: size-estimate table height for the composed kernel
_TABLE_SIZE = 96
#: clamp for tabulated population upper bounds (see module docstring)
_NUPPER_CLAMP = 2**62

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(inline="always")
def _next(s):
    s = s + _GAMMA
    z = s
    z = (z ^ (z >> uint64(30))) * _MIX1
    z = (z ^ (z >> uint64(27))) * _MIX2
    z = z ^ (z >> uint64(31))
    return s, z


@njit(inline="always")
def _randbelow(s, bound):
    if bound == 1:
        return s, 0
    b1 = np.uint64(bound - 1)
    mask = np.uint64(0)
    while mask < b1:
        mask = (mask << uint64(1)) | uint64(1)
    ubound = np.uint64(bound)
    while True:
        s, z = _next(s)
        value = z & mask
        if value < ubound:
            return s, np.int64(value)


@njit(inline="always")
def _pair(s, n):
    s, u = _randbelow(s, n)
    s, v = _randbelow(s, n - 1)
    if v >= u:
        v += 1
    return s, u, v


@njit(inline="always")
def _geometric(s):
    g = 1
    while True:
        s, b = _randbelow(s, 2)
        if b == 1:
            return s, g
        g += 1


@njit(inline="always")
def _bitlen(x):
    bits = 0
    while x > 0:
        x >>= 1
        bits += 1
    return bits


@njit(inline="always")
def _ring_max(x, y, modulus):
    half_forward = modulus // 2
    half_back = (modulus + 1) // 2
    ahead = False
    if x <= y - half_back:
        ahead = True
    else:
        hi = y + half_forward
        if x > y and x <= hi:
            ahead = True
        elif hi >= modulus and x <= hi - modulus:
            ahead = True
    return x if ahead else y


@njit(inline="always")
def _clock(state, u, v, modulus, epoch_cap):
    increased = False
    if state[v, LEADER] == 1:
        if state[u, TIMER] == state[v, TIMER]:
            t = (state[v, TIMER] + 1) % modulus
            state[v, TIMER] = t
            if t == 0 and state[v, EPOCH] < epoch_cap:
                state[v, EPOCH] += 1
                increased = True
    else:
        state[v, TIMER] = _ring_max(state[u, TIMER], state[v, TIMER], modulus)
    if state[u, EPOCH] > state[v, EPOCH]:
        state[v, EPOCH] = state[u, EPOCH]
        increased = True
    return increased


@njit(inline="always")
def _segment_offset(state, i, seg_len, seg_count, n_upper):
    k = (state[i, EPOCH] - 1) % seg_count
    lo = k * seg_len + 1
    hi = (k + 1) * seg_len
    if hi > n_upper:
        hi = n_upper
    r = state[i, RANK]
    if r >= lo and r <= hi:
        return r - k * seg_len
    return 0


@njit(inline="always")
def _enter_epoch(state, i, s, seg_len, seg_count, max_inf, n_upper):
    offset = _segment_offset(state, i, seg_len, seg_count, n_upper)
    if offset != 0:
        s, nonce = _randbelow(s, 2)
        state[i, GID_OFF] = offset
        state[i, GID_NONCE] = nonce
        state[i, INFECT] = max_inf
    else:
        state[i, GID_OFF] = 0
        state[i, GID_NONCE] = 0
        state[i, INFECT] = 0
    state[i, WAITING] = 0
    return s


@njit(inline="always")
def _complete_waiting(state, i, role_bit, seg_len, seg_count, max_inf, n_upper):
    offset = _segment_offset(state, i, seg_len, seg_count, n_upper)
    if offset != 0:
        state[i, GID_OFF] = offset
        state[i, GID_NONCE] = role_bit
        state[i, INFECT] = max_inf
    else:
        state[i, GID_OFF] = 0
        state[i, GID_NONCE] = 0
        state[i, INFECT] = 0
    state[i, WAITING] = 0


# event bits local to the kernels; 1 = fresh flag from backup, 2 = fresh flag
# from mismatch, 4 = fresh flag from spread (the spread bit never needs
# channel attribution but keeps "flag happened" detection uniform), 8 = the
# mismatch condition held this step whether or not the responder was already
# flagged (study kernels use it to count detections per epoch after the
# first flag has spread)
EVK_FLAG_BACKUP = 1
EVK_FLAG_MISMATCH = 2
EVK_FLAG_SPREAD = 4
EVK_MISMATCH_HIT = 8
_EVK_FRESH_MASK = 7


@njit(inline="always")
def _detector_body(state, u, v, s, seg_len, seg_count, epoch_cap, max_inf, n_upper, modulus, derand):
    events = 0
    if state[u, RANK] == state[v, RANK]:
        if state[v, COLLISION] == 0:
            state[v, COLLISION] = 1
            events |= EVK_FLAG_BACKUP
    if _clock(state, u, v, modulus, epoch_cap):
        if derand == 1:
            state[v, GID_OFF] = 0
            state[v, GID_NONCE] = 0
            state[v, INFECT] = 0
            state[v, WAITING] = 1
        else:
            s = _enter_epoch(state, v, s, seg_len, seg_count, max_inf, n_upper)
    elif state[v, WAITING] == 1:
        _complete_waiting(state, v, 1, seg_len, seg_count, max_inf, n_upper)
    if state[u, WAITING] == 1:
        _complete_waiting(state, u, 0, seg_len, seg_count, max_inf, n_upper)
    if state[u, EPOCH] == state[v, EPOCH] and state[u, EPOCH] > 0:
        if state[u, GID_OFF] != 0 and state[u, INFECT] > 0 and state[v, GID_OFF] == 0:
            state[v, GID_OFF] = state[u, GID_OFF]
            state[v, GID_NONCE] = state[u, GID_NONCE]
            state[u, INFECT] -= 1
            state[v, INFECT] = state[u, INFECT]
        if (
            state[u, GID_OFF] != 0
            and state[u, GID_OFF] == state[v, GID_OFF]
            and state[u, GID_NONCE] != state[v, GID_NONCE]
        ):
            events |= EVK_MISMATCH_HIT
            if state[v, COLLISION] == 0:
                state[v, COLLISION] = 1
                events |= EVK_FLAG_MISMATCH
    if state[u, COLLISION] == 1 and state[v, COLLISION] == 0:
        state[v, COLLISION] = 1
        events |= EVK_FLAG_SPREAD
    return s, events


@njit(inline="always")
def _note_flag(events, steps, first_step, channel):
    if events & _EVK_FRESH_MASK != 0 and first_step < 0:
        first_step = steps
        if events & EVK_FLAG_MISMATCH:
            channel = CHANNEL_CDWB
        elif events & EVK_FLAG_BACKUP:
            channel = CHANNEL_BACKUP
    return first_step, channel


@njit(cache=True)
def _run_epidemic(state, rng_io, budget, stop_stable, term0, bits0, target, out):
    n = state.shape[0]
    s = rng_io[0]
    terminal = term0
    max_bits = bits0
    steps = 0
    while steps < budget:
        if stop_stable == 1 and terminal == n:
            break
        s, u, v = _pair(s, n)
        if state[u, VALUE] > state[v, VALUE]:
            state[v, VALUE] = state[u, VALUE]
            if state[v, VALUE] == target:
                terminal += 1
            bits = _bitlen(state[v, VALUE])
            if bits > max_bits:
                max_bits = bits
        steps += 1
    rng_io[0] = s
    out[OUT_STEPS] = steps
    out[OUT_STABLE] = 1 if terminal == n else 0
    out[OUT_FLAG_STEP] = -1
    out[OUT_CHANNEL] = CHANNEL_NONE
    out[OUT_MAX_BITS] = max_bits
    out[OUT_EPOCHS] = 0
    out[OUT_ERROR] = 0


@njit(cache=True)
def _run_phaseclock(state, rng_io, budget, stop_stable, term0, bits0, modulus, epoch_cap, out):
    n = state.shape[0]
    s = rng_io[0]
    terminal = term0
    steps = 0
    while steps < budget:
        if stop_stable == 1 and terminal == n:
            break
        s, u, v = _pair(s, n)
        was_terminal = state[v, EPOCH] == epoch_cap
        _clock(state, u, v, modulus, epoch_cap)
        if (state[v, EPOCH] == epoch_cap) != was_terminal:
            terminal += 1
        steps += 1
    rng_io[0] = s
    epochs = 0
    for i in range(n):
        if state[i, EPOCH] > epochs:
            epochs = state[i, EPOCH]
    out[OUT_STEPS] = steps
    out[OUT_STABLE] = 1 if terminal == n else 0
    out[OUT_FLAG_STEP] = -1
    out[OUT_CHANNEL] = CHANNEL_NONE
    out[OUT_MAX_BITS] = bits0
    out[OUT_EPOCHS] = epochs
    out[OUT_ERROR] = 0


@njit(cache=True)
def _run_cdwb(
    state, rng_io, budget, stop_stable, term0, bits0,
    modulus, derand, seg_len, seg_count, epoch_cap, max_inf, n_upper, out,
):
    n = state.shape[0]
    s = rng_io[0]
    terminal = term0
    steps = 0
    first_step = -1
    channel = CHANNEL_NONE
    while steps < budget:
        if stop_stable == 1 and terminal == n:
            break
        s, u, v = _pair(s, n)
        was_flagged = state[v, COLLISION] == 1
        s, events = _detector_body(
            state, u, v, s, seg_len, seg_count, epoch_cap, max_inf, n_upper, modulus, derand
        )
        if not was_flagged and state[v, COLLISION] == 1:
            terminal += 1
        first_step, channel = _note_flag(events, steps, first_step, channel)
        steps += 1
    rng_io[0] = s
    epochs = 0
    for i in range(n):
        if state[i, EPOCH] > epochs:
            epochs = state[i, EPOCH]
    out[OUT_STEPS] = steps
    out[OUT_STABLE] = 1 if terminal == n else 0
    out[OUT_FLAG_STEP] = first_step
    out[OUT_CHANNEL] = channel
    out[OUT_MAX_BITS] = bits0
    out[OUT_EPOCHS] = epochs
    out[OUT_ERROR] = 0


@njit(inline="always")
def _cold_bits(state, i, det_bits_t, geometric, key_bits):
    bits = (
        det_bits_t[state[i, LOGNUM]]
        + _bitlen(state[i, LEVEL])
        + _bitlen(state[i, LOGNUM])
        + 1
    )
    if geometric == 1:
        bits += _bitlen(state[i, OWN_DRAW]) + 2 * key_bits + _bitlen(state[i, COUNTDOWN])
    return bits


@njit(inline="always")
def _estimator_body(state, u, v, s, geometric, c_fin, key_bits):
    """Size-estimation layer of one composed interaction.

    Returns the advanced rng state and whether the responder's level rose.
    """
    if geometric == 0:
        if state[v, LEADER] == 1 and state[v, COUNTFIN] == 0:
            state[v, COUNTFIN] = 1
        level_up = False
    else:
        prev_max = state[v, MAX_DRAW]
        if state[v, OWN_DRAW] == 0:
            s, g = _geometric(s)
            state[v, OWN_DRAW] = g
            s, key = _randbelow(s, 1 << key_bits)
            state[v, OWN_KEY] = key
            if g > state[v, MAX_DRAW] or (
                g == state[v, MAX_DRAW] and key > state[v, MAX_KEY]
            ):
                state[v, MAX_DRAW] = g
                state[v, MAX_KEY] = key
        if state[u, MAX_DRAW] > state[v, MAX_DRAW] or (
            state[u, MAX_DRAW] == state[v, MAX_DRAW]
            and state[u, MAX_KEY] > state[v, MAX_KEY]
        ):
            state[v, MAX_DRAW] = state[u, MAX_DRAW]
            state[v, MAX_KEY] = state[u, MAX_KEY]
        level_up = state[v, MAX_DRAW] > prev_max
        if level_up:
            state[v, LEVEL] = state[v, MAX_DRAW]
            state[v, LOGNUM] = state[v, MAX_DRAW]
            state[v, COUNTFIN] = 0
            state[v, COUNTDOWN] = c_fin * state[v, MAX_DRAW] * state[v, MAX_DRAW]
        if (
            state[v, OWN_DRAW] > 0
            and state[v, OWN_DRAW] == state[v, MAX_DRAW]
            and state[v, OWN_KEY] == state[v, MAX_KEY]
        ):
            state[v, LEADER] = 1
        else:
            state[v, LEADER] = 0
        if state[u, COUNTDOWN] > 0:
            state[u, COUNTDOWN] -= 1
        if state[u, COUNTDOWN] == 0 and state[u, LEADER] == 1 and state[u, COUNTFIN] == 0:
            state[u, COUNTFIN] = 1
        if not level_up:
            if state[v, COUNTDOWN] > 0:
                state[v, COUNTDOWN] -= 1
            if (
                state[v, COUNTDOWN] == 0
                and state[v, LEADER] == 1
                and state[v, COUNTFIN] == 0
            ):
                state[v, COUNTFIN] = 1
    if (
        state[u, COUNTFIN] == 1
        and state[v, COUNTFIN] == 0
        and state[u, LEVEL] == state[v, LEVEL]
        and state[u, LOGNUM] == state[v, LOGNUM]
    ):
        state[v, COUNTFIN] = 1
    return s, level_up


@njit(inline="always")
def _cold_body(
    state, u, v, s, geometric, c_fin, key_bits, modulus, derand, reset_collision,
    seg_len_t, seg_count_t, cap_t, inf_t, nupper_t,
):
    """One full composed interaction.  Returns (s, events, error)."""
    table_size = seg_len_t.shape[0]
    s, level_up = _estimator_body(state, u, v, s, geometric, c_fin, key_bits)
    events = 0
    # a fresh estimate restarts the responder's detector layer
    if level_up:
        state[v, TIMER] = 0 if state[v, LEADER] == 1 else modulus - 1
        state[v, EPOCH] = 0
        state[v, GID_OFF] = 0
        state[v, GID_NONCE] = 0
        state[v, INFECT] = 0
        state[v, WAITING] = 0
        if reset_collision == 1:
            state[v, COLLISION] = 0
    # detector layer runs only between agreeing, finished estimates
    if (
        state[u, LEVEL] == state[v, LEVEL]
        and state[u, LOGNUM] == state[v, LOGNUM]
        and state[u, COUNTFIN] == 1
        and state[v, COUNTFIN] == 1
    ):
        lognum = state[u, LOGNUM]
        if lognum >= table_size:
            return s, events, 1
        s, events = _detector_body(
            state, u, v, s,
            seg_len_t[lognum], seg_count_t[lognum], cap_t[lognum],
            inf_t[lognum], nupper_t[lognum], modulus, derand,
        )
    if state[u, RANK] == state[v, RANK] and state[v, COLLISION] == 0:
        state[v, COLLISION] = 1
        events |= EVK_FLAG_BACKUP
    if state[u, COLLISION] == 1 and state[v, COLLISION] == 0:
        state[v, COLLISION] = 1
        events |= EVK_FLAG_SPREAD
    if state[u, LOGNUM] >= table_size or state[v, LOGNUM] >= table_size:
        return s, events, 1
    return s, events, 0


@njit(cache=True)
def _run_cold(
    state, rng_io, budget, stop_stable, term0, bits0,
    modulus, geometric, derand, c_fin, reset_collision,
    seg_len_t, seg_count_t, cap_t, inf_t, nupper_t, det_bits_t, key_bits, out,
):
    n = state.shape[0]
    s = rng_io[0]
    terminal = term0
    max_bits = bits0
    steps = 0
    first_step = -1
    channel = CHANNEL_NONE
    error = 0
    while steps < budget:
        if stop_stable == 1 and terminal == n:
            break
        s, u, v = _pair(s, n)
        was_flagged = state[v, COLLISION] == 1
        s, events, error = _cold_body(
            state, u, v, s, geometric, c_fin, key_bits, modulus, derand,
            reset_collision, seg_len_t, seg_count_t, cap_t, inf_t, nupper_t,
        )
        if error != 0:
            break
        flagged = state[v, COLLISION] == 1
        if flagged != was_flagged:
            terminal += 1 if flagged else -1
        first_step, channel = _note_flag(events, steps, first_step, channel)
        bits = _cold_bits(state, u, det_bits_t, geometric, key_bits)
        if bits > max_bits:
            max_bits = bits
        bits = _cold_bits(state, v, det_bits_t, geometric, key_bits)
        if bits > max_bits:
            max_bits = bits
        steps += 1
    rng_io[0] = s
    epochs = 0
    for i in range(n):
        if state[i, EPOCH] > epochs:
            epochs = state[i, EPOCH]
    out[OUT_STEPS] = steps
    out[OUT_STABLE] = 1 if terminal == n else 0
    out[OUT_FLAG_STEP] = first_step
    out[OUT_CHANNEL] = channel
    out[OUT_MAX_BITS] = max_bits
    out[OUT_EPOCHS] = epochs
    out[OUT_ERROR] = error


def pack_state(agents: list[Agent]) -> np.ndarray:
    mat = np.zeros((len(agents), N_FIELDS), dtype=np.int64)
    for i, ag in enumerate(agents):
        mat[i, RANK] = ag.rank
        mat[i, COLLISION] = ag.collision
        mat[i, VALUE] = ag.value
        mat[i, TIMER] = ag.timer
        mat[i, EPOCH] = ag.epoch
        mat[i, LEADER] = ag.leader
        mat[i, GID_OFF] = ag.gid_offset
        mat[i, GID_NONCE] = ag.gid_nonce
        mat[i, INFECT] = ag.infectivity
        mat[i, WAITING] = ag.waiting
        mat[i, LEVEL] = ag.level
        mat[i, LOGNUM] = ag.log_population
        mat[i, COUNTFIN] = ag.count_finished
        mat[i, OWN_DRAW] = ag.own_draw
        mat[i, OWN_KEY] = ag.own_key
        mat[i, MAX_DRAW] = ag.max_draw
        mat[i, MAX_KEY] = ag.max_key
        mat[i, COUNTDOWN] = ag.countdown
    return mat


def unpack_state(mat: np.ndarray) -> list[Agent]:
    agents = []
    for i in range(mat.shape[0]):
        agents.append(
            Agent(
                rank=int(mat[i, RANK]),
                collision=int(mat[i, COLLISION]),
                value=int(mat[i, VALUE]),
                timer=int(mat[i, TIMER]),
                epoch=int(mat[i, EPOCH]),
                leader=int(mat[i, LEADER]),
                gid_offset=int(mat[i, GID_OFF]),
                gid_nonce=int(mat[i, GID_NONCE]),
                infectivity=int(mat[i, INFECT]),
                waiting=int(mat[i, WAITING]),
                level=int(mat[i, LEVEL]),
                log_population=int(mat[i, LOGNUM]),
                count_finished=int(mat[i, COUNTFIN]),
                own_draw=int(mat[i, OWN_DRAW]),
                own_key=int(mat[i, OWN_KEY]),
                max_draw=int(mat[i, MAX_DRAW]),
                max_key=int(mat[i, MAX_KEY]),
                countdown=int(mat[i, COUNTDOWN]),
            )
        )
    return agents


@dataclass(frozen=True)
class KernelStats:
    """Aggregates mirrored from the Python reference bookkeeping."""

    steps: int
    stabilized: bool
    first_flag_step: int | None
    channel: str
    max_state_bits: int
    epochs_elapsed: int
    state: np.ndarray
    rng_state: int

    @property
    def flagged(self) -> bool:
        return self.first_flag_step is not None


def _detector_bits_for(seg, modulus: int, derand: bool) -> int:
    bits = (
        engine._domain_bits(modulus)
        + engine._domain_bits(seg.epoch_cap + 1)
        + 1
        + engine._domain_bits(2 * seg.segment_len + 1)
        + engine._domain_bits(seg.max_infectivity + 1)
    )
    if derand:
        bits += 1
    return bits


def _cold_tables(params) -> tuple[np.ndarray, ...]:
    c_lower, c_upper = params.resolved_offsets()
    derand = params.mode == "derandomized"
    seg_len_t = np.zeros(_TABLE_SIZE, dtype=np.int64)
    seg_count_t = np.zeros(_TABLE_SIZE, dtype=np.int64)
    cap_t = np.zeros(_TABLE_SIZE, dtype=np.int64)
    inf_t = np.zeros(_TABLE_SIZE, dtype=np.int64)
    nupper_t = np.zeros(_TABLE_SIZE, dtype=np.int64)
    det_bits_t = np.zeros(_TABLE_SIZE, dtype=np.int64)
    for lognum in range(_TABLE_SIZE):
        n_lower, n_upper = bounds_from_estimate(lognum, c_lower, c_upper)
        seg = derive_params(n_lower, n_upper, params.eta)
        seg_len_t[lognum] = seg.segment_len
        seg_count_t[lognum] = seg.segment_count
        cap_t[lognum] = seg.epoch_cap
        inf_t[lognum] = seg.max_infectivity
        nupper_t[lognum] = min(seg.n_upper, _NUPPER_CLAMP)
        det_bits_t[lognum] = _detector_bits_for(seg, params.m, derand)
    return seg_len_t, seg_count_t, cap_t, inf_t, nupper_t, det_bits_t


def run_kernel(
    protocol: str,
    ranks,
    params,
    seed: int,
    budget: int,
    stop: str,
) -> KernelStats:
    """Run one trial on the compiled path.

    Initialization is delegated to ``engine.Simulation`` so both backends
    share a single constructor; only the stepping loop differs.
    """
    if stop not in ("stable", "horizon"):
        raise InputError(f"kernel stop mode must be stable|horizon, got {stop!r}")
    sim = engine.Simulation(protocol, ranks, params, seed)
    state = pack_state(sim.agents)
    rng_io = np.array([sim.rng.state], dtype=np.uint64)
    out = np.zeros(N_OUT, dtype=np.int64)
    stop_stable = 1 if stop == "stable" else 0
    term0 = sim._terminal_count
    bits0 = sim.max_state_bits
    p = sim.params
    derand = 1 if p.mode == "derandomized" else 0
    if protocol == "epidemic":
        _run_epidemic(state, rng_io, budget, stop_stable, term0, bits0, sim._target_value, out)
    elif protocol == "phaseclock":
        _run_phaseclock(
            state, rng_io, budget, stop_stable, term0, bits0, p.m, sim.phase_cap, out
        )
    elif protocol == "cdwb":
        seg = sim.seg
        assert seg is not None
        _run_cdwb(
            state, rng_io, budget, stop_stable, term0, bits0,
            p.m, derand, seg.segment_len, seg.segment_count, seg.epoch_cap,
            seg.max_infectivity, min(seg.n_upper, _NUPPER_CLAMP), out,
        )
    elif protocol == "cold":
        tables = _cold_tables(p)
        geometric = 1 if p.estimator == "geometric" else 0
        reset_collision = 1 if p.reset_collision else 0
        _run_cold(
            state, rng_io, budget, stop_stable, term0, bits0,
            p.m, geometric, derand, p.c_fin, reset_collision, *tables, KEY_BITS, out,
        )
    else:
        raise InputError(f"unknown protocol {protocol!r}")
    if out[OUT_ERROR] != 0:
        raise InvariantViolation(
            "size estimate exceeded the kernel parameter table "
            f"(limit {_TABLE_SIZE}); rerun with backend='python'"
        )
    channel = ("none", "backup", "cdwb")[int(out[OUT_CHANNEL])]
    flag_step = int(out[OUT_FLAG_STEP])
    return KernelStats(
        steps=int(out[OUT_STEPS]),
        stabilized=bool(out[OUT_STABLE]),
        first_flag_step=None if flag_step < 0 else flag_step,
        channel=channel,
        max_state_bits=int(out[OUT_MAX_BITS]),
        epochs_elapsed=int(out[OUT_EPOCHS]),
        state=state,
        rng_state=int(rng_io[0]),
    )
