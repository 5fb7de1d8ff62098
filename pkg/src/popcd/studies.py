"""Instrumented measurement loops and calibration drivers.

The plain kernels in :mod:`popcd.kernels` report only end-of-run
aggregates.  The studies here re-run the same transition bodies while
recording per-epoch structure — when every agent simultaneously holds an
epoch, how long cohorts of group-id carriers live, in which epochs a
mismatch is witnessed — plus per-step contract checks for the size
estimator.  Nothing in this module alters protocol behavior: every loop
calls the shared transition helpers and only adds bookkeeping.

The ``calibrate_*`` drivers at the bottom sweep tunable constants and
report the smallest values meeting their module's stated success
criterion; their outputs are JSON-able dicts consumed by the CLI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import engine
from .engine import Simulation, run_trial
from .kernels import (
    COLLISION,
    COUNTFIN,
    EPOCH,
    EVK_MISMATCH_HIT,
    GID_OFF,
    INFECT,
    LEADER,
    LEVEL,
    LOGNUM,
    MAX_DRAW,
    OWN_DRAW,
    RANK,
    _NUPPER_CLAMP,
    _clock,
    _cold_body,
    _cold_tables,
    _detector_body,
    _estimator_body,
    _pair,
    pack_state,
    run_kernel,
)
from .params import ProtocolParams
from .rng import derive_seed
from .sizing import KEY_BITS
from .state import InputError


def natural_log_scale(n: int) -> float:
    """The n*ln(n) yardstick used by the per-epoch time criteria."""
    return n * math.log(n)


def _quantile(sorted_values: list[float], q: float) -> float:
    """Nearest-rank quantile of an already-sorted list."""
    if not sorted_values:
        raise InputError("quantile of empty sample")
    rank = max(1, math.ceil(q * len(sorted_values)))
    return sorted_values[min(rank, len(sorted_values)) - 1]


# ---------------------------------------------------------------------------
# phase clock: per-epoch overlap windows and per-agent holding times
# ---------------------------------------------------------------------------


@njit(cache=True)
def _clock_epochs(state, rng_io, budget, modulus, cap, cnt, enter, exit_, last_change, out):
    n = state.shape[0]
    s = rng_io[0]
    max_e = 0
    max_hold = 0
    steps = 0
    while steps < budget:
        if cnt[cap] == n:
            break
        s, u, v = _pair(s, n)
        e0 = state[v, EPOCH]
        _clock(state, u, v, modulus, cap)
        e1 = state[v, EPOCH]
        if e1 != e0:
            cnt[e0] -= 1
            cnt[e1] += 1
            hold = steps - last_change[v]
            if e0 < cap and hold > max_hold:
                max_hold = hold
            last_change[v] = steps
            if e1 > max_e:
                for e in range(max_e, e1):
                    exit_[e] = steps
                max_e = e1
            if cnt[e1] == n and enter[e1] < 0:
                enter[e1] = steps
        steps += 1
    rng_io[0] = s
    out[0] = steps
    out[1] = 1 if cnt[cap] == n else 0
    out[2] = max_hold


@dataclass(frozen=True)
class ClockEpochs:
    """Per-epoch timing record of one phase-clock run.

    ``enter[i]`` is the first step at which every agent simultaneously
    held epoch ``i`` (-1 if that never happened); ``exit[i]`` is the first
    step at which some agent moved beyond ``i``.  ``max_hold`` is the
    longest any single agent held any non-terminal epoch.
    """

    steps: int
    stabilized: bool
    enter: np.ndarray
    exit: np.ndarray
    max_hold: int

    @property
    def cap(self) -> int:
        return len(self.enter) - 1

    def min_window(self) -> int | None:
        """Smallest all-agents window over epochs 0..cap-1.

        ``None`` when some epoch (terminal included) never had all agents
        in it simultaneously, i.e. the overlap property failed outright.
        """
        if self.enter[self.cap] < 0:
            return None
        best: int | None = None
        for i in range(self.cap):
            if self.enter[i] < 0 or self.exit[i] < 0:
                return None
            window = int(self.exit[i] - self.enter[i])
            if best is None or window < best:
                best = window
        return best


def clock_epochs(n: int, *, m: int, epochs: int, seed: int, budget: int) -> ClockEpochs:
    """Run a standalone phase clock, recording per-epoch overlap structure."""
    params = ProtocolParams(m=m, phase_cap=epochs)
    ranks = engine.generate_ranks("distinct", n, seed)
    sim = Simulation("phaseclock", ranks, params, seed)
    state = pack_state(sim.agents)
    rng_io = np.array([sim.rng.state], dtype=np.uint64)
    cnt = np.zeros(epochs + 1, dtype=np.int64)
    cnt[0] = n
    enter = np.full(epochs + 1, -1, dtype=np.int64)
    enter[0] = 0
    exit_ = np.full(epochs + 1, -1, dtype=np.int64)
    last_change = np.zeros(n, dtype=np.int64)
    out = np.zeros(3, dtype=np.int64)
    _clock_epochs(state, rng_io, budget, m, epochs, cnt, enter, exit_, last_change, out)
    return ClockEpochs(int(out[0]), bool(out[1]), enter, exit_, int(out[2]))


# ---------------------------------------------------------------------------
# detector: which epochs witnessed a group-id mismatch
# ---------------------------------------------------------------------------


@njit(cache=True)
def _detection_epochs(
    state, rng_io, budget, modulus, derand,
    seg_len, seg_count, cap, max_inf, n_upper, cnt, detected, out,
):
    n = state.shape[0]
    s = rng_io[0]
    min_e = 0
    steps = 0
    while steps < budget:
        if cnt[cap] == n:
            break
        s, u, v = _pair(s, n)
        e0 = state[v, EPOCH]
        s, events = _detector_body(
            state, u, v, s, seg_len, seg_count, cap, max_inf, n_upper, modulus, derand
        )
        e1 = state[v, EPOCH]
        if e1 != e0:
            cnt[e0] -= 1
            cnt[e1] += 1
            while min_e < cap and cnt[min_e] == 0:
                min_e += 1
        if events & EVK_MISMATCH_HIT != 0:
            detected[state[v, EPOCH]] = 1
        steps += 1
    rng_io[0] = s
    out[0] = steps
    out[1] = min_e
    out[2] = 1 if cnt[cap] == n else 0


@dataclass(frozen=True)
class DetectionEpochs:
    """Pooled per-epoch mismatch record of one bounded-detector run.

    Epochs count as observed once every agent has moved past them, so the
    terminal epoch is never included.  Dedicated epochs are the observed
    epochs whose active segment contains the duplicated rank.
    """

    steps: int
    stabilized: bool
    observed: int
    detected: int
    dedicated_observed: int
    dedicated_detected: int


def detection_epochs(
    n: int,
    *,
    m: int,
    seed: int,
    budget: int,
    eta: float = 1.0,
    mode: str = "randomized",
) -> DetectionEpochs:
    """Run the detector on a single-duplicate input, tallying mismatch epochs."""
    ranks = engine.generate_ranks("dup:1", n, seed)
    seen: set[int] = set()
    dup_rank = 0
    for r in ranks:
        if r in seen:
            dup_rank = r
        seen.add(r)
    params = ProtocolParams(m=m, eta=eta, mode=mode)
    sim = Simulation("cdwb", ranks, params, seed)
    seg = sim.seg
    assert seg is not None
    cap = seg.epoch_cap
    k_pair = (dup_rank - 1) // seg.segment_len
    state = pack_state(sim.agents)
    rng_io = np.array([sim.rng.state], dtype=np.uint64)
    cnt = np.zeros(cap + 1, dtype=np.int64)
    cnt[0] = n
    detected = np.zeros(cap + 1, dtype=np.int64)
    out = np.zeros(3, dtype=np.int64)
    derand = 1 if mode == "derandomized" else 0
    _detection_epochs(
        state, rng_io, budget, m, derand,
        seg.segment_len, seg.segment_count, cap, seg.max_infectivity,
        min(seg.n_upper, _NUPPER_CLAMP), cnt, detected, out,
    )
    completed_below = int(out[1])
    observed = detected_total = ded_obs = ded_hit = 0
    for i in range(1, completed_below):
        observed += 1
        hit = int(detected[i])
        detected_total += hit
        if (i - 1) % seg.segment_count == k_pair:
            ded_obs += 1
            ded_hit += hit
    return DetectionEpochs(
        steps=int(out[0]),
        stabilized=bool(out[2]),
        observed=observed,
        detected=detected_total,
        dedicated_observed=ded_obs,
        dedicated_detected=ded_hit,
    )


# ---------------------------------------------------------------------------
# detector: cohort sizes of group-id carriers and infectivity drain times
# ---------------------------------------------------------------------------


@njit(cache=True)
def _proliferation_epochs(
    state, rng_io, budget, modulus, derand,
    seg_len, seg_count, cap, max_inf, n_upper,
    cnt_epoch, cnt_nonnull, enter, zero_inf, out,
):
    n = state.shape[0]
    s = rng_io[0]
    inf_pos = 0
    max_cohort = 0
    watch = -1
    steps = 0
    while steps < budget:
        if cnt_epoch[cap] == n:
            break
        s, u, v = _pair(s, n)
        eu0 = state[u, EPOCH]
        gu0 = state[u, GID_OFF]
        iu0 = state[u, INFECT]
        ev0 = state[v, EPOCH]
        gv0 = state[v, GID_OFF]
        iv0 = state[v, INFECT]
        s, events = _detector_body(
            state, u, v, s, seg_len, seg_count, cap, max_inf, n_upper, modulus, derand
        )
        ev1 = state[v, EPOCH]
        if ev1 != ev0:
            cnt_epoch[ev0] -= 1
            cnt_epoch[ev1] += 1
            if cnt_epoch[ev1] == n and enter[ev1] < 0:
                enter[ev1] = steps
                watch = ev1
        # cohort census: group-id carriers keyed by their current epoch
        if gu0 != 0:
            cnt_nonnull[eu0] -= 1
        if state[u, GID_OFF] != 0:
            c = cnt_nonnull[state[u, EPOCH]] + 1
            cnt_nonnull[state[u, EPOCH]] = c
            if c > max_cohort:
                max_cohort = c
        if gv0 != 0:
            cnt_nonnull[ev0] -= 1
        if state[v, GID_OFF] != 0:
            c = cnt_nonnull[ev1] + 1
            cnt_nonnull[ev1] = c
            if c > max_cohort:
                max_cohort = c
        # positive-infectivity census
        if iu0 > 0:
            inf_pos -= 1
        if state[u, INFECT] > 0:
            inf_pos += 1
        if iv0 > 0:
            inf_pos -= 1
        if state[v, INFECT] > 0:
            inf_pos += 1
        # drain watch: first step at/after the epoch's global start where
        # nobody carries positive infectivity, while the window still holds
        if watch >= 0:
            if cnt_epoch[watch] < n:
                watch = -1
            elif inf_pos == 0:
                zero_inf[watch] = steps
                watch = -1
        steps += 1
    rng_io[0] = s
    out[0] = steps
    out[1] = 1 if cnt_epoch[cap] == n else 0
    out[2] = max_cohort


@dataclass(frozen=True)
class ProliferationEpochs:
    """Cohort-size and drain-time record of one bounded-detector run."""

    steps: int
    stabilized: bool
    max_cohort: int
    cohort_bound: int
    enter: np.ndarray
    zero_inf: np.ndarray

    @property
    def cap(self) -> int:
        return len(self.enter) - 1

    def drain_factors(self, n: int) -> tuple[list[float], int, int]:
        """Per-epoch drain times in n*ln(n) units over observed epochs.

        Returns ``(factors, undrained, observed)`` where ``observed``
        counts non-terminal epochs with a global start and ``undrained``
        those whose window closed before infectivity reached zero.
        """
        scale = natural_log_scale(n)
        factors: list[float] = []
        undrained = 0
        observed = 0
        for i in range(1, self.cap):
            if self.enter[i] < 0:
                continue
            observed += 1
            if self.zero_inf[i] < 0:
                undrained += 1
            else:
                factors.append(float(self.zero_inf[i] - self.enter[i]) / scale)
        return factors, undrained, observed


def proliferation_epochs(
    n: int,
    *,
    seed: int,
    budget: int,
    m: int = 16,
    eta: float = 1.0,
    mode: str = "randomized",
    input_kind: str = "distinct",
) -> ProliferationEpochs:
    """Run the detector while auditing group-id cohort sizes and drains."""
    ranks = engine.generate_ranks(input_kind, n, seed)
    params = ProtocolParams(m=m, eta=eta, mode=mode)
    sim = Simulation("cdwb", ranks, params, seed)
    seg = sim.seg
    assert seg is not None
    cap = seg.epoch_cap
    state = pack_state(sim.agents)
    rng_io = np.array([sim.rng.state], dtype=np.uint64)
    cnt_epoch = np.zeros(cap + 1, dtype=np.int64)
    cnt_epoch[0] = n
    cnt_nonnull = np.zeros(cap + 1, dtype=np.int64)
    enter = np.full(cap + 1, -1, dtype=np.int64)
    enter[0] = 0
    zero_inf = np.full(cap + 1, -1, dtype=np.int64)
    zero_inf[0] = 0
    out = np.zeros(3, dtype=np.int64)
    derand = 1 if mode == "derandomized" else 0
    _proliferation_epochs(
        state, rng_io, budget, m, derand,
        seg.segment_len, seg.segment_count, cap, seg.max_infectivity,
        min(seg.n_upper, _NUPPER_CLAMP),
        cnt_epoch, cnt_nonnull, enter, zero_inf, out,
    )
    bound = 2 * seg.segment_len * (2**seg.max_infectivity)
    return ProliferationEpochs(
        steps=int(out[0]),
        stabilized=bool(out[1]),
        max_cohort=int(out[2]),
        cohort_bound=bound,
        enter=enter,
        zero_inf=zero_inf,
    )


# ---------------------------------------------------------------------------
# composed protocol: per-step size-estimator contract checks
# ---------------------------------------------------------------------------


@njit(cache=True)
def _contract_check(
    state, rng_io, budget, stop_stable, term0,
    geometric, c_fin, key_bits, modulus, derand, reset_collision,
    seg_len_t, seg_count_t, cap_t, inf_t, nupper_t, viol, out,
):
    n = state.shape[0]
    s = rng_io[0]
    terminal = term0
    steps = 0
    error = 0
    while steps < budget:
        if stop_stable == 1 and terminal == n:
            break
        s, u, v = _pair(s, n)
        was_flagged = state[v, COLLISION] == 1
        lev_u0 = state[u, LEVEL]
        log_u0 = state[u, LOGNUM]
        cf_u0 = state[u, COUNTFIN]
        lev_v0 = state[v, LEVEL]
        log_v0 = state[v, LOGNUM]
        cf_v0 = state[v, COUNTFIN]
        s, events, error = _cold_body(
            state, u, v, s, geometric, c_fin, key_bits, modulus, derand,
            reset_collision, seg_len_t, seg_count_t, cap_t, inf_t, nupper_t,
        )
        if error != 0:
            break
        # (i) levels are monotone and only the responder's may move
        if state[u, LEVEL] != lev_u0 or state[v, LEVEL] < lev_v0:
            viol[0] += 1
        # (ii) the size estimate is frozen while the finish mark is up
        if cf_u0 == 1 and state[u, COUNTFIN] == 1 and state[u, LOGNUM] != log_u0:
            viol[1] += 1
        if cf_v0 == 1 and state[v, COUNTFIN] == 1 and state[v, LOGNUM] != log_v0:
            viol[1] += 1
        # (iii) the finish mark drops only when the level rises
        if cf_u0 == 1 and state[u, COUNTFIN] == 0 and state[u, LEVEL] <= lev_u0:
            viol[2] += 1
        if cf_v0 == 1 and state[v, COUNTFIN] == 0 and state[v, LEVEL] <= lev_v0:
            viol[2] += 1
        # (iv) the finish mark originates at the leader; a non-leader can
        # only acquire it from a finished initiator with a matching estimate
        if cf_u0 == 0 and state[u, COUNTFIN] == 1 and state[u, LEADER] != 1:
            viol[3] += 1
        if cf_v0 == 0 and state[v, COUNTFIN] == 1 and state[v, LEADER] != 1:
            if not (
                state[u, COUNTFIN] == 1
                and state[u, LEVEL] == state[v, LEVEL]
                and state[u, LOGNUM] == state[v, LOGNUM]
            ):
                viol[3] += 1
        flagged = state[v, COLLISION] == 1
        if flagged != was_flagged:
            terminal += 1 if flagged else -1
        steps += 1
    rng_io[0] = s
    out[0] = steps
    out[1] = 1 if terminal == n else 0
    out[2] = error


@dataclass(frozen=True)
class ContractCheck:
    """Result of one composed run with estimator-contract assertions on."""

    steps: int
    stabilized: bool
    violations: tuple[int, int, int, int]

    @property
    def clean(self) -> bool:
        return all(c == 0 for c in self.violations)


def contract_check(
    n: int,
    *,
    estimator: str,
    seed: int,
    input_kind: str = "pair",
    budget: int | None = None,
    stop: str = "stable",
    params: ProtocolParams | None = None,
) -> ContractCheck:
    """Run the composed protocol with per-step estimator-contract checks."""
    if params is None:
        params = ProtocolParams(estimator=estimator)
    ranks = engine.generate_ranks(input_kind, n, seed)
    sim = Simulation("cold", ranks, params, seed)
    if budget is None:
        budget = engine.BUDGET_FACTOR * n * n
    state = pack_state(sim.agents)
    rng_io = np.array([sim.rng.state], dtype=np.uint64)
    tables = _cold_tables(params)
    viol = np.zeros(4, dtype=np.int64)
    out = np.zeros(3, dtype=np.int64)
    geometric = 1 if params.estimator == "geometric" else 0
    derand = 1 if params.mode == "derandomized" else 0
    reset_collision = 1 if params.reset_collision else 0
    _contract_check(
        state, rng_io, budget, 1 if stop == "stable" else 0, sim._terminal_count,
        geometric, params.c_fin, KEY_BITS, params.m, derand, reset_collision,
        tables[0], tables[1], tables[2], tables[3], tables[4], viol, out,
    )
    return ContractCheck(
        steps=int(out[0]),
        stabilized=bool(out[1]),
        violations=(int(viol[0]), int(viol[1]), int(viol[2]), int(viol[3])),
    )


# ---------------------------------------------------------------------------
# geometric estimator alone: finish-mark origination trace
# ---------------------------------------------------------------------------


@njit(cache=True)
def _countfin_trace(state, rng_io, budget, c_fin, key_bits, out):
    n = state.shape[0]
    s = rng_io[0]
    n_orig = 0
    min_orig = np.int64(1) << 60
    steps = 0
    while steps < budget:
        s, u, v = _pair(s, n)
        cf_u0 = state[u, COUNTFIN]
        cf_v0 = state[v, COUNTFIN]
        s, level_up = _estimator_body(state, u, v, s, 1, c_fin, key_bits)
        # an initiator can only flip its own mark (no spread toward it)
        if cf_u0 == 0 and state[u, COUNTFIN] == 1:
            n_orig += 1
            if state[u, LOGNUM] < min_orig:
                min_orig = state[u, LOGNUM]
        if cf_v0 == 0 and state[v, COUNTFIN] == 1:
            spread_ok = (
                state[u, COUNTFIN] == 1
                and state[u, LEVEL] == state[v, LEVEL]
                and state[u, LOGNUM] == state[v, LOGNUM]
            )
            if not spread_ok:
                n_orig += 1
                if state[v, LOGNUM] < min_orig:
                    min_orig = state[v, LOGNUM]
        steps += 1
    rng_io[0] = s
    out[0] = steps
    out[1] = n_orig
    out[2] = min_orig


@dataclass(frozen=True)
class CountfinTrace:
    """Finish-mark origination record of one geometric-estimator run."""

    steps: int
    originations: int
    min_origination_estimate: int | None
    final_max_draw: int
    all_drawn: bool
    consensus_estimate: int | None
    final_leaders: int

    @property
    def premature(self) -> bool:
        """Whether any finish mark fired below the eventual global estimate."""
        return (
            self.min_origination_estimate is not None
            and self.min_origination_estimate < self.final_max_draw
        )


def countfin_trace(n: int, *, c_fin: int, seed: int, budget: int) -> CountfinTrace:
    """Run only the geometric size-estimation layer, tracing originations."""
    params = ProtocolParams(estimator="geometric", c_fin=c_fin)
    ranks = engine.generate_ranks("distinct", n, seed)
    sim = Simulation("cold", ranks, params, seed)
    state = pack_state(sim.agents)
    rng_io = np.array([sim.rng.state], dtype=np.uint64)
    out = np.zeros(3, dtype=np.int64)
    _countfin_trace(state, rng_io, budget, params.c_fin, KEY_BITS, out)
    own = state[:, OWN_DRAW]
    lognums = state[:, LOGNUM]
    consensus = int(lognums[0]) if (lognums == lognums[0]).all() else None
    min_orig = int(out[2])
    return CountfinTrace(
        steps=int(out[0]),
        originations=int(out[1]),
        min_origination_estimate=None if out[1] == 0 else min_orig,
        final_max_draw=int(own.max()),
        all_drawn=bool(own.min() > 0),
        consensus_estimate=consensus,
        final_leaders=int(state[:, LEADER].sum()),
    )


# ---------------------------------------------------------------------------
# calibration drivers
# ---------------------------------------------------------------------------

#: calibration sweep grids; the chosen values are frozen into the committed
#: calibration report and mirrored by the acceptance suite
EPIDEMIC_N_GRID = (256, 1024, 4096)
PHASECLOCK_M_GRID = (8, 16, 24, 32)
COUNTFIN_GRID = (8, 16, 32, 64, 128)
DETECTION_M_GRID = (16, 24, 32)
BACKUP_N_GRID = (1024, 4096)


def _round_up(value: float, step: float) -> float:
    return math.ceil(value / step - 1e-12) * step


def _round_down(value: float, step: float) -> float:
    return math.floor(value / step + 1e-12) * step


def calibrate_epidemic_d(
    *,
    n_list: tuple[int, ...] = EPIDEMIC_N_GRID,
    trials: int = 500,
    seed: int = 0,
) -> dict:
    """Find d such that >=99% of broadcasts finish within d*n*ln(n) steps.

    The chosen d carries margin over both the observed 99th percentile
    and the observed maximum, so the cutoff sits clear of the sample's
    own excursions rather than splitting its tail.
    """
    per_n: dict[str, dict] = {}
    worst_q99 = 0.0
    worst_max = 0.0
    factors_by_n: dict[int, list[float]] = {}
    for n in n_list:
        scale = natural_log_scale(n)
        factors: list[float] = []
        for t in range(trials):
            cell = derive_seed(seed, n, t)
            res = run_trial("epidemic", n, seed=cell, input_kind="distinct", stop="stable")
            assert res.steps_to_stable is not None
            factors.append(res.steps_to_stable / scale)
        factors.sort()
        factors_by_n[n] = factors
        q99 = _quantile(factors, 0.99)
        worst_q99 = max(worst_q99, q99)
        worst_max = max(worst_max, factors[-1])
        per_n[str(n)] = {
            "median_factor": _quantile(factors, 0.5),
            "q99_factor": q99,
            "max_factor": factors[-1],
        }
    d = _round_up(max(worst_q99 * 1.15, worst_max * 1.05), 0.25)
    for n in n_list:
        factors = factors_by_n[n]
        rate = sum(1 for f in factors if f <= d) / len(factors)
        per_n[str(n)]["pass_rate_at_d"] = rate
    return {
        "target": "epidemic-d",
        "d": d,
        "trials_per_n": trials,
        "per_n": per_n,
        "passed": all(v["pass_rate_at_d"] >= 0.99 for v in per_n.values()),
    }


def calibrate_phaseclock(
    *,
    n: int = 1024,
    epochs: int = 200,
    trials: int = 40,
    m_grid: tuple[int, ...] = PHASECLOCK_M_GRID,
    seed: int = 0,
    d1_default: float = 0.5,
) -> dict:
    """Sweep the timer modulus; report overlap-window and holding-time stats.

    Picks the smallest modulus whose every trial had each epoch's
    all-agents window span at least ``d1_default`` n*ln(n) steps, then
    reports margin-bearing (d1, d2) read off the measured extremes.
    """
    scale = natural_log_scale(n)
    report: dict[str, dict] = {}
    selected_m = None
    chosen: dict[str, float] = {}
    for m in m_grid:
        budget = int(6 * epochs * m * scale)
        windows: list[float] = []
        holds: list[float] = []
        complete = 0
        pass_d1 = 0
        for t in range(trials):
            res = clock_epochs(
                n, m=m, epochs=epochs, seed=derive_seed(seed, m, t), budget=budget
            )
            if not res.stabilized:
                continue
            w = res.min_window()
            if w is None:
                continue
            complete += 1
            wf = w / scale
            hf = res.max_hold / scale
            windows.append(wf)
            holds.append(hf)
            if wf >= d1_default:
                pass_d1 += 1
        entry = {
            "trials": trials,
            "complete": complete,
            "pass_rate_at_default_d1": pass_d1 / trials,
        }
        if windows:
            windows.sort()
            holds.sort()
            entry["min_window_factor"] = windows[0]
            entry["median_window_factor"] = _quantile(windows, 0.5)
            entry["max_hold_factor"] = holds[-1]
            entry["median_hold_factor"] = _quantile(holds, 0.5)
        report[str(m)] = entry
        if selected_m is None and complete == trials and pass_d1 == trials:
            selected_m = m
            chosen = {
                "d1": max(0.25, _round_down(windows[0] * 0.5, 0.25)),
                "d2": _round_up(holds[-1] * 1.5, 1.0),
            }
    return {
        "target": "phaseclock-m-d1-d2",
        "m": selected_m,
        "d1": chosen.get("d1"),
        "d2": chosen.get("d2"),
        "d1_default": d1_default,
        "n": n,
        "epochs": epochs,
        "per_m": report,
        "passed": selected_m is not None,
    }


def calibrate_proliferation_c(
    *,
    n: int = 1024,
    trials: int = 5,
    seed: int = 0,
) -> dict:
    """Find c bounding the per-epoch infectivity-drain time at n*ln(n) scale."""
    factors: list[float] = []
    undrained = 0
    observed = 0
    max_cohort = 0
    bound = 0
    for t in range(trials):
        params_probe = ProtocolParams()
        sim_seed = derive_seed(seed, t)
        ranks = engine.generate_ranks("distinct", n, sim_seed)
        sim = Simulation("cdwb", ranks, params_probe, sim_seed)
        seg = sim.seg
        assert seg is not None
        budget = int(6 * seg.epoch_cap * params_probe.m * natural_log_scale(n))
        res = proliferation_epochs(n, seed=sim_seed, budget=budget)
        fs, ud, obs = res.drain_factors(n)
        factors.extend(fs)
        undrained += ud
        observed += obs
        max_cohort = max(max_cohort, res.max_cohort)
        bound = res.cohort_bound
    factors.sort()
    c = _round_up(factors[-1] * 1.5, 0.25) if factors else None
    pass_rate = len([f for f in factors if f <= c]) / observed if observed else 0.0
    return {
        "target": "proliferation-c",
        "c": c,
        "n": n,
        "trials": trials,
        "observed_epochs": observed,
        "undrained_epochs": undrained,
        "max_cohort": max_cohort,
        "cohort_bound": bound,
        "median_factor": _quantile(factors, 0.5) if factors else None,
        "max_factor": factors[-1] if factors else None,
        "pass_rate_at_c": pass_rate,
        "passed": bool(factors) and undrained == 0 and pass_rate >= 0.99,
    }


def calibrate_countfin_cfin(
    *,
    n: int = 1024,
    trials: int = 200,
    grid: tuple[int, ...] = COUNTFIN_GRID,
    seed: int = 0,
) -> dict:
    """Find the countdown multiplier keeping early finish marks under 1%."""
    budget = int(40 * natural_log_scale(n))
    per_cfin: dict[str, dict] = {}
    selected = None
    for c_fin in grid:
        premature = 0
        undrawn = 0
        for t in range(trials):
            res = countfin_trace(n, c_fin=c_fin, seed=derive_seed(seed, c_fin, t), budget=budget)
            if not res.all_drawn:
                undrawn += 1
            if res.premature:
                premature += 1
        rate = premature / trials
        per_cfin[str(c_fin)] = {
            "premature_rate": rate,
            "undrawn_runs": undrawn,
        }
        if selected is None and rate < 0.01:
            selected = c_fin
    return {
        "target": "countfin-cfin",
        "c_fin": selected,
        "n": n,
        "trials": trials,
        "per_c_fin": per_cfin,
        "passed": selected is not None,
    }


def calibrate_detection_m(
    *,
    n: int = 4096,
    m_grid: tuple[int, ...] = DETECTION_M_GRID,
    min_epochs: int = 300,
    seed: int = 0,
) -> dict:
    """Find the timer modulus giving a per-dedicated-epoch detection rate
    comfortably above one third on single-duplicate inputs."""
    per_m: dict[str, dict] = {}
    selected = None
    scale = natural_log_scale(n)
    for m in m_grid:
        probe = Simulation(
            "cdwb", engine.generate_ranks("dup:1", n, seed), ProtocolParams(m=m), seed
        )
        assert probe.seg is not None
        budget = int(4 * probe.seg.epoch_cap * m * scale)
        pooled_obs = 0
        pooled_hit = 0
        runs = 0
        t = 0
        while pooled_obs < min_epochs:
            res = detection_epochs(n, m=m, seed=derive_seed(seed, m, t), budget=budget)
            pooled_obs += res.dedicated_observed
            pooled_hit += res.dedicated_detected
            runs += 1
            t += 1
            if t > 64:
                break
        rate = pooled_hit / pooled_obs if pooled_obs else 0.0
        per_m[str(m)] = {
            "dedicated_epochs": pooled_obs,
            "detected": pooled_hit,
            "rate": rate,
            "runs": runs,
        }
        if selected is None and pooled_obs >= min_epochs and rate >= 0.40:
            selected = m
    return {
        "target": "detection-m",
        "m": selected,
        "n": n,
        "min_epochs": min_epochs,
        "per_m": per_m,
        "passed": selected is not None,
    }


def calibrate_backup_c(
    *,
    n_list: tuple[int, ...] = BACKUP_N_GRID,
    trials: int = 200,
    seed: int = 0,
) -> dict:
    """Find c bounding the first-flag time at n**1.5 scale under a
    square-root-many-duplicates load.

    As with the broadcast constant, the chosen c dominates both the
    observed 99th percentile and the observed maximum with margin: the
    first-flag time is roughly exponential (minimum over many colliding
    pairs), so a cutoff inside the sample's own range would leave the
    coverage criterion balanced on the tail.
    """
    per_n: dict[str, dict] = {}
    worst_q99 = 0.0
    worst_max = 0.0
    factors_by_n: dict[int, list[float]] = {}
    for n in n_list:
        dups = math.ceil(math.sqrt(n * math.log2(n)))
        scale = n**1.5
        factors = []
        for t in range(trials):
            cell = derive_seed(seed, n, t)
            ranks = engine.generate_ranks(f"dup:{dups}", n, cell)
            stats = run_kernel(
                "cdwb", ranks, ProtocolParams(), cell, engine.BUDGET_FACTOR * n * n, "stable"
            )
            assert stats.first_flag_step is not None
            factors.append(stats.first_flag_step / scale)
        factors.sort()
        factors_by_n[n] = factors
        q99 = _quantile(factors, 0.99)
        worst_q99 = max(worst_q99, q99)
        worst_max = max(worst_max, factors[-1])
        per_n[str(n)] = {
            "duplicates": dups,
            "median_factor": _quantile(factors, 0.5),
            "q99_factor": q99,
            "max_factor": factors[-1],
        }
    c = _round_up(max(worst_q99 * 1.3, worst_max * 1.05), 0.25)
    for n in n_list:
        factors = factors_by_n[n]
        per_n[str(n)]["pass_rate_at_c"] = sum(1 for f in factors if f <= c) / len(factors)
    return {
        "target": "backup-c",
        "c": c,
        "trials_per_n": trials,
        "per_n": per_n,
        "passed": all(v["pass_rate_at_c"] >= 0.99 for v in per_n.values()),
    }


CALIBRATION_TARGETS = {
    "epidemic-d": calibrate_epidemic_d,
    "phaseclock-m-d1-d2": calibrate_phaseclock,
    "proliferation-c": calibrate_proliferation_c,
    "countfin-cfin": calibrate_countfin_cfin,
    "detection-m": calibrate_detection_m,
    "backup-c": calibrate_backup_c,
}
