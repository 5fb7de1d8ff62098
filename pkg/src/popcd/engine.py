"""Discrete-event engine: scheduling, trials, measurements, serialization.

The uniform scheduler draws one ordered pair per step (initiator first,
then responder among the remaining agents) from a run-scoped random
stream.  Rank assignment uses a separate stream derived from the same
seed, so the interaction schedule is identical across input kinds.

``Simulation`` is the readable reference implementation; ``run_trial``
dispatches to the compiled kernels in :mod:`popcd.kernels` when possible
and is bit-for-bit equivalent to stepping a ``Simulation``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Sequence

from .composed import ComposedContext, composed_step
from .detector import SegmentParams, derive_params, detector_step
from .params import PROTOCOLS, ProtocolParams
from .primitives import epidemic_step, phase_clock_step
from .rng import RANK_STREAM, RUN_STREAM, RngStream, derive_seed
from .sizing import KEY_BITS
from .state import (
    EV_COUNTFIN,
    EV_EPOCH_INCREASE,
    EV_FLAG_FROM_BACKUP,
    EV_FLAG_FROM_MISMATCH,
    EV_FLAG_FROM_SPREAD,
    EV_RESET,
    Agent,
    InputError,
)

_FLAG_EVENTS = EV_FLAG_FROM_BACKUP | EV_FLAG_FROM_MISMATCH | EV_FLAG_FROM_SPREAD

#: safety margin: default step budget per trial
BUDGET_FACTOR = 50

CSV_HEADER = (
    "n",
    "seed",
    "input_kind",
    "steps_to_stable",
    "parallel_time",
    "max_state_bits",
    "detection_channel",
    "epochs_elapsed",
    "false_positive",
)

_NOT_REACHED = "not_reached"


def generate_ranks(input_kind: str, n: int, seed: int) -> list[int]:
    """Build the rank assignment for one trial.

    * ``distinct`` — a uniform permutation of ``1..n``.
    * ``pair`` — the permutation with exactly one duplicated rank
      (shorthand for ``dup:1``).
    * ``dup:X`` — the permutation with ``X`` duplicated ranks: entry
      ``n-1-j`` is overwritten with entry ``j`` for ``j < X``.
    * ``file:PATH`` — whitespace-separated integers read from ``PATH``.

    Ranks are shuffled with a stream derived from ``seed`` that is
    independent of the interaction schedule.
    """
    if n < 2:
        raise InputError(f"need at least 2 agents, got n={n}")
    if input_kind.startswith("file:"):
        path = input_kind[len("file:") :]
        try:
            with open(path, "r", encoding="utf-8") as fh:
                ranks = [int(tok) for tok in fh.read().split()]
        except OSError as exc:
            raise InputError(f"cannot read rank file {path!r}: {exc}") from exc
        except ValueError as exc:
            raise InputError(f"rank file {path!r} holds a non-integer token") from exc
        if len(ranks) != n:
            raise InputError(f"rank file {path!r} holds {len(ranks)} ranks, expected {n}")
        if any(not 1 <= r <= n for r in ranks):
            raise InputError(f"ranks must lie in [1, {n}]")
        return ranks
    rng = RngStream(derive_seed(seed, RANK_STREAM))
    perm = list(range(1, n + 1))
    for i in range(n - 1, 0, -1):
        j = rng.randbelow(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    if input_kind == "distinct":
        return perm
    if input_kind == "pair":
        dup = 1
    elif input_kind.startswith("dup:"):
        try:
            dup = int(input_kind[len("dup:") :])
        except ValueError as exc:
            raise InputError(f"malformed input kind {input_kind!r}") from exc
    else:
        raise InputError(f"unknown input kind {input_kind!r}")
    if dup < 1 or 2 * dup > n:
        raise InputError(f"dup count must satisfy 1 <= x <= n/2, got {dup} for n={n}")
    for j in range(dup):
        perm[n - 1 - j] = perm[j]
    return perm


def duplicate_pair_count(ranks: Sequence[int]) -> int:
    """Number of unordered agent pairs sharing a rank."""
    counts: dict[int, int] = {}
    for r in ranks:
        counts[r] = counts.get(r, 0) + 1
    return sum(c * (c - 1) // 2 for c in counts.values())


@dataclass(frozen=True)
class InteractionRecord:
    """Trace entry for one scheduled interaction."""

    step_index: int
    initiator: int
    responder: int
    events: frozenset[str]


def _event_names(bits: int) -> frozenset[str]:
    names = []
    if bits & EV_EPOCH_INCREASE:
        names.append("epoch-increase")
    if bits & _FLAG_EVENTS:
        names.append("collision-raised")
    if bits & EV_RESET:
        names.append("cdwb-reset")
    if bits & EV_COUNTFIN:
        names.append("countfin-raised")
    return frozenset(names)


@dataclass(frozen=True)
class TrialResult:
    """Aggregate outcome of one trial (one CSV row).

    ``steps_to_stable`` is ``None`` when stabilization was the goal but the
    budget ran out, and 0 by convention for horizon runs on duplicate-free
    inputs.  ``detection_channel`` records which rule raised the very first
    collision flag: ``cdwb`` (group-id nonce mismatch), ``backup``
    (same-rank meeting), or ``none``.
    """

    n: int
    seed: int
    input_kind: str
    steps_to_stable: int | None
    parallel_time: float | None
    max_state_bits: int
    detection_channel: str
    epochs_elapsed: int
    false_positive: bool

    def csv_row(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="")
        writer.writerow(self._cells())
        return buf.getvalue()

    def _cells(self) -> list[str]:
        steps = _NOT_REACHED if self.steps_to_stable is None else str(self.steps_to_stable)
        ptime = _NOT_REACHED if self.parallel_time is None else repr(self.parallel_time)
        return [
            str(self.n),
            str(self.seed),
            self.input_kind,
            steps,
            ptime,
            str(self.max_state_bits),
            self.detection_channel,
            str(self.epochs_elapsed),
            "true" if self.false_positive else "false",
        ]

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "input_kind": self.input_kind,
            "steps_to_stable": self.steps_to_stable,
            "parallel_time": self.parallel_time,
            "max_state_bits": self.max_state_bits,
            "detection_channel": self.detection_channel,
            "epochs_elapsed": self.epochs_elapsed,
            "false_positive": self.false_positive,
        }

    def json_line(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_csv_cells(cls, cells: Sequence[str]) -> "TrialResult":
        if len(cells) != len(CSV_HEADER):
            raise InputError(f"expected {len(CSV_HEADER)} CSV cells, got {len(cells)}")
        steps = None if cells[3] == _NOT_REACHED else int(cells[3])
        ptime = None if cells[4] == _NOT_REACHED else float(cells[4])
        return cls(
            n=int(cells[0]),
            seed=int(cells[1]),
            input_kind=cells[2],
            steps_to_stable=steps,
            parallel_time=ptime,
            max_state_bits=int(cells[5]),
            detection_channel=cells[6],
            epochs_elapsed=int(cells[7]),
            false_positive=cells[8] == "true",
        )


def write_csv(path: str, results: Sequence[TrialResult]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for res in results:
            writer.writerow(res._cells())


def read_csv(path: str) -> list[TrialResult]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(CSV_HEADER):
            raise InputError(f"unexpected CSV header in {path!r}")
        return [TrialResult.from_csv_cells(row) for row in reader]


def write_json(path: str, results: Sequence[TrialResult]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([res.to_json() for res in results], fh, indent=2, sort_keys=True)
        fh.write("\n")


def _domain_bits(size: int) -> int:
    """Bits needed to index a domain of ``size`` values."""
    return (size - 1).bit_length() if size > 1 else 0


class Simulation:
    """Readable reference implementation of all four protocols.

    State-bit accounting covers the mutable protocol variables only; the
    read-only rank and the leader mark are excluded.
    """

    def __init__(
        self,
        protocol: str,
        ranks: Sequence[int],
        params: ProtocolParams | None = None,
        seed: int = 0,
    ) -> None:
        if protocol not in PROTOCOLS:
            raise InputError(f"unknown protocol {protocol!r}")
        params = params or ProtocolParams()
        params.validate()
        n = len(ranks)
        if n < 2:
            raise InputError(f"need at least 2 agents, got n={n}")
        if any(not 1 <= r <= n for r in ranks):
            raise InputError(f"ranks must lie in [1, {n}]")
        self.protocol = protocol
        self.params = params
        self.n = n
        self.ranks = list(ranks)
        self.seed = seed
        self.rng = RngStream(derive_seed(seed, RUN_STREAM))
        self.agents = [Agent(rank=r) for r in self.ranks]
        self.step_index = 0
        self.ctx: ComposedContext | None = None
        self.seg: SegmentParams | None = None
        self.phase_cap = 0
        leaders = params.leaders if params.leaders is not None else (0,)
        if any(not 0 <= i < n for i in leaders):
            raise InputError(f"leader indices out of range for n={n}: {leaders}")

        if protocol == "epidemic":
            for agent in self.agents:
                agent.value = agent.rank
            self._target_value = max(self.ranks)
        elif protocol == "phaseclock":
            if params.phase_cap is not None:
                self.phase_cap = params.phase_cap
            else:
                self.phase_cap = derive_params(n, n, params.eta).epoch_cap
            self._init_clock(leaders)
        elif protocol == "cdwb":
            n_lower = params.n_lower if params.n_lower is not None else n
            n_upper = params.n_upper if params.n_upper is not None else n
            self.seg = derive_params(n_lower, n_upper, params.eta)
            self._init_clock(leaders)
        else:  # cold
            self.ctx = ComposedContext(params)
            if params.estimator == "ideal":
                log_pop = n.bit_length() - 1
                for agent in self.agents:
                    agent.log_population = log_pop
                self._init_clock(leaders)
            else:
                for agent in self.agents:
                    agent.timer = params.m - 1

        self._terminal_count = sum(1 for agent in self.agents if self._terminal(agent))
        self.max_state_bits = max(self.state_bits(agent) for agent in self.agents)
        self.first_flag_step: int | None = None
        self.first_flag_channel = "none"

    def _init_clock(self, leaders: Sequence[int]) -> None:
        for agent in self.agents:
            agent.timer = self.params.m - 1
        for i in leaders:
            self.agents[i].leader = 1
            self.agents[i].timer = 0

    def _terminal(self, agent: Agent) -> bool:
        if self.protocol == "epidemic":
            return agent.value == self._target_value
        if self.protocol == "phaseclock":
            return agent.epoch == self.phase_cap
        return agent.collision == 1

    def state_bits(self, agent: Agent) -> int:
        protocol = self.protocol
        if protocol == "epidemic":
            return agent.value.bit_length()
        m = self.params.m
        if protocol == "phaseclock":
            return _domain_bits(m) + _domain_bits(self.phase_cap + 1)
        if protocol == "cdwb":
            seg = self.seg
        else:
            assert self.ctx is not None
            seg = self.ctx.segment_for(agent.log_population)
        bits = (
            _domain_bits(m)
            + _domain_bits(seg.epoch_cap + 1)
            + 1  # collision flag
            + _domain_bits(2 * seg.segment_len + 1)  # (offset, nonce) incl. null
            + _domain_bits(seg.max_infectivity + 1)
        )
        if self.params.mode == "derandomized":
            bits += 1  # waiting mark
        if protocol == "cold":
            bits += (
                agent.level.bit_length()
                + agent.log_population.bit_length()
                + 1  # count_finished
            )
            if self.params.estimator == "geometric":
                bits += (
                    agent.own_draw.bit_length()
                    + KEY_BITS  # own_key
                    + KEY_BITS  # max_key
                    + agent.countdown.bit_length()
                )
        return bits

    def step(self) -> InteractionRecord:
        """Schedule one ordered pair and apply the protocol transition."""
        u, v = self.rng.sample_pair(self.n)
        a, b = self.agents[u], self.agents[v]
        was_terminal = self._terminal(b)
        if self.protocol == "epidemic":
            events = 0
            epidemic_step(a, b)
        elif self.protocol == "phaseclock":
            events = EV_EPOCH_INCREASE if phase_clock_step(a, b, self.params.m, self.phase_cap) else 0
        elif self.protocol == "cdwb":
            assert self.seg is not None
            events = detector_step(a, b, self.seg, self.params.m, self.params.mode, self.rng)
        else:
            assert self.ctx is not None
            events = composed_step(a, b, self.ctx, self.rng)
        if self._terminal(b) != was_terminal:
            self._terminal_count += 1 if not was_terminal else -1
        if events & _FLAG_EVENTS and self.first_flag_step is None:
            self.first_flag_step = self.step_index
            if events & EV_FLAG_FROM_MISMATCH:
                self.first_flag_channel = "cdwb"
            elif events & EV_FLAG_FROM_BACKUP:
                self.first_flag_channel = "backup"
        bits = max(self.state_bits(a), self.state_bits(b))
        if bits > self.max_state_bits:
            self.max_state_bits = bits
        record = InteractionRecord(self.step_index, u, v, _event_names(events))
        self.step_index += 1
        return record

    def is_stable(self) -> bool:
        return self._terminal_count == self.n

    def epochs_elapsed(self) -> int:
        if self.protocol == "epidemic":
            return 0
        return max(agent.epoch for agent in self.agents)

    def flag_count(self) -> int:
        return sum(agent.collision for agent in self.agents)


def run_trial(
    protocol: str,
    n: int,
    *,
    params: ProtocolParams | None = None,
    seed: int = 0,
    input_kind: str = "distinct",
    ranks: Sequence[int] | None = None,
    budget: int | None = None,
    stop: str = "auto",
    backend: str = "auto",
    trace: list[InteractionRecord] | None = None,
    trace_limit: int | None = None,
) -> TrialResult:
    """Run one trial to stabilization or to the step budget.

    ``stop`` is one of ``auto``, ``stable``, or ``horizon``.  ``auto``
    targets stabilization for the convergent protocols (``epidemic``,
    ``phaseclock``) and for detector runs whose input holds a duplicate;
    duplicate-free detector runs execute the full budget instead, since
    their stable point is the all-flags-clear start state and the
    interesting output is whether a false flag ever appears.
    ``backend`` picks the compiled
    kernels (``kernel``), the pure-Python reference (``python``), or the
    kernels whenever no trace is requested (``auto``).  Both backends
    consume randomness identically, so results do not depend on the choice.
    """
    params = params or ProtocolParams()
    if ranks is None:
        ranks = generate_ranks(input_kind, n, seed)
    elif len(ranks) != n:
        raise InputError(f"got {len(ranks)} ranks for n={n}")
    if budget is None:
        budget = BUDGET_FACTOR * n * n
    if budget < 0:
        raise InputError(f"budget must be non-negative, got {budget}")
    if stop not in ("auto", "stable", "horizon"):
        raise InputError(f"unknown stop mode {stop!r}")
    if backend not in ("auto", "python", "kernel"):
        raise InputError(f"unknown backend {backend!r}")
    has_dup = duplicate_pair_count(ranks) > 0
    if stop == "auto":
        if protocol in ("epidemic", "phaseclock"):
            # These protocols stabilize regardless of duplicates.
            stop = "stable"
        else:
            stop = "stable" if has_dup else "horizon"

    if backend == "auto":
        backend = "python" if trace is not None else "kernel"
    if backend == "kernel":
        from . import kernels

        stats = kernels.run_kernel(protocol, ranks, params, seed, budget, stop)
        steps_to_stable: int | None
        if stop == "horizon":
            steps_to_stable = 0
            parallel_time: float | None = 0.0
        elif stats.stabilized:
            steps_to_stable = stats.steps
            parallel_time = stats.steps / n
        else:
            steps_to_stable = None
            parallel_time = None
        return TrialResult(
            n=n,
            seed=seed,
            input_kind=input_kind,
            steps_to_stable=steps_to_stable,
            parallel_time=parallel_time,
            max_state_bits=stats.max_state_bits,
            detection_channel=stats.channel,
            epochs_elapsed=stats.epochs_elapsed,
            false_positive=stats.flagged and not has_dup,
        )

    sim = Simulation(protocol, ranks, params, seed)
    while sim.step_index < budget and not (stop == "stable" and sim.is_stable()):
        record = sim.step()
        if trace is not None and (trace_limit is None or len(trace) < trace_limit):
            trace.append(record)
    if stop == "horizon":
        steps_to_stable = 0
        parallel_time = 0.0
    elif sim.is_stable():
        steps_to_stable = sim.step_index
        parallel_time = sim.step_index / n
    else:
        steps_to_stable = None
        parallel_time = None
    return TrialResult(
        n=n,
        seed=seed,
        input_kind=input_kind,
        steps_to_stable=steps_to_stable,
        parallel_time=parallel_time,
        max_state_bits=sim.max_state_bits,
        detection_channel=sim.first_flag_channel,
        epochs_elapsed=sim.epochs_elapsed(),
        false_positive=sim.first_flag_step is not None and not has_dup,
    )
