"""Deterministic randomness for simulations.

Everything random in this package flows through a single splitmix64 stream
per trial.  The generator is small enough to reimplement exactly inside the
compiled kernels, which is what makes the pure-Python reference path and the
fast array path produce bit-identical trajectories from the same seed.

Contract relied on throughout the package:

* ``next_u64`` advances the state by exactly one splitmix64 step.
* ``randbelow(bound)`` uses bitmask rejection, so it is exactly uniform on
  ``[0, bound)`` and consumes a deterministic-given-the-stream number of
  draws.
* ``bit()`` is ``randbelow(2)`` (one draw, no rejection possible).
* derived seeds are pure functions of their inputs, so a sweep cell
  ``(base_seed, n, trial_index)`` always maps to the same trial seed.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64(state: int) -> tuple[int, int]:
    """Advance one splitmix64 step; return (new_state, output)."""
    state = (state + _GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    z = z ^ (z >> 31)
    return state, z


def mix_output(x: int) -> int:
    """The output function of splitmix64 applied once to ``x``."""
    return splitmix64(x & _MASK64)[1]


def derive_seed(seed: int, *salts: int) -> int:
    """Derive an independent 64-bit seed from ``seed`` and integer salts.

    Pure function; used to split one experiment seed into per-trial and
    per-purpose (rank generation vs. dynamics) streams.
    """
    state = mix_output(seed)
    for salt in salts:
        state = mix_output(state ^ mix_output(salt))
    return state


# Salts for the two streams every trial owns.
RANK_STREAM = 0x52414E4B  # rank/input generation
RUN_STREAM = 0x53494D52  # interaction dynamics


class RngStream:
    """Mutable splitmix64 stream with exact-uniform integer draws."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state, out = splitmix64(self.state)
        return out

    def randbelow(self, bound: int) -> int:
        """Exactly uniform integer in [0, bound) via bitmask rejection.

        Consumes no draw for ``bound == 1`` and never rejects when
        ``bound`` is a power of two.
        """
        if bound <= 0:
            raise ValueError("bound must be positive")
        if bound == 1:
            return 0
        mask = 1
        while mask < bound - 1:
            mask = (mask << 1) | 1
        while True:
            value = self.next_u64() & mask
            if value < bound:
                return value

    def bit(self) -> int:
        return self.randbelow(2)

    def geometric(self) -> int:
        """Number of fair coin flips up to and including the first 1-bit.

        P(g = k) = 2**-k for k >= 1.
        """
        g = 1
        while self.bit() == 0:
            g += 1
        return g

    def sample_pair(self, n: int) -> tuple[int, int]:
        """Uniformly random ordered pair of distinct agent indices."""
        u = self.randbelow(n)
        v = self.randbelow(n - 1)
        if v >= u:
            v += 1
        return u, v
