"""Unit and property tests for the segment-decomposition detector."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from popcd.detector import (
    SegmentParams,
    active_segment,
    derive_params,
    detector_step,
    enter_epoch,
    offset_in_segment,
)
from popcd.engine import run_trial
from popcd.params import ProtocolParams
from popcd.rng import RngStream
from popcd.state import (
    EV_BACKUP_HIT,
    EV_FLAG_FROM_BACKUP,
    EV_FLAG_FROM_MISMATCH,
    EV_FLAG_FROM_SPREAD,
    EV_MISMATCH_HIT,
    NULL_OFFSET,
    Agent,
    InputError,
)


class TestDeriveParams:
    def test_loose_bounds_1024_4096(self):
        seg = derive_params(1024, 4096, eta=1.0)
        assert seg.segment_len == 102  # ceil(sqrt(1024 * 10))
        assert seg.segment_count == 41  # ceil(4096 / 102)
        assert seg.repetitions == 36  # ceil(3 * 12)
        assert seg.epoch_cap == 1477  # 36 * 41 + 1
        assert seg.max_infectivity == 1  # floor(10 - log2 102) - 2

    def test_tight_bounds_4(self):
        seg = derive_params(4, 4, eta=1.0)
        assert seg.segment_len == 3  # ceil(sqrt(8))
        assert seg.segment_count == 2
        assert seg.repetitions == 6
        assert seg.epoch_cap == 13
        assert seg.max_infectivity == 0  # clamped at zero

    @pytest.mark.parametrize(
        "n, expect",
        [
            # (segment_len, segment_count, repetitions, epoch_cap, max_infectivity)
            (256, (46, 6, 24, 145, 0)),
            (1024, (102, 11, 30, 331, 1)),
            (4096, (222, 19, 36, 685, 2)),
        ],
    )
    def test_exact_bounds_table(self, n, expect):
        seg = derive_params(n, n, eta=1.0)
        got = (
            seg.segment_len,
            seg.segment_count,
            seg.repetitions,
            seg.epoch_cap,
            seg.max_infectivity,
        )
        assert got == expect

    def test_eta_scales_repetitions(self):
        base = derive_params(1024, 1024, eta=1.0)
        double = derive_params(1024, 1024, eta=2.0)
        assert double.repetitions == 2 * base.repetitions
        assert double.segment_len == base.segment_len

    def test_invalid_bounds(self):
        with pytest.raises(InputError):
            derive_params(1, 4)
        with pytest.raises(InputError):
            derive_params(8, 4)
        with pytest.raises(InputError):
            derive_params(4, 8, eta=0.0)

    @given(
        st.integers(min_value=2, max_value=1 << 20),
        st.integers(min_value=0, max_value=1 << 20),
    )
    @settings(max_examples=200)
    def test_segments_cover_rank_space(self, n_lower, extra):
        seg = derive_params(n_lower, n_lower + extra)
        assert seg.segment_len >= 1
        assert seg.segment_len * seg.segment_count >= seg.n_upper
        assert seg.segment_len * (seg.segment_count - 1) < seg.n_upper
        assert seg.epoch_cap == seg.repetitions * seg.segment_count + 1
        assert seg.max_infectivity >= 0
        # the broadcast budget never exceeds the lower population bound
        assert seg.segment_len * (2**seg.max_infectivity) <= 4 * seg.n_lower


class TestSegmentGeometry:
    def test_round_robin(self):
        assert active_segment(1, 5) == 0
        assert active_segment(5, 5) == 4
        assert active_segment(6, 5) == 0

    def test_offsets_are_one_based(self):
        seg = derive_params(16, 16)  # segment_len 8, segment_count 2
        assert seg.segment_len == 8
        assert offset_in_segment(1, 0, seg) == 1
        assert offset_in_segment(8, 0, seg) == 8
        assert offset_in_segment(9, 0, seg) == NULL_OFFSET
        assert offset_in_segment(9, 1, seg) == 1
        assert offset_in_segment(16, 1, seg) == 8

    def test_last_segment_truncated(self):
        seg = derive_params(4, 4)  # segment_len 3 covers [1,3], [4,4]
        assert offset_in_segment(4, 1, seg) == 1
        assert offset_in_segment(5, 1, seg) == NULL_OFFSET  # beyond n_upper

    @given(st.integers(min_value=2, max_value=4096), st.data())
    @settings(max_examples=200)
    def test_every_rank_in_exactly_one_segment(self, n, data):
        seg = derive_params(n, n)
        rank = data.draw(st.integers(min_value=1, max_value=n))
        hits = [
            s
            for s in range(seg.segment_count)
            if offset_in_segment(rank, s, seg) != NULL_OFFSET
        ]
        assert hits == [(rank - 1) // seg.segment_len]


class TestEnterEpoch:
    def test_active_member_draws_nonce(self):
        seg = derive_params(1024, 1024)
        agent = Agent(rank=5, epoch=1)
        rng = RngStream(3)
        before = rng.state
        enter_epoch(agent, seg, rng)
        assert agent.gid_offset == 5
        assert agent.gid_nonce in (0, 1)
        assert agent.infectivity == seg.max_infectivity
        assert rng.state != before  # exactly the nonce draw

    def test_inactive_member_consumes_no_randomness(self):
        seg = derive_params(1024, 1024)
        agent = Agent(rank=500, epoch=1, gid_offset=7, gid_nonce=1, infectivity=1)
        rng = RngStream(3)
        before = rng.state
        enter_epoch(agent, seg, rng)
        assert agent.gid_offset == NULL_OFFSET
        assert agent.gid_nonce == 0
        assert agent.infectivity == 0
        assert rng.state == before

    def test_epoch_zero_has_no_active_segment(self):
        # epoch 0 maps to segment -1 mod count; only ranks of the last
        # segment would match, but epoch 0 is the warm-up in practice
        seg = derive_params(16, 16)
        agent = Agent(rank=1, epoch=0)
        enter_epoch(agent, seg, RngStream(0))
        assert agent.gid_offset == NULL_OFFSET


def _seg_small() -> SegmentParams:
    return derive_params(16, 16)  # segment_len 8, 2 segments, cap 25


class TestDetectorStep:
    def test_backup_fires_on_same_rank(self):
        seg = _seg_small()
        a, b = Agent(rank=3), Agent(rank=3)
        events = detector_step(a, b, seg, modulus=8, mode="randomized", rng=RngStream(0))
        assert events & EV_BACKUP_HIT
        assert events & EV_FLAG_FROM_BACKUP
        assert b.collision == 1
        assert a.collision == 0  # the flag spreads on later interactions

    def test_backup_hit_without_fresh_flag(self):
        seg = _seg_small()
        a, b = Agent(rank=3), Agent(rank=3, collision=1)
        events = detector_step(a, b, seg, modulus=8, mode="randomized", rng=RngStream(0))
        assert events & EV_BACKUP_HIT
        assert not events & EV_FLAG_FROM_BACKUP

    def test_nonce_mismatch_flags(self):
        seg = _seg_small()
        a = Agent(rank=1, epoch=1, gid_offset=4, gid_nonce=0)
        b = Agent(rank=2, epoch=1, gid_offset=4, gid_nonce=1)
        events = detector_step(a, b, seg, modulus=8, mode="randomized", rng=RngStream(0))
        assert events & EV_MISMATCH_HIT
        assert events & EV_FLAG_FROM_MISMATCH
        assert b.collision == 1

    def test_different_offsets_never_flag(self):
        seg = _seg_small()
        a = Agent(rank=1, epoch=1, gid_offset=4, gid_nonce=0)
        b = Agent(rank=2, epoch=1, gid_offset=5, gid_nonce=1)
        events = detector_step(a, b, seg, modulus=8, mode="randomized", rng=RngStream(0))
        assert not events & EV_MISMATCH_HIT
        assert b.collision == 0

    def test_equal_nonces_never_flag(self):
        seg = _seg_small()
        a = Agent(rank=1, epoch=1, gid_offset=4, gid_nonce=1)
        b = Agent(rank=2, epoch=1, gid_offset=4, gid_nonce=1)
        events = detector_step(a, b, seg, modulus=8, mode="randomized", rng=RngStream(0))
        assert not events & EV_MISMATCH_HIT
        assert b.collision == 0

    def test_mismatch_requires_equal_positive_epoch(self):
        seg = _seg_small()
        for a_epoch, b_epoch in [(1, 2), (0, 0)]:
            a = Agent(rank=1, epoch=a_epoch, gid_offset=4, gid_nonce=0, timer=1)
            b = Agent(rank=2, epoch=b_epoch, gid_offset=4, gid_nonce=1, timer=3)
            detector_step(a, b, seg, modulus=8, mode="randomized", rng=RngStream(0))
            assert b.collision == 0, (a_epoch, b_epoch)

    def test_proliferation_copies_gid_and_halves_budget(self):
        seg = _seg_small()
        a = Agent(rank=1, epoch=1, gid_offset=4, gid_nonce=1, infectivity=3)
        b = Agent(rank=9, epoch=1)
        detector_step(a, b, seg, modulus=8, mode="randomized", rng=RngStream(0))
        assert (b.gid_offset, b.gid_nonce) == (4, 1)
        assert a.infectivity == 2
        assert b.infectivity == 2

    def test_zero_infectivity_does_not_copy(self):
        seg = _seg_small()
        a = Agent(rank=1, epoch=1, gid_offset=4, gid_nonce=1, infectivity=0)
        b = Agent(rank=9, epoch=1)
        detector_step(a, b, seg, modulus=8, mode="randomized", rng=RngStream(0))
        assert b.gid_offset == NULL_OFFSET

    def test_collision_epidemic(self):
        seg = _seg_small()
        a, b = Agent(rank=1, collision=1), Agent(rank=2)
        events = detector_step(a, b, seg, modulus=8, mode="randomized", rng=RngStream(0))
        assert events & EV_FLAG_FROM_SPREAD
        assert b.collision == 1

    def test_epoch_entry_redraws_gid(self):
        seg = _seg_small()
        # a at epoch 1 infects b (epoch 0) via the epoch epidemic; b's rank
        # is in segment 0 (active during epoch 1), so b re-enters
        a = Agent(rank=9, epoch=1, timer=0)
        b = Agent(rank=2, epoch=0, timer=0)
        detector_step(a, b, seg, modulus=8, mode="randomized", rng=RngStream(5))
        assert b.epoch == 1
        assert b.gid_offset == 2
        assert b.infectivity == seg.max_infectivity

    def test_derandomized_defers_then_completes_by_role(self):
        seg = _seg_small()
        a = Agent(rank=9, epoch=1, timer=0)
        b = Agent(rank=2, epoch=0, timer=0)
        detector_step(a, b, seg, modulus=8, mode="derandomized", rng=RngStream(5))
        assert b.waiting == 1
        assert b.gid_offset == NULL_OFFSET
        # as responder in its next interaction: nonce = 1
        a2 = Agent(rank=10, epoch=1, timer=0)
        detector_step(a2, b, seg, modulus=8, mode="derandomized", rng=RngStream(6))
        assert b.waiting == 0
        assert (b.gid_offset, b.gid_nonce) == (2, 1)
        # a waiting initiator completes with nonce = 0
        c = Agent(rank=3, epoch=1, waiting=1)
        d = Agent(rank=11, epoch=1)
        detector_step(c, d, seg, modulus=8, mode="derandomized", rng=RngStream(7))
        assert c.waiting == 0
        assert (c.gid_offset, c.gid_nonce) == (3, 0)

    def test_rank_never_written(self):
        seg = _seg_small()
        a, b = Agent(rank=3), Agent(rank=3)
        detector_step(a, b, seg, modulus=8, mode="randomized", rng=RngStream(0))
        assert (a.rank, b.rank) == (3, 3)


class TestSafety:
    """A flag is raised only if the input truly contains a duplicate."""

    @given(st.integers(min_value=0, max_value=1 << 32))
    @settings(max_examples=20, deadline=None)
    def test_distinct_ranks_never_flag(self, seed):
        result = run_trial(
            "cdwb",
            16,
            seed=seed,
            input_kind="distinct",
            budget=60_000,
            backend="python",
        )
        assert result.detection_channel == "none"
        assert result.false_positive is False

    @given(st.integers(min_value=0, max_value=1 << 32), st.sampled_from(["pair", "dup:3"]))
    @settings(max_examples=20, deadline=None)
    def test_duplicates_always_caught(self, seed, kind):
        result = run_trial(
            "cdwb",
            16,
            seed=seed,
            input_kind=kind,
            budget=60_000,
            backend="python",
        )
        assert result.steps_to_stable is not None
        assert result.detection_channel in ("cdwb", "backup")
        assert result.false_positive is False

    def test_two_agents_same_rank_flag_on_first_interaction(self):
        # the only pair collides, so the backup must fire at interaction 0;
        # the initiator keeps output 0 until a later spread step, so full
        # stabilization takes at least one more interaction
        trace = []
        result = run_trial(
            "cdwb", 2, seed=0, input_kind="file:-", ranks=[1, 1],
            backend="python", trace=trace,
        )
        assert "collision-raised" in trace[0].events
        assert result.detection_channel == "backup"
        assert result.steps_to_stable is not None
        assert result.steps_to_stable >= 2

    @given(st.integers(min_value=0, max_value=1 << 32))
    @settings(max_examples=10, deadline=None)
    def test_derandomized_mode_same_guarantees(self, seed):
        params = ProtocolParams(mode="derandomized")
        flagged = run_trial(
            "cdwb", 16, params=params, seed=seed, input_kind="pair",
            budget=60_000, backend="python",
        )
        clean = run_trial(
            "cdwb", 16, params=params, seed=seed, input_kind="distinct",
            budget=60_000, backend="python",
        )
        assert flagged.steps_to_stable is not None
        assert clean.detection_channel == "none"
