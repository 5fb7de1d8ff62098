"""Tests for the size-estimation layers and the bounds mapping."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from popcd.engine import Simulation, generate_ranks
from popcd.params import ProtocolParams
from popcd.rng import RngStream
from popcd.sizing import (
    KEY_BITS,
    bounds_from_estimate,
    geometric_estimator_step,
    ideal_estimator_step,
)
from popcd.state import EV_COUNTFIN, Agent


class TestBoundsFromEstimate:
    def test_spec_values(self):
        assert bounds_from_estimate(10, 2, 2) == (256, 4096)

    def test_lower_clamp(self):
        assert bounds_from_estimate(1, 2, 2) == (2, 8)
        assert bounds_from_estimate(0, 1, 1) == (2, 2)

    def test_tight_offsets(self):
        assert bounds_from_estimate(12, 1, 1) == (2048, 8192)

    @given(
        st.integers(min_value=0, max_value=40),
        st.integers(min_value=0, max_value=8),
        st.integers(min_value=0, max_value=8),
    )
    @settings(max_examples=200)
    def test_ordering_invariants(self, log_pop, c_lower, c_upper):
        n_lower, n_upper = bounds_from_estimate(log_pop, c_lower, c_upper)
        assert 2 <= n_lower <= n_upper
        # the true size 2^log_pop always falls inside the bounds when both
        # offsets are at least 1
        if c_lower >= 1 and c_upper >= 0 and log_pop >= 1:
            assert n_lower <= 2**log_pop <= n_upper


class TestIdealEstimator:
    def test_leader_originates_as_responder(self):
        a, b = Agent(), Agent(leader=1)
        events, level_up = ideal_estimator_step(a, b)
        assert b.count_finished == 1
        assert events & EV_COUNTFIN
        assert level_up is False

    def test_leader_does_not_originate_as_initiator(self):
        a, b = Agent(leader=1), Agent()
        ideal_estimator_step(a, b)
        assert a.count_finished == 0

    def test_spread_requires_matching_estimate(self):
        a = Agent(count_finished=1, level=0, log_population=5)
        b = Agent(log_population=5)
        events, _ = ideal_estimator_step(a, b)
        assert b.count_finished == 1
        assert events & EV_COUNTFIN

        b2 = Agent(log_population=6)
        ideal_estimator_step(Agent(count_finished=1, log_population=5), b2)
        assert b2.count_finished == 0

        b3 = Agent(level=1, log_population=5)
        ideal_estimator_step(Agent(count_finished=1, log_population=5), b3)
        assert b3.count_finished == 0

    def test_levels_never_move(self):
        a, b = Agent(leader=1, count_finished=1), Agent()
        for _ in range(5):
            _, level_up = ideal_estimator_step(a, b)
            assert level_up is False
            assert (b.level, a.level) == (0, 0)


class TestGeometricEstimator:
    def test_first_response_draws_sample_and_key(self):
        rng = RngStream(7)
        b = Agent()
        geometric_estimator_step(Agent(), b, rng, c_fin=8)
        assert b.own_draw >= 1
        assert 0 <= b.own_key < (1 << KEY_BITS)
        assert (b.max_draw, b.max_key) == (b.own_draw, b.own_key)

    def test_no_redraw_after_first(self):
        rng = RngStream(7)
        b = Agent()
        geometric_estimator_step(Agent(), b, rng, c_fin=8)
        own = (b.own_draw, b.own_key)
        state_before = rng.state
        geometric_estimator_step(Agent(), b, rng, c_fin=8)
        assert (b.own_draw, b.own_key) == own
        assert rng.state == state_before  # no randomness consumed

    def test_adopting_larger_max_raises_level(self):
        # two agents with samples 3 and 5: the responder holding 3 adopts
        # the larger maximum, its level rises, and its finished bit clears
        a = Agent(own_draw=5, own_key=9, max_draw=5, max_key=9)
        b = Agent(
            own_draw=3, own_key=4, max_draw=3, max_key=4,
            level=3, log_population=3, count_finished=1, leader=1,
        )
        _, level_up = geometric_estimator_step(a, b, RngStream(0), c_fin=8)
        assert level_up is True
        assert (b.max_draw, b.max_key) == (5, 9)
        assert b.level == 5
        assert b.level > 3  # strictly increased
        assert b.log_population == 5
        assert b.count_finished == 0
        assert b.countdown == 8 * 5 * 5
        assert b.leader == 0  # no longer holds its own sample as the max

    def test_key_breaks_ties(self):
        a = Agent(max_draw=4, max_key=9)
        b = Agent(own_draw=4, own_key=2, max_draw=4, max_key=2)
        _, level_up = geometric_estimator_step(a, b, RngStream(0), c_fin=8)
        assert (b.max_draw, b.max_key) == (4, 9)
        assert level_up is False  # same draw value: not a level change
        assert b.leader == 0

    def test_smaller_max_ignored(self):
        a = Agent(max_draw=2, max_key=9)
        b = Agent(own_draw=4, own_key=2, max_draw=4, max_key=2)
        geometric_estimator_step(a, b, RngStream(0), c_fin=8)
        assert (b.max_draw, b.max_key) == (4, 2)
        assert b.leader == 1

    def test_countdown_burns_on_both_sides(self):
        a = Agent(own_draw=3, own_key=1, max_draw=3, max_key=1, countdown=5)
        b = Agent(own_draw=3, own_key=1, max_draw=3, max_key=1, countdown=7)
        geometric_estimator_step(a, b, RngStream(0), c_fin=8)
        assert a.countdown == 4
        assert b.countdown == 6

    def test_expired_countdown_fires_only_at_leader(self):
        # distinct log_population values keep the spread rule out of the
        # picture, isolating the countdown-expiry origination
        leader = Agent(
            own_draw=3, own_key=1, max_draw=3, max_key=1, leader=1, countdown=1,
            level=3, log_population=3,
        )
        follower = Agent(
            own_draw=2, own_key=5, max_draw=3, max_key=1, countdown=1,
            level=3, log_population=2,
        )
        geometric_estimator_step(leader, follower, RngStream(0), c_fin=8)
        assert leader.count_finished == 1  # initiator-side fire
        assert follower.count_finished == 0  # not the max holder

    def test_expired_countdown_inert_at_non_leader(self):
        a = Agent(level=1, log_population=1)
        b = Agent(
            own_draw=2, own_key=5, max_draw=3, max_key=1, countdown=1,
            level=3, log_population=3,
        )
        geometric_estimator_step(a, b, RngStream(0), c_fin=8)
        assert b.countdown == 0
        assert b.count_finished == 0

    def test_level_up_restarts_countdown_instead_of_burning(self):
        a = Agent(max_draw=6, max_key=0)
        b = Agent(own_draw=3, own_key=1, max_draw=3, max_key=1, countdown=1, leader=1)
        geometric_estimator_step(a, b, RngStream(0), c_fin=8)
        assert b.countdown == 8 * 36
        assert b.count_finished == 0


def _snapshot(agents):
    return [
        (a.level, a.log_population, a.count_finished, a.leader) for a in agents
    ]


@pytest.mark.parametrize("estimator", ["ideal", "geometric"])
def test_estimator_contract_over_real_run(estimator):
    """The four interface invariants, checked per step on a live run:

    1. level is monotone non-decreasing;
    2. log_population is frozen while count_finished stays 1;
    3. count_finished falls 1 -> 0 only when level rises;
    4. count_finished rises 0 -> 1 only at a leader (origination) or by
       copying from an initiator with matching (level, log_population).
    """
    params = ProtocolParams(estimator=estimator)
    ranks = generate_ranks("pair", 16, seed=9)
    sim = Simulation("cold", ranks, params, seed=9)
    before = _snapshot(sim.agents)
    for _ in range(30_000):
        record = sim.step()
        after = _snapshot(sim.agents)
        for idx in (record.initiator, record.responder):
            lvl0, log0, fin0, _ = before[idx]
            lvl1, log1, fin1, lead1 = after[idx]
            assert lvl1 >= lvl0, "level decreased"
            if fin0 == 1 and fin1 == 1:
                assert log1 == log0, "estimate moved while finished"
            if fin0 == 1 and fin1 == 0:
                assert lvl1 > lvl0, "finished bit lost without level rise"
            if fin0 == 0 and fin1 == 1:
                a_after = after[record.initiator]
                spread_ok = (
                    idx == record.responder
                    and a_after[2] == 1
                    and a_after[0] == lvl1
                    and a_after[1] == log1
                )
                assert lead1 == 1 or spread_ok, "finished bit from a non-leader"
        before = after
        if sim.is_stable():
            break
