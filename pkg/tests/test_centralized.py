"""Centralized scheme: placement, parallelism choice, split plan, rates,
and the schedule builders' structural guarantees.

Delay values at hand-checkable configurations are frozen as exact
rationals; the parallelism optimizer is compared against a brute-force
argmin re-derived here.
"""

import math
from fractions import Fraction as Frac

import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopcache import (
    SchedulingError,
    SystemConfig,
    build_central_placement,
    build_delivery,
    build_server_schedule,
    centralized_delay,
    centralized_rates,
    choose_alpha,
    coding_gain_m,
    enumerate_subsets,
    make_split_plan,
    piecewise_alpha,
)

WORKED = SystemConfig(6, 6, 4, alpha_max=3)  # t = 4


# ---------------------------------------------------------------------------
# placement
# ---------------------------------------------------------------------------


def test_placement_subfile_bookkeeping():
    placement = build_central_placement(WORKED)
    C = math.comb(6, 4)
    assert len(placement.subsets) == C
    # user k caches the subfiles whose subset contains k: C(K-1, t-1) of them
    for k in range(1, 7):
        cached = [T for T in placement.subsets if k in T]
        assert len(cached) == math.comb(5, 3)
    # total cache = N * C(K-1,t-1)/C(K,t) = N*t/K = M  (as fraction of F each)
    frac = Frac(math.comb(5, 3), C) * 6
    assert frac == Frac(4)


def test_placement_needs_integer_t():
    with pytest.raises(ValueError):
        build_central_placement(SystemConfig(20, 10, 3, alpha_max=5))


# ---------------------------------------------------------------------------
# parallelism choice and split plan
# ---------------------------------------------------------------------------


def _delay_at(config, alpha):
    t = int(config.t)
    m = min(config.K // alpha - 1, t)
    return Frac(config.K) * (1 - config.p) / (1 + t + alpha * m)


def test_choose_alpha_is_argmin():
    for K in range(2, 13):
        for t in range(1, K):
            cfg = SystemConfig(K, K, Frac(t * K, K), alpha_max=max(1, K // 2))
            best = min(range(1, cfg.alpha_max + 1), key=lambda a: _delay_at(cfg, a))
            assert _delay_at(cfg, choose_alpha(cfg)) == _delay_at(cfg, best)


def test_piecewise_alpha_branches():
    # dense caches: one big group is optimal
    assert piecewise_alpha(SystemConfig(6, 6, 5, alpha_max=3)) == 1
    # sparse caches: all allowed senders in parallel
    assert piecewise_alpha(SystemConfig(12, 12, 1, alpha_max=6)) == 6
    # in between: the smooth optimum K/(t+1)
    assert piecewise_alpha(SystemConfig(10, 10, 2, alpha_max=5)) == Frac(10, 3)


def test_piecewise_alpha_never_beats_integer_argmin():
    # the rounded smooth optimum is as good as exhaustive search
    for K in range(3, 12):
        for t in range(1, K):
            cfg = SystemConfig(K, K, t, alpha_max=max(1, K // 2))
            star = piecewise_alpha(cfg)
            nearby = {max(1, math.floor(star)), min(cfg.alpha_max, math.ceil(star))}
            assert min(_delay_at(cfg, a) for a in nearby) == _delay_at(
                cfg, choose_alpha(cfg)
            )


def test_split_plan_worked_example():
    # alpha=1 and alpha=2 tie at delay 2/9 here; ties break toward fewer
    # parallel senders
    assert _delay_at(WORKED, 1) == _delay_at(WORKED, 2)
    plan = make_split_plan(WORKED)
    assert plan.alpha == 1
    assert plan.server_share == Frac(5, 9)  # balanced split
    assert plan.L1 == 2

    plan = make_split_plan(WORKED, alpha=2, server_share=Frac(1, 3))
    assert (plan.alpha, plan.server_share, plan.L1) == (2, Frac(1, 3), 2)


def test_split_plan_layer_count_is_minimal():
    for K in range(2, 10):
        for t in range(1, K):
            for alpha in range(1, max(1, K // 2) + 1):
                cfg = SystemConfig(K, K, t, alpha_max=max(1, K // 2))
                m = coding_gain_m(K, Frac(t), alpha)
                if m == 0:
                    continue
                plan = make_split_plan(cfg, alpha=alpha)
                per_link = Frac(K * math.comb(K - 1, t), alpha * int(m))
                assert (per_link * plan.L1).denominator == 1
                if plan.L1 > 1:
                    assert (per_link * (plan.L1 - 1)).denominator != 1


def test_split_plan_rejects_bad_inputs():
    with pytest.raises(ValueError):
        make_split_plan(WORKED, alpha=4)  # above alpha_max
    with pytest.raises(ValueError):
        make_split_plan(WORKED, server_share=Frac(3, 2))
    with pytest.raises(ValueError):
        make_split_plan(SystemConfig(20, 10, 3, alpha_max=5))  # t not integer


# ---------------------------------------------------------------------------
# closed-form rates
# ---------------------------------------------------------------------------


def test_worked_example_rates():
    # balanced default: both links carry 2/9
    rates = centralized_rates(WORKED)
    assert (rates.R1, rates.R2, rates.T) == (Frac(2, 9), Frac(2, 9), Frac(2, 9))
    # deliberately server-light split: delay set by the cooperation links
    rates = centralized_rates(WORKED, alpha=2, server_share=Frac(1, 3))
    assert (rates.R1, rates.R2, rates.T) == (Frac(2, 15), Frac(1, 3), Frac(1, 3))


def test_full_cache_grid_delay_oracle():
    # t = K-1 with alpha_max >= 1: delay collapses to 1/(2K-1)
    for K in range(3, 8):
        cfg = SystemConfig(K, K, K - 1, alpha_max=1)
        assert centralized_delay(cfg) == Frac(1, 2 * K - 1)


def test_delay_is_min_over_alpha():
    for K in (5, 8, 11):
        for t in range(1, K):
            cfg = SystemConfig(K, K, t, alpha_max=max(1, K // 2))
            assert centralized_delay(cfg) == min(
                _delay_at(cfg, a) for a in range(1, cfg.alpha_max + 1)
            )


def test_degenerate_memory_endpoints():
    empty = centralized_rates(SystemConfig(5, 5, 0, alpha_max=2))
    assert (empty.R1, empty.R2, empty.T) == (Frac(5), Frac(0), Frac(5))
    full = centralized_rates(SystemConfig(5, 5, 5, alpha_max=2))
    assert (full.R1, full.R2, full.T) == (Frac(0), Frac(0), Frac(0))


def test_noninteger_t_interpolates():
    lo = SystemConfig(6, 6, 2, alpha_max=3)
    hi = SystemConfig(6, 6, 3, alpha_max=3)
    mid = SystemConfig(6, 6, Frac(5, 2), alpha_max=3)
    rates = centralized_rates(mid)
    assert rates.interpolated
    assert rates.L1 is None and rates.server_share is None
    half = Frac(1, 2)
    assert rates.T == half * centralized_delay(lo) + half * centralized_delay(hi)
    assert rates.R1 == half * (
        centralized_rates(lo).R1 + centralized_rates(hi).R1
    )


def test_interpolation_respects_fixed_alpha():
    mid = SystemConfig(6, 6, Frac(5, 2), alpha_max=3)
    pinned = centralized_rates(mid, alpha=1)
    t2 = centralized_rates(SystemConfig(6, 6, 2, alpha_max=3), alpha=1)
    t3 = centralized_rates(SystemConfig(6, 6, 3, alpha_max=3), alpha=1)
    assert pinned.T == Frac(1, 2) * (t2.T + t3.T)


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------


def test_server_schedule_shape():
    plan = make_split_plan(WORKED, alpha=2, server_share=Frac(1, 3))
    symbols = build_server_schedule(WORKED, plan, demands=(1, 2, 3, 4, 5, 6))
    assert len(symbols) == math.comb(6, 5)
    assert all(s.sender == 0 for s in symbols)
    # broadcast: every user hears the server link
    assert all(s.group == (1, 2, 3, 4, 5, 6) for s in symbols)
    assert all(s.size == Frac(1, 3) * Frac(1, 15) for s in symbols)
    # the served subsets run over all (t+1)-subsets, one fragment per member
    served = sorted(tuple(sorted(c.receiver for c in s.constituents)) for s in symbols)
    assert served == enumerate_subsets(6, 5)


def test_worked_example_schedule_structure():
    plan, sched = build_delivery(
        WORKED, demands=(1, 2, 3, 4, 5, 6), alpha=2, server_share=Frac(1, 3)
    )
    user_symbols = [s for _, syms in sched.user_rounds for s in syms]
    assert len(user_symbols) == 30
    assert all(s.size == Frac(1, 45) for s in user_symbols)
    assert len(sched.user_rounds) == 15
    for part, syms in sched.user_rounds:
        assert len(part.groups) == 2
        # alpha=2 splits the six users into two in-group multicast cliques
        assert all(len(g) == 3 for g in part.groups)
        for s in syms:
            assert s.sender in s.group
            for c in s.constituents:
                assert c.receiver in s.group and c.receiver != s.sender


def test_every_sender_is_a_group_member():
    cfg = SystemConfig(8, 8, 2, alpha_max=4)
    _, sched = build_delivery(cfg, demands=tuple(range(1, 9)))
    for part, syms in sched.user_rounds:
        members = {u for g in part.groups for u in g}
        for s in syms:
            assert s.sender in members
            assert tuple(sorted(s.group)) in part.groups


@given(
    st.integers(min_value=2, max_value=8).flatmap(
        lambda K: st.tuples(
            st.just(K),
            st.integers(min_value=1, max_value=K - 1),
            st.integers(min_value=1, max_value=max(1, K // 2)),
        )
    )
)
def test_schedule_builds_for_any_feasible_shape(shape):
    K, t, alpha = shape
    cfg = SystemConfig(K, K, t, alpha_max=max(1, K // 2))
    try:
        plan, sched = build_delivery(cfg, demands=tuple(range(1, K + 1)), alpha=alpha)
    except SchedulingError as exc:  # pragma: no cover - should never happen
        pytest.fail(f"scheduler failed on K={K} t={t} alpha={alpha}: {exc}")
    # total user traffic: every needed fragment once, m receivers per symbol
    total = sum(s.size for _, syms in sched.user_rounds for s in syms)
    m = coding_gain_m(K, Frac(t), plan.alpha)
    expected = (1 - plan.server_share) * K * (1 - cfg.p) / m if m > 0 else Frac(0)
    assert total == expected
