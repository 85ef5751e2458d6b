import math

import numpy as np
import pytest
from scipy import stats as sps

from evovoter import (CounterConfig, ModelParams, OpinionGraph, Stepper,
                      d_max_check, p_threshold, run, run_counter_construction,
                      run_replicas, spawn_rng, step, stubborn_refresh_prob)
from conftest import quick_run


def test_run_is_deterministic():
    a = quick_run(seed=11)
    b = quick_run(seed=11)
    assert a.updates == b.updates
    assert a.final_n1 == b.final_n1
    assert np.array_equal(a.trajectory.data, b.trajectory.data)
    c = quick_run(seed=12)
    assert (a.updates, a.final_n1) != (c.updates, c.final_n1)


def test_trajectory_invariants():
    res = quick_run(n=300, L=10.0, nu=1.0, seed=1)
    tr = res.trajectory
    n_edges = 300 * 10 // 2
    assert np.all(tr.n10 + (tr.n11 + tr.n00) // 2 == n_edges)
    assert np.all(np.diff(tr.updates) > 0)
    assert np.all(np.diff(tr.time) > 0)
    assert tr.n1[-1] == res.final_n1


def test_absorption_state_has_no_discordant_edges():
    res = quick_run(n=120, L=6.0, nu=0.3, seed=2, max_updates=5_000_000,
                    keep_graph=True)
    assert res.absorbed
    assert res.final_n10 == 0
    assert res.graph.n10 == 0
    assert res.tau_updates == res.updates


def test_nu_zero_to_same_decrements_n10_every_update():
    # without voting, rewiring to a same-opinion target removes exactly one
    # discordant edge per update, so tau equals the initial discordant count
    rng = np.random.default_rng(3)
    g = OpinionGraph.build_regular(100, 6, rng=rng)
    g.assign_opinions(rng, 0.5)
    n10_start = g.n10
    params = ModelParams(n=100, L=6.0, nu=0.0, rewire_mode="to_same",
                         max_updates=1_000_000, stride=1)
    res = run(params, graph=g, rng=rng)
    assert res.absorbed
    assert res.updates == n10_start + res.skipped_rewires
    d = np.diff(res.trajectory.n10)
    assert np.all((d == -1) | (d == 0))
    assert int((d == -1).sum()) == n10_start


def test_step_events_match_graph_mutation():
    rng = np.random.default_rng(4)
    g = OpinionGraph.build_er(80, 6.0, rng=rng)
    g.assign_opinions(rng, 0.5)
    params = ModelParams(n=80, L=6.0, nu=2.0)
    st = Stepper(g, params, rng=rng)
    votes = rewires = 0
    for _ in range(500):
        before = (g.n1, g.n_edges)
        ev = st.step(rng)
        if ev is None:
            break
        if ev.kind == "vote":
            votes += 1
            assert g.n1 in (before[0] - 1, before[0] + 1)
        else:
            rewires += 1
            assert g.n1 == before[0]
        assert g.n_edges == before[1]
    assert votes > 0 and rewires > 0
    # vote frequency should be near nu/L
    frac = votes / (votes + rewires)
    assert abs(frac - 2.0 / 6.0) < 0.07
    g.validate()


def test_clocks_share_the_embedded_chain():
    # discrete_efficient, ctmc and discrete_uniform_edge draw the same
    # discordant-pair chain; silk adds concordant no-ops. Final opinion
    # counts at absorption must agree in law.
    finals = {}
    for clock in ("discrete_efficient", "ctmc", "discrete_uniform_edge", "silk"):
        vals = []
        for rep in range(60):
            res = quick_run(n=100, L=6.0, nu=0.5, seed=20, replica=rep,
                            clock=clock, max_updates=3_000_000)
            assert res.absorbed
            vals.append(res.final_n1)
        finals[clock] = np.asarray(vals, dtype=float)
    base = finals["discrete_efficient"]
    for clock in ("ctmc", "discrete_uniform_edge", "silk"):
        p = sps.ks_2samp(base, finals[clock]).pvalue
        assert p > 0.01, (clock, p)


def test_silk_clock_counts_noops():
    res = quick_run(n=100, L=6.0, nu=0.5, seed=21, clock="silk",
                    max_updates=500_000)
    assert res.noop_events > 0
    assert res.updates > res.noop_events


def test_ctmc_time_is_exponential_rate_2n10():
    rng = np.random.default_rng(5)
    g = OpinionGraph.build_regular(200, 8, rng=rng)
    g.assign_opinions(rng, 0.5)
    params = ModelParams(n=200, L=8.0, nu=1.0, clock="ctmc")
    st = Stepper(g, params, rng=rng)
    zs = []
    for _ in range(4000):
        rate = 2.0 * g.n10
        ev = st.step(rng)
        if ev is None:
            break
        zs.append(ev.dt * rate)
    p = sps.kstest(zs, "expon").pvalue
    assert p > 0.01, p


def test_counter_construction_matches_plain_run_in_law():
    # compare final opinion counts at a fixed update horizon
    plain, counter = [], []
    params = ModelParams(n=200, L=10.0, nu=1.0, max_updates=30_000, stride=200)
    for rep in range(100):
        plain.append(run(params, rng=spawn_rng(30, rep)).final_n1)
        counter.append(run_counter_construction(
            params, rng=spawn_rng(31, rep)).final_n1)
    p = sps.ks_2samp(np.asarray(plain, float),
                     np.asarray(counter, float)).pvalue
    assert p > 0.01, p


def test_stubborn_draw_fraction_matches_geometric_tail():
    # the tail is only visible for small nu, where runs absorb fast, so the
    # draws are pooled over replicas
    params = ModelParams(n=400, L=5.0, nu=0.23, max_updates=1_200_000,
                         stride=400)
    stubborn = pool1 = 0
    for rep in range(120):
        res = run_counter_construction(params, rng=spawn_rng(32, rep))
        stub = res.stubborn
        stubborn += stub["stubborn_draws"]  # tallied within pool 1 only
        pool1 += stub["pool1_draws"]
        assert stub["threshold"] == 100  # 20 L
    expect = stubborn_refresh_prob(0.23, 5.0)
    assert stubborn > 10
    assert abs(stubborn / pool1 - expect) <= 0.01


def test_counter_construction_s_membership():
    params = ModelParams(n=300, L=4.0, nu=0.5, max_updates=100_000, stride=300)
    res = run_counter_construction(params, CounterConfig(),
                                   rng=spawn_rng(33))
    # regular init: every vertex has degree 4 <= 11 L, so all of V is in S
    assert res.stubborn["n_in_S"] == 300


def test_martingale_variance_bound_small():
    # E (N1(t)/n - p)^2 <= nu t / n, checked with a generous 4 s.e. margin
    n, L, nu, reps = 300, 10.0, 1.0, 80
    grid = np.arange(1.0, 10.0 + 1e-9, 1.0)
    vals = []
    for rep in range(reps):
        params = ModelParams(n=n, L=L, nu=nu, opinion_mode="exact_count",
                             max_updates=int(10 * n * L), stride=int(n * L))
        res = run(params, rng=spawn_rng(34, rep))
        tr = res.trajectory
        d = (tr.n1 / n - 0.5) ** 2
        vals.append(np.interp(grid, tr.time, d))
    vals = np.asarray(vals)
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(reps)
    assert np.all(mean <= nu * grid / n + 4 * se)


def test_d_max_check_bounds_degree_growth():
    res = quick_run(n=500, L=10.0, nu=0.05, seed=35, max_updates=20_000,
                    opinion_mode="exact_count")
    assert d_max_check(res, t=1.0, eps=0.3)


def test_p_threshold_formula():
    assert abs(p_threshold(1.0) - math.exp(-21.0) / 60.0) < 1e-25
    assert abs(p_threshold(1.0) - 1.26e-11) < 0.01e-11
    # maximizer at nu = 1/21
    grid = np.linspace(0.001, 1.0, 5000)
    vals = np.array([p_threshold(x) for x in grid])
    assert abs(grid[vals.argmax()] - 1 / 21) < 1e-3
    # decreasing beyond the maximizer
    assert p_threshold(0.5) > p_threshold(1.0) > p_threshold(2.0)


def test_stubborn_refresh_prob_closed_form():
    assert stubborn_refresh_prob(0.23, 5.0) == pytest.approx(0.954 ** 100)
    assert stubborn_refresh_prob(0.0, 5.0) == 1.0
    with pytest.raises(ValueError):
        stubborn_refresh_prob(6.0, 5.0)


def test_validation_rejects_bad_params():
    with pytest.raises(ValueError):
        ModelParams(n=0, L=4.0, nu=1.0).validate()
    with pytest.raises(ValueError):
        ModelParams(n=10, L=4.0, nu=-1.0).validate()
    with pytest.raises(ValueError):
        ModelParams(n=10, L=4.0, nu=8.0).validate()  # nu/L > 1
    ModelParams(n=10, L=4.0, nu=8.0, legacy_rates=True).validate()
    with pytest.raises(ValueError):
        ModelParams(n=10, L=4.0, nu=1.0, clock="nope").validate()


def test_run_replicas_matches_sequential():
    params = ModelParams(n=120, L=6.0, nu=1.0, max_updates=50_000, stride=120)
    batch = run_replicas(params, seed=36, n_replicas=3)
    solo = [run(params, rng=spawn_rng(36, r)) for r in range(3)]
    for a, b in zip(batch, solo):
        assert a.final_n1 == b.final_n1
        assert a.updates == b.updates


def test_step_wrapper_single_update():
    rng = np.random.default_rng(6)
    g = OpinionGraph.build_regular(60, 4, rng=rng)
    g.assign_opinions(rng, 0.5)
    params = ModelParams(n=60, L=4.0, nu=1.0)
    ev = step(g, params, rng)
    assert ev.kind in ("vote", "rewire", "skipped_rewire", "noop")


def test_p_zero_absorbs_immediately():
    res = quick_run(n=100, L=4.0, nu=1.0, p=0.0, seed=37)
    assert res.absorbed
    assert res.updates == 0
    assert res.final_n1 == 0
