import numpy as np
import pytest

from evovoter import (neighbor_count_correlation, pa_equilibrium,
                      pa_identity_residuals, pa_integrate, pa_nu_c)
from conftest import quick_run


def test_critical_curve():
    assert pa_nu_c(0.5) == 0.5
    assert pa_nu_c(0.25) == pytest.approx(0.625)
    # symmetric and minimized at p = 1/2
    assert pa_nu_c(0.3) == pytest.approx(pa_nu_c(0.7))
    assert pa_nu_c(0.5) < pa_nu_c(0.4) < pa_nu_c(0.2)


def test_equilibrium_symmetric_point():
    eq = pa_equilibrium(0.5, 1.0, 40.0)
    assert eq.feasible
    assert (eq.J0, eq.J1, eq.K1, eq.K0) == (10.0, 30.0, 10.0, 30.0)
    assert eq.n10 == pytest.approx(0.25 * 40 * 0.5)
    res = pa_identity_residuals(eq)
    assert max(abs(v) for v in res.values()) < 1e-12


def test_equilibrium_identities_hold_off_symmetry():
    rng = np.random.default_rng(0)
    for _ in range(25):
        p = float(rng.uniform(0.05, 0.95))
        nu = float(pa_nu_c(p) + rng.uniform(0.05, 3.0))
        L = float(rng.uniform(5.0, 80.0))
        eq = pa_equilibrium(p, nu, L)
        assert eq.feasible
        res = pa_identity_residuals(eq)
        assert max(abs(v) for v in res.values()) < 1e-9, (p, nu, L)


def test_equilibrium_infeasible_below_critical_rate():
    eq = pa_equilibrium(0.5, 0.3, 40.0)
    assert not eq.feasible
    assert eq.n10 < 0  # formal root sits at negative discordant density


def test_equilibrium_validates_arguments():
    for bad in ((0.0, 1.0, 10.0), (1.0, 1.0, 10.0), (0.5, -1.0, 10.0),
                (0.5, 1.0, 0.0)):
        with pytest.raises(ValueError):
            pa_equilibrium(*bad)


def test_ode_converges_to_equilibrium_supercritical():
    eq = pa_equilibrium(0.5, 1.0, 40.0)
    tr = pa_integrate(0.5, 1.0, 40.0, t_end=200.0)
    n10, n11, n00 = tr.final()
    assert not tr.absorbed
    assert n10 == pytest.approx(eq.n10, rel=1e-6)
    assert n11 == pytest.approx(eq.n11, rel=1e-6)
    assert n00 == pytest.approx(eq.n00, rel=1e-6)


def test_ode_equilibrium_is_stationary():
    eq = pa_equilibrium(0.3, 1.5, 30.0)
    tr = pa_integrate(0.3, 1.5, 30.0, init=(eq.n10, eq.n11, eq.n00),
                      t_end=10.0)
    assert np.allclose(tr.n10, eq.n10, rtol=1e-9)
    assert np.allclose(tr.n11, eq.n11, rtol=1e-9)


def test_ode_decays_subcritical():
    tr = pa_integrate(0.5, 0.3, 40.0, t_end=300.0)
    assert tr.final()[0] < 1e-8
    assert not tr.absorbed  # exponential decay never crosses zero
    assert np.all(np.diff(tr.n10) <= 1e-12)


def test_ode_conserves_total_pair_density():
    for p, nu in ((0.5, 1.0), (0.3, 0.4), (0.7, 2.0)):
        tr = pa_integrate(p, nu, 20.0, t_end=50.0)
        total = tr.n10 + 0.5 * (tr.n11 + tr.n00)
        assert np.allclose(total, 10.0, atol=1e-8), (p, nu)


def test_ode_rejects_bad_init():
    with pytest.raises(ValueError):
        pa_integrate(0.5, 1.0, 20.0, init=(1.0, 1.0, 1.0))  # breaks the sum


def test_neighbor_count_correlation_diagnostic():
    res = quick_run(n=300, L=10.0, nu=1.5, seed=40, max_updates=50_000,
                    keep_graph=True)
    assert not res.absorbed
    r = neighbor_count_correlation(res.graph)
    assert -1.0 <= r <= 1.0
