"""Pair-approximation layer: closed-form equilibria and the closed ODE system.

State is per-capita: (N10, N11, N00) are ordered pair counts divided by n,
so N11 + 2*N10 + N00 = L is the conservation law and L is the only scale.
J_i and K_i are the mean numbers of 1-neighbors and 0-neighbors of a vertex
in state i; they close the system via N11 = p*J1, N10 = (1-p)*J0 = p*K1,
N00 = (1-p)*K0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def pa_nu_c(p):
    """Critical intensity guess p^2 + (1-p)^2."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    return p * p + (1 - p) * (1 - p)


@dataclass
class PaEquilibrium:
    p: float
    nu: float
    L: float
    nu_c: float
    feasible: bool
    J0: float
    J1: float
    K1: float
    K0: float
    n10: float  # per-capita ordered pair counts at the fixed point
    n11: float
    n00: float

    def as_dict(self):
        return {"p": self.p, "nu": self.nu, "L": self.L, "J0": self.J0,
                "J1": self.J1, "K1": self.K1, "K0": self.K0,
                "feasible": self.feasible}


def pa_equilibrium(p, nu, L):
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if nu <= 0 or L <= 0:
        raise ValueError("nu and L must be positive")
    q = 1 - p
    nc = pa_nu_c(p)
    shrink = 1 - nc / nu
    J0 = L * shrink * p
    K1 = L * shrink * q
    J1 = J0 + L * p / nu
    K0 = K1 + L * q / nu
    grow = 1 + (1 - nc) / nu
    return PaEquilibrium(
        p=p, nu=nu, L=L, nu_c=nc, feasible=nu > nc,
        J0=J0, J1=J1, K1=K1, K0=K0,
        n10=p * q * L * shrink, n11=p * p * L * grow, n00=q * q * L * grow)


def pa_identity_residuals(eq):
    """The four equilibrium identities; all vanish at pa_equilibrium output."""
    p, q, nu, L = eq.p, 1 - eq.p, eq.nu, eq.L
    return {
        "e1_j": (eq.J1 - eq.J0) - L * p / nu,
        "e1_k": (eq.K0 - eq.K1) - L * q / nu,
        "e2": p * eq.K1 - q * eq.J0,
        "e3": p * (eq.J1 + eq.K1) + q * (eq.J0 + eq.K0) - L,
        "e4": (eq.J1 + eq.K0) - (L + 2 * L * p * q / nu),
    }


@dataclass
class PaTrajectory:
    p: float
    nu: float
    L: float
    t: np.ndarray
    n10: np.ndarray
    n11: np.ndarray
    n00: np.ndarray
    absorbed: bool
    halvings: int

    def final(self):
        return float(self.n10[-1]), float(self.n11[-1]), float(self.n00[-1])


def _pa_rhs(p, nu, L):
    q = 1 - p
    ratio = nu / L

    def rhs(state):
        n10, n11, n00 = state
        J1 = n11 / p
        J0 = n10 / q
        K1 = n10 / p
        K0 = n00 / q
        d11 = 2 * (p * n10 + ratio * (n10 * J0 - n10 * J1))
        d00 = 2 * (q * n10 + ratio * (n10 * K1 - n10 * K0))
        d10 = -(d11 + d00) / 2
        return np.array([d10, d11, d00])

    return rhs


def pa_integrate(p, nu, L, init=None, t_end=100.0, dt=0.01):
    """Fixed-step 4th-order integration of the closed pair system.

    init is per-capita (N10, N11, N00); defaults to the product-measure
    start (pqL, p^2 L, q^2 L).  Stops early once N10 <= 0 (absorption).
    A step producing a negative N11 or N00 halves dt, at most 20 times.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    q = 1 - p
    if init is None:
        init = (p * q * L, p * p * L, q * q * L)
    state = np.asarray(init, dtype=float)
    if state.shape != (3,) or np.any(state < 0):
        raise ValueError("init must be three nonnegative per-capita counts")
    if abs(state[1] + 2 * state[0] + state[2] - L) > 1e-9 * max(1.0, L):
        raise ValueError("init must satisfy N11 + 2*N10 + N00 = L")

    rhs = _pa_rhs(p, nu, L)
    ts = [0.0]
    rows = [state.copy()]
    t = 0.0
    halvings = 0
    absorbed = state[0] <= 0
    while t < t_end - 1e-12 and not absorbed:
        h = min(dt, t_end - t)
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * h * k1)
        k3 = rhs(state + 0.5 * h * k2)
        k4 = rhs(state + h * k3)
        new = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if new[1] < 0 or new[2] < 0:
            halvings += 1
            if halvings > 20:
                raise RuntimeError("negative state persists after 20 halvings")
            dt = dt / 2
            continue
        t += h
        if new[0] <= 0:
            new[0] = 0.0
            absorbed = True
        state = new
        ts.append(t)
        rows.append(state.copy())
    rows = np.array(rows)
    return PaTrajectory(p=p, nu=nu, L=L, t=np.array(ts),
                        n10=rows[:, 0], n11=rows[:, 1], n00=rows[:, 2],
                        absorbed=absorbed, halvings=halvings)


def neighbor_count_correlation(g, state=0):
    """Pearson correlation of (#1-neighbors, #0-neighbors) over one class.

    Diagnostic only: a negative value is the correlation structure that the
    pair approximation ignores.
    """
    op = g.opinions()
    js, ks = [], []
    for v in range(g.n):
        if op[v] != state:
            continue
        nb = g.neighbors(v)
        j = int(np.sum(op[nb] == 1))
        js.append(j)
        ks.append(len(nb) - j)
    if len(js) < 2:
        return float("nan")
    js = np.array(js, dtype=float)
    ks = np.array(ks, dtype=float)
    if js.std() == 0 or ks.std() == 0:
        return float("nan")
    return float(np.corrcoef(js, ks)[0, 1])
