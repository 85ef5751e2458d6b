"""Symmetric-case (p=1/2) moment relations for the two-plane master equation.

U(a,b) is the moment generating function of the scaled neighbor counts of a
state-1 vertex, weighted by the probability 1/2 of being in state 1, so
U(0,0) = 1/2 and the subscripts denote partial derivatives at the origin:
Ua = E[J], Ub = E[K], Uab = E[JK] and so on, with J (K) the scaled number
of 1-neighbors (0-neighbors).  By symmetry the state-0 function is U with
arguments swapped.

The power series coefficients c[m][n] (with m!*n!*c[m][n] the mixed partial)
satisfy a three-band linear recursion; recr_residual evaluates it term by
term so closed-form solutions can be checked against it directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# reference quasi-stationary measurements at n=1600, L=40, p=1/2:
# nu -> (Ub, Uab, Ubb, Uaa), each estimated from long simulation runs
REFERENCE_SIM_MOMENTS = {
    2.0: (0.1666, 0.1025, 0.0604, 0.2336),
    1.6: (0.1371, 0.0907, 0.0466, 0.2859),
    1.44: (0.1216, 0.0827, 0.0394, 0.3115),
    1.32: (0.1094, 0.0757, 0.0343, 0.3310),
    1.2: (0.0896, 0.0641, 0.0264, 0.3735),
    1.0: (0.0454, 0.0339, 0.0132, 0.4690),
}

TABLE_NU = (2.0, 1.6, 1.44, 1.32, 1.2, 1.0)


@dataclass
class MomentState:
    nu: float
    U: float = 0.5
    Ua: float = 0.0
    Ub: float = 0.0
    Uaa: float = 0.0
    Uab: float = 0.0
    Ubb: float = 0.0
    Uaaa: float = None
    Uaab: float = None
    Uabb: float = None
    Ubbb: float = None
    bar_alpha: float = None
    bar_beta: float = None
    bar_eta: float = None
    ubb_nonpositive: bool = False

    def as_dict(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}


def derive_from_Ub(Ub, nu):
    """Second-order self-consistent closure driven by the single input Ub."""
    if not 0 < Ub < 0.25:
        raise ValueError("Ub must lie in (0, 1/4)")
    if nu <= 0:
        raise ValueError("nu must be positive")
    half = 1.0 / (2 * nu)
    Ua = 0.5 - Ub
    Uab = 0.5 * (1 + half) * Ub
    Ubb = 0.5 * (1 - half) * Ub
    bar_beta = (1 + half) * Ub / (1 - 2 * Ub)
    bar_alpha = 0.5 * (1 - half)
    bar_eta = Ub
    Uaa = (1 + 3 / (2 * nu * bar_beta)) * Uab - bar_eta / (2 * nu * bar_beta)
    return MomentState(nu=nu, Ua=Ua, Ub=Ub, Uaa=Uaa, Uab=Uab, Ubb=Ubb,
                       bar_alpha=bar_alpha, bar_beta=bar_beta, bar_eta=bar_eta,
                       ubb_nonpositive=Ubb <= 0)


def check_relations(state):
    """Residuals of the closed first and second order relations."""
    nu = state.nu
    out = {
        "first_order": abs(state.Ub - 2 * nu * (state.Uab - state.Ubb)),
        "second_order_sum": abs(state.Uab + state.Ubb - state.Ub),
        "conservative": abs(state.Ua + state.Ub - 0.5),
    }
    if state.bar_alpha is not None and state.bar_beta is not None:
        out["first_order_general"] = abs(
            -nu * state.bar_beta * state.Ua
            + (1 + nu * state.bar_alpha) * state.Ub
            + nu * (state.Ubb - state.Uab))
    return out


# ------------------------------------------------------- coefficient grid

@dataclass
class CoefficientGrid:
    """Power-series coefficients c[m][n] for m+n <= M plus the parameters."""
    M: int
    nu: float
    bar_alpha: float
    bar_beta: float
    bar_eta: float
    c: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.c is None:
            self.c = np.zeros((self.M + 1, self.M + 1))

    def get(self, m, n):
        if m < 0 or n < 0:
            return 0.0
        if m + n > self.M:
            raise IndexError("order %d exceeds truncation M=%d" % (m + n, self.M))
        return float(self.c[m, n])

    def set(self, m, n, value):
        self.c[m, n] = value

    @classmethod
    def from_moment_state(cls, state, M=3):
        """Fill coefficients from partial derivatives, m!*n!*c = partial."""
        g = cls(M=M, nu=state.nu, bar_alpha=state.bar_alpha,
                bar_beta=state.bar_beta, bar_eta=state.bar_eta)
        vals = {(0, 0): state.U, (1, 0): state.Ua, (0, 1): state.Ub,
                (2, 0): state.Uaa, (1, 1): state.Uab, (0, 2): state.Ubb,
                (3, 0): state.Uaaa, (2, 1): state.Uaab,
                (1, 2): state.Uabb, (0, 3): state.Ubbb}
        fact = [1, 1, 2, 6]
        for (m, n), v in vals.items():
            if m + n > M or v is None:
                continue
            g.c[m, n] = v / (fact[m] * fact[n])
        return g


def recr_residual(grid, m, n):
    """One row of the coefficient recursion; zero iff the row is satisfied.

    Needs entries of order m+n+1, including the cross term c[n][m+1] coming
    from the state-0 series being the transpose of the state-1 series.
    """
    if m + n + 1 > grid.M:
        raise IndexError("residual at (%d,%d) needs order %d" % (m, n, m + n + 1))
    nu = grid.nu
    a, b, e = grid.bar_alpha, grid.bar_beta, grid.bar_eta
    return (e * grid.get(m - 1, n)
            + e * grid.get(m, n - 1)
            + nu * b * (m + 1) * grid.get(m + 1, n - 1)
            - (nu * b * m + (1.5 + nu * a) * n) * grid.get(m, n)
            + (0.5 + nu * a) * (n + 1) * grid.get(m - 1, n + 1)
            + nu * (m + 1) * grid.get(n, m + 1)
            - nu * (n + 1) * grid.get(m, n + 1))


def order3_residuals(state):
    """Third-order balance: four equation residuals plus the aggregate.

    Fourth-order partials enter only through antisymmetric differences on
    the left sides; set them to None (treated as 0) for aggregate-only
    diagnostics.  The aggregate is free of fourth-order terms by exact
    cancellation, so it is meaningful on its own.
    """
    nu = state.nu
    al, be, et = state.bar_alpha, state.bar_beta, state.bar_eta
    third = (state.Uaaa, state.Uaab, state.Uabb, state.Ubbb)
    if any(v is None for v in (al, be, et)) or any(v is None for v in third):
        raise ValueError("third-order fields and bars must be present")
    Uaaa, Uaab, Uabb, Ubbb = third
    fourth = [getattr(state, k, None) for k in ("Uaaab", "Uaabb", "Uabbb", "Ubbbb")]
    Uaaab, Uaabb, Uabbb, Ubbbb = [0.0 if v is None else v for v in fourth]
    r15 = 1.5 + nu * al
    r05 = 0.5 + nu * al
    rhs1 = et * state.Uaa / 2 - nu * be * Uaaa / 2 + r05 * Uaab / 2
    rhs2 = (et * state.Uab + et * state.Uaa / 2 + nu * be * Uaaa / 2
            - nu * be * Uaab - r15 * Uaab / 2 + r05 * Uabb)
    rhs3 = (et * state.Ubb / 2 + et * state.Uab + nu * be * Uaab
            - nu * be * Uabb / 2 - r15 * Uabb + r05 * Ubbb / 2)
    rhs4 = et * state.Ubb / 2 + nu * be * Uabb / 2 - r15 * Ubbb / 2
    res = (
        (nu / 6) * (Uaaab - Ubbbb) - rhs1,
        (nu / 2) * (Uaabb - Uabbb) - rhs2,
        (nu / 2) * (Uabbb - Uaabb) - rhs3,
        (nu / 6) * (Ubbbb - Uaaab) - rhs4,
    )
    aggregate = (et * (state.Uaa + 2 * state.Uab + state.Ubb)
                 - Uaab / 2 - Uabb - Ubbb / 2)
    return res, aggregate


# ------------------------------------------------------ empirical moments

def empirical_moments(g, L, nu=None, include_third=False):
    """Raw moments of scaled neighbor counts over state-1 vertices.

    U_{a^m b^n} = (1/n_vertices) * sum over state-1 x of (j/L)^m (k/L)^n,
    which carries the state-1 mass p_hat = N1/n inside the average.
    """
    op = g.opinions()
    deg = g.degrees()
    n = g.n
    sj = sk = sj2 = sjk = sk2 = 0.0
    sj3 = sj2k = sjk2 = sk3 = 0.0
    for v in range(n):
        if op[v] != 1:
            continue
        nb = g.neighbors(v)
        j = float(np.sum(op[nb] == 1)) / L
        k = (float(deg[v]) - j * L) / L
        sj += j
        sk += k
        sj2 += j * j
        sjk += j * k
        sk2 += k * k
        if include_third:
            sj3 += j ** 3
            sj2k += j * j * k
            sjk2 += j * k * k
            sk3 += k ** 3
    p_hat = float(np.sum(op == 1)) / n
    st = MomentState(nu=float(nu) if nu is not None else float("nan"),
                     U=p_hat, Ua=sj / n, Ub=sk / n,
                     Uaa=sj2 / n, Uab=sjk / n, Ubb=sk2 / n)
    if include_third:
        st.Uaaa, st.Uaab, st.Uabb, st.Ubbb = sj3 / n, sj2k / n, sjk2 / n, sk3 / n
    return st


def moments_from_sums(row, n, L, nu=None, include_third=True):
    """MomentState from one kernel moment-sum trajectory row.

    Row layout: updates, N1, then power sums of (j, k) over state-1 vertices
    in the order j, k, j^2, jk, k^2, j^3, j^2 k, j k^2, k^3, unscaled.
    """
    sums = np.asarray(row, dtype=float)
    n1 = sums[1]
    s = sums[2:] / n
    st = MomentState(nu=float(nu) if nu is not None else float("nan"),
                     U=n1 / n,
                     Ua=s[0] / L, Ub=s[1] / L,
                     Uaa=s[2] / L ** 2, Uab=s[3] / L ** 2, Ubb=s[4] / L ** 2)
    if include_third:
        st.Uaaa = s[5] / L ** 3
        st.Uaab = s[6] / L ** 3
        st.Uabb = s[7] / L ** 3
        st.Ubbb = s[8] / L ** 3
    return st


def neighbor_second_moment_inequality(g, state=0):
    """Exact Cauchy-Schwarz bound on clustering of opposite neighbors.

    For j(x) = number of state-1 neighbors of a state-`state` vertex x:
    sum_x j(x)(j(x)-1) >= (sum_x j(x))^2 / n_class - sum_x j(x).
    Returns (lhs, rhs) as exact integers scaled by n_class to avoid division.
    """
    op = g.opinions()
    js = []
    for v in range(g.n):
        if op[v] == state:
            nb = g.neighbors(v)
            js.append(int(np.sum(op[nb] == 1)))
    m = len(js)
    if m == 0:
        return 0, 0
    s1 = sum(js)
    s2 = sum(j * j for j in js)
    # multiply both sides by m so the comparison stays in integers
    lhs = m * (s2 - s1)
    rhs = s1 * s1 - m * s1
    return lhs, rhs


def predicted_row(Ub, nu):
    """(Uab, Ubb, Uaa) predictions from the closed second-order relations."""
    st = derive_from_Ub(Ub, nu)
    return st.Uab, st.Ubb, st.Uaa


def table_rows(nu_values=TABLE_NU, ub_values=None):
    """Rows nu, Ub_sim, Uab_sim, Uab_pred, Ubb_sim, Ubb_pred, Uaa_sim, Uaa_pred.

    With ub_values=None the tabulated reference measurements supply both the
    sim columns and the Ub inputs; otherwise ub_values maps nu to a freshly
    simulated Ub and the sim columns are filled from the same source when
    given as 4-tuples, else NaN.
    """
    rows = []
    for nu in nu_values:
        if ub_values is None:
            ub, uab_s, ubb_s, uaa_s = REFERENCE_SIM_MOMENTS[nu]
        else:
            v = ub_values[nu]
            if isinstance(v, (tuple, list)):
                ub, uab_s, ubb_s, uaa_s = v
            else:
                ub, uab_s, ubb_s, uaa_s = v, float("nan"), float("nan"), float("nan")
        uab_p, ubb_p, uaa_p = predicted_row(ub, nu)
        rows.append((nu, ub, uab_s, uab_p, ubb_s, ubb_p, uaa_s, uaa_p))
    return rows


TABLE_HEADER = "nu,Ub_sim,Uab_sim,Uab_pred,Ubb_sim,Ubb_pred,Uaa_sim,Uaa_pred"


def table_csv(rows):
    lines = [TABLE_HEADER]
    for r in rows:
        lines.append(",".join("%.6g" % x for x in r))
    return "\n".join(lines) + "\n"
