"""Two-plane piecewise-deterministic limit of the neighborhood master equation.

A single particle carries the scaled neighbor counts (x, y) = (1-neighbors,
0-neighbors) of a focal vertex.  Within plane i (the focal state) the particle
follows an affine ODE dz/dt = A_i z + c whose matrix has two real negative
eigenvalues, so flows contract onto a plane fixed point.  The particle jumps
to the other plane (position preserved) at rate nu * y in plane 1 and
nu * x in plane 0.

Flows, hazard integrals and jump-time inverses are all in closed form from
the eigen-decomposition; sampling never integrates numerically.  The
stationary law is estimated two independent ways: a long forward path, and
backward coupling of the cycle maps with sojourn reweighting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .dynamics import spawn_rng

T_CENSOR = 1e6
REPEATED_ROOT_TOL = 1e-9


class CensoredJumpError(RuntimeError):
    """Raised when a finite jump time exceeds the censoring horizon."""


@dataclass(frozen=True)
class AmeParams:
    nu: float
    p: float = 0.5
    bar_alpha: float = 0.0
    bar_beta: float = 0.0
    bar_delta: float = 0.0
    bar_eps: float = 0.0
    bar_eta: float = 0.0

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if not 0 < self.p < 1:
            raise ValueError("p must lie in (0, 1)")
        for name in ("bar_alpha", "bar_beta", "bar_delta", "bar_eps", "bar_eta"):
            if getattr(self, name) < 0:
                raise ValueError("%s must be nonnegative" % name)

    @classmethod
    def symmetric(cls, nu, bar_alpha, bar_beta, bar_eta):
        """p = 1/2 with plane-0 rates mirroring plane 1."""
        return cls(nu=nu, p=0.5, bar_alpha=bar_alpha, bar_beta=bar_beta,
                   bar_delta=bar_alpha, bar_eps=bar_beta, bar_eta=bar_eta)

    @property
    def q(self):
        return 1 - self.p


class PlaneSystem:
    """Affine flow dz/dt = A z + c for one plane, in native (x, y) coordinates.

    jump_axis is the coordinate whose value times nu is the jump rate out of
    this plane.  Immutable once built; shared freely.
    """

    def __init__(self, plane, params):
        if plane not in (0, 1):
            raise ValueError("plane must be 0 or 1")
        nu = params.nu
        if plane == 1:
            a, b, r = nu * params.bar_beta, nu * params.bar_alpha, params.p
        else:
            a, b, r = nu * params.bar_eps, nu * params.bar_delta, params.q
        self._setup(plane, params, a, b, r, params.bar_eta, nu)

    @classmethod
    def from_coefficients(cls, a, b, r, bar_eta=0.0, nu=1.0, plane=1):
        """Build directly from the characteristic data, bypassing AmeParams.

        Useful for boundary cases like r = 0 or an exactly repeated root.
        """
        self = cls.__new__(cls)
        self._setup(plane, None, a, b, r, bar_eta, nu)
        return self

    def _setup(self, plane, params, a, b, r, bar_eta, nu):
        self.plane = plane
        self.params = params
        if plane == 1:
            self.A = np.array([[-a, r + b], [a, -(1 + r + b)]])
            self.jump_axis = 1
        else:
            self.A = np.array([[-(1 + r + b), a], [r + b, -a]])
            self.jump_axis = 0
        self.a, self.b, self.r = a, b, r
        self.nu = nu
        self.c = np.array([bar_eta, bar_eta])
        if a <= 0:
            if bar_eta > 0:
                raise ValueError("zero divisor: plane %d fixed point needs %s > 0"
                                 % (plane, "bar_beta" if plane == 1 else "bar_eps"))
            # degenerate but consistent: origin is the fixed point
            self.z_star = np.zeros(2)
        else:
            self.z_star = np.linalg.solve(self.A, -self.c)
        s = 1 + r + a + b
        disc = s * s - 4 * a
        assert disc >= 0, "characteristic discriminant must be nonnegative"
        root = math.sqrt(disc)
        self.lam1 = (-s - root) / 2
        self.lam2 = (-s + root) / 2
        self.repeated = abs(self.lam1 - self.lam2) < REPEATED_ROOT_TOL
        if not self.repeated:
            # eigenvector for lam: (A00 - lam) v1 + A01 v2 = 0
            v1 = np.array([self.A[0, 1], self.lam1 - self.A[0, 0]])
            v2 = np.array([self.A[0, 1], self.lam2 - self.A[0, 0]])
            self.V = np.column_stack([v1, v2])
            self.Vinv = np.linalg.inv(self.V)

    @property
    def eigenvalues(self):
        return self.lam1, self.lam2

    def char_poly(self, lam):
        """Characteristic polynomial; zero at both eigenvalues."""
        return lam * lam + (1 + self.r + self.a + self.b) * lam + self.a

    def fixed_point(self):
        return self.z_star.copy()

    def expm(self, t):
        """Closed-form exp(A t) for scalar or array t; shape (..., 2, 2)."""
        t = np.asarray(t, dtype=float)
        if self.repeated:
            lam = 0.5 * (self.lam1 + self.lam2)
            N = self.A - lam * np.eye(2)
            out = (np.multiply.outer(np.ones_like(t), np.eye(2))
                   + np.multiply.outer(t, N))
            return out * np.exp(lam * t)[..., None, None]
        e = np.stack([np.exp(self.lam1 * t), np.exp(self.lam2 * t)], axis=-1)
        return np.einsum("ij,...j,jk->...ik", self.V, e, self.Vinv)

    def flow(self, z0, t):
        """Position after time t from z0; t may be an array."""
        w = np.asarray(z0, dtype=float) - self.z_star
        return self.z_star + np.einsum("...ij,j->...i", self.expm(t), w)


def plane_system(plane, params):
    return PlaneSystem(plane, params)


def fixed_point(plane, params):
    ps = plane_system(plane, params)
    return tuple(ps.fixed_point())


class _Hazard:
    """Closed-form integrated jump hazard along one flow segment.

    The rate is nu * max(r(s), 0) with r(s) the jump-axis coordinate:
    r(s) = zs + g1 e^{l1 s} + g2 e^{l2 s} (or (g1 + g2 s) e^{l s} repeated).
    r has at most one interior critical point, so {r < 0} is one interval;
    the integral is assembled from the antiderivative piecewise.
    """

    def __init__(self, ps, z0):
        ax = ps.jump_axis
        self.nu = ps.nu
        self.zs = float(ps.z_star[ax])
        w = np.asarray(z0, dtype=float) - ps.z_star
        self.repeated = ps.repeated
        if ps.repeated:
            self.lam = 0.5 * (ps.lam1 + ps.lam2)
            N = ps.A - self.lam * np.eye(2)
            self.g1 = float(w[ax])
            self.g2 = float((N @ w)[ax])
        else:
            coef = ps.Vinv @ w
            self.l1, self.l2 = ps.lam1, ps.lam2
            self.g1 = float(coef[0] * ps.V[ax, 0])
            self.g2 = float(coef[1] * ps.V[ax, 1])
        self.window = self._negative_window()

    def rate_coord(self, s):
        if self.repeated:
            return self.zs + (self.g1 + self.g2 * s) * math.exp(self.lam * s)
        return (self.zs + self.g1 * math.exp(self.l1 * s)
                + self.g2 * math.exp(self.l2 * s))

    def _antideriv(self, t):
        # R(t) = integral of the unclamped coordinate from 0 to t
        if self.repeated:
            lam = self.lam
            et = math.exp(lam * t)
            val = ((self.g1 + self.g2 * t) * et / lam - self.g2 * et / lam ** 2
                   - self.g1 / lam + self.g2 / lam ** 2)
            return self.zs * t + val
        return (self.zs * t
                + self.g1 * (math.exp(self.l1 * t) - 1) / self.l1
                + self.g2 * (math.exp(self.l2 * t) - 1) / self.l2)

    def _critical_point(self):
        if self.repeated:
            if self.g2 == 0:
                return None
            s = -(self.g2 + self.lam * self.g1) / (self.lam * self.g2)
            return s if s > 0 else None
        if self.g1 == 0 or self.g2 == 0:
            return None
        ratio = -(self.g2 * self.l2) / (self.g1 * self.l1)
        if ratio <= 0:
            return None
        s = math.log(ratio) / (self.l1 - self.l2)
        return s if s > 0 else None

    def _negative_window(self):
        """Interval (s1, s2) where the coordinate is negative, or None."""
        r0 = self.rate_coord(0.0)
        sc = self._critical_point()
        # beyond the slowest decay the coordinate is numerically zs >= 0
        slow = self.lam if self.repeated else self.l2
        s_inf = max(1.0, 50.0 / -slow, 2 * (sc or 0.0))
        candidates = [0.0, s_inf]
        if sc is not None and 0 < sc < s_inf:
            candidates.insert(1, sc)
        roots = []
        for lo, hi in zip(candidates[:-1], candidates[1:]):
            flo, fhi = self.rate_coord(lo), self.rate_coord(hi)
            if flo == 0.0:
                roots.append(lo)
            elif flo * fhi < 0:
                roots.append(brentq(self.rate_coord, lo, hi, rtol=1e-14))
        if r0 < 0:
            s2 = roots[0] if roots else s_inf
            return (0.0, s2)
        if len(roots) >= 2:
            return (roots[0], roots[1])
        if len(roots) == 1 and self.rate_coord((roots[0] + s_inf) / 2) < 0:
            # negative tail cannot happen when zs > 0; guard anyway
            return (roots[0], s_inf)
        return None

    def integral(self, t):
        """nu * integral_0^t max(r(s), 0) ds."""
        if self.window is None:
            return self.nu * self._antideriv(t)
        s1, s2 = self.window
        val = self._antideriv(min(t, s1))
        if t > s2:
            val += self._antideriv(t) - self._antideriv(s2)
        return self.nu * val

    def clamps_before(self, t):
        return self.window is not None and self.window[0] < t


def _sample_jump(ps, hz, u):
    """Inverse-CDF jump time for target survival 1 - u; math.inf if never."""
    if not 0 < u < 1:
        raise ValueError("u must lie in (0, 1)")
    target = -math.log1p(-u)
    if hz.zs == 0.0 and hz.g1 == 0.0 and hz.g2 == 0.0:
        return math.inf
    base = hz.zs if hz.zs > 0 else abs(hz.rate_coord(0.0)) + 1e-12
    t_hi = 1.0 / (ps.nu * base)
    while hz.integral(t_hi) < target:
        t_hi *= 2
        if t_hi > T_CENSOR:
            if hz.zs == 0.0:
                return math.inf  # hazard saturates, genuine mass at infinity
            raise CensoredJumpError("jump time beyond %g" % T_CENSOR)
    return brentq(lambda t: hz.integral(t) - target, 0.0, t_hi,
                  rtol=1e-10, xtol=1e-14)


def jump_time_sample(ps, z0, u):
    return _sample_jump(ps, _Hazard(ps, z0), u)


def jump_time_sample_detail(ps, z0, u):
    """(time, clamped) where clamped reports a negative-rate stretch before t."""
    hz = _Hazard(ps, z0)
    t = _sample_jump(ps, hz, u)
    return t, hz.clamps_before(t if math.isfinite(t) else T_CENSOR)


# ------------------------------------------------------------ forward path

@dataclass
class ForwardResult:
    params: AmeParams
    T: float
    record_dt: float
    t: np.ndarray
    plane: np.ndarray
    x: np.ndarray
    y: np.ndarray
    hist: np.ndarray          # (2, bins, bins) occupation mass in time units
    hist_edges: tuple
    sojourns0: np.ndarray
    sojourns1: np.ndarray
    time_in_plane1: float
    n_jumps: int
    clamp_events: int

    @property
    def occupancy_plane1(self):
        return self.time_in_plane1 / self.T

    def mean_sojourns(self):
        nu0 = float(np.mean(self.sojourns0)) if len(self.sojourns0) else math.nan
        nu1 = float(np.mean(self.sojourns1)) if len(self.sojourns1) else math.nan
        return nu0, nu1


def default_window(params):
    """[0, 3 * max fixed-point coordinate] per axis."""
    hi = 0.0
    for plane in (0, 1):
        hi = max(hi, float(np.max(plane_system(plane, params).fixed_point())))
    hi = 3 * hi if hi > 0 else 1.0
    return (0.0, hi)


def forward_simulate(params, z0=None, plane0=False, T=1000.0, seed=0, rng=None,
                     record_dt=0.05, bins=100, window=None):
    systems = (plane_system(0, params), plane_system(1, params))
    if rng is None:
        rng = spawn_rng(seed)
    plane = 0 if plane0 else 1
    z = np.array(systems[plane].fixed_point() if z0 is None else z0, dtype=float)
    if window is None:
        window = default_window(params)
    edges = np.linspace(window[0], window[1], bins + 1)
    hist = np.zeros((2, bins, bins))
    grid_t = np.arange(0.0, T, record_dt)
    rec_plane = np.empty(len(grid_t), dtype=np.int8)
    rec_pos = np.empty((len(grid_t), 2))
    soj = ([], [])
    t_cur = 0.0
    k = 0
    time1 = 0.0
    n_jumps = 0
    clamp_events = 0
    while t_cur < T:
        ps = systems[plane]
        hz = _Hazard(ps, z)
        tau = _sample_jump(ps, hz, rng.random())
        seg_end = min(t_cur + tau, T)
        if hz.clamps_before(seg_end - t_cur):
            clamp_events += 1
        while k < len(grid_t) and grid_t[k] < seg_end:
            rel = grid_t[k] - t_cur
            rec_plane[k] = plane
            rec_pos[k] = ps.flow(z, rel)
            k += 1
        sample_every = max(record_dt, (seg_end - t_cur) / 2000)
        rel = np.arange(0.0, seg_end - t_cur, sample_every)
        if len(rel):
            pos = ps.flow(z, rel)
            h, _, _ = np.histogram2d(pos[:, 0], pos[:, 1], bins=(edges, edges))
            hist[plane] += h * sample_every
        if plane == 1:
            time1 += seg_end - t_cur
        if seg_end >= T:
            break
        z = ps.flow(z, tau)
        soj[plane].append(tau)
        plane = 1 - plane
        n_jumps += 1
        t_cur = seg_end
    return ForwardResult(
        params=params, T=T, record_dt=record_dt, t=grid_t,
        plane=rec_plane[:k].copy(), x=rec_pos[:k, 0].copy(), y=rec_pos[:k, 1].copy(),
        hist=hist, hist_edges=(edges, edges),
        sojourns0=np.array(soj[0]), sojourns1=np.array(soj[1]),
        time_in_plane1=time1, n_jumps=n_jumps, clamp_events=clamp_events)


# ------------------------------------------------------- cycle compositions

def _g_cycle(systems, u0, u1, z):
    """Plane-0 entry to next plane-0 entry with the supplied uniforms."""
    tau0 = _sample_jump(systems[0], _Hazard(systems[0], z), u0)
    if not math.isfinite(tau0):
        return None
    w = systems[0].flow(z, tau0)
    tau1 = _sample_jump(systems[1], _Hazard(systems[1], w), u1)
    if not math.isfinite(tau1):
        return None
    return systems[1].flow(w, tau1)


@dataclass
class BackwardResult:
    final_z: np.ndarray
    final_w: np.ndarray
    distances: np.ndarray

    @property
    def converged(self):
        return float(self.distances[-1]) < 1e-8


def backward_iterate(params, seed, n_cycles, z, w):
    """Backward composition of cycle maps from two starts, shared uniforms.

    New randomness enters at the innermost position, so the composition is
    recomputed from scratch each cycle; the per-cycle distance between the
    two evaluations is the convergence certificate.
    """
    systems = (plane_system(0, params), plane_system(1, params))
    rng = spawn_rng(seed)
    us = []
    dists = np.empty(n_cycles)
    vz = vw = None
    for n in range(1, n_cycles + 1):
        us.append((rng.random(), rng.random()))
        vz = np.array(z, dtype=float)
        vw = np.array(w, dtype=float)
        for idx in range(n - 1, -1, -1):
            u0, u1 = us[idx]
            vz = _g_cycle(systems, u0, u1, vz)
            vw = _g_cycle(systems, u0, u1, vw)
            if vz is None or vw is None:
                raise CensoredJumpError("cycle map undefined: infinite sojourn")
        dists[n - 1] = float(np.linalg.norm(vz - vw))
    return BackwardResult(final_z=vz, final_w=vw, distances=dists)


def backward_point(params, seed, n_cycles, z, systems=None):
    """One backward evaluation at fixed depth, linear cost, no distance log."""
    if systems is None:
        systems = (plane_system(0, params), plane_system(1, params))
    rng = spawn_rng(seed)
    us = [(rng.random(), rng.random()) for _ in range(n_cycles)]
    val = np.array(z, dtype=float)
    for idx in range(n_cycles - 1, -1, -1):
        val = _g_cycle(systems, us[idx][0], us[idx][1], val)
        if val is None:
            raise CensoredJumpError("cycle map undefined: infinite sojourn")
    return val


def forward_cycles(params, seed, n_cycles, z):
    """Forward composition with the same uniform stream as backward_iterate."""
    systems = (plane_system(0, params), plane_system(1, params))
    rng = spawn_rng(seed)
    val = np.array(z, dtype=float)
    for _ in range(n_cycles):
        u0, u1 = rng.random(), rng.random()
        val = _g_cycle(systems, u0, u1, val)
        if val is None:
            raise CensoredJumpError("cycle map undefined: infinite sojourn")
    return val


# ------------------------------------------------------ stationary estimates

@dataclass
class StationaryEstimate:
    mode: str
    occupancy_plane1: float
    occupancy_se: float
    nu0: float
    nu1: float
    nu0_se: float
    nu1_se: float
    hist: np.ndarray = field(default=None, repr=False)
    hist_edges: tuple = None

    def combined_se(self, other):
        return math.hypot(self.occupancy_se, other.occupancy_se)


def _occupancy_se(nu0, nu1, s0, s1, m0, m1):
    denom = (nu0 + nu1) ** 2
    var = (nu0 ** 2 * s1 ** 2 / max(m1, 1) + nu1 ** 2 * s0 ** 2 / max(m0, 1))
    return math.sqrt(var) / denom


def stationary_estimate(params, mode="time_average", budget=2000.0, seed=0,
                        bins=100, window=None, warm_cycles=30):
    """Stationary plane densities and mean sojourns (nu0, nu1).

    time_average: occupation of one forward path of length `budget`.
    renewal_weighted: `budget` (count) backward-coupled entry points, each
    weighted by a sampled sojourn; positions accumulated along the flow.
    """
    if mode == "time_average":
        fr = forward_simulate(params, T=float(budget), seed=seed, bins=bins,
                              window=window)
        nu0, nu1 = fr.mean_sojourns()
        s0 = float(np.std(fr.sojourns0, ddof=1)) if len(fr.sojourns0) > 1 else 0.0
        s1 = float(np.std(fr.sojourns1, ddof=1)) if len(fr.sojourns1) > 1 else 0.0
        occ = nu1 / (nu0 + nu1)
        se = _occupancy_se(nu0, nu1, s0, s1, len(fr.sojourns0), len(fr.sojourns1))
        total = fr.hist.sum()
        hist = fr.hist / total if total > 0 else fr.hist
        return StationaryEstimate(mode=mode, occupancy_plane1=occ,
                                  occupancy_se=se, nu0=nu0, nu1=nu1,
                                  nu0_se=s0 / math.sqrt(max(len(fr.sojourns0), 1)),
                                  nu1_se=s1 / math.sqrt(max(len(fr.sojourns1), 1)),
                                  hist=hist, hist_edges=fr.hist_edges)

    if mode != "renewal_weighted":
        raise ValueError("mode must be time_average or renewal_weighted")
    m = int(budget)
    systems = (plane_system(0, params), plane_system(1, params))
    if window is None:
        window = default_window(params)
    edges = np.linspace(window[0], window[1], bins + 1)
    hist = np.zeros((2, bins, bins))
    z_init = systems[0].fixed_point()
    taus0 = np.empty(m)
    taus1 = np.empty(m)
    for i in range(m):
        y_entry0 = backward_point(params, (seed, i), warm_cycles, z_init,
                                  systems=systems)  # entry point into plane 0
        rng = spawn_rng((seed, i, 1))
        hz0 = _Hazard(systems[0], y_entry0)
        tau0 = _sample_jump(systems[0], hz0, rng.random())
        y_entry1 = systems[0].flow(y_entry0, tau0)  # entry point into plane 1
        hz1 = _Hazard(systems[1], y_entry1)
        tau1 = _sample_jump(systems[1], hz1, rng.random())
        taus0[i] = tau0
        taus1[i] = tau1
        for plane, z, tau in ((0, y_entry0, tau0), (1, y_entry1, tau1)):
            step = tau / max(8, math.ceil(tau / 0.05))
            rel = np.arange(0.0, tau, step)
            pos = systems[plane].flow(z, rel)
            h, _, _ = np.histogram2d(pos[:, 0], pos[:, 1], bins=(edges, edges))
            hist[plane] += h * step
    nu0 = float(np.mean(taus0))
    nu1 = float(np.mean(taus1))
    s0 = float(np.std(taus0, ddof=1))
    s1 = float(np.std(taus1, ddof=1))
    occ = nu1 / (nu0 + nu1)
    se = _occupancy_se(nu0, nu1, s0, s1, m, m)
    total = hist.sum()
    if total > 0:
        hist = hist / total
    return StationaryEstimate(mode=mode, occupancy_plane1=occ, occupancy_se=se,
                              nu0=nu0, nu1=nu1,
                              nu0_se=s0 / math.sqrt(m), nu1_se=s1 / math.sqrt(m),
                              hist=hist, hist_edges=(edges, edges))


# ------------------------------------------------------------- finite L

@dataclass
class FiniteLResult:
    L: float
    n_particles: int
    occupancy_plane1: float
    mean_plane1: np.ndarray   # unscaled (j, k) time-average in plane 1
    mean_plane0: np.ndarray
    se_plane1: np.ndarray
    se_plane0: np.ndarray
    per_particle: np.ndarray  # (n, 5): occ, x1, y1, x0, y0 per particle


def finite_L_two_plane(alpha, beta, delta, eps, eta, nu, L, p,
                       n_particles=50, T=500.0, seed=0):
    """Independent particles under the pre-limit rates at scale L.

    Within-plane motion uses the continuum drift; the scaled system with
    bars = (greek/L) is simulated and positions are reported times L.
    """
    if L < 1:
        raise ValueError("L must be at least 1")
    params = AmeParams(nu=nu, p=p, bar_alpha=alpha / L, bar_beta=beta / L,
                       bar_delta=delta / L, bar_eps=eps / L, bar_eta=eta / L)
    rows = np.empty((n_particles, 5))
    for i in range(n_particles):
        fr = forward_simulate(params, T=T, seed=(seed, i))
        in1 = fr.plane == 1
        m1 = fr.plane.size and in1.any()
        m0 = fr.plane.size and (~in1).any()
        rows[i, 0] = fr.occupancy_plane1
        rows[i, 1] = L * fr.x[in1].mean() if m1 else np.nan
        rows[i, 2] = L * fr.y[in1].mean() if m1 else np.nan
        rows[i, 3] = L * fr.x[~in1].mean() if m0 else np.nan
        rows[i, 4] = L * fr.y[~in1].mean() if m0 else np.nan
    mean = np.nanmean(rows, axis=0)
    se = np.nanstd(rows, axis=0, ddof=1) / math.sqrt(n_particles)
    return FiniteLResult(L=L, n_particles=n_particles,
                         occupancy_plane1=float(mean[0]),
                         mean_plane1=mean[1:3], mean_plane0=mean[3:5],
                         se_plane1=se[1:3], se_plane0=se[3:5],
                         per_particle=rows)


# ---------------------------------------------------------------- exports

def histogram_csv(hist, edges, path):
    """Rows bin_x, bin_y, plane, mass; bin indices refer to edge intervals."""
    with open(path, "w") as fh:
        fh.write("bin_x,bin_y,plane,mass\n")
        for plane in range(hist.shape[0]):
            nz = np.argwhere(hist[plane] > 0)
            for ix, iy in nz:
                fh.write("%d,%d,%d,%.12g\n" % (ix, iy, plane, hist[plane, ix, iy]))


def path_csv(result, path):
    with open(path, "w") as fh:
        fh.write("t,plane,x,y\n")
        for t, pl, x, y in zip(result.t[:len(result.plane)], result.plane,
                               result.x, result.y):
            fh.write("%.6f,%d,%.9g,%.9g\n" % (t, pl, x, y))
