"""Trajectory containers and quasi-stationary curve fits.

The central object of study is the cloud of (opinion density, discordance)
points a long run traces out: x = N1/n against y = N10/(n L / 2), the fraction
of edges that are discordant. Prolonged runs hug a concave curve well fit by
the two-parameter family y = A x (1 - x) - B, whose roots mark the densities
where discordance dies out.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

TRAJ_COLUMNS = ("updates", "time", "N1", "N10", "N11", "N00", "Dmax")
TRIPLE_COLUMNS = ("N100", "N101", "N110", "N010")
# triples array layout: updates, n111, n110, n101, n100, n011, n010, n001, n000
_TRIPLE_IDX = {"N111": 1, "N110": 2, "N101": 3, "N100": 4,
               "N011": 5, "N010": 6, "N001": 7, "N000": 8}


@dataclass
class Trajectory:
    """Sampled counts along a run.

    data columns: updates, time, N1, N10, N11, N00, Dmax. N10/N11/N00 are
    ordered pair counts (N10 equals the number of discordant edges). For the
    discrete clocks the time column is updates / (n L), a nominal sweep count.
    """

    data: np.ndarray
    n: int
    L: float
    clock: str = ""
    triples: np.ndarray | None = None      # updates + 8 ordered path counts
    moment_sums: np.ndarray | None = None  # updates, N1, 9 neighbor-count power sums

    def __len__(self):
        return self.data.shape[0]

    @property
    def updates(self):
        return self.data[:, 0]

    @property
    def time(self):
        return self.data[:, 1]

    @property
    def n1(self):
        return self.data[:, 2]

    @property
    def n10(self):
        return self.data[:, 3]

    @property
    def n11(self):
        return self.data[:, 4]

    @property
    def n00(self):
        return self.data[:, 5]

    @property
    def dmax(self):
        return self.data[:, 6]

    def density(self):
        return self.n1 / self.n

    def discordant_edge_fraction(self):
        """N10 / (n L / 2): fraction of all edges that are discordant."""
        return self.n10 / (self.n * self.L / 2.0)

    def _aligned_triples(self):
        t = self.triples
        if t is None or t.shape[0] != self.data.shape[0]:
            return None
        if not np.array_equal(t[:, 0], self.data[:, 0]):
            return None
        return t

    def to_csv(self, path):
        """Columns updates,time,N1,N10,N11,N00,Dmax, plus N100,N101,N110,N010
        when path counts were recorded on every row."""
        tri = self._aligned_triples()
        header = list(TRAJ_COLUMNS) + (list(TRIPLE_COLUMNS) if tri is not None else [])
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(header)
            for i in range(self.data.shape[0]):
                row = [int(self.data[i, 0]), repr(float(self.data[i, 1]))]
                row += [int(self.data[i, j]) for j in range(2, 7)]
                if tri is not None:
                    row += [int(tri[i, _TRIPLE_IDX[c]]) for c in TRIPLE_COLUMNS]
                w.writerow(row)

    @classmethod
    def from_csv(cls, path, n, L, clock=""):
        with open(path, newline="") as f:
            r = csv.reader(f)
            header = next(r)
            if tuple(header[:7]) != TRAJ_COLUMNS:
                raise ValueError(f"unexpected trajectory header {header!r}")
            has_tri = tuple(header[7:]) == TRIPLE_COLUMNS
            rows, tri = [], []
            for line in r:
                if not line:
                    continue
                rows.append([float(x) for x in line[:7]])
                if has_tri:
                    tri.append([float(x) for x in line[7:]])
        data = np.array(rows, dtype=np.float64).reshape(-1, 7)
        triples = None
        if has_tri and len(tri):
            t = np.array(tri, dtype=np.float64)
            # rebuild full layout; reversal symmetry fills n011/n001, n111/n000 unknown
            full = np.zeros((len(tri), 9))
            full[:, 0] = data[:, 0]
            full[:, 4] = t[:, 0]  # n100
            full[:, 3] = t[:, 1]  # n101
            full[:, 2] = t[:, 2]  # n110
            full[:, 6] = t[:, 3]  # n010
            full[:, 5] = full[:, 2]
            full[:, 7] = full[:, 4]
            triples = full
        return cls(data=data, n=n, L=L, clock=clock, triples=triples)

    def save_moment_sums(self, path):
        if self.moment_sums is None:
            raise ValueError("run recorded no moment sums")
        cols = ("updates", "N1", "sj", "sk", "sj2", "sjk", "sk2",
                "sj3", "sj2k", "sjk2", "sk3")
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(cols)
            for row in self.moment_sums:
                w.writerow([int(row[0]), int(row[1])] + [repr(float(v)) for v in row[2:]])


@dataclass
class ArchFit:
    """Least-squares fit of y = A x (1-x) - B. `roots` are the two zeros
    1/2 +- sqrt(1/4 - B/A) when real, else None (censored)."""

    A: float
    B: float
    roots: tuple | None
    n_points: int
    rms_residual: float

    def predict(self, x):
        return self.A * np.asarray(x) * (1.0 - np.asarray(x)) - self.B


@dataclass
class CubicFit:
    coeffs: tuple            # (c3, c2, c1, c0), y = c3 x^3 + c2 x^2 + c1 x + c0
    real_roots: tuple        # real roots, ascending
    n_points: int
    rms_residual: float

    def predict(self, x):
        c3, c2, c1, c0 = self.coeffs
        x = np.asarray(x)
        return ((c3 * x + c2) * x + c1) * x + c0


def arch_points(traj, burn_in=0.1):
    """(x, y) cloud for curve fitting: opinion density against discordant
    edge fraction, after dropping the leading burn-in fraction of rows."""
    if not 0.0 <= burn_in < 1.0:
        raise ValueError("burn_in must lie in [0, 1)")
    k = int(math.ceil(burn_in * len(traj)))
    x = traj.density()[k:]
    y = traj.discordant_edge_fraction()[k:]
    return x, y


def fit_arch_xy(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        raise ValueError("need at least 3 points")
    M = np.column_stack([x * (1.0 - x), -np.ones_like(x)])
    (A, B), *_ = np.linalg.lstsq(M, y, rcond=None)
    roots = None
    if A > 0:
        disc = 0.25 - B / A
        if disc >= 0:
            r = math.sqrt(disc)
            roots = (0.5 - r, 0.5 + r)
    resid = y - (A * x * (1.0 - x) - B)
    return ArchFit(A=float(A), B=float(B), roots=roots, n_points=len(x),
                   rms_residual=float(np.sqrt(np.mean(resid ** 2))))


def fit_arch(traj, burn_in=0.1):
    return fit_arch_xy(*arch_points(traj, burn_in))


def fit_cubic_xy(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 4:
        raise ValueError("need at least 4 points")
    M = np.column_stack([x ** 3, x ** 2, x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(M, y, rcond=None)
    roots = np.roots(coef) if abs(coef[0]) > 0 else np.roots(coef[1:])
    real = sorted(float(r.real) for r in roots
                  if abs(r.imag) <= 1e-9 * max(1.0, abs(r)))
    resid = y - np.polyval(coef, x)
    return CubicFit(coeffs=tuple(float(c) for c in coef), real_roots=tuple(real),
                    n_points=len(x), rms_residual=float(np.sqrt(np.mean(resid ** 2))))


def fit_cubic(traj, burn_in=0.1):
    """Unconstrained cubic fit to the same point cloud; its interior real
    roots should land near the quadratic family's roots when the quadratic
    family is adequate."""
    return fit_cubic_xy(*arch_points(traj, burn_in))


@dataclass
class NuCEstimate:
    value: float
    status: str  # interpolated | below_grid | above_grid


def arch_endpoints_to_nu_c(endpoints, p_values):
    """Invert a map rewiring-rate -> fitted arch endpoints into critical rates.

    `endpoints`: dict nu -> (low, high) or None (censored fit). For each p the
    critical rate is where p enters the open interval (low(nu), high(nu)),
    located by linear interpolation of low(nu) on the grid. Off-grid results
    are censored with the nearest grid bound as `value`.
    """
    items = sorted((float(nu), float(e[0])) for nu, e in endpoints.items()
                   if e is not None)
    if len(items) < 2:
        raise ValueError("need at least two uncensored grid points")
    nus = [it[0] for it in items]
    lows = [it[1] for it in items]
    out = {}
    for p in p_values:
        if not 0.0 < p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        m = min(p, 1.0 - p)
        est = None
        for i in range(len(nus) - 1):
            a0, a1 = lows[i], lows[i + 1]
            if (a0 - m) == 0.0:
                est = NuCEstimate(value=nus[i], status="interpolated")
                break
            if (a0 - m) * (a1 - m) < 0 or (a1 - m) == 0.0:
                frac = (a0 - m) / (a0 - a1)
                est = NuCEstimate(value=nus[i] + frac * (nus[i + 1] - nus[i]),
                                  status="interpolated")
                break
        if est is None:
            # no bracket: p is inside the arch over the whole grid (critical
            # rate below the grid) or outside everywhere (above the grid)
            if m > lows[0]:
                est = NuCEstimate(value=nus[0], status="below_grid")
            else:
                est = NuCEstimate(value=nus[-1], status="above_grid")
        out[p] = est
    return out


def classify_run(result, c_rapid=10.0, c_prolonged=200.0):
    """`rapid` if absorbed within c_rapid * nL * ln(nL) updates; `prolonged`
    if still alive after at least c_prolonged * nL updates; else
    `indeterminate` (including runs absorbed late and runs stopped early)."""
    n, L = result.params.n, result.params.L
    nl = n * L
    if nl <= 0:
        raise ValueError("classification needs edges")
    if result.absorbed and result.tau_updates <= c_rapid * nl * math.log(nl):
        return "rapid"
    if not result.absorbed and result.updates >= c_prolonged * nl:
        return "prolonged"
    return "indeterminate"
