"""Brute-force drift verification by exact event enumeration.

Everything here is deliberately independent of the simulation kernels:
graphs are recounted with plain dict-of-set adjacency and the arithmetic
is done in Fractions, so agreement with the closed-form drift expressions
is exact rather than approximate.

For an opinion graph the instantaneous drift of the ordered pair counts
(N10, N11/2, N00/2) is computed two ways:

  * formula: the closed-form expressions in the ordered triple counts,
    with the vote probability nu/L and rewire probability 1 - nu/L,
  * enumeration: every oriented discordant edge times every event type,
    applying the event to a copy of the graph and recounting pairs.

Rate normalization: each oriented discordant pair carries total rate 1.

Two rewiring target laws are supported.  "idealized_target" draws the new
neighbor's state as Bernoulli(p) independent of the graph, which is the law
implied by the closed-form equations.  "exclude_neighbors" is the executable
rule (uniform over vertices that are not x and not already neighbors of x);
the gap between the two modes is O(L/n).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

MODES = ("idealized_target", "exclude_neighbors")


def _as_fraction(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    # exact binary value of the float, so 0.5 etc. stay exact
    return Fraction(x)


def adjacency_from_graph(g):
    """Rebuild a dict-of-set adjacency and opinion list from the public API."""
    adj = {v: set() for v in range(g.n)}
    for u, v in g.edges():
        adj[u].add(v)
        adj[v].add(u)
    return list(int(s) for s in g.opinions()), adj


def pair_counts(opinion, adj):
    """Ordered pair counts (N10, N11, N00) by scanning every edge once."""
    n10 = n11 = n00 = 0
    for u, nbrs in adj.items():
        for v in nbrs:
            if u < v:
                a, b = opinion[u], opinion[v]
                if a != b:
                    n10 += 1
                elif a == 1:
                    n11 += 2
                else:
                    n00 += 2
    return n10, n11, n00


def triple_counts(opinion, adj):
    """Ordered path counts keyed 'ijk' over paths (u, v, w), u != w."""
    out = {k: 0 for k in ("111", "110", "101", "100", "011", "010", "001", "000")}
    for v, nbrs in adj.items():
        j = sum(opinion[w] for w in nbrs)
        k = len(nbrs) - j
        mid = opinion[v]
        # ordered (u, v, w): u and w range over distinct neighbor pairs
        out["1%d1" % mid] += j * (j - 1)
        out["0%d0" % mid] += k * (k - 1)
        out["1%d0" % mid] += j * k
        out["0%d1" % mid] += j * k
    return out


@dataclass
class DriftReport:
    mode: str
    nu: Fraction
    L: Fraction
    p: Fraction
    formula: tuple          # (dN10, dN11/2, dN00/2) closed form, exact rates
    enumerated: tuple       # same three components by brute-force enumeration
    approx_formula: tuple   # large-L simplification that drops (nu/L)N10 terms
    omitted: tuple          # formula - approx_formula, per component

    @property
    def max_rel_gap(self):
        gaps = []
        for f, e in zip(self.formula, self.enumerated):
            denom = max(Fraction(1), abs(f))
            gaps.append(abs(f - e) / denom)
        return max(gaps)

    def identity_sums(self):
        """2*dN10 + dN11 + dN00 for the formula and the enumeration."""
        f = 2 * (self.formula[0] + self.formula[1] + self.formula[2])
        e = 2 * (self.enumerated[0] + self.enumerated[1] + self.enumerated[2])
        return f, e

    def as_dict(self):
        def fmt(v):
            return [str(x) for x in v]
        return {
            "mode": self.mode,
            "nu": str(self.nu),
            "L": str(self.L),
            "p": str(self.p),
            "formula": fmt(self.formula),
            "enumerated": fmt(self.enumerated),
            "approx_formula": fmt(self.approx_formula),
            "omitted": fmt(self.omitted),
            "max_rel_gap": str(self.max_rel_gap),
        }


def drift_formula(n10, trips, nu, L, p):
    """Closed-form drift (dN10, dN11/2, dN00/2) with exact event rates.

    Vote probability nu/L per oriented discordant pair, rewire 1 - nu/L.
    """
    nl = nu / L
    q = 1 - p
    d10 = -(1 + nl) * n10 + nl * (
        trips["100"] - trips["010"] + trips["110"] - trips["101"])
    d11h = (p + nl * q) * n10 + nl * (trips["101"] - trips["011"])
    d00h = (q + nl * p) * n10 + nl * (trips["010"] - trips["100"])
    return d10, d11h, d00h


def drift_formula_approx(n10, trips, nu, L, p):
    """Large-L form: coefficient corrections of size (nu/L)*N10 dropped."""
    nl = nu / L
    d10 = -n10 + nl * (trips["100"] - trips["010"] + trips["110"] - trips["101"])
    d11h = p * n10 + nl * (trips["101"] - trips["011"])
    d00h = (1 - p) * n10 + nl * (trips["010"] - trips["100"])
    return d10, d11h, d00h


def _delta_after(opinion, adj, base, flip=None, move=None):
    """Pair-count change after one event applied to a copy of the graph.

    flip: vertex whose opinion toggles.  move: (x, y, s) meaning the edge
    {x, y} is replaced by an edge from x to a fresh vertex of state s;
    only the new endpoint's state matters for pair counts, so a virtual
    vertex gives exactly the counts of attaching to any state-s target.
    """
    op = list(opinion)
    ad = {v: set(s) for v, s in adj.items()}
    if flip is not None:
        op[flip] ^= 1
    if move is not None:
        x, y, s = move
        ad[x].discard(y)
        ad[y].discard(x)
        w = len(op)
        op.append(s)
        ad[w] = {x}
        ad[x].add(w)
    after = pair_counts(op, ad)
    return tuple(a - b for a, b in zip(after, base))


def enumerate_drift(g, nu, L, mode="idealized_target", p=None):
    """Exact expected drift of (N10, N11/2, N00/2) by event enumeration.

    g may be an OpinionGraph or a pair (opinion_list, adjacency_dict).
    p defaults to nu-independent Fraction(1, 2); it is the target-state law
    in idealized mode and the density used by the closed-form expressions.
    """
    if mode not in MODES:
        raise ValueError("unknown mode %r" % (mode,))
    nu = _as_fraction(nu)
    L = _as_fraction(L)
    p = Fraction(1, 2) if p is None else _as_fraction(p)
    if isinstance(g, tuple):
        opinion, adj = g
        opinion = list(opinion)
        adj = {v: set(s) for v, s in adj.items()}
    else:
        opinion, adj = adjacency_from_graph(g)

    base = pair_counts(opinion, adj)
    trips = triple_counts(opinion, adj)
    vote = nu / L
    rewire = 1 - vote

    total = [Fraction(0)] * 3
    n = len(opinion)
    for u, nbrs in adj.items():
        for v in nbrs:
            if opinion[u] == opinion[v]:
                continue
            # oriented discordant pair (u, v): u imitates v, or u rewires
            d_vote = _delta_after(opinion, adj, base, flip=u)
            d1 = _delta_after(opinion, adj, base, move=(u, v, 1))
            d0 = _delta_after(opinion, adj, base, move=(u, v, 0))
            if mode == "idealized_target":
                w1, w0 = p, 1 - p
            else:
                eligible = n - 1 - len(adj[u])
                if eligible == 0:
                    w1 = w0 = Fraction(0)
                else:
                    k1 = sum(1 for w in range(n)
                             if opinion[w] == 1 and w != u and w not in adj[u])
                    w1 = Fraction(k1, eligible)
                    w0 = 1 - w1
            for i in range(3):
                total[i] += vote * d_vote[i] + rewire * (w1 * d1[i] + w0 * d0[i])

    enum = (total[0], total[1] / 2, total[2] / 2)
    formula = drift_formula(base[0], trips, nu, L, p)
    approx = drift_formula_approx(base[0], trips, nu, L, p)
    omitted = tuple(f - a for f, a in zip(formula, approx))
    return DriftReport(mode=mode, nu=nu, L=L, p=p, formula=formula,
                       enumerated=enum, approx_formula=approx, omitted=omitted)


def verify_identity_sum(report, tol=1e-9):
    f, e = report.identity_sums()
    return abs(float(f)) < tol and abs(float(e)) < tol


# ---------------------------------------------------------------- fixtures

def make_fixtures(out_dir, count=50, seed=0, n_max=40, mode="idealized_target"):
    """Write a corpus of graph snapshots plus expected-drift JSON sidecars."""
    from .graph import OpinionGraph

    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    p_choices = [Fraction(1, 2), Fraction(1, 3), Fraction(1, 4), Fraction(2, 3)]
    names = []
    for i in range(count):
        n = int(rng.integers(8, n_max + 1))
        L = int(rng.integers(2, min(7, n - 2)))
        nu = Fraction(int(rng.integers(1, 12)), int(rng.integers(1, 6)))
        p = p_choices[int(rng.integers(0, len(p_choices)))]
        if rng.random() < 0.5 and (n * L) % 2 == 0:
            g = OpinionGraph.build_regular(n, L, rng)
        else:
            g = OpinionGraph.build_er(n, L, rng)
        g.assign_opinions(rng, float(p))
        report = enumerate_drift(g, nu, L, mode=mode, p=p)
        stem = os.path.join(out_dir, "fixture_%03d" % i)
        g.save(stem + ".graph")
        side = report.as_dict()
        side["graph"] = os.path.basename(stem + ".graph")
        with open(stem + ".json", "w") as fh:
            json.dump(side, fh, indent=1)
        names.append(stem)
    return names


def verify_fixtures(fixture_dir, mode=None):
    """Recompute every fixture and compare rationals for exact equality.

    Returns (n_checked, failures) where failures is a list of messages.
    """
    from .graph import OpinionGraph

    failures = []
    n_checked = 0
    for name in sorted(os.listdir(fixture_dir)):
        if not name.endswith(".json"):
            continue
        with open(os.path.join(fixture_dir, name)) as fh:
            side = json.load(fh)
        g = OpinionGraph.load(os.path.join(fixture_dir, side["graph"]))
        use_mode = mode or side["mode"]
        report = enumerate_drift(g, Fraction(side["nu"]), Fraction(side["L"]),
                                 mode=use_mode, p=Fraction(side["p"]))
        n_checked += 1
        expect = [Fraction(x) for x in side["enumerated"]]
        if list(report.enumerated) != expect:
            failures.append("%s: enumeration drifted from sidecar" % name)
        if use_mode == "idealized_target" and report.max_rel_gap != 0:
            failures.append("%s: formula/enumeration gap %s"
                            % (name, report.max_rel_gap))
        if not verify_identity_sum(report):
            failures.append("%s: identity sum violated" % name)
    return n_checked, failures
