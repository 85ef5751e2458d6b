"""Opinion graphs: flat-array storage, builders, IO, and exact path counts.

The graph is simple and undirected; every vertex carries a binary opinion.
All pair-level quantities (ordered discordant/agreeing pair counts, the
discordant-edge list, the max degree) are maintained incrementally by the
kernels so dynamics never rescans the graph.
"""

from dataclasses import dataclass

import numpy as np
import networkx as nx

from . import kernels as K
from .kernels import (C_N1, C_N11, C_N00, C_NDISC, C_DMAX, C_SKIP, C_NEDGES, C_NOOP)


@dataclass
class TripleCounts:
    """Ordered path counts n_ijk: center vertex in state j, ordered neighbor
    pair (i, k) of distinct vertices. Reversal symmetry gives n110 = n011 and
    n100 = n001 on any graph."""

    n111: float
    n110: float
    n101: float
    n100: float
    n011: float
    n010: float
    n001: float
    n000: float

    def total(self):
        return (self.n111 + self.n110 + self.n101 + self.n100
                + self.n011 + self.n010 + self.n001 + self.n000)

    def as_dict(self):
        return {k: getattr(self, k) for k in
                ("n111", "n110", "n101", "n100", "n011", "n010", "n001", "n000")}


def _capacity_for(max_deg):
    return int(max(2 * max_deg + 8, 16))


class OpinionGraph:
    """Simple undirected graph with binary vertex opinions.

    Construction goes through `from_edges` / `build_regular` / `build_er`.
    Mutations (flip, rewire, add_edge, remove_edge) keep all derived state
    consistent in O(deg) or O(1).
    """

    def __init__(self, n, cap=16):
        if n <= 0:
            raise ValueError("need at least one vertex")
        self.n = int(n)
        self._alloc(int(cap))
        self.opinion = np.zeros(n, dtype=np.int8)
        self.deg = np.zeros(n, dtype=np.int32)
        self.n1nbr = np.zeros(n, dtype=np.int32)
        self.cls = np.zeros((2, n), dtype=np.int32)
        self.cls_size = np.zeros(2, dtype=np.int64)
        self.cls_pos = np.zeros(n, dtype=np.int32)
        self.counts = np.zeros(8, dtype=np.int64)
        self._edge_cap = 0
        self.du = np.zeros(1, dtype=np.int32)
        self.dui = np.zeros(1, dtype=np.int32)
        self._rebuild()

    def _alloc(self, cap):
        n = self.n
        self.cap = cap
        self.nbr = np.zeros((n, cap), dtype=np.int32)
        self.xidx = np.zeros((n, cap), dtype=np.int32)
        self.epos = np.full((n, cap), -1, dtype=np.int32)
        self.degcnt = np.zeros(cap + 1, dtype=np.int64)

    def _ensure_edge_cap(self, m):
        # discordant list must be able to hold every edge
        if m > self._edge_cap:
            newcap = max(m, 2 * self._edge_cap, 1)
            du = np.zeros(newcap, dtype=np.int32)
            dui = np.zeros(newcap, dtype=np.int32)
            du[:self._edge_cap] = self.du[:self._edge_cap]
            dui[:self._edge_cap] = self.dui[:self._edge_cap]
            self._edge_cap = newcap
            self.du, self.dui = du, dui

    def ensure_capacity(self, need):
        """Grow adjacency rows so every vertex can hold `need` neighbors."""
        if need <= self.cap:
            return
        newcap = max(int(need), 2 * self.cap)
        old_nbr, old_xidx, old_epos, old_cap = self.nbr, self.xidx, self.epos, self.cap
        self._alloc(newcap)
        self.nbr[:, :old_cap] = old_nbr
        self.xidx[:, :old_cap] = old_xidx
        self.epos[:, :old_cap] = old_epos
        self.degcnt[:old_cap + 1] = 0
        for d in self.deg:
            self.degcnt[d] += 1

    def _rebuild(self):
        self._ensure_edge_cap(int(self.deg.sum(dtype=np.int64) // 2))
        K._rebuild(self.opinion, self.deg, self.nbr, self.xidx, self.epos,
                   self.n1nbr, self.du, self.dui, self.cls, self.cls_size,
                   self.cls_pos, self.counts, self.degcnt)

    # ---------- constructors ----------

    @classmethod
    def from_edges(cls, n, edges, opinions=None, cap=None):
        g = cls(n, cap=2)
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        seen = set()
        maxdeg = np.zeros(n, dtype=np.int64)
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) out of range")
            key = (u, v) if u < v else (v, u)
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            maxdeg[u] += 1
            maxdeg[v] += 1
        need = int(maxdeg.max()) if len(edges) else 0
        g._alloc(int(cap) if cap is not None else _capacity_for(need))
        eu = np.ascontiguousarray(edges[:, 0].astype(np.int32))
        ev = np.ascontiguousarray(edges[:, 1].astype(np.int32))
        if not K._ingest_edges(g.deg, g.nbr, g.xidx, eu, ev):
            raise ValueError("capacity too small for edge list")
        if opinions is not None:
            op = np.asarray(opinions, dtype=np.int8)
            if op.shape != (n,) or not np.isin(op, (0, 1)).all():
                raise ValueError("opinions must be a 0/1 vector of length n")
            g.opinion[:] = op
        g._rebuild()
        return g

    @classmethod
    def build_regular(cls, n, L, rng=None, max_restarts=1000):
        """Random simple L-regular graph on n vertices, all opinions 0.

        Small degrees (L <= 3) use configuration-model pairing with
        whole-graph rejection, which is exactly uniform; the probability a
        pairing is simple decays like exp(-L^2/4), so larger degrees use the
        standard pairing algorithm with local retries instead.
        """
        n, L = int(n), int(L)
        if L < 0 or L >= n:
            raise ValueError("degree must satisfy 0 <= L < n")
        if (n * L) % 2 != 0:
            raise ValueError("n * L must be even")
        if rng is None:
            rng = np.random.default_rng()
        if L == 0:
            return cls.from_edges(n, np.empty((0, 2), dtype=np.int64))
        if L <= 3:
            for _ in range(max_restarts):
                stubs = np.repeat(np.arange(n), L)
                rng.shuffle(stubs)
                eu, ev = stubs[0::2], stubs[1::2]
                if (eu == ev).any():
                    continue
                lo = np.minimum(eu, ev)
                hi = np.maximum(eu, ev)
                keys = lo * n + hi
                if len(np.unique(keys)) != len(keys):
                    continue
                return cls.from_edges(n, np.column_stack([eu, ev]))
            raise RuntimeError(f"no simple pairing found in {max_restarts} attempts")
        seed = int(rng.integers(0, 2**63 - 1))
        gx = nx.random_regular_graph(L, n, seed=seed)
        return cls.from_edges(n, np.array(gx.edges(), dtype=np.int64))

    @classmethod
    def build_er(cls, n, mean_degree, rng=None):
        """Erdos-Renyi G(n, p) with p = mean_degree / (n - 1), all opinions 0."""
        n = int(n)
        if rng is None:
            rng = np.random.default_rng()
        if n == 1 or mean_degree == 0:
            return cls.from_edges(n, np.empty((0, 2), dtype=np.int64))
        p = float(mean_degree) / (n - 1)
        if not 0.0 <= p <= 1.0:
            raise ValueError("mean degree must lie in [0, n-1]")
        seed = int(rng.integers(0, 2**63 - 1))
        gx = nx.fast_gnp_random_graph(n, p, seed=seed)
        edges = np.array(gx.edges(), dtype=np.int64).reshape(-1, 2)
        return cls.from_edges(n, edges)

    # ---------- opinions ----------

    def assign_opinions(self, rng, p, mode="product"):
        """Randomize opinions: iid Bernoulli(p) (`product`) or exactly
        round(p*n) ones at uniform positions (`exact_count`)."""
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if mode == "product":
            self.opinion[:] = (rng.random(self.n) < p).astype(np.int8)
        elif mode == "exact_count":
            k = int(round(p * self.n))
            self.opinion[:] = 0
            ones = rng.permutation(self.n)[:k]
            self.opinion[ones] = 1
        else:
            raise ValueError(f"unknown opinion mode {mode!r}")
        self._rebuild()

    def set_opinions(self, opinions):
        op = np.asarray(opinions, dtype=np.int8)
        if op.shape != (self.n,) or not np.isin(op, (0, 1)).all():
            raise ValueError("opinions must be a 0/1 vector of length n")
        self.opinion[:] = op
        self._rebuild()

    # ---------- queries ----------

    @property
    def n1(self):
        return int(self.counts[C_N1])

    @property
    def n10(self):
        """Ordered (1,0) pair count = number of discordant edges."""
        return int(self.counts[C_NDISC])

    @property
    def n11(self):
        return int(self.counts[C_N11])

    @property
    def n00(self):
        return int(self.counts[C_N00])

    @property
    def n_edges(self):
        return int(self.counts[C_NEDGES])

    @property
    def d_max(self):
        return int(self.counts[C_DMAX])

    def degrees(self):
        return self.deg.copy()

    def opinions(self):
        return self.opinion.copy()

    def neighbors(self, v):
        return [int(w) for w in self.nbr[v, :self.deg[v]]]

    def has_edge(self, u, v):
        return bool(K._is_nbr(self.nbr, self.deg, u, v))

    def edges(self):
        out = []
        for u in range(self.n):
            for i in range(self.deg[u]):
                v = int(self.nbr[u, i])
                if u < v:
                    out.append((u, v))
        return out

    def sample_discordant(self, rng):
        """Uniform discordant edge as (state-1 endpoint, state-0 endpoint),
        or None when the graph has no discordant edge."""
        nd = int(self.counts[C_NDISC])
        if nd == 0:
            return None
        t = int(rng.integers(0, nd))
        u = int(self.du[t])
        return u, int(self.nbr[u, self.dui[t]])

    # ---------- mutations ----------

    def flip(self, v):
        """Toggle vertex v's opinion."""
        if not 0 <= v < self.n:
            raise ValueError("vertex out of range")
        K._flip(self.opinion, self.deg, self.nbr, self.xidx, self.epos,
                self.n1nbr, self.du, self.dui, self.cls, self.cls_size,
                self.cls_pos, self.counts, v)

    def add_edge(self, u, v):
        if u == v:
            raise ValueError("no self loops")
        if self.has_edge(u, v):
            raise ValueError("edge already present")
        self.ensure_capacity(int(max(self.deg[u], self.deg[v])) + 1)
        self._ensure_edge_cap(self.n_edges + 1)
        K._add_edge(self.opinion, self.deg, self.nbr, self.xidx, self.epos,
                    self.n1nbr, self.du, self.dui, self.counts, self.degcnt, u, v)
        self.counts[C_NEDGES] += 1

    def remove_edge(self, u, v):
        slot = -1
        for i in range(self.deg[u]):
            if self.nbr[u, i] == v:
                slot = i
                break
        if slot < 0:
            raise ValueError(f"edge ({u},{v}) not present")
        K._remove_edge_slot(self.opinion, self.deg, self.nbr, self.xidx, self.epos,
                            self.n1nbr, self.du, self.dui, self.counts, self.degcnt,
                            u, slot)
        self.counts[C_NEDGES] -= 1

    def rewire(self, x, y, z):
        """Replace edge {x, y} by {x, z}. Requires z != x and z not already
        adjacent to x; edge count is invariant."""
        if z == x:
            raise ValueError("cannot rewire onto self")
        if self.has_edge(x, z):
            raise ValueError("target already adjacent")
        self.remove_edge(x, y)
        self.add_edge(x, z)

    # ---------- path counts ----------

    def triple_counts(self):
        """Exact ordered path counts, one O(n) pass over maintained
        neighbor-state tallies."""
        out = np.zeros(8, dtype=np.float64)
        K._triples_acc(self.opinion, self.deg, self.n1nbr, out)
        return TripleCounts(*(float(v) for v in out))

    def triple_counts_estimate(self, rng, n_middles):
        """Unbiased estimate from `n_middles` uniformly sampled center
        vertices, scaled by n / n_middles."""
        if n_middles <= 0:
            raise ValueError("need at least one sample")
        mids = rng.integers(0, self.n, size=n_middles)
        c1 = self.n1nbr[mids].astype(np.float64)
        c0 = (self.deg[mids] - self.n1nbr[mids]).astype(np.float64)
        is1 = self.opinion[mids] == 1
        scale = self.n / n_middles
        def tot(mask, a, b, same):
            x = a[mask] * b[mask]
            if same:
                x = x - a[mask]
            return float(x.sum()) * scale
        return TripleCounts(
            n111=tot(is1, c1, c1, True), n110=tot(is1, c1, c0, False),
            n101=tot(~is1, c1, c1, True), n100=tot(~is1, c1, c0, False),
            n011=tot(is1, c0, c1, False), n010=tot(is1, c0, c0, True),
            n001=tot(~is1, c0, c1, False), n000=tot(~is1, c0, c0, True))

    # ---------- consistency ----------

    def validate(self):
        """Recount everything from the raw adjacency rows and opinions;
        raises AssertionError on any inconsistency with maintained state."""
        n = self.n
        edges = set()
        for u in range(n):
            row = self.nbr[u, :self.deg[u]]
            assert len(set(row.tolist())) == self.deg[u], f"duplicate neighbor at {u}"
            for i, v in enumerate(row):
                v = int(v)
                assert v != u, f"self loop at {u}"
                j = int(self.xidx[u, i])
                assert j < self.deg[v] and self.nbr[v, j] == u, f"cross index broken at ({u},{v})"
                assert self.epos[u, i] == self.epos[v, j], f"edge position mismatch ({u},{v})"
                if u < v:
                    edges.add((u, v))
        assert len(edges) == self.n_edges, "edge count drift"
        n1 = int((self.opinion == 1).sum())
        assert n1 == self.n1, "N1 drift"
        n11 = n00 = 0
        disc = set()
        for (u, v) in edges:
            ou, ov = int(self.opinion[u]), int(self.opinion[v])
            if ou == ov:
                if ou == 1:
                    n11 += 2
                else:
                    n00 += 2
            else:
                disc.add((u, v))
        assert n11 == self.n11 and n00 == self.n00, "pair count drift"
        assert len(disc) == self.n10, "discordant count drift"
        seen = set()
        for t in range(self.n10):
            u = int(self.du[t])
            i = int(self.dui[t])
            assert self.opinion[u] == 1, "discordant entry endpoint not in state 1"
            v = int(self.nbr[u, i])
            assert self.epos[u, i] == t, "discordant back reference broken"
            key = (u, v) if u < v else (v, u)
            assert key in disc and key not in seen, "discordant list entry wrong"
            seen.add(key)
        for u in range(n):
            c1 = sum(int(self.opinion[int(v)]) for v in self.nbr[u, :self.deg[u]])
            assert c1 == self.n1nbr[u], f"neighbor-state tally drift at {u}"
        degs = self.deg
        assert self.d_max == (int(degs.max()) if n else 0), "max degree drift"
        hist = np.bincount(degs, minlength=self.cap + 1)
        assert (hist == self.degcnt[:len(hist)]).all(), "degree histogram drift"
        for o in (0, 1):
            members = set(int(v) for v in self.cls[o, :self.cls_size[o]])
            want = set(int(v) for v in np.nonzero(self.opinion == o)[0])
            assert members == want, f"class listing drift for opinion {o}"
        for v in range(n):
            o = int(self.opinion[v])
            assert int(self.cls[o, self.cls_pos[v]]) == v, f"class position drift at {v}"
        return True

    # ---------- IO ----------

    def save(self, path):
        """Write snapshot: header `n mean_degree`, one line of n opinion
        characters, then one `u v` line per edge."""
        mean = 2.0 * self.n_edges / self.n
        with open(path, "w") as f:
            f.write(f"{self.n} {mean:.6f}\n")
            f.write("".join(str(int(o)) for o in self.opinion) + "\n")
            for u, v in self.edges():
                f.write(f"{u} {v}\n")

    @classmethod
    def load(cls, path):
        with open(path) as f:
            header = f.readline().split()
            n = int(header[0])
            ops = f.readline().strip()
            if len(ops) != n or set(ops) - {"0", "1"}:
                raise ValueError("malformed opinion line")
            edges = []
            for line in f:
                line = line.strip()
                if not line:
                    continue
                u, v = line.split()
                edges.append((int(u), int(v)))
        op = np.frombuffer(ops.encode(), dtype=np.uint8) - ord("0")
        return cls.from_edges(n, np.array(edges, dtype=np.int64).reshape(-1, 2),
                              opinions=op.astype(np.int8))

    def copy(self):
        g = OpinionGraph.__new__(OpinionGraph)
        g.n = self.n
        g.cap = self.cap
        g._edge_cap = self._edge_cap
        for name in ("opinion", "deg", "nbr", "xidx", "epos", "n1nbr",
                     "du", "dui", "cls", "cls_size", "cls_pos", "counts", "degcnt"):
            setattr(g, name, getattr(self, name).copy())
        return g
