"""Rewiring voter dynamics on opinion graphs.

An update picks an oriented discordant edge (x, y); with probability nu/L
vertex x adopts y's opinion, otherwise x drops the edge to y and rewires to a
fresh target. Four interchangeable clocks drive the same per-event kernel:

  discrete_efficient    one discordant event per update
  ctmc                  exponential holding times, total rate 2 * N10
  discrete_uniform_edge uniform oriented edge per update, concordant = no-op
  silk                  continuous time at constant total rate n * L,
                        concordant picks are no-ops

The run terminates when no discordant edge remains (absorption), at the
update cap, or at the time cap.
"""

import math
from dataclasses import dataclass, field
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import kernels as K
from .graph import OpinionGraph
from .stats import Trajectory

CLOCKS = {"discrete_efficient": K.CK_EFFICIENT, "ctmc": K.CK_CTMC,
          "discrete_uniform_edge": K.CK_UNIFORM_EDGE, "silk": K.CK_SILK}
REWIRE_MODES = {"to_random": 0, "to_same": 1}
TARGET_RULES = {"exclude_neighbors": 0, "uniform_all": 1}
EVENT_NAMES = {K.EV_VOTE: "vote", K.EV_REWIRE: "rewire",
               K.EV_SKIPPED: "skipped_rewire", K.EV_NOOP: "noop"}


def spawn_rng(seed, replica=0, stream=0):
    """Deterministic generator for (seed, replica, stream).

    seed may be an int or a tuple of ints (compound experiment keys).
    """
    if isinstance(seed, (tuple, list)):
        entropy = tuple(int(s) for s in seed)
    else:
        entropy = int(seed)
    ss = np.random.SeedSequence(entropy=entropy, spawn_key=(int(replica), int(stream)))
    return np.random.default_rng(ss)


@dataclass
class ModelParams:
    n: int
    L: float
    nu: float
    p: float = 0.5
    rewire_mode: str = "to_random"
    target_rule: str = "exclude_neighbors"
    clock: str = "discrete_efficient"
    init: str = "regular"
    opinion_mode: str = "product"
    max_updates: int = 10_000_000
    max_time: float = math.inf
    stride: int = 0          # trajectory row every `stride` updates; 0 -> n
    triples_stride: int = 0  # path counts every k-th recorded row; 0 = off
    moments_stride: int = 0  # neighbor-count moment sums every k-th row; 0 = off
    legacy_rates: bool = False

    def validate(self):
        if self.n <= 0:
            raise ValueError("n must be positive")
        if self.L < 0:
            raise ValueError("L must be nonnegative")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.nu < 0:
            raise ValueError("nu must be nonnegative")
        if self.clock not in CLOCKS:
            raise ValueError(f"unknown clock {self.clock!r}")
        if self.rewire_mode not in REWIRE_MODES:
            raise ValueError(f"unknown rewire mode {self.rewire_mode!r}")
        if self.target_rule not in TARGET_RULES:
            raise ValueError(f"unknown target rule {self.target_rule!r}")
        if self.init not in ("regular", "er"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.max_updates <= 0:
            raise ValueError("max_updates must be positive")
        if self.L > 0:
            s = self.nu / self.L
            if not self.legacy_rates and s > 1.0:
                raise ValueError("nu/L exceeds 1; vote probability undefined")
        return self

    def vote_prob(self):
        if self.L == 0:
            return 0.0
        s = self.nu / self.L
        return s / (1.0 + s) if self.legacy_rates else s


@dataclass
class CounterConfig:
    """Per-vertex geometric counters replacing the iid vote coin.

    Each vertex holds a counter; an event at a vertex with counter 0 votes and
    redraws the counter from Geometric(nu/L) on {0, 1, ...}, otherwise the
    event decrements the counter and rewires. Counter refreshes for low-degree
    vertices flipping 0 -> 1 are tallied separately, as are draws at or above
    the stubborn threshold (default 20 L) and entries consumed from the shared
    rewiring-target stream.
    """

    stubborn_threshold: int | None = None   # default 20 * L
    s_degree_threshold: float | None = None  # membership cut for S, default 11 * L
    w_stream_accounting: bool = True


@dataclass
class StepEvent:
    kind: str
    x: int
    y: int
    z: int
    dt: float


@dataclass
class RunResult:
    params: ModelParams
    status: str               # absorbed | update_cap | time_cap
    updates: int
    t_end: float
    tau_updates: int | None   # update count at absorption, else None
    final_n1: int
    final_n10: int
    final_n11: int
    final_n00: int
    final_dmax: int
    skipped_rewires: int
    noop_events: int
    trajectory: Trajectory
    stubborn: dict | None = None
    graph: OpinionGraph | None = None

    @property
    def absorbed(self):
        return self.status == "absorbed"

    @property
    def final_minority_fraction(self):
        return min(self.final_n1, self.params.n - self.final_n1) / self.params.n

    def to_dict(self):
        d = {
            "schema_version": 1,
            "params": {k: getattr(self.params, k) for k in
                       ("n", "L", "nu", "p", "rewire_mode", "target_rule", "clock",
                        "init", "opinion_mode", "max_updates", "stride",
                        "triples_stride", "moments_stride", "legacy_rates")},
            "status": self.status,
            "updates": self.updates,
            "t_end": self.t_end,
            "tau_updates": self.tau_updates,
            "final": {"N1": self.final_n1, "N10": self.final_n10,
                      "N11": self.final_n11, "N00": self.final_n00,
                      "Dmax": self.final_dmax},
            "skipped_rewires": self.skipped_rewires,
            "noop_events": self.noop_events,
        }
        mt = self.params.max_time
        d["params"]["max_time"] = mt if math.isfinite(mt) else None
        if self.stubborn is not None:
            d["stubborn"] = self.stubborn
        return d


def build_graph(params, rng):
    """Initial graph + opinions for a run; consumes the rng in documented
    order (graph draws first, then opinion draws)."""
    if params.init == "regular":
        if params.L != int(params.L):
            raise ValueError("regular init needs integer L")
        g = OpinionGraph.build_regular(params.n, int(params.L), rng=rng)
    else:
        g = OpinionGraph.build_er(params.n, params.L, rng=rng)
    g.assign_opinions(rng, params.p, mode=params.opinion_mode)
    return g


def _geometric_failures(rng, size, s):
    # failures before first success, support {0, 1, ...}
    if s >= 1.0:
        return np.zeros(size, dtype=np.int64)
    u = rng.random(size)
    return np.floor(np.log1p(-u) / math.log1p(-s)).astype(np.int64)


class _KernelDriver:
    """Shared machinery: allocates scratch, runs the kernel, handles the
    capacity-resize protocol."""

    def __init__(self, g, params, counter=None, rng=None):
        self.g = g
        self.params = params
        self.counter = counter
        n = g.n
        self.clock = CLOCKS[params.clock]
        self.rewire_same = REWIRE_MODES[params.rewire_mode]
        self.uniform_all = TARGET_RULES[params.target_rule]
        self.vote_prob = params.vote_prob()
        self.vote_s = params.nu / params.L if params.L > 0 else 0.0
        self.stride = params.stride if params.stride > 0 else n
        self.trip_every = params.triples_stride
        self.mom_every = params.moments_stride
        rows_cap = min(params.max_updates // self.stride + 4, 4_000_004)
        self.traj = np.empty((rows_cap, 7), dtype=np.float64)
        tcap = rows_cap // self.trip_every + 2 if self.trip_every > 0 else 1
        mcap = rows_cap // self.mom_every + 2 if self.mom_every > 0 else 1
        self.trips = np.empty((tcap, 9), dtype=np.float64)
        self.moms = np.empty((mcap, 11), dtype=np.float64)
        self.istate = np.zeros(5, dtype=np.int64)
        self.fstate = np.zeros(1, dtype=np.float64)
        self.pending = np.full(4, -1, dtype=np.int64)
        self.event_out = np.full(4, -1, dtype=np.int64)
        self.cstats = np.zeros(4, dtype=np.int64)
        if counter is not None:
            self.use_counters = 1
            L = params.L
            self.stub_thresh = int(counter.stubborn_threshold
                                   if counter.stubborn_threshold is not None else 20 * L)
            sdeg = counter.s_degree_threshold if counter.s_degree_threshold is not None else 11 * L
            self.in_S = (g.deg <= sdeg).astype(np.int8)
            self.K = _geometric_failures(rng, n, self.vote_s)
        else:
            self.use_counters = 0
            self.stub_thresh = 0
            self.in_S = np.zeros(1, dtype=np.int8)
            self.K = np.zeros(1, dtype=np.int64)
        # row 0: the initial state
        r = K._record(self.traj, self.trips, self.moms, self.trip_every, self.mom_every,
                      0, 0.0, g.counts, g.opinion, g.deg, g.n1nbr, 0, 0, 0)
        self.istate[2], self.istate[3], self.istate[4] = r

    def advance(self, rng, max_updates):
        g = self.g
        while True:
            status = K._run(
                g.opinion, g.deg, g.nbr, g.xidx, g.epos, g.n1nbr, g.du, g.dui,
                g.cls, g.cls_size, g.cls_pos, g.counts, g.degcnt,
                self.K, self.in_S, self.cstats, self.use_counters,
                self.stub_thresh, self.vote_s,
                rng, self.vote_prob, self.clock, self.rewire_same, self.uniform_all,
                max_updates, self.params.max_time, self.stride,
                self.traj, self.trip_every, self.trips, self.mom_every, self.moms,
                self.istate, self.fstate, self.pending, self.event_out)
            if status != K.ST_RESIZE:
                return status
            g.ensure_capacity(g.cap + 1)

    def trajectory(self):
        n, L = self.params.n, self.params.L
        rows = self.traj[:self.istate[2]].copy()
        if self.clock in (K.CK_EFFICIENT, K.CK_UNIFORM_EDGE) and n * L > 0:
            rows[:, 1] = rows[:, 0] / (n * L)
        trips = self.trips[:self.istate[3]].copy() if self.trip_every > 0 else None
        moms = self.moms[:self.istate[4]].copy() if self.mom_every > 0 else None
        return Trajectory(data=rows, n=n, L=L, clock=self.params.clock,
                          triples=trips, moment_sums=moms)


def _result(driver, status, counter=None):
    g = driver.g
    p = driver.params
    status_name = {K.ST_ABSORBED: "absorbed", K.ST_UPDATE_CAP: "update_cap",
                   K.ST_TIME_CAP: "time_cap"}[status]
    updates = int(driver.istate[0])
    stub = None
    if counter is not None:
        stub = {
            "pool1_draws": int(driver.cstats[0]),
            "stubborn_draws": int(driver.cstats[1]),
            "pool2_draws": int(driver.cstats[2]),
            "threshold": driver.stub_thresh,
            "n_in_S": int(driver.in_S.sum()),
        }
        if counter.w_stream_accounting:
            stub["w_draws"] = int(driver.cstats[3])
    return RunResult(
        params=p, status=status_name, updates=updates, t_end=float(driver.fstate[0]),
        tau_updates=updates if status == K.ST_ABSORBED else None,
        final_n1=g.n1, final_n10=g.n10, final_n11=g.n11, final_n00=g.n00,
        final_dmax=g.d_max,
        skipped_rewires=int(g.counts[K.C_SKIP]), noop_events=int(g.counts[K.C_NOOP]),
        trajectory=driver.trajectory(), stubborn=stub, graph=g)


def run(params, seed=None, rng=None, graph=None, keep_graph=False):
    """Run the model to absorption or to the update/time cap.

    `graph` (optional) supplies a prepared initial state and is not mutated;
    otherwise the initial graph is built from `params`. RNG draw order: graph
    build, opinion assignment, then per-update draws.
    """
    params.validate()
    if rng is None:
        rng = spawn_rng(seed if seed is not None else 0)
    g = graph.copy() if graph is not None else build_graph(params, rng)
    driver = _KernelDriver(g, params, rng=rng)
    status = driver.advance(rng, params.max_updates)
    res = _result(driver, status)
    if not keep_graph:
        res.graph = None
    return res


def run_counter_construction(params, config=None, seed=None, rng=None, graph=None,
                             keep_graph=False):
    """Run with per-vertex geometric vote counters and a shared rewiring
    target stream; event law matches `run` with the same parameters.

    Only defined for rewire-to-random with exact target exclusion and the
    discordant-event clocks.
    """
    params.validate()
    if params.rewire_mode != "to_random" or params.target_rule != "exclude_neighbors":
        raise ValueError("counter construction needs to_random / exclude_neighbors")
    if params.clock not in ("discrete_efficient", "ctmc"):
        raise ValueError("counter construction needs a discordant-event clock")
    if params.legacy_rates:
        raise ValueError("counter construction uses canonical rates")
    if params.nu <= 0:
        raise ValueError("counter construction needs nu > 0")
    if config is None:
        config = CounterConfig()
    if rng is None:
        rng = spawn_rng(seed if seed is not None else 0)
    g = graph.copy() if graph is not None else build_graph(params, rng)
    driver = _KernelDriver(g, params, counter=config, rng=rng)
    status = driver.advance(rng, params.max_updates)
    res = _result(driver, status, counter=config)
    if not keep_graph:
        res.graph = None
    return res


class Stepper:
    """Single-update driver over a caller-owned graph, for inspection tests.
    Uses the same kernel as `run`, so event-level behavior is identical."""

    def __init__(self, graph, params, counter=None, rng=None):
        params.validate()
        self.driver = _KernelDriver(graph, params, counter=counter, rng=rng)
        self.driver.traj = np.empty((0, 7))  # suppress recording

    def step(self, rng):
        before_t = float(self.driver.fstate[0])
        before_u = int(self.driver.istate[0])
        status = self.driver.advance(rng, before_u + 1)
        if int(self.driver.istate[0]) == before_u:
            return None  # absorbed before the update happened
        e = self.driver.event_out
        return StepEvent(kind=EVENT_NAMES[int(e[0])], x=int(e[1]), y=int(e[2]),
                         z=int(e[3]), dt=float(self.driver.fstate[0]) - before_t)

    @property
    def updates(self):
        return int(self.driver.istate[0])

    @property
    def time(self):
        return float(self.driver.fstate[0])


def step(graph, params, rng):
    """One update on `graph` in place; returns a StepEvent or None if the
    state is already absorbing. Convenience wrapper over Stepper."""
    return Stepper(graph, params, rng=rng).step(rng)


# ---------- threshold formulas and degree checks ----------

def p_threshold(nu):
    """Lower bound on the probability that a slow-rewiring run keeps a
    minority forever: (nu/60) * exp(-21 nu), maximized at nu = 1/21."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    return (nu / 60.0) * math.exp(-21.0 * nu)


def stubborn_refresh_prob(nu, L, threshold=None):
    """Probability a fresh Geometric(nu/L) counter is at or above the
    stubborn threshold (default 20 L): (1 - nu/L)^threshold."""
    s = nu / L
    if not 0 <= s <= 1:
        raise ValueError("need 0 <= nu/L <= 1")
    if threshold is None:
        threshold = int(20 * L)
    return (1.0 - s) ** threshold


def d_max_check(result, t, eps):
    """True iff the max degree at update floor(t * n * L) is at most
    (1 + eps + t) * L. After absorption the graph is frozen, so later
    checkpoints reuse the final max degree."""
    n, L = result.params.n, result.params.L
    m = math.floor(t * n * L)
    upd = result.trajectory.updates
    idx = np.searchsorted(upd, m, side="left")
    if idx < len(upd):
        dmax = result.trajectory.dmax[idx]
    elif result.absorbed:
        dmax = result.final_dmax
    else:
        raise ValueError(f"trajectory too short for checkpoint t={t}")
    return bool(dmax <= (1.0 + eps + t) * L)


def run_replicas(params, seed, n_replicas, jobs=1, counter=None):
    """Independent replicas seeded by (seed, replica); deterministic
    regardless of execution order."""
    args = [(params, seed, r, counter) for r in range(n_replicas)]
    if jobs <= 1:
        return [_one_replica(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_one_replica, args))


def _one_replica(arg):
    params, seed, replica, counter = arg
    rng = spawn_rng(seed, replica=replica)
    if counter is not None:
        return run_counter_construction(params, config=counter, rng=rng)
    return run(params, rng=rng)
