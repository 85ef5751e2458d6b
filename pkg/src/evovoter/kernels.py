"""Flat-array graph kernels for the rewiring voter model.

State layout (all arrays owned by the Python-side graph object):

  opinion : int8[n]        vertex states, 0 or 1
  deg     : int64[n]       degrees
  nbr     : int32[n, cap]  adjacency rows, nbr[v, :deg[v]] are v's neighbors
  xidx    : int32[n, cap]  cross index: if w = nbr[v, i] then nbr[w, xidx[v, i]] = v
  epos    : int64[n, cap]  position of the edge in the discordant list, -1 if concordant
  n1nbr   : int64[n]       number of state-1 neighbors per vertex
  du, dui : int32[m]       discordant edge list: entry t is the edge from du[t]
                           (the state-1 endpoint) through slot dui[t]
  cls     : int32[2, n]    vertex ids grouped by opinion (for rewire-to-same)
  cls_size: int64[2]
  cls_pos : int64[n]       position of v inside cls[opinion[v]]
  degcnt  : int64[cap+1]   degree histogram, supports O(1) amortized max-degree
  counts  : int64[8]       running totals, see C_* indices

Every mutation keeps all derived structures consistent, so pair counts and the
discordant-edge sampler are O(1) per event. `_rebuild` reconstructs all derived
state from (deg, nbr, xidx, opinion) and is the reset point after bulk loads.
"""

import numpy as np

from ._backend import maybe_njit, maybe_inline

C_N1 = 0
C_N11 = 1
C_N00 = 2
C_NDISC = 3
C_DMAX = 4
C_SKIP = 5
C_NEDGES = 6
C_NOOP = 7

# clock codes
CK_EFFICIENT = 0
CK_CTMC = 1
CK_UNIFORM_EDGE = 2
CK_SILK = 3

# event kinds reported in event_out
EV_VOTE = 0
EV_REWIRE = 1
EV_SKIPPED = 2
EV_NOOP = 3

# run exit statuses
ST_ABSORBED = 0
ST_UPDATE_CAP = 1
ST_TIME_CAP = 2
ST_RESIZE = 3


@maybe_inline
def _deg_inc(degcnt, counts, d_old):
    degcnt[d_old] -= 1
    degcnt[d_old + 1] += 1
    if d_old + 1 > counts[C_DMAX]:
        counts[C_DMAX] = d_old + 1


@maybe_inline
def _deg_dec(degcnt, counts, d_old):
    degcnt[d_old] -= 1
    degcnt[d_old - 1] += 1
    if d_old == counts[C_DMAX] and degcnt[d_old] == 0:
        d = counts[C_DMAX]
        while d > 0 and degcnt[d] == 0:
            d -= 1
        counts[C_DMAX] = d


@maybe_inline
def _is_nbr(nbr, deg, u, v):
    for i in range(deg[u]):
        if nbr[u, i] == v:
            return True
    return False


@maybe_inline
def _disc_delete(nbr, xidx, epos, du, dui, counts, pos):
    # swap-delete entry pos; patch the relocated entry's back references
    last = counts[C_NDISC] - 1
    if pos != last:
        u = du[last]
        i = dui[last]
        du[pos] = u
        dui[pos] = i
        epos[u, i] = pos
        w = nbr[u, i]
        epos[w, xidx[u, i]] = pos
    counts[C_NDISC] = last


@maybe_inline
def _add_edge(opinion, deg, nbr, xidx, epos, n1nbr, du, dui, counts, degcnt, u, v):
    iu = deg[u]
    iv = deg[v]
    cap = nbr.shape[1]
    if iu >= cap or iv >= cap:
        return False
    nbr[u, iu] = v
    nbr[v, iv] = u
    xidx[u, iu] = iv
    xidx[v, iv] = iu
    deg[u] += 1
    deg[v] += 1
    _deg_inc(degcnt, counts, iu)
    _deg_inc(degcnt, counts, iv)
    ou = opinion[u]
    ov = opinion[v]
    if ou == 1:
        n1nbr[v] += 1
    if ov == 1:
        n1nbr[u] += 1
    if ou != ov:
        pos = counts[C_NDISC]
        if ou == 1:
            du[pos] = u
            dui[pos] = iu
        else:
            du[pos] = v
            dui[pos] = iv
        counts[C_NDISC] = pos + 1
        epos[u, iu] = pos
        epos[v, iv] = pos
    else:
        epos[u, iu] = -1
        epos[v, iv] = -1
        if ou == 1:
            counts[C_N11] += 2
        else:
            counts[C_N00] += 2
    return True


@maybe_inline
def _row_delete(nbr, xidx, epos, du, dui, deg, degcnt, counts, u, iu):
    # remove slot iu from u's adjacency row by swapping in the last slot
    last = deg[u] - 1
    if iu != last:
        w = nbr[u, last]
        jw = xidx[u, last]
        pe = epos[u, last]
        nbr[u, iu] = w
        xidx[u, iu] = jw
        epos[u, iu] = pe
        xidx[w, jw] = iu
        if pe >= 0 and du[pe] == u and dui[pe] == last:
            dui[pe] = iu
    deg[u] = last
    _deg_dec(degcnt, counts, last + 1)


@maybe_inline
def _remove_edge_slot(opinion, deg, nbr, xidx, epos, n1nbr, du, dui, counts, degcnt, u, iu):
    v = nbr[u, iu]
    iv = xidx[u, iu]
    pos = epos[u, iu]
    if pos >= 0:
        _disc_delete(nbr, xidx, epos, du, dui, counts, pos)
    else:
        if opinion[u] == 1:
            counts[C_N11] -= 2
        else:
            counts[C_N00] -= 2
    if opinion[v] == 1:
        n1nbr[u] -= 1
    if opinion[u] == 1:
        n1nbr[v] -= 1
    _row_delete(nbr, xidx, epos, du, dui, deg, degcnt, counts, u, iu)
    _row_delete(nbr, xidx, epos, du, dui, deg, degcnt, counts, v, iv)


@maybe_inline
def _relocate(opinion, deg, nbr, xidx, epos, n1nbr, du, dui, counts, degcnt, x, sx, z):
    """Replace x's neighbor at slot sx (call it y) by z: the rewiring move.
    x's degree is unchanged so its slot is reused in place; only y loses a
    slot and z gains one."""
    y = nbr[x, sx]
    sy = xidx[x, sx]
    pos = epos[x, sx]
    if pos >= 0:
        _disc_delete(nbr, xidx, epos, du, dui, counts, pos)
    else:
        if opinion[x] == 1:
            counts[C_N11] -= 2
        else:
            counts[C_N00] -= 2
    if opinion[x] == 1:
        n1nbr[y] -= 1
        n1nbr[z] += 1
    if opinion[y] == 1:
        n1nbr[x] -= 1
    _row_delete(nbr, xidx, epos, du, dui, deg, degcnt, counts, y, sy)
    sz = deg[z]
    nbr[x, sx] = z
    xidx[x, sx] = sz
    nbr[z, sz] = x
    xidx[z, sz] = sx
    deg[z] = sz + 1
    _deg_inc(degcnt, counts, sz)
    if opinion[z] == 1:
        n1nbr[x] += 1
    if opinion[x] != opinion[z]:
        p2 = counts[C_NDISC]
        if opinion[x] == 1:
            du[p2] = x
            dui[p2] = sx
        else:
            du[p2] = z
            dui[p2] = sz
        counts[C_NDISC] = p2 + 1
        epos[x, sx] = p2
        epos[z, sz] = p2
    else:
        epos[x, sx] = -1
        epos[z, sz] = -1
        if opinion[x] == 1:
            counts[C_N11] += 2
        else:
            counts[C_N00] += 2


@maybe_inline
def _flip(opinion, deg, nbr, xidx, epos, n1nbr, du, dui, cls, cls_size, cls_pos, counts, v):
    old = opinion[v]
    new = 1 - old
    for i in range(deg[v]):
        w = nbr[v, i]
        j = xidx[v, i]
        pos = epos[v, i]
        if pos >= 0:
            # discordant edge becomes concordant with common opinion `new`
            _disc_delete(nbr, xidx, epos, du, dui, counts, pos)
            epos[v, i] = -1
            epos[w, j] = -1
            if new == 1:
                counts[C_N11] += 2
            else:
                counts[C_N00] += 2
        else:
            # concordant (common opinion `old`) becomes discordant
            if old == 1:
                counts[C_N11] -= 2
            else:
                counts[C_N00] -= 2
            pos2 = counts[C_NDISC]
            if opinion[w] == 1:
                du[pos2] = w
                dui[pos2] = j
            else:
                du[pos2] = v
                dui[pos2] = i
            counts[C_NDISC] = pos2 + 1
            epos[v, i] = pos2
            epos[w, j] = pos2
        if new == 1:
            n1nbr[w] += 1
        else:
            n1nbr[w] -= 1
    opinion[v] = new
    counts[C_N1] += 1 if new == 1 else -1
    # move v between opinion classes
    p = cls_pos[v]
    lastp = cls_size[old] - 1
    if p != lastp:
        moved = cls[old, lastp]
        cls[old, p] = moved
        cls_pos[moved] = p
    cls_size[old] = lastp
    cls[new, cls_size[new]] = v
    cls_pos[v] = cls_size[new]
    cls_size[new] += 1


@maybe_njit
def _ingest_edges(deg, nbr, xidx, eu, ev):
    cap = nbr.shape[1]
    for u in range(deg.shape[0]):
        deg[u] = 0
    for e in range(eu.shape[0]):
        u = eu[e]
        v = ev[e]
        iu = deg[u]
        iv = deg[v]
        if iu >= cap or iv >= cap:
            return False
        nbr[u, iu] = v
        nbr[v, iv] = u
        xidx[u, iu] = iv
        xidx[v, iv] = iu
        deg[u] += 1
        deg[v] += 1
    return True


@maybe_njit
def _rebuild(opinion, deg, nbr, xidx, epos, n1nbr, du, dui, cls, cls_size, cls_pos, counts, degcnt):
    n = opinion.shape[0]
    for i in range(counts.shape[0]):
        counts[i] = 0
    for i in range(degcnt.shape[0]):
        degcnt[i] = 0
    cls_size[0] = 0
    cls_size[1] = 0
    nd = 0
    nedg = 0
    dmax = 0
    for u in range(n):
        d = deg[u]
        degcnt[d] += 1
        if d > dmax:
            dmax = d
        o = opinion[u]
        counts[C_N1] += o
        cls[o, cls_size[o]] = u
        cls_pos[u] = cls_size[o]
        cls_size[o] += 1
        c1 = 0
        for i in range(d):
            v = nbr[u, i]
            if opinion[v] == 1:
                c1 += 1
            if u < v:
                nedg += 1
                j = xidx[u, i]
                if o != opinion[v]:
                    if o == 1:
                        du[nd] = u
                        dui[nd] = i
                    else:
                        du[nd] = v
                        dui[nd] = j
                    epos[u, i] = nd
                    epos[v, j] = nd
                    nd += 1
                else:
                    epos[u, i] = -1
                    epos[v, j] = -1
                    if o == 1:
                        counts[C_N11] += 2
                    else:
                        counts[C_N00] += 2
        n1nbr[u] = c1
    counts[C_NDISC] = nd
    counts[C_NEDGES] = nedg
    counts[C_DMAX] = dmax


@maybe_njit
def _triples_acc(opinion, deg, n1nbr, out):
    """All eight ordered path counts N_ijk (middle opinion j), one O(n) pass.

    out layout: [n111, n110, n101, n100, n011, n010, n001, n000]
    """
    for k in range(8):
        out[k] = 0.0
    for y in range(opinion.shape[0]):
        c1 = n1nbr[y]
        c0 = deg[y] - c1
        if opinion[y] == 1:
            out[0] += c1 * (c1 - 1)   # 1-1-1
            out[1] += c1 * c0         # 1-1-0
            out[4] += c0 * c1         # 0-1-1
            out[5] += c0 * (c0 - 1)   # 0-1-0
        else:
            out[2] += c1 * (c1 - 1)   # 1-0-1
            out[3] += c1 * c0         # 1-0-0
            out[6] += c0 * c1         # 0-0-1
            out[7] += c0 * (c0 - 1)   # 0-0-0


@maybe_njit
def _moment_sums(opinion, deg, n1nbr, out):
    """Sums over state-1 vertices of powers of (j, k) = (#1-nbrs, #0-nbrs).

    out layout: [sj, sk, sj2, sjk, sk2, sj3, sj2k, sjk2, sk3]
    """
    for i in range(9):
        out[i] = 0.0
    for v in range(opinion.shape[0]):
        if opinion[v] == 1:
            j = float(n1nbr[v])
            k = float(deg[v] - n1nbr[v])
            out[0] += j
            out[1] += k
            out[2] += j * j
            out[3] += j * k
            out[4] += k * k
            out[5] += j * j * j
            out[6] += j * j * k
            out[7] += j * k * k
            out[8] += k * k * k


@maybe_inline
def _choose_target(opinion, deg, nbr, n1nbr, cls, cls_size, rng, x, rewire_same, uniform_all):
    """Pick the rewiring target for x, or -1 if none / skipped.

    rewire_same=0: base set is all vertices; =1: vertices sharing x's opinion.
    uniform_all=1: one unconditioned draw from the base set, collisions with x
    or N(x) skip the rewiring. uniform_all=0: exact uniform draw over the base
    set minus {x} minus N(x); rejection with a deterministic k-th-eligible scan
    as fallback so the draw stays exact even in degenerate graphs.
    """
    n = opinion.shape[0]
    if rewire_same == 0:
        if uniform_all == 1:
            z = rng.integers(0, n)
            if z == x or _is_nbr(nbr, deg, x, z):
                return np.int64(-1)
            return np.int64(z)
        eligible = n - 1 - deg[x]
        if eligible <= 0:
            return np.int64(-1)
        for _ in range(256):
            z = rng.integers(0, n)
            if z != x and not _is_nbr(nbr, deg, x, z):
                return np.int64(z)
        k = rng.integers(0, eligible)
        c = 0
        for v in range(n):
            if v != x and not _is_nbr(nbr, deg, x, v):
                if c == k:
                    return np.int64(v)
                c += 1
        return np.int64(-1)
    # rewire to same opinion as x
    o = opinion[x]
    m = cls_size[o]
    if uniform_all == 1:
        if m == 0:
            return np.int64(-1)
        z = cls[o, rng.integers(0, m)]
        if z == x or _is_nbr(nbr, deg, x, z):
            return np.int64(-1)
        return np.int64(z)
    same_nbrs = n1nbr[x] if o == 1 else deg[x] - n1nbr[x]
    eligible = m - 1 - same_nbrs
    if eligible <= 0:
        return np.int64(-1)
    for _ in range(256):
        z = cls[o, rng.integers(0, m)]
        if z != x and not _is_nbr(nbr, deg, x, z):
            return np.int64(z)
    k = rng.integers(0, eligible)
    c = 0
    for i in range(m):
        v = cls[o, i]
        if v != x and not _is_nbr(nbr, deg, x, v):
            if c == k:
                return np.int64(v)
            c += 1
    return np.int64(-1)


@maybe_inline
def _w_target(opinion, deg, nbr, rng, x, cstats):
    """Rewiring target from the shared uniform vertex stream.

    Entries equal to x or already adjacent to x are skipped; every consumed
    entry (skipped or used) is counted in cstats[3].
    """
    n = opinion.shape[0]
    if n - 1 - deg[x] <= 0:
        return np.int64(-1)
    for _ in range(4096):
        z = rng.integers(0, n)
        cstats[3] += 1
        if z != x and not _is_nbr(nbr, deg, x, z):
            return np.int64(z)
    k = rng.integers(0, n - 1 - deg[x])
    cstats[3] += 1
    c = 0
    for v in range(n):
        if v != x and not _is_nbr(nbr, deg, x, v):
            if c == k:
                return np.int64(v)
            c += 1
    return np.int64(-1)


@maybe_njit
def _record(traj, trips, moms, trip_every, mom_every, updates, t_now,
            counts, opinion, deg, n1nbr, nrows, ntrips, nmoms):
    if nrows < traj.shape[0]:
        traj[nrows, 0] = updates
        traj[nrows, 1] = t_now
        traj[nrows, 2] = counts[C_N1]
        traj[nrows, 3] = counts[C_NDISC]
        traj[nrows, 4] = counts[C_N11]
        traj[nrows, 5] = counts[C_N00]
        traj[nrows, 6] = counts[C_DMAX]
        if trip_every > 0 and nrows % trip_every == 0 and ntrips < trips.shape[0]:
            trips[ntrips, 0] = updates
            _triples_acc(opinion, deg, n1nbr, trips[ntrips, 1:])
            ntrips += 1
        if mom_every > 0 and nrows % mom_every == 0 and nmoms < moms.shape[0]:
            moms[nmoms, 0] = updates
            moms[nmoms, 1] = counts[C_N1]
            _moment_sums(opinion, deg, n1nbr, moms[nmoms, 2:])
            nmoms += 1
        nrows += 1
    return nrows, ntrips, nmoms


@maybe_njit
def _run(opinion, deg, nbr, xidx, epos, n1nbr, du, dui, cls, cls_size, cls_pos,
         counts, degcnt, K, in_S, cstats, use_counters, stub_thresh, vote_s,
         rng, vote_prob, clock, rewire_same, uniform_all,
         max_updates, max_time, stride,
         traj, trip_every, trips, mom_every, moms,
         istate, fstate, pending, event_out):
    """Main event loop. Resumable: all loop state lives in istate/fstate/pending.

    istate: [updates, last_rec, nrows, ntrips, nmoms]
    fstate: [t_now]
    pending: [x, slot, z, dec_counter] or pending[0] = -1; a rewire that needs a
             larger adjacency capacity parks here across a resize (its RNG draws
             are already consumed, so it must complete without redrawing).

    RNG consumption order per update: holding time (continuous clocks), edge
    draw (one integer for the efficient clock, a (vertex, slot) rejection loop
    for uniform-edge clocks), orientation coin (efficient clock only), event
    coin (plain mode), then target draws.
    """
    n = opinion.shape[0]
    cap = nbr.shape[1]
    updates = istate[0]
    last_rec = istate[1]
    nrows = istate[2]
    ntrips = istate[3]
    nmoms = istate[4]
    t_now = fstate[0]
    status = ST_UPDATE_CAP

    if pending[0] >= 0:
        x = pending[0]
        slot = pending[1]
        z = pending[2]
        _relocate(opinion, deg, nbr, xidx, epos, n1nbr, du, dui, counts, degcnt, x, slot, z)
        if pending[3] == 1:
            K[x] -= 1
        event_out[0] = EV_REWIRE
        event_out[1] = x
        event_out[2] = -1
        event_out[3] = z
        pending[0] = -1
        updates += 1
        if updates - last_rec >= stride:
            nrows, ntrips, nmoms = _record(traj, trips, moms, trip_every, mom_every,
                                           updates, t_now, counts, opinion, deg, n1nbr,
                                           nrows, ntrips, nmoms)
            last_rec = updates

    while True:
        nd = counts[C_NDISC]
        if nd == 0:
            status = ST_ABSORBED
            break
        if updates >= max_updates:
            status = ST_UPDATE_CAP
            break
        if clock == CK_CTMC:
            t_now += -np.log1p(-rng.random()) / (2.0 * nd)
            if t_now >= max_time:
                t_now = max_time
                status = ST_TIME_CAP
                break
        elif clock == CK_SILK:
            t_now += -np.log1p(-rng.random()) / (2.0 * counts[C_NEDGES])
            if t_now >= max_time:
                t_now = max_time
                status = ST_TIME_CAP
                break

        if clock == CK_EFFICIENT or clock == CK_CTMC:
            t = rng.integers(0, nd)
            u1 = du[t]
            i1 = dui[t]
            v0 = nbr[u1, i1]
            if rng.random() < 0.5:
                x = np.int64(u1)
                y = np.int64(v0)
                slot = np.int64(i1)
            else:
                x = np.int64(v0)
                y = np.int64(u1)
                slot = np.int64(xidx[u1, i1])
        else:
            while True:
                v = rng.integers(0, n)
                s = rng.integers(0, cap)
                if s < deg[v]:
                    break
            x = np.int64(v)
            slot = np.int64(s)
            y = np.int64(nbr[v, s])
            if opinion[x] == opinion[y]:
                counts[C_NOOP] += 1
                event_out[0] = EV_NOOP
                event_out[1] = x
                event_out[2] = y
                event_out[3] = -1
                updates += 1
                if updates - last_rec >= stride:
                    nrows, ntrips, nmoms = _record(traj, trips, moms, trip_every, mom_every,
                                                   updates, t_now, counts, opinion, deg, n1nbr,
                                                   nrows, ntrips, nmoms)
                    last_rec = updates
                continue

        if use_counters == 1:
            do_vote = K[x] == 0
        else:
            do_vote = rng.random() < vote_prob

        if do_vote:
            was0 = opinion[x] == 0
            _flip(opinion, deg, nbr, xidx, epos, n1nbr, du, dui, cls, cls_size, cls_pos, counts, x)
            event_out[0] = EV_VOTE
            event_out[1] = x
            event_out[2] = y
            event_out[3] = -1
            if use_counters == 1:
                if vote_s >= 1.0:
                    X = np.int64(0)
                else:
                    X = np.int64(np.floor(np.log1p(-rng.random()) / np.log1p(-vote_s)))
                if in_S[x] == 1 and was0:
                    cstats[0] += 1
                    if X >= stub_thresh:
                        cstats[1] += 1
                else:
                    cstats[2] += 1
                K[x] = X
        else:
            if use_counters == 1:
                z = _w_target(opinion, deg, nbr, rng, x, cstats)
            else:
                z = _choose_target(opinion, deg, nbr, n1nbr, cls, cls_size, rng,
                                   x, rewire_same, uniform_all)
            if z < 0:
                counts[C_SKIP] += 1
                event_out[0] = EV_SKIPPED
                event_out[1] = x
                event_out[2] = y
                event_out[3] = -1
                if use_counters == 1:
                    K[x] -= 1
            else:
                if deg[z] + 1 > cap:
                    pending[0] = x
                    pending[1] = slot
                    pending[2] = z
                    pending[3] = 1 if use_counters == 1 else 0
                    status = ST_RESIZE
                    break
                _relocate(opinion, deg, nbr, xidx, epos, n1nbr, du, dui, counts, degcnt, x, slot, z)
                event_out[0] = EV_REWIRE
                event_out[1] = x
                event_out[2] = y
                event_out[3] = z
                if use_counters == 1:
                    K[x] -= 1
        updates += 1
        if updates - last_rec >= stride:
            nrows, ntrips, nmoms = _record(traj, trips, moms, trip_every, mom_every,
                                           updates, t_now, counts, opinion, deg, n1nbr,
                                           nrows, ntrips, nmoms)
            last_rec = updates

    if status != ST_RESIZE and (updates != last_rec or nrows == 0):
        nrows, ntrips, nmoms = _record(traj, trips, moms, trip_every, mom_every,
                                       updates, t_now, counts, opinion, deg, n1nbr,
                                       nrows, ntrips, nmoms)
        last_rec = updates

    istate[0] = updates
    istate[1] = last_rec
    istate[2] = nrows
    istate[3] = ntrips
    istate[4] = nmoms
    fstate[0] = t_now
    return status
