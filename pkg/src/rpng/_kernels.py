"""Compiled inner loops.

Site ``x`` of the window lives at index ``x + L`` (``0 .. 2L``); edge
``<x, x+1>`` lives at index ``x + L`` (``0 .. 2L-1``) and joins site indices
``j`` and ``j + 1``.  Occupancy is signed: ``s[i] > 0`` means ``s[i]``
l-particles, ``s[i] < 0`` means ``-s[i]`` r-particles, so that the height
obeys ``h[j] = h[j-1] + s[j]``.

Counters are kept in small int64 arrays so the compiled helpers can update
them in place: ``cnt = [phi_l, phi_r, nuc_origin]`` and
``front = [left_front, right_front, touched]`` where the fronts bound the
region whose state may differ from the infinite-lattice process.
"""

import numpy as np
from numba import njit, uint64

LEFT_ON_RIGHT = 0
LEFT_ON_LEFT = 1
RIGHT_ON_RIGHT = 2
RIGHT_ON_LEFT = 3
NUCLEATION = 4
DEFECT = 5

PHI_L = 0
PHI_R = 1
NUC0 = 2

# per-sample scalar columns
COL_PHI_L = 0
COL_PHI_R = 1
COL_NUC0 = 2
COL_TOUCHED = 3
COL_LEFT_END = 4
COL_RIGHT_END = 5
N_COLS = 6

NO_PLATEAU = np.iinfo(np.int64).max


# xoshiro256** -- numba's np.random costs ~30 ns per draw through thread-local state

@njit(inline="always")
def _rotl(x, k):
    return (x << uint64(k)) | (x >> uint64(64 - k))


@njit(cache=True)
def next_u64(st):
    s0 = st[0]
    s1 = st[1]
    s2 = st[2]
    s3 = st[3]
    result = _rotl(s1 * uint64(5), 7) * uint64(9)
    t = s1 << uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    st[0] = s0
    st[1] = s1
    st[2] = s2
    st[3] = s3
    return result


@njit(cache=True)
def uniform(st):
    """Uniform on [0, 1)."""
    return (next_u64(st) >> uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def exponential(st, rate):
    return -np.log(1.0 - uniform(st)) / rate


def rng_state(seed):
    """Four-word generator state derived from an integer seed."""
    return np.random.SeedSequence(int(seed)).generate_state(4, dtype=np.uint64)


@njit(inline="always")
def apply_mark(s, h, cnt, kind, j, origin):
    """Apply one mark at edge index ``j``; return the height change of edge ``j``."""
    if kind >= NUCLEATION:
        s[j] += 1
        s[j + 1] -= 1
        h[j] += 1
        if j == origin:
            cnt[NUC0] += 1
        return 1
    if kind == LEFT_ON_RIGHT or kind == LEFT_ON_LEFT:
        src = j + 1
        step = -1
    else:
        src = j
        step = 1
    c = s[src]
    # only arrows matching the resident species act
    if kind == LEFT_ON_RIGHT or kind == RIGHT_ON_RIGHT:
        if c >= 0:
            return 0
        c = -1
    else:
        if c <= 0:
            return 0
        c = 1
    s[src] -= c
    s[src + step] += c
    d = -c * step
    h[j] += d
    if j == origin:
        if c > 0:
            cnt[PHI_L] += step
        else:
            cnt[PHI_R] += step
    return d


@njit(inline="always")
def seed_fronts(s, front, seeded_at_start):
    """Contamination starts at a boundary site once it can differ from the full lattice."""
    n = s.shape[0]
    if front[0] < 0 and (seeded_at_start or s[0] != 0):
        front[0] = 0
    if front[1] > n - 1 and (seeded_at_start or s[n - 1] != 0):
        front[1] = n - 1


@njit(inline="always")
def spread_fronts(front, j, core_lo, core_hi):
    """Any mark on the edge just inside a front carries contamination one site inward."""
    if front[0] >= 0 and j == front[0]:
        front[0] += 1
    if j == front[1] - 1:
        front[1] -= 1
    if front[0] >= core_lo or front[1] <= core_hi:
        front[2] = 1


@njit(cache=True)
def first_layer(h, origin):
    """Sites of the l- and r-end of the first-layer plateau over the origin edge."""
    if h[origin] < 1:
        return NO_PLATEAU, -NO_PLATEAU
    j = origin
    while j > 0 and h[j - 1] >= 1:
        j -= 1
    left = j  # site index of the l-end
    j = origin
    while j < h.shape[0] - 1 and h[j + 1] >= 1:
        j += 1
    right = j + 1
    return left, right


@njit(cache=True)
def record(k, h, cnt, front, origin, probe_lo, probe_hi, heights_out, cols_out):
    for p in range(probe_hi - probe_lo):
        heights_out[k, p] = h[probe_lo + p]
    cols_out[k, COL_PHI_L] = cnt[PHI_L]
    cols_out[k, COL_PHI_R] = cnt[PHI_R]
    cols_out[k, COL_NUC0] = cnt[NUC0]
    cols_out[k, COL_TOUCHED] = front[2]
    left, right = first_layer(h, origin)
    half = origin
    cols_out[k, COL_LEFT_END] = left - half if left != NO_PLATEAU else NO_PLATEAU
    cols_out[k, COL_RIGHT_END] = right - half if right != -NO_PLATEAU else -NO_PLATEAU


@njit(cache=True, nogil=True)
def replay(times, edges, kinds, half_width, lam_positive, sample_times,
           probe_lo, probe_hi, snap_s, snap_h):
    """Apply a mark log to the empty lattice, recording at ``sample_times``.

    ``snap_s``/``snap_h`` are either (n_samples, sites/edges) buffers filled
    with full snapshots or (0, 0) arrays to skip snapshots.
    """
    L = half_width
    s = np.zeros(2 * L + 1, np.int64)
    h = np.zeros(2 * L, np.int64)
    cnt = np.zeros(3, np.int64)
    front = np.array([-1, 2 * L + 1, 0], np.int64)
    core_lo = L - L // 2
    core_hi = L + L // 2
    origin = L
    ns = sample_times.shape[0]
    heights = np.zeros((ns, probe_hi - probe_lo), np.int64)
    cols = np.zeros((ns, N_COLS), np.int64)
    snaps = snap_s.shape[0] > 0
    seed_fronts(s, front, lam_positive)
    k = 0
    for m in range(times.shape[0]):
        t = times[m]
        while k < ns and sample_times[k] < t:
            record(k, h, cnt, front, origin, probe_lo, probe_hi, heights, cols)
            if snaps:
                snap_s[k, :] = s
                snap_h[k, :] = h
            k += 1
        j = edges[m] + L
        apply_mark(s, h, cnt, kinds[m], j, origin)
        seed_fronts(s, front, lam_positive)
        spread_fronts(front, j, core_lo, core_hi)
    while k < ns:
        record(k, h, cnt, front, origin, probe_lo, probe_hi, heights, cols)
        if snaps:
            snap_s[k, :] = s
            snap_h[k, :] = h
        k += 1
    return heights, cols, s, h


@njit(inline="always")
def _activate(i, s, active, pos):
    if s[i] != 0 and pos[i] < 0:
        pos[i] = active[0]
        active[0] += 1
        active[pos[i] + 1] = i
    elif s[i] == 0 and pos[i] >= 0:
        # swap-remove; active[0] holds the size, entries start at 1
        last = active[active[0]]
        active[pos[i] + 1] = last
        pos[last] = pos[i]
        pos[i] = -1
        active[0] -= 1


@njit(cache=True, nogil=True)
def gillespie(lam, lam0, half_width, horizon, rng, sample_times, probe_lo, probe_hi):
    """Active-site event loop: clocks only for non-empty sites and nucleations.

    A non-empty site fires at rate 1 and moves one of its particles to a
    uniformly chosen neighbour.  Each seeded contamination front carries an
    extra rate-2 clock standing in for the arrow marks on its edge.
    """
    L = half_width
    n_sites = 2 * L + 1
    n_edges = 2 * L
    s = np.zeros(n_sites, np.int64)
    h = np.zeros(n_edges, np.int64)
    cnt = np.zeros(3, np.int64)
    front = np.array([-1, n_sites, 0], np.int64)
    core_lo = L - L // 2
    core_hi = L + L // 2
    origin = L
    active = np.zeros(n_sites + 1, np.int64)
    pos = -np.ones(n_sites, np.int64)
    ns = sample_times.shape[0]
    heights = np.zeros((ns, probe_hi - probe_lo), np.int64)
    cols = np.zeros((ns, N_COLS), np.int64)
    lam_positive = lam > 0
    seed_fronts(s, front, lam_positive)
    nuc_rate = lam * n_edges
    t = 0.0
    k = 0
    n_events = 0
    while True:
        front_rate = 0.0
        if front[0] >= 0 and front[0] < n_sites - 1:
            front_rate += 2.0
        if front[1] <= n_sites - 1 and front[1] > 0:
            front_rate += 2.0
        total = nuc_rate + lam0 + active[0] + front_rate
        if total <= 0.0:
            break
        t += exponential(rng, total)
        if t > horizon:
            break
        while k < ns and sample_times[k] < t:
            record(k, h, cnt, front, origin, probe_lo, probe_hi, heights, cols)
            k += 1
        n_events += 1
        u = uniform(rng) * total
        if u < nuc_rate:
            j = min(int(u / lam), n_edges - 1)
            apply_mark(s, h, cnt, NUCLEATION, j, origin)
            _activate(j, s, active, pos)
            _activate(j + 1, s, active, pos)
            if front[0] < 0 or front[1] >= n_sites:
                seed_fronts(s, front, lam_positive)
            if j == front[0] or j == front[1] - 1:
                spread_fronts(front, j, core_lo, core_hi)
            continue
        u -= nuc_rate
        if u < lam0:
            apply_mark(s, h, cnt, DEFECT, origin, origin)
            _activate(origin, s, active, pos)
            _activate(origin + 1, s, active, pos)
            if front[0] < 0 or front[1] >= n_sites:
                seed_fronts(s, front, lam_positive)
            if origin == front[0] or origin == front[1] - 1:
                spread_fronts(front, origin, core_lo, core_hi)
            continue
        u -= lam0
        if u < active[0]:
            slot = min(int(u), active[0] - 1)
            i = active[slot + 1]
            go_right = (u - slot) >= 0.5
            if go_right:
                if i == n_sites - 1:
                    continue
                j = i
                kind = RIGHT_ON_LEFT if s[i] > 0 else RIGHT_ON_RIGHT
            else:
                if i == 0:
                    continue
                j = i - 1
                kind = LEFT_ON_LEFT if s[i] > 0 else LEFT_ON_RIGHT
            apply_mark(s, h, cnt, kind, j, origin)
            _activate(j, s, active, pos)
            _activate(j + 1, s, active, pos)
            if front[0] < 0 or front[1] >= n_sites:
                seed_fronts(s, front, lam_positive)
            continue
        u -= active[0]
        # front clock
        if front[0] >= 0 and front[0] < n_sites - 1 and u < 2.0:
            spread_fronts(front, front[0], core_lo, core_hi)
        else:
            spread_fronts(front, front[1] - 1, core_lo, core_hi)
    while k < ns:
        record(k, h, cnt, front, origin, probe_lo, probe_hi, heights, cols)
        k += 1
    return heights, cols, s, h, n_events


# --- coupled base/perturbed dynamics --------------------------------------

@njit(cache=True)
def _domination_check(s, xl, xr, ymax, ymin, lo, hi):
    """Count interior sites where n_x > X_l + X_r + (max Y - min Y)."""
    bad = 0
    for i in range(lo, hi):
        n = s[i] if s[i] > 0 else -s[i]
        if n > xl[i] + xr[i] + ymax[i] - ymin[i]:
            bad += 1
    return bad


@njit(cache=True)
def _coupled_record(k, s, h, cnt, s2, h2, cnt2, front, origin, probe_lo, probe_hi,
                    heights, heights2, cols, cols2, xl, xr,
                    ymax, ymin, y2max, y2min, checks, witness_lo, witness_hi):
    record(k, h, cnt, front, origin, probe_lo, probe_hi, heights, cols)
    record(k, h2, cnt2, front, origin, probe_lo, probe_hi, heights2, cols2)
    mono = 0
    for e in range(h.shape[0]):
        if h2[e] < h[e]:
            mono += 1
    checks[k, 0] = mono
    checks[k, 1] = _domination_check(s, xl, xr, ymax, ymin, witness_lo, witness_hi)
    checks[k, 2] = _domination_check(s2, xl, xr, y2max, y2min, witness_lo, witness_hi)


@njit(cache=True, nogil=True)
def coupled(times, edges, kinds, stream, lam, lam0, half_width, horizon, rng,
            sample_times, probe_lo, probe_hi):
    """Base and perturbed systems driven by one mark stream.

    With ``stream`` false the marks come from the arrays; otherwise they are
    drawn on the fly as a superposition of all families (rate ``2 + lam``
    per edge plus ``lam0`` on the origin edge).

    Returns probe heights and scalar columns for both systems, per-sample
    check counts ``[monotonicity, domination_base, domination_perturbed]``, virtual
    jump counts per sample interval ``[left_far, right_far, left_near,
    right_near]`` (far = source site outside {0, 1}), and the final
    occupancies and heights.
    """
    L = half_width
    n_sites = 2 * L + 1
    n_edges = 2 * L
    origin = L
    s = np.zeros(n_sites, np.int64)
    h = np.zeros(n_edges, np.int64)
    cnt = np.zeros(3, np.int64)
    s2 = np.zeros(n_sites, np.int64)
    h2 = np.zeros(n_edges, np.int64)
    cnt2 = np.zeros(3, np.int64)
    xl = np.zeros(n_sites, np.int64)
    xr = np.zeros(n_sites, np.int64)
    y = np.zeros(n_sites, np.int64)
    ymax = np.zeros(n_sites, np.int64)
    ymin = np.zeros(n_sites, np.int64)
    y2 = np.zeros(n_sites, np.int64)
    y2max = np.zeros(n_sites, np.int64)
    y2min = np.zeros(n_sites, np.int64)
    front = np.array([-1, n_sites, 0], np.int64)
    core_lo = L - L // 2
    core_hi = L + L // 2
    ns = sample_times.shape[0]
    heights = np.zeros((ns, probe_hi - probe_lo), np.int64)
    heights2 = np.zeros((ns, probe_hi - probe_lo), np.int64)
    cols = np.zeros((ns, N_COLS), np.int64)
    cols2 = np.zeros((ns, N_COLS), np.int64)
    checks = np.zeros((ns, 3), np.int64)
    # interval k collects jumps in (sample_{k-1}, sample_k]; the last row is after the final sample
    vjumps = np.zeros((ns + 1, 4), np.int64)
    lam_positive = lam > 0
    seed_fronts(s2, front, lam_positive)
    witness_lo = 1
    witness_hi = n_sites - 1
    bulk = (2.0 + lam) * n_edges
    total = bulk + lam0
    n_marks = times.shape[0]
    k = 0
    m = 0
    t = 0.0
    while True:
        if stream:
            if total <= 0.0:
                break
            t += exponential(rng, total)
            if t > horizon:
                break
            u = uniform(rng) * total
            if u < bulk:
                per = u / (2.0 + lam)
                j = min(int(per), n_edges - 1)
                w = (per - j) * (2.0 + lam)
                kind = min(int(w * 2.0), 3) if w < 2.0 else NUCLEATION
            else:
                j = origin
                kind = DEFECT
        else:
            if m == n_marks:
                break
            t = times[m]
            j = edges[m] + L
            kind = np.int64(kinds[m])
            m += 1
        while k < ns and sample_times[k] < t:
            _coupled_record(k, s, h, cnt, s2, h2, cnt2, front, origin, probe_lo, probe_hi,
                            heights, heights2, cols, cols2, xl, xr,
                            ymax, ymin, y2max, y2min, checks, witness_lo, witness_hi)
            k += 1
        if kind == DEFECT:
            apply_mark(s2, h2, cnt2, kind, j, origin)
            # Y_x = N(<x,x+1>) - N(<x-1,x>)
            y2[j] += 1
            if y2[j] > y2max[j]:
                y2max[j] = y2[j]
            y2[j + 1] -= 1
            if y2[j + 1] < y2min[j + 1]:
                y2min[j + 1] = y2[j + 1]
        elif kind == NUCLEATION:
            apply_mark(s, h, cnt, kind, j, origin)
            apply_mark(s2, h2, cnt2, kind, j, origin)
            y[j] += 1
            if y[j] > ymax[j]:
                ymax[j] = y[j]
            y[j + 1] -= 1
            if y[j + 1] < ymin[j + 1]:
                ymin[j + 1] = y[j + 1]
            y2[j] += 1
            if y2[j] > y2max[j]:
                y2max[j] = y2[j]
            y2[j + 1] -= 1
            if y2[j + 1] < y2min[j + 1]:
                y2min[j + 1] = y2[j + 1]
        else:
            if kind == LEFT_ON_LEFT or kind == LEFT_ON_RIGHT:
                src = j + 1
                dst = j
            else:
                src = j
                dst = j + 1
            # reflected walks of the domination witness see every arrow
            if kind == LEFT_ON_LEFT or kind == RIGHT_ON_LEFT:
                xl[dst] += 1
                if xl[src] > 0:
                    xl[src] -= 1
            else:
                xr[dst] += 1
                if xr[src] > 0:
                    xr[src] -= 1
            d1 = apply_mark(s, h, cnt, kind, j, origin)
            d2 = apply_mark(s2, h2, cnt2, kind, j, origin)
            if d1 != d2:
                # the discrepancy moved across edge j in the arrow's direction
                col = 0 if dst < src else 1
                if src == origin or src == origin + 1:
                    col += 2
                vjumps[k, col] += 1
        if front[0] < 0 or front[1] >= n_sites:
            seed_fronts(s2, front, lam_positive)
            seed_fronts(s, front, lam_positive)
        if j == front[0] or j == front[1] - 1:
            spread_fronts(front, j, core_lo, core_hi)
    while k < ns:
        _coupled_record(k, s, h, cnt, s2, h2, cnt2, front, origin, probe_lo, probe_hi,
                        heights, heights2, cols, cols2, xl, xr,
                        ymax, ymin, y2max, y2min, checks, witness_lo, witness_hi)
        k += 1
    return heights, heights2, cols, cols2, checks, vjumps, s, h, s2, h2


# --- half-line wall model and exclusion process ----------------------------

@njit(cache=True, nogil=True)
def halfline(lam0, horizon, rng, window, sample_times):
    """Zero-range walk of right boundaries on sites 1..window-1, absorbed at 0.

    ``n[x]`` counts pedestal right boundaries at site ``x``.  Births put a
    boundary at site 1 at rate ``lam0``; each non-empty site moves one
    boundary left or right at total rate 1.
    Returns (N at samples, exhausted flag, final occupancy).
    """
    n = np.zeros(window + 1, np.int64)
    active = np.zeros(window + 2, np.int64)
    pos = -np.ones(window + 1, np.int64)
    ns = sample_times.shape[0]
    out = np.zeros(ns, np.int64)
    total_n = 0
    exhausted = False
    t = 0.0
    k = 0
    while True:
        total = lam0 + active[0]
        t += exponential(rng, total)
        if t > horizon:
            break
        while k < ns and sample_times[k] < t:
            out[k] = total_n
            k += 1
        u = uniform(rng) * total
        if u < lam0:
            n[1] += 1
            total_n += 1
            _activate(1, n, active, pos)
            continue
        u -= lam0
        slot = min(int(u), active[0] - 1)
        x = active[slot + 1]
        n[x] -= 1
        if (u - slot) < 0.5:
            y = x - 1
        else:
            y = x + 1
        if y == 0:
            total_n -= 1
        else:
            if y >= window:
                exhausted = True
                y = window
            n[y] += 1
            _activate(y, n, active, pos)
        _activate(x, n, active, pos)
    while k < ns:
        out[k] = total_n
        k += 1
    return out, exhausted, n


@njit(cache=True, nogil=True)
def exclusion_step(horizon, rng, window, sample_times):
    """Symmetric exclusion on sites -window..window from the step {x <= 0}.

    Each particle tries each neighbour at rate 1/2.  Returns the rightmost
    particle at samples, an exhaustion flag (a hole reached the left end or
    a particle the right end) and the final occupation.
    """
    n_sites = 2 * window + 1
    occ = np.zeros(n_sites, np.int64)
    occ[: window + 1] = 1
    # bonds (i, i+1) with exactly one particle are the only ones that can act
    bond_active = np.zeros(n_sites + 1, np.int64)
    bpos = -np.ones(n_sites, np.int64)
    ns = sample_times.shape[0]
    out = np.zeros(ns, np.int64)
    rightmost = window
    exhausted = False

    for b in range(n_sites - 1):
        if occ[b] != occ[b + 1]:
            bpos[b] = bond_active[0]
            bond_active[0] += 1
            bond_active[bpos[b] + 1] = b
    t = 0.0
    k = 0
    while bond_active[0] > 0:
        total = 0.5 * bond_active[0]
        t += exponential(rng, total)
        if t > horizon:
            break
        while k < ns and sample_times[k] < t:
            out[k] = rightmost - window
            k += 1
        slot = min(int(uniform(rng) * bond_active[0]), bond_active[0] - 1)
        b = bond_active[slot + 1]
        occ[b], occ[b + 1] = occ[b + 1], occ[b]
        if occ[b + 1] == 1:
            if b == rightmost:
                rightmost = b + 1
            if b + 1 == n_sites - 1:
                exhausted = True
        else:
            if b + 1 == rightmost:
                rightmost = b
            if b == 0:
                exhausted = True
        for c in range(b - 1, b + 2):
            if c < 0 or c >= n_sites - 1:
                continue
            want = occ[c] != occ[c + 1]
            if want and bpos[c] < 0:
                bpos[c] = bond_active[0]
                bond_active[0] += 1
                bond_active[bpos[c] + 1] = c
            elif not want and bpos[c] >= 0:
                last = bond_active[bond_active[0]]
                bond_active[bpos[c] + 1] = last
                bpos[last] = bpos[c]
                bpos[c] = -1
                bond_active[0] -= 1
    while k < ns:
        out[k] = rightmost - window
        k += 1
    return out, exhausted, occ
