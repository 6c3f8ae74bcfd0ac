"""Jit-compiled kernels shared by the public API and the trial engine.

Every state transformation in the package bottoms out here, operating
in place on plain arrays:

* ``flips``/``walls`` -- uint8 arrays of length L (spins and bonds).
* ``kinds`` -- int64 array of length L with the local move type per site.
* ``counts`` -- int64 array ``[n_create, n_annihilate, n_hop]``.
* patch layout -- ``lo``, ``hi``, ``center`` (int64, one entry per patch)
  and ``bond_patch`` (int64, -1 for unmeasured bonds).
* patch records -- ``occ`` (uint8), ``dbond`` (int64), ``tdet``, ``t1``,
  ``t2`` (float64), one entry per patch.

Bond ``i`` sits between sites ``i`` and ``i + 1 (mod L)``.
"""

import math

import numpy as np
from numba import njit

CREATE = 0
ANNIHILATE = 1
HOP_LEFT = 2
HOP_RIGHT = 3

ERF = 0
DENSITY = 1
FULL_BAYES = 2


# ---------------------------------------------------------------- chain ops


@njit(cache=True)
def flip_site(flips, walls, site):
    L = flips.shape[0]
    flips[site] ^= 1
    walls[(site - 1 + L) % L] ^= 1
    walls[site] ^= 1


@njit(cache=True)
def dswap(flips, walls, i):
    L = flips.shape[0]
    j = (i + 1) % L
    if walls[i] != walls[j]:
        flip_site(flips, walls, j)


@njit(cache=True)
def shuttle(flips, walls, frm, to, direction):
    """Step the wall value at ``frm`` to ``to`` with adjacent DSWAPs."""
    L = flips.shape[0]
    if direction > 0:
        steps = (to - frm + L) % L
        for k in range(steps):
            dswap(flips, walls, (frm + k) % L)
    else:
        steps = (frm - to + L) % L
        for k in range(steps):
            dswap(flips, walls, (frm - k - 1 + L) % L)


@njit(cache=True)
def fuse_arc(a, b, L):
    """First site and length of the spin run that joins bonds a and b."""
    n_right = (b - a + L) % L
    n_left = L - n_right
    right_start = (a + 1) % L
    left_start = (b + 1) % L
    if n_right < n_left:
        return right_start, n_right
    if n_left < n_right:
        return left_start, n_left
    # equal arcs: the one holding the smaller site index wins
    right_min = 0 if right_start + n_right > L else right_start
    left_min = 0 if left_start + n_left > L else left_start
    if right_min <= left_min:
        return right_start, n_right
    return left_start, n_left


@njit(cache=True)
def fuse(flips, walls, a, b):
    L = flips.shape[0]
    start, n = fuse_arc(a, b, L)
    for k in range(n):
        flip_site(flips, walls, (start + k) % L)
    return n


@njit(cache=True)
def ring_distance(a, b, L):
    d = abs(a - b)
    return min(d, L - d)


# ------------------------------------------------------------- bath events


@njit(cache=True)
def classify(walls, site):
    L = walls.shape[0]
    left = walls[(site - 1 + L) % L]
    right = walls[site]
    if left == 0 and right == 0:
        return CREATE
    if left == 1 and right == 1:
        return ANNIHILATE
    if left == 1:
        return HOP_RIGHT
    return HOP_LEFT


@njit(cache=True)
def classify_all(walls, kinds, counts):
    counts[:] = 0
    for s in range(walls.shape[0]):
        k = classify(walls, s)
        kinds[s] = k
        counts[min(k, 2)] += 1


@njit(cache=True)
def reclassify_around(walls, kinds, counts, site):
    L = walls.shape[0]
    for d in range(-1, 2):
        s = (site + d + L) % L
        new = classify(walls, s)
        old = kinds[s]
        if new != old:
            counts[min(old, 2)] -= 1
            counts[min(new, 2)] += 1
            kinds[s] = new


@njit(cache=True)
def total_rate(counts, r_create, r_ann, r_hop):
    return counts[0] * r_create + counts[1] * r_ann + counts[2] * r_hop


@njit(cache=True)
def select_site(kinds, counts, r_create, r_ann, r_hop, rng):
    """Pick a site with probability proportional to its move rate."""
    w0 = counts[0] * r_create
    w1 = counts[1] * r_ann
    w2 = counts[2] * r_hop
    u = rng.random() * (w0 + w1 + w2)
    if u < w0 and counts[0] > 0:
        cls = 0
    elif u < w0 + w1 and counts[1] > 0:
        cls = 1
    elif counts[2] > 0:
        cls = 2
    elif counts[1] > 0:
        cls = 1
    else:
        cls = 0
    k = int(rng.random() * counts[cls])
    if k >= counts[cls]:
        k = counts[cls] - 1
    for s in range(kinds.shape[0]):
        if min(kinds[s], 2) == cls:
            if k == 0:
                return s
            k -= 1
    return -1


@njit(cache=True)
def evolve(flips, walls, kinds, counts, r_create, r_ann, r_hop, rng, t_now, t_end):
    """Run the chain from t_now until the next event would pass t_end."""
    t = t_now
    n = 0
    while True:
        total = total_rate(counts, r_create, r_ann, r_hop)
        t_next = t + rng.exponential(1.0 / total)
        if t_next > t_end:
            return n
        site = select_site(kinds, counts, r_create, r_ann, r_hop, rng)
        flip_site(flips, walls, site)
        reclassify_around(walls, kinds, counts, site)
        t = t_next
        n += 1


@njit(cache=True)
def occupancy_times(flips, walls, r_create, r_ann, r_hop, rng, n_events, n_batches):
    """Time spent in each configuration, split into equal-event batches.

    Configurations are indexed by the flip bits read as a little-endian
    integer, so this is only meant for small chains.
    """
    L = flips.shape[0]
    kinds = np.zeros(L, dtype=np.int64)
    counts = np.zeros(3, dtype=np.int64)
    classify_all(walls, kinds, counts)
    out = np.zeros((n_batches, 1 << L))
    code = 0
    for s in range(L):
        code |= int(flips[s]) << s
    per_batch = n_events // n_batches
    for b in range(n_batches):
        for _ in range(per_batch):
            total = total_rate(counts, r_create, r_ann, r_hop)
            out[b, code] += rng.exponential(1.0 / total)
            site = select_site(kinds, counts, r_create, r_ann, r_hop, rng)
            flip_site(flips, walls, site)
            reclassify_around(walls, kinds, counts, site)
            code ^= 1 << site
    return out


# ---------------------------------------------------------------- decoding


@njit(cache=True)
def fusion_probability(variant, x, dt, D, L, r_create):
    if variant == ERF:
        return math.erfc(x / (2.0 * math.sqrt(D * dt)))
    if variant == DENSITY:
        v = math.exp(-x * x / (2.0 * D * dt)) / (2.0 * math.pi * D * dt)
        return min(max(v, 0.0), 1.0)
    pe = math.erfc(x / (2.0 * math.sqrt(D * dt)))
    delta = (dt * L * r_create) ** 2
    if pe <= 0.0:
        return 0.0
    return pe / (pe + delta)


@njit(cache=True)
def decayed_age(age0, t_empty, t, tau):
    return age0 * math.exp(-(t - t_empty) / tau)


@njit(cache=True)
def mark_emptied(p, occ, tdet, t1, t2, t, tracker):
    """Patch read empty without a correction: remember the defect's age."""
    occ[p] = 0
    if tracker:
        t2[p] = t - tdet[p]
        t1[p] = t


@njit(cache=True)
def clear_after_correction(p, occ, t1, t2, t):
    occ[p] = 0
    t1[p] = t
    t2[p] = 0.0


@njit(cache=True)
def redetect(p, center, occ, tdet, t1, t2, t, L, D, r_create, period,
             tau, threshold, rng):
    """Age bookkeeping for a defect newly seen on patch ``p``.

    Returns the donor patch index, or -1 when no memory was transferred.
    """
    age = decayed_age(t2[p], t1[p], t, tau)
    if age >= threshold:
        tdet[p] = t - age
        t2[p] = age
        t1[p] = t
        return p
    P = occ.shape[0]
    weights = np.zeros(P)
    none_w = 1.0
    any_cand = False
    for j in range(P):
        if j == p or occ[j]:
            continue
        if decayed_age(t2[j], t1[j], t, tau) < threshold:
            continue
        dt = t - t1[j]
        if dt <= 0.0:
            dt = period
        x = ring_distance(center[p], center[j], L)
        s = fusion_probability(FULL_BAYES, x, dt, D, L, r_create)
        weights[j] = s
        none_w *= 1.0 - s
        any_cand = True
    donor = -1
    if any_cand:
        u = rng.random() * (weights.sum() + none_w)
        acc = 0.0
        for j in range(P):
            if weights[j] > 0.0:
                acc += weights[j]
                if u < acc:
                    donor = j
                    break
    t1[p] = t
    if donor >= 0:
        age = decayed_age(t2[donor], t1[donor], t, tau)
        tdet[p] = t - age
        t2[p] = age
        t2[donor] = 0.0
    else:
        t2[p] = 0.0
    return donor


@njit(cache=True)
def measure(walls, lo, hi, center, occ, dbond, tdet, t1, t2, newly, t,
            tracker, L, D, r_create, period, tau, threshold, rng):
    """Read the measured bonds; returns the number of new detections."""
    P = lo.shape[0]
    n_new = 0
    for p in range(P):
        newly[p] = 0
        best = -1
        for b in range(lo[p], hi[p] + 1):
            if walls[b] and (best < 0 or abs(b - center[p]) < abs(best - center[p])):
                best = b
        if best >= 0:
            if not occ[p]:
                occ[p] = 1
                tdet[p] = t
                newly[p] = 1
                n_new += 1
            elif tracker:
                t1[p] = t
            dbond[p] = best
        elif occ[p]:
            mark_emptied(p, occ, tdet, t1, t2, t, tracker)
    if tracker:
        for p in range(P):
            if newly[p]:
                redetect(p, center, occ, tdet, t1, t2, t, L, D, r_create,
                         period, tau, threshold, rng)
    return n_new


@njit(cache=True)
def center_defects(flips, walls, lo, hi, center, bond_patch, occ, dbond, t1, t2, t):
    """Fuse in-patch pairs, then shuttle lone defects to their patch centers."""
    L = flips.shape[0]
    P = lo.shape[0]
    n_fused = 0
    for p in range(P):
        if not occ[p]:
            continue
        while True:
            first = -1
            second = -1
            for b in range(lo[p], hi[p] + 1):
                if walls[b]:
                    if first < 0:
                        first = b
                    elif second < 0:
                        second = b
            if second < 0:
                break
            fuse(flips, walls, first, second)
            n_fused += 1
        if first < 0:
            clear_after_correction(p, occ, t1, t2, t)
            continue
        c = center[p]
        if first != c:
            direction = 1 if first < c else -1
            trail = (first - direction + L) % L
            carry = (first == lo[p] or first == hi[p]) and bond_patch[trail] < 0 \
                and walls[trail] == 1
            shuttle(flips, walls, first, c, direction)
            if carry:
                shuttle(flips, walls, trail, (c - direction + L) % L, direction)
                fuse(flips, walls, (c - direction + L) % L, c)
                n_fused += 1
                clear_after_correction(p, occ, t1, t2, t)
                continue
        dbond[p] = c
    return n_fused


@njit(cache=True)
def pair_and_correct(flips, walls, occ, dbond, tdet, t1, t2, t, variant, D,
                     r_create, period, rng, log):
    """Greedy Bernoulli pairing; accepted pairs are written into ``log``."""
    L = flips.shape[0]
    P = occ.shape[0]
    idx = np.empty(P, dtype=np.int64)
    n = 0
    for p in range(P):
        if occ[p]:
            idx[n] = p
            n += 1
    if n < 2:
        return 0
    m = n * (n - 1) // 2
    pa = np.empty(m, dtype=np.int64)
    pb = np.empty(m, dtype=np.int64)
    pr = np.empty(m)
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            a = idx[i]
            b = idx[j]
            dt = t - min(tdet[a], tdet[b])
            if dt <= 0.0:
                dt = period
            x = ring_distance(dbond[a], dbond[b], L)
            pa[k] = a
            pb[k] = b
            pr[k] = fusion_probability(variant, x, dt, D, L, r_create)
            k += 1
    order = np.argsort(-pr, kind="mergesort")
    n_acc = 0
    for q in range(m):
        e = order[q]
        a = pa[e]
        b = pb[e]
        if not (occ[a] and occ[b]):
            continue
        if rng.random() < pr[e]:
            fuse(flips, walls, dbond[a], dbond[b])
            clear_after_correction(a, occ, t1, t2, t)
            clear_after_correction(b, occ, t1, t2, t)
            log[n_acc, 0] = a
            log[n_acc, 1] = b
            n_acc += 1
    return n_acc


@njit(cache=True)
def decode_cycle(flips, walls, lo, hi, center, bond_patch, occ, dbond, tdet,
                 t1, t2, newly, log, t, variant, D, r_create, period, tracker,
                 tau, threshold, rng):
    L = flips.shape[0]
    measure(walls, lo, hi, center, occ, dbond, tdet, t1, t2, newly, t,
            tracker, L, D, r_create, period, tau, threshold, rng)
    center_defects(flips, walls, lo, hi, center, bond_patch, occ, dbond, t1, t2, t)
    return pair_and_correct(flips, walls, occ, dbond, tdet, t1, t2, t, variant,
                            D, r_create, period, rng, log)


# ------------------------------------------------------------ trial engine


@njit(cache=True)
def run_trial(L, r_create, r_ann, r_hop, decoder_on, lo, hi, center,
              bond_patch, variant, D, chi, tracker, tau, threshold, rng,
              max_events, max_time):
    """Simulate one memory from the clean codeword until majority failure.

    Returns ``(time, n_events, n_cycles, truncated)``.  Measurement epochs
    are skipped while fewer than two patches are occupied and no bath event
    has happened since the last cycle: such epochs cannot change anything.
    """
    flips = np.zeros(L, dtype=np.uint8)
    walls = np.zeros(L, dtype=np.uint8)
    kinds = np.zeros(L, dtype=np.int64)
    counts = np.zeros(3, dtype=np.int64)
    classify_all(walls, kinds, counts)
    P = lo.shape[0]
    occ = np.zeros(P, dtype=np.uint8)
    dbond = np.zeros(P, dtype=np.int64)
    tdet = np.zeros(P)
    t1 = np.zeros(P)
    t2 = np.zeros(P)
    newly = np.zeros(P, dtype=np.uint8)
    log = np.zeros((P, 2), dtype=np.int64)
    period = 1.0 / chi if decoder_on else 0.0

    weight = 0
    t = 0.0
    epoch = 1
    idle = True
    n_events = 0
    n_cycles = 0
    while True:
        total = total_rate(counts, r_create, r_ann, r_hop)
        t_ev = t + rng.exponential(1.0 / total)
        if decoder_on and not idle:
            t_ep = epoch * period
            if t_ev >= t_ep:
                if t_ep > max_time:
                    return max_time, n_events, n_cycles, True
                t = t_ep
                epoch += 1
                decode_cycle(flips, walls, lo, hi, center, bond_patch, occ,
                             dbond, tdet, t1, t2, newly, log, t, variant, D,
                             r_create, period, tracker, tau, threshold, rng)
                n_cycles += 1
                classify_all(walls, kinds, counts)
                weight = 0
                for s in range(L):
                    weight += flips[s]
                if 2 * weight > L:
                    return t, n_events, n_cycles, False
                n_occ = 0
                for p in range(P):
                    n_occ += occ[p]
                idle = n_occ < 2
                continue
        if t_ev > max_time:
            return max_time, n_events, n_cycles, True
        if n_events >= max_events:
            return t, n_events, n_cycles, True
        site = select_site(kinds, counts, r_create, r_ann, r_hop, rng)
        weight += 1 - 2 * int(flips[site])
        flip_site(flips, walls, site)
        reclassify_around(walls, kinds, counts, site)
        t = t_ev
        n_events += 1
        if 2 * weight > L:
            return t, n_events, n_cycles, False
        if decoder_on:
            idle = False
            nxt = int(math.floor(t * chi)) + 1
            if nxt > epoch:
                epoch = nxt
