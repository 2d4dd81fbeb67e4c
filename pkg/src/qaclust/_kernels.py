"""Compiled per-draw arithmetic for the samplers' inner loops."""

import math

import numpy as np
from numba import njit

# ---------------------------------------------------------------------------
# contingency tables


@njit(cache=True)
def table_move(counts, row_max, left, other, old, new):
    if left:
        r0, c0, r1, c1 = old, other, new, other
    else:
        r0, c0, r1, c1 = other, old, other, new
    counts[r0, c0] -= 1
    if counts[r0, c0] + 1 == row_max[r0]:
        best = counts[r0, 0]
        for q in range(1, counts.shape[1]):
            if counts[r0, q] > best:
                best = counts[r0, q]
        row_max[r0] = best
    counts[r1, c1] += 1
    if counts[r1, c1] > row_max[r1]:
        row_max[r1] = counts[r1, c1]


@njit(cache=True)
def candidate_row_max_sums(counts, row_max, other, old, out):
    """Adds, for every candidate row, the row-maximum sum after moving one
    left-side point from (old, other) to (c, other) into ``out``."""
    k = counts.shape[0]
    rm_old = row_max[old]
    if counts[old, other] == rm_old:
        rm_old = -1
        for q in range(k):
            v = counts[old, q] - (1 if q == other else 0)
            if v > rm_old:
                rm_old = v
    base = 0
    for r in range(k):
        base += rm_old if r == old else row_max[r]
    for c in range(k):
        rm = rm_old if c == old else row_max[c]
        v = counts[c, other] + (0 if c == old else 1)
        out[c] += base + (v - rm if v > rm else 0)


@njit(cache=True)
def chain_candidates(fwd_counts, fwd_max, bwd_counts, bwd_max, reps, j, i):
    m, n = reps.shape
    k = fwd_counts.shape[1]
    out = np.zeros(k, dtype=np.int64)
    old = reps[j, i]
    candidate_row_max_sums(fwd_counts[j], fwd_max[j], reps[(j + 1) % m, i], old, out)
    candidate_row_max_sums(bwd_counts[j], bwd_max[j], reps[(j - 1) % m, i], old, out)
    res = np.empty(k)
    for c in range(k):
        res[c] = out[c] / n
    return res


@njit(cache=True)
def chain_relabel(fwd_counts, fwd_max, bwd_counts, bwd_max, reps, j, i, c):
    m = reps.shape[0]
    old = reps[j, i]
    if old == c:
        return
    nxt = (j + 1) % m
    prv = (j - 1) % m
    table_move(fwd_counts[j], fwd_max[j], True, reps[nxt, i], old, c)
    table_move(bwd_counts[j], bwd_max[j], True, reps[prv, i], old, c)
    table_move(fwd_counts[prv], fwd_max[prv], False, reps[prv, i], old, c)
    table_move(bwd_counts[nxt], bwd_max[nxt], False, reps[nxt, i], old, c)
    reps[j, i] = c


# ---------------------------------------------------------------------------
# sampling


@njit(cache=True)
def sample_logits(energies, purities, beta_over_m, f, u):
    """Draw a label from softmax(-beta_over_m * E + f * P) using uniform ``u``.

    ``f = inf`` restricts the draw to the purity maximisers.
    """
    k = energies.shape[0]
    logits = np.empty(k)
    if math.isinf(f):
        pmax = purities.max()
        for c in range(k):
            logits[c] = -beta_over_m * energies[c] if purities[c] == pmax else -np.inf
    else:
        for c in range(k):
            logits[c] = -beta_over_m * energies[c] + f * purities[c]
    top = logits.max()
    total = 0.0
    w = np.empty(k)
    for c in range(k):
        w[c] = math.exp(logits[c] - top)
        total += w[c]
    target = u * total
    acc = 0.0
    for c in range(k):
        acc += w[c]
        if target < acc:
            return c
    # u * total can round to total
    for c in range(k - 1, -1, -1):
        if w[c] > 0:
            return c
    return k - 1


# ---------------------------------------------------------------------------
# squared loss


@njit(cache=True)
def _sq_loss(N, s, q):
    if N == 0:
        return 0.0
    t = 0.0
    for a in range(s.shape[0]):
        t += s[a] * s[a]
    return q - t / N


@njit(cache=True)
def sq_candidates(counts, sums, sqsum, loss, x, q, o):
    k, d = sums.shape
    s = np.empty(d)
    for a in range(d):
        s[a] = sums[o, a] - x[a]
    loss_o = _sq_loss(counts[o] - 1, s, sqsum[o] - q)
    total = 0.0
    for c in range(k):
        total += loss_o if c == o else loss[c]
    out = np.empty(k)
    for c in range(k):
        if c == o:
            out[c] = total - loss_o + loss[o]
            continue
        for a in range(d):
            s[a] = sums[c, a] + x[a]
        out[c] = total - loss[c] + _sq_loss(counts[c] + 1, s, sqsum[c] + q)
    return out


@njit(cache=True)
def sq_move(counts, sums, sqsum, loss, x, q, o, c):
    d = sums.shape[1]
    counts[o] -= 1
    counts[c] += 1
    for a in range(d):
        sums[o, a] -= x[a]
        sums[c, a] += x[a]
    sqsum[o] -= q
    sqsum[c] += q
    loss[o] = _sq_loss(counts[o], sums[o], sqsum[o])
    loss[c] = _sq_loss(counts[c], sums[c], sqsum[c])


# ---------------------------------------------------------------------------
# normal-inverse-Wishart marginal


@njit(cache=True)
def _chol_logdet(A):
    """log|A| for symmetric positive-definite A (overwritten)."""
    d = A.shape[0]
    ld = 0.0
    for j in range(d):
        s = A[j, j]
        for p in range(j):
            s -= A[j, p] * A[j, p]
        if s <= 0.0:
            return np.nan
        ljj = math.sqrt(s)
        A[j, j] = ljj
        ld += 2.0 * math.log(ljj)
        for r in range(j + 1, d):
            t = A[r, j]
            for p in range(j):
                t -= A[r, p] * A[j, p]
            A[r, j] = t / ljj
    return ld


@njit(cache=True)
def niw_logml(N, s, O, base, k0m0, kN, const_N, half_nN, work):
    """Log marginal of one cluster from (count, sum, sum of outer products)."""
    if N == 0:
        return 0.0
    d = s.shape[0]
    inv = 1.0 / kN[N]
    for a in range(d):
        va = s[a] + k0m0[a]
        for b in range(d):
            work[a, b] = base[a, b] + O[a, b] - va * (s[b] + k0m0[b]) * inv
    return const_N[N] - half_nN[N] * _chol_logdet(work)


@njit(cache=True)
def mog_candidates(counts, sums, outers, logml, x, xx, o, base, k0m0, kN, const_N, half_nN, lg_size, dm_const, alpha):
    k, d = sums.shape
    work = np.empty((d, d))
    s = np.empty(d)
    O = np.empty((d, d))
    for a in range(d):
        s[a] = sums[o, a] - x[a]
        for b in range(d):
            O[a, b] = outers[o, a, b] - xx[a, b]
    n_o = counts[o] - 1
    lml_o = niw_logml(n_o, s, O, base, k0m0, kN, const_N, half_nN, work)
    total = dm_const
    for c in range(k):
        if c == o:
            total += lg_size[n_o] + lml_o
        else:
            total += lg_size[counts[c]] + logml[c]
    out = np.empty(k)
    for c in range(k):
        if c == o:
            out[c] = -(total + math.log(n_o + alpha) + logml[o] - lml_o)
            continue
        for a in range(d):
            s[a] = sums[c, a] + x[a]
            for b in range(d):
                O[a, b] = outers[c, a, b] + xx[a, b]
        added = niw_logml(counts[c] + 1, s, O, base, k0m0, kN, const_N, half_nN, work)
        out[c] = -(total + math.log(counts[c] + alpha) + added - logml[c])
    return out


@njit(cache=True)
def mog_move(counts, sums, outers, logml, x, xx, o, c, base, k0m0, kN, const_N, half_nN):
    d = sums.shape[1]
    counts[o] -= 1
    counts[c] += 1
    for a in range(d):
        sums[o, a] -= x[a]
        sums[c, a] += x[a]
        for b in range(d):
            outers[o, a, b] -= xx[a, b]
            outers[c, a, b] += xx[a, b]
    work = np.empty((d, d))
    logml[o] = niw_logml(counts[o], sums[o], outers[o], base, k0m0, kN, const_N, half_nN, work)
    logml[c] = niw_logml(counts[c], sums[c], outers[c], base, k0m0, kN, const_N, half_nN, work)
