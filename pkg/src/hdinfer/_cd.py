"""Compiled inner loops: weighted Lasso coordinate descent and average linkage."""
import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@numba.njit(cache=True, nogil=True)
def _sweep(X, w, r, beta, xx, lam, n, cols, ncols):
    """One cyclic pass over `cols`; returns the largest coefficient change."""
    dmax = 0.0
    for k in range(ncols):
        j = cols[k]
        if xx[j] <= 0.0:
            continue
        g = 0.0
        for i in range(n):
            g += w[i] * X[i, j] * r[i]
        g = g / n + xx[j] * beta[j]
        b_new = _soft(g, lam) / xx[j]
        d = b_new - beta[j]
        if d != 0.0:
            for i in range(n):
                r[i] -= d * X[i, j]
            beta[j] = b_new
            if abs(d) > dmax:
                dmax = abs(d)
    return dmax


@numba.njit(cache=True, nogil=True)
def lasso_cd(X, w, r, beta, xx, lam, tol, max_iter, cols):
    """Minimise sum(w * (z - X beta)^2) / (2n) + lam * |beta|_1 over `cols`.

    Works in place; `r` holds the current residual z - X beta. Coordinates
    outside `cols` are left untouched (the caller checks them via KKT).
    Active-set iteration: a sweep over `cols`, then sweeps over the nonzero
    subset until converged, repeated until a sweep over `cols` changes nothing
    by more than `tol`. Returns the number of sweeps, or -1 at `max_iter`.
    """
    n = X.shape[0]
    ncols = cols.shape[0]
    active = np.empty(ncols, dtype=np.int64)
    it = 0
    while it < max_iter:
        dmax = _sweep(X, w, r, beta, xx, lam, n, cols, ncols)
        it += 1
        if dmax < tol:
            return it
        na = 0
        for k in range(ncols):
            if beta[cols[k]] != 0.0:
                active[na] = cols[k]
                na += 1
        while it < max_iter:
            dmax = _sweep(X, w, r, beta, xx, lam, n, active, na)
            it += 1
            if dmax < tol:
                break
    return -1


@numba.njit(cache=True, nogil=True)
def _pair_less(d1, a1, b1, d2, a2, b2):
    if d1 < d2:
        return True
    if d1 > d2:
        return False
    if a1 != a2:
        return a1 < a2
    return b1 < b2


@numba.njit(cache=True, nogil=True)
def average_linkage(D):
    """Agglomerative average linkage on a dissimilarity matrix.

    Leaves are assumed to be in canonical (sorted-name) order, so ties in
    dissimilarity are broken by the smallest leaf index of each cluster.
    Returns (merges[k] = (id_a, id_b), heights, sizes) with scipy-style ids:
    leaves 0..p-1, the k-th merge creates id p + k.
    """
    p = D.shape[0]
    D = D.copy()
    size = np.ones(p, dtype=np.int64)
    minlab = np.arange(p)
    cid = np.arange(p)
    alive = np.ones(p, dtype=np.bool_)
    nn = np.full(p, -1, dtype=np.int64)
    nnd = np.full(p, np.inf)
    merges = np.empty((max(p - 1, 0), 2), dtype=np.int64)
    heights = np.empty(max(p - 1, 0))
    sizes = np.empty(max(p - 1, 0), dtype=np.int64)

    for i in range(p):
        _row_best(D, i, alive, minlab, nn, nnd, p)

    for step in range(p - 1):
        bi = -1
        for i in range(p):
            if not alive[i] or nn[i] < 0:
                continue
            if bi < 0:
                bi = i
                continue
            a_i, b_i = _key(minlab, i, nn[i])
            a_b, b_b = _key(minlab, bi, nn[bi])
            if _pair_less(nnd[i], a_i, b_i, nnd[bi], a_b, b_b):
                bi = i
        a = bi
        b = nn[bi]
        h = nnd[bi]
        ia, ib = cid[a], cid[b]
        if minlab[a] <= minlab[b]:
            merges[step, 0] = ia
            merges[step, 1] = ib
        else:
            merges[step, 0] = ib
            merges[step, 1] = ia
        heights[step] = h
        sa, sb = size[a], size[b]
        sizes[step] = sa + sb
        # Lance-Williams update for average linkage; slot a keeps the merged cluster
        for k in range(p):
            if alive[k] and k != a and k != b:
                dk = (sa * D[a, k] + sb * D[b, k]) / (sa + sb)
                D[a, k] = dk
                D[k, a] = dk
        alive[b] = False
        size[a] = sa + sb
        minlab[a] = min(minlab[a], minlab[b])
        cid[a] = p + step
        nn[b] = -1
        nnd[b] = np.inf
        _row_best(D, a, alive, minlab, nn, nnd, p)
        for k in range(p):
            if not alive[k] or k == a:
                continue
            if nn[k] == a or nn[k] == b:
                _row_best(D, k, alive, minlab, nn, nnd, p)
            else:
                ka, kb = _key(minlab, k, a)
                ca, cb = _key(minlab, k, nn[k])
                if _pair_less(D[k, a], ka, kb, nnd[k], ca, cb):
                    nn[k] = a
                    nnd[k] = D[k, a]
    return merges, heights, sizes


@numba.njit(cache=True, nogil=True)
def _key(minlab, i, j):
    a = minlab[i]
    b = minlab[j]
    if a < b:
        return a, b
    return b, a


@numba.njit(cache=True, nogil=True)
def _row_best(D, i, alive, minlab, nn, nnd, p):
    best = -1
    bd = np.inf
    ba = 0
    bb = 0
    for j in range(p):
        if j == i or not alive[j]:
            continue
        ka, kb = _key(minlab, i, j)
        if best < 0 or _pair_less(D[i, j], ka, kb, bd, ba, bb):
            best = j
            bd = D[i, j]
            ba = ka
            bb = kb
    nn[i] = best
    nnd[i] = bd
