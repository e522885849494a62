"""Numeric inner loops: nearest-centroid search, Lloyd bookkeeping, min-of-k.

Every public kernel has a numba implementation and a numpy implementation with
the same signature. Which one is bound is decided once at import time by
:mod:`klist._backend`. Both return the same labels (up to exact ties under
different rounding) and squared distances agreeing to ~1e-12 relative.
"""
import numpy as np

from ._backend import HAVE_NUMBA, njit

_CHUNK = 4096


# --------------------------------------------------------------------------
# numpy implementations
# --------------------------------------------------------------------------


def _np_nearest(x, c):
    n = x.shape[0]
    labels = np.empty(n, dtype=np.int64)
    sqdist = np.empty(n, dtype=np.float64)
    cc = np.einsum("ij,ij->i", c, c)
    for s in range(0, n, _CHUNK):
        xb = x[s : s + _CHUNK]
        # expanded form only picks the winner; the distance is recomputed directly
        scores = cc[None, :] - 2.0 * (xb @ c.T)
        lab = np.argmin(scores, axis=1)
        diff = xb - c[lab]
        labels[s : s + _CHUNK] = lab
        sqdist[s : s + _CHUNK] = np.einsum("ij,ij->i", diff, diff)
    return labels, sqdist


def _sorted_unique_1d(c):
    order = np.argsort(c, kind="stable")
    cs = c[order]
    keep = np.ones(cs.shape[0], dtype=bool)
    keep[1:] = cs[1:] != cs[:-1]
    return cs[keep], order[keep].astype(np.int64)


def _np_nearest_1d(x, c):
    cu, iu = _sorted_unique_1d(c)
    m = cu.shape[0]
    pos = np.searchsorted(cu, x)
    left = np.clip(pos - 1, 0, m - 1)
    right = np.clip(pos, 0, m - 1)
    dl = (x - cu[left]) ** 2
    dr = (x - cu[right]) ** 2
    take_right = (dr < dl) | ((dr == dl) & (iu[right] < iu[left]))
    labels = np.where(take_right, iu[right], iu[left])
    sqdist = np.where(take_right, dr, dl)
    return labels, sqdist


def _np_centroid_sums(x, labels, k):
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    sums = np.empty((k, x.shape[1]), dtype=np.float64)
    for t in range(x.shape[1]):
        sums[:, t] = np.bincount(labels, weights=x[:, t], minlength=k)
    return sums, counts


def _np_update_min_sqdist(x, center, mins):
    diff = x - center
    np.minimum(mins, np.einsum("ij,ij->i", diff, diff), out=mins)


def _np_absorb_center(x, center, j, labels, sqdist):
    diff = x - center
    dnew = np.einsum("ij,ij->i", diff, diff)
    closer = dnew < sqdist
    labels[closer] = j
    sqdist[closer] = dnew[closer]


def _np_min_agent_sqerr(x, noise, gain, out):
    err = x[:, None, :] - gain * (x[:, None, :] + noise)
    w = np.einsum("bmt,bmt->bm", err, err)
    np.minimum(out, w.min(axis=1), out=out)


def _np_hamerly_assign(x, c, labels, upper, lower, half_sep, sqdist):
    # no bounds in the fallback: plain exhaustive search every pass
    lab, sq = _np_nearest(x, c)
    labels[:] = lab
    sqdist[:] = sq
    upper[:] = np.sqrt(sq)
    lower[:] = 0.0


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------


@njit(cache=True)
def _nb_nearest(x, c):
    n, d = x.shape
    k = c.shape[0]
    labels = np.empty(n, dtype=np.int64)
    sqdist = np.empty(n, dtype=np.float64)
    for i in range(n):
        best = np.inf
        bj = 0
        for j in range(k):
            s = 0.0
            for t in range(d):
                u = x[i, t] - c[j, t]
                s += u * u
            if s < best:
                best = s
                bj = j
        labels[i] = bj
        sqdist[i] = best
    return labels, sqdist


@njit(cache=True)
def _nb_nearest_1d_sorted(x, cu, iu):
    n = x.shape[0]
    m = cu.shape[0]
    labels = np.empty(n, dtype=np.int64)
    sqdist = np.empty(n, dtype=np.float64)
    for i in range(n):
        v = x[i]
        lo = 0
        hi = m
        while lo < hi:
            mid = (lo + hi) >> 1
            if cu[mid] < v:
                lo = mid + 1
            else:
                hi = mid
        left = lo - 1 if lo > 0 else 0
        right = lo if lo < m else m - 1
        dl = (v - cu[left]) ** 2
        dr = (v - cu[right]) ** 2
        if dr < dl or (dr == dl and iu[right] < iu[left]):
            labels[i] = iu[right]
            sqdist[i] = dr
        else:
            labels[i] = iu[left]
            sqdist[i] = dl
    return labels, sqdist


def _nb_nearest_1d(x, c):
    cu, iu = _sorted_unique_1d(c)
    return _nb_nearest_1d_sorted(x, cu, iu)


@njit(cache=True)
def _nb_centroid_sums(x, labels, k):
    n, d = x.shape
    sums = np.zeros((k, d), dtype=np.float64)
    counts = np.zeros(k, dtype=np.int64)
    for i in range(n):
        j = labels[i]
        counts[j] += 1
        for t in range(d):
            sums[j, t] += x[i, t]
    return sums, counts


@njit(cache=True)
def _nb_update_min_sqdist(x, center, mins):
    n, d = x.shape
    for i in range(n):
        s = 0.0
        for t in range(d):
            u = x[i, t] - center[t]
            s += u * u
        if s < mins[i]:
            mins[i] = s


@njit(cache=True)
def _nb_absorb_center(x, center, j, labels, sqdist):
    n, d = x.shape
    for i in range(n):
        s = 0.0
        for t in range(d):
            u = x[i, t] - center[t]
            s += u * u
        if s < sqdist[i]:
            sqdist[i] = s
            labels[i] = j


@njit(cache=True)
def _nb_min_agent_sqerr(x, noise, gain, out):
    b, m, d = noise.shape
    for i in range(b):
        best = out[i]
        for a in range(m):
            s = 0.0
            for t in range(d):
                e = x[i, t] - gain * (x[i, t] + noise[i, a, t])
                s += e * e
            if s < best:
                best = s
        out[i] = best


@njit(cache=True)
def _nb_hamerly_assign(x, c, labels, upper, lower, half_sep, sqdist):
    """One Hamerly assignment pass.

    ``upper[i]`` bounds the distance to the assigned centroid from above,
    ``lower[i]`` bounds the distance to every other centroid from below.
    A point is rescanned only when neither bound certifies its label.
    """
    n, d = x.shape
    k = c.shape[0]
    for i in range(n):
        a = labels[i]
        m = half_sep[a]
        if lower[i] > m:
            m = lower[i]
        if upper[i] > m:
            s = 0.0
            for t in range(d):
                u = x[i, t] - c[a, t]
                s += u * u
            upper[i] = np.sqrt(s)
            if upper[i] > m:
                best = np.inf
                second = np.inf
                bj = 0
                for j in range(k):
                    s = 0.0
                    for t in range(d):
                        u = x[i, t] - c[j, t]
                        s += u * u
                    if s < best:
                        second = best
                        best = s
                        bj = j
                    elif s < second:
                        second = s
                labels[i] = bj
                upper[i] = np.sqrt(best)
                lower[i] = np.sqrt(second)
        a = labels[i]
        s = 0.0
        for t in range(d):
            u = x[i, t] - c[a, t]
            s += u * u
        sqdist[i] = s


if HAVE_NUMBA:
    nearest = _nb_nearest
    nearest_1d = _nb_nearest_1d
    centroid_sums = _nb_centroid_sums
    update_min_sqdist = _nb_update_min_sqdist
    absorb_center = _nb_absorb_center
    min_agent_sqerr = _nb_min_agent_sqerr
    hamerly_assign = _nb_hamerly_assign
else:
    nearest = _np_nearest
    nearest_1d = _np_nearest_1d
    centroid_sums = _np_centroid_sums
    update_min_sqdist = _np_update_min_sqdist
    absorb_center = _np_absorb_center
    min_agent_sqerr = _np_min_agent_sqerr
    hamerly_assign = _np_hamerly_assign


def assign(x, c):
    """Nearest centroid labels and squared distances for rows of ``x``."""
    if x.shape[1] == 1:
        return nearest_1d(x[:, 0], c[:, 0])
    return nearest(x, c)
