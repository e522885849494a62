"""Fixed-rate k-point codebooks: sampled Lloyd/k-means design and min-of-k evaluation."""
import csv
from dataclasses import dataclass, field
import logging

import numpy as np

from . import kernels
from .rng import as_seed

log = logging.getLogger(__name__)

# slack for the Lloyd monotonicity check; distortions are means of ~1e5 terms
_MONOTONE_RTOL = 1e-9


@dataclass(frozen=True)
class Codebook:
    centroids: np.ndarray
    train_distortion: float = 0.0
    history: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        c = np.array(self.centroids, dtype=np.float64, copy=True)
        if c.ndim == 1:
            c = c[:, None]
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise ValueError(f"centroids must be a non-empty (k, d) array, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("centroids must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "centroids", c)
        object.__setattr__(self, "train_distortion", float(self.train_distortion))
        object.__setattr__(self, "history", tuple(float(h) for h in self.history))

    @property
    def k(self):
        return self.centroids.shape[0]

    @property
    def d(self):
        return self.centroids.shape[1]

    def scaled(self, factor):
        """Codebook for the source scaled by ``factor`` (distortion scales by factor**2)."""
        return Codebook(self.centroids * factor, self.train_distortion * factor * factor, self.history)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"c{t}" for t in range(self.d)])
            for row in self.centroids:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [h.strip() for h in rows[0]] != [f"c{t}" for t in range(len(rows[0]))]:
            raise ValueError(f"{path}: expected header c0..c{{d-1}}")
        return cls(np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64))


@dataclass(frozen=True)
class FitConfig:
    """Lloyd/k-means hyperparameters.

    ``n_train=None`` means ``max(200 * k, 100_000)`` training samples.
    """

    n_train: int = None
    max_iters: int = 200
    rel_tol: float = 1e-6
    restarts: int = 8
    empty_cell_policy: str = "respawn_at_farthest_point"

    def __post_init__(self):
        if self.n_train is not None and self.n_train < 1:
            raise ValueError("n_train must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.empty_cell_policy != "respawn_at_farthest_point":
            raise ValueError(f"unknown empty_cell_policy {self.empty_cell_policy!r}")

    def train_size(self, k):
        if self.n_train is not None:
            return int(self.n_train)
        return max(200 * int(k), 100_000)


def _as_samples(samples):
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"samples must be a non-empty (n, d) array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples contain non-finite coordinates")
    return np.ascontiguousarray(x)


def _kmeanspp(x, k, gen, start=None):
    """D^2 seeding; with ``start`` given, its rows are kept and the rest are drawn."""
    n = x.shape[0]
    c = np.empty((k, x.shape[1]))
    mins = np.full(n, np.inf)
    if start is None:
        c[0] = x[int(gen.integers(n))]
        m = 1
    else:
        m = start.shape[0]
        c[:m] = start
    for j in range(m):
        kernels.update_min_sqdist(x, c[j], mins)
    for j in range(m, k):
        cum = np.cumsum(mins)
        total = cum[-1]
        if total > 0:
            idx = int(np.searchsorted(cum, gen.random() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(gen.integers(n))
        c[j] = x[idx]
        kernels.update_min_sqdist(x, c[j], mins)
    return c


def _half_separation(c):
    k = c.shape[0]
    if k == 1:
        return np.full(1, np.inf)
    cc = np.einsum("ij,ij->i", c, c)
    g = np.maximum(cc[:, None] + cc[None, :] - 2.0 * (c @ c.T), 0.0)
    np.fill_diagonal(g, np.inf)
    # shrink slightly so rounding in the expanded form can only make bounds weaker
    return 0.5 * np.sqrt(g.min(axis=1)) * (1.0 - 1e-9)


def _lloyd(x, c, cfg):
    n, d = x.shape
    k = c.shape[0]
    c = c.copy()
    use_bounds = d > 1
    if use_bounds:
        labels = np.zeros(n, dtype=np.int64)
        upper = np.full(n, np.inf)
        lower = np.zeros(n)
        sqdist = np.empty(n)
    history = []
    prev = None
    for it in range(cfg.max_iters):
        if use_bounds and it == 0:
            # a plain nearest search is cheaper than a pass with empty bounds
            labels, sqdist = kernels.nearest(x, c)
            labels, sqdist = labels.copy(), sqdist.copy()
            upper[:] = np.sqrt(sqdist)
        elif use_bounds:
            kernels.hamerly_assign(x, c, labels, upper, lower, _half_separation(c), sqdist)
        else:
            labels, sqdist = kernels.assign(x, c)
            labels = labels.copy()
            sqdist = sqdist.copy()
        counts = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        for j in empty:
            i = int(np.argmax(sqdist))
            c[j] = x[i]
            kernels.absorb_center(x, c[j], j, labels, sqdist)
        if empty.size and use_bounds:
            upper[:] = np.sqrt(sqdist)
            lower[:] = 0.0
        dist = float(np.mean(sqdist))
        if prev is not None and dist > prev * (1.0 + _MONOTONE_RTOL):
            raise RuntimeError(f"Lloyd distortion increased at iteration {it}: {prev!r} -> {dist!r}")
        history.append(dist)
        if prev is not None and prev - dist <= cfg.rel_tol * prev:
            break
        prev = dist
        if it == cfg.max_iters - 1:
            break
        sums, counts = kernels.centroid_sums(x, labels, k)
        filled = counts > 0
        new_c = c.copy()
        new_c[filled] = sums[filled] / counts[filled][:, None]
        if use_bounds:
            shift = np.sqrt(np.einsum("ij,ij->i", new_c - c, new_c - c))
            upper += shift[labels]
            if k > 1:
                order = np.argsort(shift)
                j1, m1, m2 = order[-1], shift[order[-1]], shift[order[-2]]
                lower -= np.where(labels == j1, m2, m1)
        c = new_c
    return c, history[-1], history


def kmeans_fit(samples, k, cfg=None, seed=0, warm_start=None):
    """Best-of-restarts Lloyd codebook for the empirical distribution of ``samples``.

    Restart ``r`` draws its k-means++ seeding from ``seed.child(r)``. When
    ``warm_start`` (a codebook with at most ``k`` centroids) is given, restart 0
    starts from it instead, with the missing centroids drawn by continuing the
    D^2 seeding from ``seed.child(0)``. Extra centroids can only lower the cost
    and Lloyd never raises it, so the fit is never worse than ``warm_start`` on
    the same training set.
    """
    cfg = cfg or FitConfig()
    x = _as_samples(samples)
    n, d = x.shape
    k = int(k)
    if k < 1:
        raise ValueError("k must be positive")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of samples ({n})")
    seed = as_seed(seed)
    best = None
    for r in range(cfg.restarts):
        if r == 0 and warm_start is not None:
            w = np.asarray(warm_start.centroids if isinstance(warm_start, Codebook) else warm_start, dtype=np.float64)
            if w.ndim != 2 or w.shape[1] != d or w.shape[0] > k:
                raise ValueError(f"warm start must have at most k={k} centroids of dimension {d}")
            init = _kmeanspp(x, k, seed.child(0).generator(), start=w)
        else:
            init = _kmeanspp(x, k, seed.child(r).generator())
        c, dist, hist = _lloyd(x, init, cfg)
        log.debug("k=%d restart %d: %d passes, distortion %.6g", k, r, len(hist), dist)
        if best is None or dist < best[1]:
            best = (c, dist, hist)
    return Codebook(best[0], best[1], best[2])


def min_of_k_sqerr(x, codebook):
    """``min_i |x - c_i|^2`` for a vector, or per row for a batch."""
    v = np.asarray(x, dtype=np.float64)
    if v.shape[-1:] != (codebook.d,):
        raise ValueError(f"x must have trailing dimension {codebook.d}, got shape {v.shape}")
    diff = v[..., None, :] - codebook.centroids
    out = np.einsum("...kt,...kt->...k", diff, diff).min(axis=-1)
    return float(out) if v.ndim == 1 else out


def translate_codebook(codebook, shift):
    s = np.asarray(shift, dtype=np.float64)
    if s.shape != (codebook.d,):
        raise ValueError(f"shift must have shape ({codebook.d},), got {s.shape}")
    return Codebook(codebook.centroids + s, codebook.train_distortion, codebook.history)


def codebook_distortion(codebook, samples):
    """Per-sample min-of-k squared errors of ``samples`` against ``codebook``."""
    x = _as_samples(samples)
    if x.shape[1] != codebook.d:
        raise ValueError(f"samples have dimension {x.shape[1]}, codebook has {codebook.d}")
    _, sq = kernels.assign(x, np.ascontiguousarray(codebook.centroids))
    return sq
