"""Seeded Monte Carlo estimators for the centralized and decentralized distortions.

Trials are grouped into fixed-size blocks of ``TRIAL_BLOCK`` trials. Block ``b``
draws everything from ``seed.child(..., b)``, so results do not depend on how
blocks are scheduled across workers.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import math

import numpy as np

from . import kernels
from .model import GaussianModel, PowerLawErrorModel, draw_noise, draw_prior, draw_sq_error
from .quantizer import Codebook, FitConfig, codebook_distortion, kmeans_fit
from .rng import as_seed

TRIAL_BLOCK = 1024
AGENT_CHUNK = 32

# stream indices under a cell seed
FIT_STREAM = 0
EVAL_STREAM = 1


@dataclass(frozen=True)
class DistortionEstimate:
    mean: float
    stderr: float
    trials: int
    k: int
    estimator: str
    seed_root: int

    @classmethod
    def from_values(cls, values, k, estimator, seed):
        values = np.asarray(values, dtype=np.float64)
        n = values.size
        return cls(
            mean=float(np.mean(values)),
            stderr=float(np.std(values, ddof=1) / math.sqrt(n)),
            trials=n,
            k=int(k),
            estimator=estimator,
            seed_root=seed.root,
        )


@dataclass(frozen=True)
class SmallBallEstimate:
    a_grid: np.ndarray
    prob: np.ndarray
    counts: np.ndarray
    trials: int
    fitted_alpha: float
    fit_range: tuple


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float
    k_range: tuple


def _blocks(trials):
    return [(b, s, min(TRIAL_BLOCK, trials - s)) for b, s in enumerate(range(0, trials, TRIAL_BLOCK))]


def _run_blocks(fn, args, trials, workers):
    blocks = _blocks(trials)
    if workers and workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(fn, *zip(*[args + (b, size) for b, _, size in blocks])))
    else:
        parts = [fn(*args, b, size) for b, _, size in blocks]
    return np.concatenate(parts)


def _check_trials(trials, minimum):
    if int(trials) != trials or trials < minimum:
        raise ValueError(f"trials must be an integer >= {minimum}, got {trials!r}")
    return int(trials)


# --------------------------------------------------------------------------
# decentralized benchmark
# --------------------------------------------------------------------------


def _d2_block(model, k, seed, b, size):
    gen = seed.child(b).generator()
    x = draw_prior(model, gen, size)
    out = np.full(size, np.inf)
    for a0 in range(0, k, AGENT_CHUNK):
        noise = draw_noise(model, gen, (size, min(AGENT_CHUNK, k - a0)))
        kernels.min_agent_sqerr(x, noise, model.gain, out)
    return out


def estimate_d2(model, k, trials=100_000, seed=0, workers=1):
    """Monte Carlo estimate of ``E[min_i |X - g(Y_i)|^2]`` with k conditionally iid observations."""
    trials = _check_trials(trials, 100)
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    seed = as_seed(seed)
    values = _run_blocks(_d2_block, (model, int(k), seed), trials, workers)
    return DistortionEstimate.from_values(values, k, "decentralized_d2", seed)


def _generic_block(model, k, seed, b, size):
    gen = seed.child(b).generator()
    out = np.full(size, np.inf)
    for a0 in range(0, k, AGENT_CHUNK):
        m = min(AGENT_CHUNK, k - a0)
        w = draw_sq_error(model, gen, size * m).reshape(size, m)
        np.minimum(out, w.min(axis=1), out=out)
    return out


def estimate_d2_generic(model, k, trials=100_000, seed=0, workers=1):
    """Min of k iid squared errors drawn straight from an error law.

    Only meaningful when the per-agent errors are iid without conditioning,
    as for :class:`PowerLawErrorModel`.
    """
    if not isinstance(model, PowerLawErrorModel):
        raise TypeError("estimate_d2_generic needs an error law with iid errors; use estimate_d2 for GaussianModel")
    trials = _check_trials(trials, 100)
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    seed = as_seed(seed)
    values = _run_blocks(_generic_block, (model, int(k), seed), trials, workers)
    return DistortionEstimate.from_values(values, k, "decentralized_d2", seed)


# --------------------------------------------------------------------------
# centralized k-list estimator
# --------------------------------------------------------------------------


def fit_unit_codebook(d, k, cfg=None, seed=0, warm_start=None):
    """k-means codebook for ``N(0, I_d)``.

    Lloyd's algorithm commutes with scaling, so the codebook for a posterior
    ``N(0, v I)`` is this one scaled by ``sqrt(v)``.
    """
    cfg = cfg or FitConfig()
    seed = as_seed(seed)
    z = seed.child(0).generator().standard_normal((cfg.train_size(k), d))
    return kmeans_fit(z, k, cfg, seed.child(1), warm_start=warm_start)


def posterior_codebook(model, k, cfg=None, seed=0, warm_start=None):
    return fit_unit_codebook(model.d, k, cfg, seed, warm_start).scaled(math.sqrt(model.posterior_var))


def _d1_block(model, centroids, residual, seed, b, size):
    gen = seed.child(b).generator()
    if residual:
        r = math.sqrt(model.posterior_var) * gen.standard_normal((size, model.d))
    else:
        x = draw_prior(model, gen, size)
        y = x + draw_noise(model, gen, (size,))
        # codebook translated to the posterior mean g(y): |x - (g(y) + c)| = |(x - g(y)) - c|
        r = x - model.gain * y
    return codebook_distortion(Codebook(centroids), r)


def estimate_d1(model, k, trials=100_000, fit_cfg=None, seed=0, codebook=None, path="xy", workers=1):
    """Monte Carlo estimate of the centralized best-candidate distortion.

    One codebook is fitted on the zero-mean posterior (unless ``codebook`` is
    supplied) and shifted to the posterior mean of every fresh observation.
    ``path="residual"`` draws ``X - E[X|Y]`` directly from the posterior instead
    of going through ``(X, Y)``.
    """
    trials = _check_trials(trials, 100)
    if path not in ("xy", "residual"):
        raise ValueError(f"path must be 'xy' or 'residual', got {path!r}")
    seed = as_seed(seed)
    if codebook is None:
        codebook = posterior_codebook(model, k, fit_cfg, seed.child(FIT_STREAM))
    if codebook.k != k or codebook.d != model.d:
        raise ValueError(f"codebook is {codebook.k} x {codebook.d}, expected {k} x {model.d}")
    args = (model, np.ascontiguousarray(codebook.centroids), path == "residual", seed.child(EVAL_STREAM))
    values = _run_blocks(_d1_block, args, trials, workers)
    return DistortionEstimate.from_values(values, k, "centralized_d1", seed)


# --------------------------------------------------------------------------
# small-ball probabilities and slope fits
# --------------------------------------------------------------------------


def default_a_grid(model, points=16):
    if isinstance(model, GaussianModel):
        scale = model.d * model.sigma_g2
    elif isinstance(model, PowerLawErrorModel):
        scale = model.r_max**2
    else:
        raise TypeError(f"unsupported error model {type(model).__name__}")
    return np.logspace(-4, 0, points) * scale


def _weighted_loglog_fit(a, p, w):
    la, lp = np.log(a), np.log(p)
    W = w / w.sum()
    ma, mp = np.sum(W * la), np.sum(W * lp)
    return np.sum(W * (la - ma) * (lp - mp)) / np.sum(W * (la - ma) ** 2)


_SB_BLOCK = 1 << 16


def estimate_smallball(model, trials=1_000_000, a_grid=None, seed=0, fit_range=None):
    """Empirical ``P(|Z|^2 <= a)`` on a grid and the fitted small-ball exponent.

    The exponent is a weighted least-squares slope of ``log P`` on ``log a``
    over grid points inside ``fit_range`` with at least one hit; weights are
    the inverse binomial variances of ``log P``. By default the two largest
    grid points are left out of the fit.
    """
    trials = _check_trials(trials, 10_000)
    a = np.asarray(default_a_grid(model) if a_grid is None else a_grid, dtype=np.float64)
    if a.ndim != 1 or a.size < 1 or np.any(a <= 0) or np.any(np.diff(a) <= 0):
        raise ValueError("a_grid must be increasing positive values")
    if fit_range is None:
        fit_range = (float(a[0]), float(a[max(len(a) - 3, 0)]))
    seed = as_seed(seed)
    counts = np.zeros(a.size, dtype=np.int64)
    for b, start in enumerate(range(0, trials, _SB_BLOCK)):
        size = min(_SB_BLOCK, trials - start)
        w = np.sort(draw_sq_error(model, seed.child(b).generator(), size))
        counts += np.searchsorted(w, a, side="right")
    prob = counts / trials
    sel = (a >= fit_range[0]) & (a <= fit_range[1]) & (counts > 0) & (prob < 1)
    if sel.sum() < 4:
        raise ValueError(f"grid too deep for trial budget: only {int(sel.sum())} usable points in fit range")
    weights = counts[sel] / (1.0 - prob[sel])
    alpha = float(_weighted_loglog_fit(a[sel], prob[sel], weights))
    return SmallBallEstimate(a, prob, counts, trials, alpha, (float(fit_range[0]), float(fit_range[1])))


def fit_loglog_slope(points, k_range=None):
    """Ordinary least squares of ``ln value`` on ``ln k``."""
    pts = sorted((float(k), float(v)) for k, v in points)
    if k_range is not None:
        pts = [(k, v) for k, v in pts if k_range[0] <= k <= k_range[1]]
    if len(pts) < 4:
        raise ValueError(f"need at least 4 points in range, got {len(pts)}")
    if any(not v > 0 for _, v in pts):
        raise ValueError("all values in range must be positive")
    lk = np.log([k for k, _ in pts])
    lv = np.log([v for _, v in pts])
    slope, intercept = np.polyfit(lk, lv, 1)
    resid = lv - (slope * lk + intercept)
    ss_tot = float(np.sum((lv - lv.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot <= 1e-300 else min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    return SlopeFit(float(slope), float(intercept), r2, (pts[0][0], pts[-1][0]))
