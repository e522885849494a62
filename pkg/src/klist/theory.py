"""Closed-form predictions and converse bounds.

Centralized side: high-rate (Zador) leading term ``G_d k^{-2/d} E[J(Y)]``.
Decentralized side: small-ball lower bounds of the form
``exp(-1/alpha) * (1 / (C (1 + alpha k)))**(1/alpha)``.
"""
from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy import integrate


class AdmissibilityError(ValueError):
    """The optimal truncation point falls outside the small-ball validity range."""


def _positive(name, v):
    if not (isinstance(v, (int, float, np.integer, np.floating)) and math.isfinite(v) and v > 0):
        raise ValueError(f"{name} must be a positive finite number, got {v!r}")
    return float(v)


def _positive_int(name, v):
    if int(v) != v or v < 1:
        raise ValueError(f"{name} must be a positive integer, got {v!r}")
    return int(v)


def unit_ball_volume(d):
    d = _positive_int("d", d)
    return math.exp(0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d + 1.0))


def unit_sphere_area(d):
    """Surface area ``S_d = d V_d`` of the unit sphere in R^d."""
    return d * unit_ball_volume(d)


# --------------------------------------------------------------------------
# Zador-Gersho constants
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ZadorConstants:
    table: dict
    provenance: dict

    def __post_init__(self):
        for d, g in self.table.items():
            if not g > 0:
                raise ValueError(f"G_{d} must be positive")

    def get(self, d):
        """``(G_d, provenance)``; unknown dimensions fall back to ``d / (2 pi e)``."""
        d = _positive_int("d", d)
        if d in self.table:
            return self.table[d], self.provenance[d]
        return d / (2.0 * math.pi * math.e), "large_d_proxy"

    def __getitem__(self, d):
        return self.get(d)[0]


# d=4, 10: d times the best known lattice NSM (D4 and D10+)
ZADOR_CONSTANTS = ZadorConstants(
    table={1: 1.0 / 12.0, 4: 4 * 0.076603235, 10: 10 * 0.070813818},
    provenance={1: "exact", 4: "lattice_proxy", 10: "lattice_proxy"},
)


def zador_constant(d):
    return ZADOR_CONSTANTS[d]


# --------------------------------------------------------------------------
# centralized high-rate predictions
# --------------------------------------------------------------------------


def zador_gaussian_functional(d, det_sigma_pow):
    """``(int f^{d/(d+2)})^{(d+2)/d}`` for a Gaussian with ``det(Sigma)^{1/d} = det_sigma_pow``."""
    d = _positive_int("d", d)
    det_sigma_pow = _positive("det_sigma_pow", det_sigma_pow)
    return 2.0 * math.pi * det_sigma_pow * ((d + 2.0) / d) ** ((d + 2.0) / 2.0)


def d1_highrate(d, k, G, mean_functional):
    """Leading term ``G k^{-2/d} E[J(Y)]``; the o(k^{-2/d}) remainder is not modeled."""
    d = _positive_int("d", d)
    k = _positive_int("k", k)
    G = _positive("G", G)
    mean_functional = _positive("mean_functional", mean_functional)
    return G * k ** (-2.0 / d) * mean_functional


def gaussian_d1_highrate(model, k, constants=ZADOR_CONSTANTS):
    """High-rate leading term for the isotropic Gaussian model."""
    return d1_highrate(model.d, k, constants[model.d], zador_gaussian_functional(model.d, model.posterior_var))


def scalar_posterior_coefficient(pdf, support=(-math.inf, math.inf), rtol=1e-8, limit=200):
    """``(1/12) (int f^{1/3})^3`` for a 1-D posterior density, by adaptive quadrature.

    ``support`` should bracket the mass of ``pdf``; for Gaussians pass
    ``mean +/- 12 sd``. Raises ``ArithmeticError`` when the quadrature
    residual exceeds the requested tolerance.
    """
    lo, hi = support
    f = lambda x: max(pdf(x), 0.0) ** (1.0 / 3.0)
    with warnings.catch_warnings():
        # convergence is judged from the residual below
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=rtol, limit=limit)
    if not val > 0 or err > 10 * rtol * abs(val):
        raise ArithmeticError(f"quadrature did not converge: value {val!r}, residual estimate {err!r}")
    return val**3 / 12.0


def gaussian_posterior_coefficient(var, mean=0.0, rtol=1e-8):
    """Quadrature evaluation of the scalar coefficient for an ``N(mean, var)`` posterior."""
    sd = math.sqrt(_positive("var", var))
    norm = 1.0 / math.sqrt(2.0 * math.pi * var)
    pdf = lambda x: norm * math.exp(-0.5 * ((x - mean) / sd) ** 2)
    return scalar_posterior_coefficient(pdf, (mean - 12 * sd, mean + 12 * sd), rtol=rtol)


# --------------------------------------------------------------------------
# decentralized converse bounds
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SmallBallParams:
    """``P(W <= a) <= C a**alpha`` for ``0 <= a <= a0``."""

    C: float
    alpha: float
    a0: float = math.inf

    def __post_init__(self):
        for name in ("C", "alpha"):
            _positive(name, getattr(self, name))
        if not self.a0 > 0:
            raise ValueError(f"a0 must be positive, got {self.a0!r}")


def optimal_truncation_point(C, alpha, k):
    """Maximizer ``(1 / (C (1 + alpha k)))**(1/alpha)`` of ``a (1 - C a**alpha)**k``."""
    return (1.0 / (C * (1.0 + alpha * k))) ** (1.0 / alpha)


def truncation_objective(a, C, alpha, k):
    """``a (1 - C a**alpha)**k`` on ``0 <= a <= C**(-1/alpha)`` (vectorized)."""
    a = np.asarray(a, dtype=np.float64)
    t = np.clip(C * a**alpha, 0.0, 1.0)
    with np.errstate(divide="ignore"):
        return a * np.exp(k * np.log1p(-t))


def d2_smallball_lower(params, k):
    k = _positive_int("k", k)
    a_star = optimal_truncation_point(params.C, params.alpha, k)
    if a_star > params.a0:
        raise AdmissibilityError(
            f"k={k} too small for admissible truncation point: a*={a_star:.6g} > a0={params.a0:.6g}"
        )
    return math.exp(-1.0 / params.alpha) * a_star


def d2_bounded_density_lower(d, M, r, k):
    """Lower bound when the conditional error density is at most ``M`` on the radius-``r`` ball."""
    d = _positive_int("d", d)
    M = _positive("M", M)
    r = float(r)
    if not r > 0:
        raise ValueError(f"r must be positive, got {r!r}")
    params = SmallBallParams(C=M * unit_ball_volume(d), alpha=d / 2.0, a0=r * r)
    return d2_smallball_lower(params, k)


def gaussian_d2_lower(model, k):
    """Converse bound for the Gaussian benchmark; the density bound is global so any k >= 1 works."""
    k = _positive_int("k", k)
    d = model.d
    vd = unit_ball_volume(d)
    return (
        math.exp(-2.0 / d)
        * 2.0
        * math.pi
        * model.sigma_g2
        / (vd ** (2.0 / d) * (1.0 + 0.5 * d * k) ** (2.0 / d))
    )


def gaussian_smallball_constant(model):
    """``C = M V_d`` with ``M = (2 pi sigma_G^2)^{-d/2}``: ``P(W <= a) <= C a^{d/2}``."""
    d = model.d
    return unit_ball_volume(d) * (2.0 * math.pi * model.sigma_g2) ** (-0.5 * d)


def powerlaw_smallball_bounds(d, beta, c_min, c_max, a):
    """Two-sided small-ball bounds from ``c_min |z|^beta <= f(z) <= c_max |z|^beta``."""
    d = _positive_int("d", d)
    if not beta > -d:
        raise ValueError(f"beta must exceed -d = {-d}; the radial integral diverges otherwise")
    if c_min < 0 or c_max < 0 or c_min > c_max:
        raise ValueError("need 0 <= c_min <= c_max")
    if a < 0:
        raise ValueError("a must be nonnegative")
    f = unit_sphere_area(d) / (d + beta) * a ** ((d + beta) / 2.0)
    return c_min * f, c_max * f


def powerlaw_min_of_k_mean(d, beta, r_max, k):
    """Exact ``E[min of k iid |Z|^2]`` under the radial power law on a ball.

    With ``gamma = (d + beta) / 2`` and ``W / r_max^2`` having CDF ``w**gamma``,
    ``E[min] = r_max^2 Gamma(1 + 1/gamma) Gamma(k + 1) / Gamma(k + 1 + 1/gamma)``.
    """
    k = _positive_int("k", k)
    inv = 2.0 / (d + beta)
    return r_max**2 * math.exp(math.lgamma(1.0 + inv) + math.lgamma(k + 1.0) - math.lgamma(k + 1.0 + inv))


# --------------------------------------------------------------------------
# curves
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TheoryCurve:
    kind: str
    points: tuple
    params_digest: str

    def __post_init__(self):
        if self.kind not in ("d1_highrate", "d2_lower_bound"):
            raise ValueError(f"unknown curve kind {self.kind!r}")
        ks = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("k must be strictly increasing")
        if any(not v > 0 for _, v in self.points):
            raise ValueError("curve values must be positive")

    def as_dict(self):
        return dict(self.points)


def _digest(model):
    return f"d={model.d};sigma_x2={model.sigma_x2!r};sigma_n2={model.sigma_n2!r}"


def gaussian_d1_curve(model, k_grid, constants=ZADOR_CONSTANTS):
    g, prov = constants.get(model.d)
    pts = tuple((int(k), gaussian_d1_highrate(model, k, constants)) for k in k_grid)
    return TheoryCurve("d1_highrate", pts, _digest(model) + f";G={g!r};G_provenance={prov};leading_term")


def gaussian_d2_curve(model, k_grid):
    pts = tuple((int(k), gaussian_d2_lower(model, k)) for k in k_grid)
    return TheoryCurve("d2_lower_bound", pts, _digest(model))
