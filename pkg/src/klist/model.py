"""Observation and error models with seeded samplers."""
from dataclasses import dataclass
import math

import numpy as np

from .rng import as_seed


@dataclass(frozen=True)
class GaussianModel:
    """Isotropic additive Gaussian model ``Y = X + N``.

    ``X ~ N(0, sigma_x2 I)`` and ``N ~ N(0, sigma_n2 I)`` in ``d`` dimensions.
    """

    d: int
    sigma_x2: float
    sigma_n2: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")
        if not (math.isfinite(self.sigma_x2) and self.sigma_x2 > 0):
            raise ValueError(f"sigma_x2 must be positive and finite, got {self.sigma_x2!r}")
        if not (math.isfinite(self.sigma_n2) and self.sigma_n2 > 0):
            raise ValueError(f"sigma_n2 must be positive and finite, got {self.sigma_n2!r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "sigma_x2", float(self.sigma_x2))
        object.__setattr__(self, "sigma_n2", float(self.sigma_n2))

    @classmethod
    def from_std(cls, d, sigma_x, sigma_n):
        return cls(d, float(sigma_x) ** 2, float(sigma_n) ** 2)

    @property
    def gain(self):
        return self.sigma_x2 / (self.sigma_x2 + self.sigma_n2)

    @property
    def posterior_var(self):
        """Per-coordinate variance of ``X`` given ``Y``."""
        return self.sigma_x2 * self.sigma_n2 / (self.sigma_x2 + self.sigma_n2)

    @property
    def sigma_g2(self):
        """Per-coordinate variance of the MMSE error given ``X``."""
        s = self.sigma_x2 + self.sigma_n2
        return self.sigma_x2 * self.sigma_x2 * self.sigma_n2 / (s * s)


@dataclass(frozen=True)
class PowerLawErrorModel:
    """Error vector with radial density ``c * |z|^beta`` on the ball of radius ``r_max``.

    The direction is uniform on the sphere, and the radius has CDF
    ``(r / r_max) ** (d + beta)``.
    """

    d: int
    beta: float
    r_max: float = 1.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")
        if not (math.isfinite(self.beta) and self.beta > -self.d):
            raise ValueError(f"beta must exceed -d = {-self.d}, got {self.beta!r}")
        if not (math.isfinite(self.r_max) and self.r_max > 0):
            raise ValueError(f"r_max must be positive, got {self.r_max!r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "r_max", float(self.r_max))

    @property
    def radial_power(self):
        return self.d + self.beta

    @property
    def density_constant(self):
        """``c`` such that ``c * |z|^beta`` integrates to one over the ball."""
        from .theory import unit_sphere_area

        return self.radial_power / (unit_sphere_area(self.d) * self.r_max**self.radial_power)


def _check_dim(model, v, name):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 0 or v.shape[-1] != model.d:
        raise ValueError(f"{name} must have trailing dimension {model.d}, got shape {v.shape}")
    return v


def draw_prior(model, gen, size):
    return np.sqrt(model.sigma_x2) * gen.standard_normal((size, model.d))


def draw_noise(model, gen, shape):
    return np.sqrt(model.sigma_n2) * gen.standard_normal(tuple(shape) + (model.d,))


def draw_powerlaw(model, gen, size):
    g = gen.standard_normal((size, model.d))
    direction = g / np.linalg.norm(g, axis=1, keepdims=True)
    u = gen.random(size)
    radius = model.r_max * u ** (1.0 / model.radial_power)
    return direction * radius[:, None]


def sample_prior(model, seed, size=None):
    """Draw ``X`` from the prior; shape ``(d,)`` or ``(size, d)``."""
    gen = as_seed(seed).generator()
    x = draw_prior(model, gen, 1 if size is None else size)
    return x[0] if size is None else x


def sample_observation(model, x, seed):
    """Draw ``Y = x + N`` for a given target (or batch of targets)."""
    x = _check_dim(model, x, "x")
    gen = as_seed(seed).generator()
    return x + draw_noise(model, gen, x.shape[:-1])


def mmse_estimate(model, y):
    y = _check_dim(model, y, "y")
    return model.gain * y


def sample_powerlaw_error(model, seed, size=None):
    gen = as_seed(seed).generator()
    z = draw_powerlaw(model, gen, 1 if size is None else size)
    return z[0] if size is None else z


def draw_sq_error(model, gen, size):
    """Squared norm of one single-agent error per row.

    For the Gaussian model this goes through the full chain
    ``X -> Y -> g(Y)``; for the power-law model the error is drawn directly.
    """
    if isinstance(model, GaussianModel):
        x = draw_prior(model, gen, size)
        y = x + draw_noise(model, gen, (size,))
        z = x - model.gain * y
    elif isinstance(model, PowerLawErrorModel):
        z = draw_powerlaw(model, gen, size)
    else:
        raise TypeError(f"unsupported error model {type(model).__name__}")
    return np.einsum("ij,ij->i", z, z)
