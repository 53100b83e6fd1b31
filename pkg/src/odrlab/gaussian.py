"""Diagonal Gaussian algebra over simulator parameters.

The fitted object throughout the package is a Gaussian with diagonal
covariance, held as per-dimension standard deviations.  This module
provides its density, sampling, differential entropy, Monte Carlo ball
masses, and the Chebyshev lower bound on the mass of a Euclidean ball.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .rng import as_generator

LOG_2PI = math.log(2.0 * math.pi)


class DegenerateDistributionError(ValueError):
    """Raised when an operation requires strictly positive sigma."""


def _as_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-d vector, got shape {arr.shape}")
    return arr


class DiagonalGaussian:
    """N(mu, diag(sigma^2)) with per-dimension standard deviations.

    Immutable after construction.  sigma entries may be zero (a point
    mass); operations that are undefined in that limit raise
    DegenerateDistributionError.
    """

    __slots__ = ("mu", "sigma")

    def __init__(self, mu, sigma):
        mu = _as_vector(mu, "mu")
        sigma = _as_vector(sigma, "sigma")
        if mu.shape != sigma.shape:
            raise ValueError(f"mu has dim {mu.size} but sigma has dim {sigma.size}")
        if np.any(sigma < 0):
            raise ValueError("sigma entries must be nonnegative")
        mu.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    def __setattr__(self, name, value):
        raise AttributeError("DiagonalGaussian is immutable")

    @property
    def dim(self) -> int:
        return self.mu.size

    def __repr__(self) -> str:
        return f"DiagonalGaussian(mu={self.mu.tolist()}, sigma={self.sigma.tolist()})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiagonalGaussian):
            return NotImplemented
        return np.array_equal(self.mu, other.mu) and np.array_equal(self.sigma, other.sigma)

    def __hash__(self):
        return hash((self.mu.tobytes(), self.sigma.tobytes()))

    def to_json_dict(self) -> dict:
        return {"mu": self.mu.tolist(), "sigma": self.sigma.tolist()}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "DiagonalGaussian":
        return cls(obj["mu"], obj["sigma"])

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DiagonalGaussian":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class ParamBox:
    """Compact search region: per-dimension mean bounds plus sigma bounds.

    sigma_floor keeps the fitted distribution nondegenerate so entropy and
    densities stay finite; the collapsed limit is approached, never hit.
    """

    lo: np.ndarray
    hi: np.ndarray
    sigma_floor: float = 1e-6
    sigma_max: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "lo", _as_vector(self.lo, "lo"))
        object.__setattr__(self, "hi", _as_vector(self.hi, "hi"))
        if self.lo.shape != self.hi.shape:
            raise ValueError("lo and hi must have the same dimension")
        if np.any(self.lo >= self.hi):
            raise ValueError("each lo[i] must be strictly below hi[i]")
        if not (0.0 < self.sigma_floor < self.sigma_max):
            raise ValueError("need 0 < sigma_floor < sigma_max")
        self.lo.setflags(write=False)
        self.hi.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, g: DiagonalGaussian, atol: float = 0.0) -> bool:
        return bool(
            np.all(g.mu >= self.lo - atol)
            and np.all(g.mu <= self.hi + atol)
            and np.all(g.sigma >= self.sigma_floor - atol)
            and np.all(g.sigma <= self.sigma_max + atol)
        )

    def to_json_dict(self) -> dict:
        return {
            "lo": self.lo.tolist(),
            "hi": self.hi.tolist(),
            "sigma_floor": self.sigma_floor,
            "sigma_max": self.sigma_max,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ParamBox":
        return cls(obj["lo"], obj["hi"], obj["sigma_floor"], obj["sigma_max"])

    @classmethod
    def around(cls, center, relative_margin: float = 0.2, sigma_floor: float = 1e-6,
               sigma_max: float | None = None) -> "ParamBox":
        """Box of +-relative_margin around a center point (margin of |center|)."""
        c = _as_vector(center, "center")
        half = np.abs(c) * relative_margin
        if np.any(half <= 0):
            raise ValueError("relative box needs nonzero center entries")
        if sigma_max is None:
            sigma_max = float(np.max(half))
        return cls(c - half, c + half, sigma_floor, sigma_max)


def entropy(g: DiagonalGaussian) -> float:
    """Differential entropy (d/2)(1 + ln 2*pi) + sum_i ln sigma_i."""
    if np.any(g.sigma == 0):
        raise DegenerateDistributionError("entropy undefined for sigma = 0")
    return 0.5 * g.dim * (1.0 + LOG_2PI) + float(np.sum(np.log(g.sigma)))


def log_density(g: DiagonalGaussian, x) -> float:
    """Log density of the Gaussian at point x."""
    x = _as_vector(x, "x")
    if x.size != g.dim:
        raise ValueError(f"x has dim {x.size}, distribution has dim {g.dim}")
    if np.any(g.sigma == 0):
        raise DegenerateDistributionError("log density undefined for sigma = 0")
    z = (x - g.mu) / g.sigma
    return float(-0.5 * g.dim * LOG_2PI - np.sum(np.log(g.sigma)) - 0.5 * np.sum(z * z))


def sample(g: DiagonalGaussian, count: int, rng_seed) -> np.ndarray:
    """Draw ``count`` i.i.d. vectors, returned as a (count, dim) matrix."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = as_generator(rng_seed)
    z = rng.standard_normal((int(count), g.dim))
    return g.mu + g.sigma * z


def ball_mass_mc(g: DiagonalGaussian, center, radius: float, n_mc: int, rng_seed) -> float:
    """Monte Carlo estimate of P(|X - center|_2 < radius)."""
    center = _as_vector(center, "center")
    if center.size != g.dim:
        raise ValueError("center dimension mismatch")
    if radius <= 0:
        raise ValueError("radius must be positive")
    draws = sample(g, n_mc, rng_seed)
    dist = np.linalg.norm(draws - center, axis=1)
    return float(np.mean(dist < radius))


def chebyshev_ball_lower_bound(g: DiagonalGaussian, center, radius: float) -> float:
    """Chebyshev lower bound on the Euclidean ball mass.

    Equals max(0, 1 - 4 tr(Sigma) / radius^2) when the mean lies within
    radius/2 of the center, and 0 otherwise; always a valid lower bound
    on the true ball mass.
    """
    center = _as_vector(center, "center")
    if center.size != g.dim:
        raise ValueError("center dimension mismatch")
    if radius <= 0:
        raise ValueError("radius must be positive")
    if np.linalg.norm(g.mu - center) >= radius / 2.0:
        return 0.0
    trace_cov = float(np.sum(g.sigma**2))
    return max(0.0, 1.0 - 4.0 * trace_cov / radius**2)
