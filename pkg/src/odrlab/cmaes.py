"""Self-contained (mu/mu_w, lambda)-CMA-ES maximizer with box constraints.

Canonical tutorial formulation: rank-based log recombination weights,
cumulative step-size adaptation, rank-one plus rank-mu covariance updates.
The search runs in coordinates normalized to the unit cube; sampled
candidates are clipped into the cube before evaluation, and the clipped
point is both what the objective sees and what gets reported.  All
updates use fitness ranks only, so any strictly increasing transform of
the objective leaves the trajectory unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import stream_rng


class InfeasibleRegionError(RuntimeError):
    """Every candidate of a generation scored -inf."""


@dataclass(frozen=True)
class CmaConfig:
    """Run parameters for one optimization.

    ``initial_step`` is a fraction of each coordinate's range (0.3 means
    the initial sampling std spans 30% of the box per coordinate).
    """

    lower: np.ndarray
    upper: np.ndarray
    population: int = 10
    iterations: int = 20
    initial_step: float = 0.3
    rng_seed: int = 0

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise ValueError("lower/upper must be 1-d and matched")
        if np.any(lower >= upper):
            raise ValueError("need lower[i] < upper[i] for all i")
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 < self.initial_step:
            raise ValueError("initial_step must be positive")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size


@dataclass
class IterationRecord:
    best_value: float
    step_size: float


@dataclass
class OptimResult:
    best_point: np.ndarray
    best_value: float
    history: list[IterationRecord] = field(default_factory=list)


def default_population(dim: int) -> int:
    """The usual 4 + floor(3 ln d) default population size."""
    return 4 + int(3 * math.log(dim))


def optimize(objective, config: CmaConfig) -> OptimResult:
    """Maximize ``objective`` over the box; runs exactly config.iterations.

    The objective must return a float or -inf (infeasible point); NaN
    aborts with a diagnostic.  Deterministic given config.rng_seed.
    """
    d = config.dim
    lam = config.population
    mu = lam // 2
    span = config.upper - config.lower

    # selection weights and adaptation constants (tutorial values)
    w_raw = np.log(lam / 2 + 0.5) - np.log(np.arange(1, mu + 1))
    weights = w_raw / w_raw.sum()
    mueff = 1.0 / np.sum(weights**2)
    cc = (4 + mueff / d) / (d + 4 + 2 * mueff / d)
    cs = (mueff + 2) / (d + mueff + 5)
    c1 = 2 / ((d + 1.3) ** 2 + mueff)
    cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((d + 2) ** 2 + mueff))
    damps = 2 * mueff / lam + 0.3 + cs

    mean = np.full(d, 0.5)
    sigma = float(config.initial_step)
    cov = np.eye(d)
    p_sigma = np.zeros(d)
    p_cov = np.zeros(d)
    rng = stream_rng(config.rng_seed, "cma")

    best_point: np.ndarray | None = None
    best_value = -math.inf
    history: list[IterationRecord] = []
    count_eval = 0

    for _ in range(config.iterations):
        cov = 0.5 * (cov + cov.T)
        eigvals, eigvecs = np.linalg.eigh(cov)
        eigvals = np.maximum(eigvals, 1e-20)
        sqrt_c = eigvecs * np.sqrt(eigvals)
        inv_sqrt_c = (eigvecs / np.sqrt(eigvals)) @ eigvecs.T

        z = rng.standard_normal((lam, d))
        cand = mean + sigma * (z @ sqrt_c.T)
        np.clip(cand, 0.0, 1.0, out=cand)

        values = np.empty(lam)
        for k in range(lam):
            val = float(objective(config.lower + cand[k] * span))
            if math.isnan(val):
                raise ValueError(
                    f"objective returned NaN at evaluation {count_eval + k}")
            values[k] = val
        count_eval += lam
        if np.all(values == -math.inf):
            raise InfeasibleRegionError(
                "every candidate in a generation scored -inf")

        order = np.argsort(-values, kind="stable")
        if values[order[0]] > best_value:
            best_value = float(values[order[0]])
            best_point = config.lower + cand[order[0]] * span

        old_mean = mean
        selected = cand[order[:mu]]
        mean = weights @ selected

        y = (mean - old_mean) / sigma
        p_sigma = (1 - cs) * p_sigma + \
            math.sqrt(cs * (2 - cs) * mueff) * (inv_sqrt_c @ y)
        ps_norm2 = float(p_sigma @ p_sigma)
        hsig = ps_norm2 / d / (1 - (1 - cs) ** (2 * count_eval / lam)) < 2 + 4 / (d + 1)
        p_cov = (1 - cc) * p_cov + \
            hsig * math.sqrt(cc * (2 - cc) * mueff) * y

        c1a = c1 * (1 - (1 - hsig**2) * cc * (2 - cc))
        y_sel = (selected - old_mean) / sigma
        rank_mu = (y_sel.T * weights) @ y_sel
        cov = (1 - c1a - cmu) * cov + c1 * np.outer(p_cov, p_cov) + cmu * rank_mu

        sigma *= math.exp(min(1.0, (cs / damps) * (ps_norm2 / d - 1) / 2))
        history.append(IterationRecord(best_value=best_value, step_size=sigma))

    assert best_point is not None
    return OptimResult(best_point=best_point, best_value=best_value,
                       history=history)
