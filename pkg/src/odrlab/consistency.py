"""Desk-scale verification harness for the statistical claims.

Runs collect-and-fit sweeps over growing dataset sizes to exhibit the
consistency trend, reads informativeness thresholds off the recorded
ball masses, and provides the covering-number and Hoeffding deviation
bounds together with the empirical quantities they must dominate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datasets import collect_iid
from .fitting import fit
from .gaussian import ball_mass_mc, chebyshev_ball_lower_bound
from .likelihood import ObjectiveConfig, population_loglik_discrete
from .rng import stream_rng


@dataclass(frozen=True)
class SweepConfig:
    """Protocol for a consistency sweep over dataset sizes."""

    dataset_sizes: tuple[int, ...]
    trials: int
    epsilon_list: tuple[float, ...]
    rng_seed: int
    n_xi_samples: int = 10
    cov_regularizer: float = 1e-5
    population: int = 12
    iterations: int = 80
    initial_step: float = 0.3
    ball_mass_samples: int = 100_000

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.dataset_sizes)
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("dataset_sizes must be strictly increasing")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        object.__setattr__(self, "dataset_sizes", sizes)
        object.__setattr__(self, "epsilon_list",
                           tuple(float(e) for e in self.epsilon_list))


@dataclass
class SweepCell:
    n: int
    trial: int
    mu: list[float]
    sigma: list[float]
    error_mu: float
    error_phi: float
    sigma_geomean: float
    objective_value: float
    ball_mass: dict[str, float]
    chebyshev: dict[str, float]
    status: str = "ok"

    def to_json_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SweepReport:
    xi_star: list[float]
    epsilon_list: tuple[float, ...]
    cells: list[SweepCell] = field(default_factory=list)

    def ok_cells(self, n: int | None = None) -> list[SweepCell]:
        return [c for c in self.cells
                if c.status == "ok" and (n is None or c.n == n)]

    def sizes(self) -> list[int]:
        return sorted({c.n for c in self.cells})

    def median_error_mu(self, n: int) -> float:
        return float(np.median([c.error_mu for c in self.ok_cells(n)]))

    def median_sigma_geomean(self, n: int) -> float:
        return float(np.median([c.sigma_geomean for c in self.ok_cells(n)]))

    def median_ball_mass(self, n: int, epsilon: float) -> float:
        key = str(float(epsilon))
        return float(np.median([c.ball_mass[key] for c in self.ok_cells(n)]))

    def quartiles_error_mu(self, n: int) -> tuple[float, float, float]:
        errs = [c.error_mu for c in self.ok_cells(n)]
        q1, med, q3 = np.percentile(errs, [25, 50, 75])
        return float(q1), float(med), float(q3)

    def to_json_dict(self) -> dict:
        summary = {}
        for n in self.sizes():
            q1, med, q3 = self.quartiles_error_mu(n)
            summary[str(n)] = {
                "error_mu_q1": q1,
                "error_mu_median": med,
                "error_mu_q3": q3,
                "sigma_geomean_median": self.median_sigma_geomean(n),
                "ball_mass_median": {str(e): self.median_ball_mass(n, e)
                                     for e in self.epsilon_list},
            }
        return {
            "xi_star": self.xi_star,
            "epsilon_list": list(self.epsilon_list),
            "summary": summary,
            "cells": [c.to_json_dict() for c in self.cells],
        }


def consistency_sweep(family, xi_star, box, behavior_policy,
                      reset_distribution, config: SweepConfig) -> SweepReport:
    """Collect i.i.d. data and fit the mixture likelihood per (N, trial).

    Each cell derives its own seed from the root, so cells are
    order-independent and could run in parallel without changing results.
    Fit failures are recorded in the cell status instead of aborting the
    sweep.
    """
    xi_star = np.asarray(xi_star, dtype=float)
    report = SweepReport(xi_star=xi_star.tolist(),
                         epsilon_list=config.epsilon_list)
    for n in config.dataset_sizes:
        for trial in range(config.trials):
            cell_seed = int(stream_rng(config.rng_seed, "sweep-cell", n, trial)
                            .integers(2**63 - 1))
            cell = _run_cell(family, xi_star, box, behavior_policy,
                             reset_distribution, config, n, trial, cell_seed)
            report.cells.append(cell)
    return report


def _run_cell(family, xi_star, box, behavior_policy, reset_distribution,
              config: SweepConfig, n: int, trial: int, cell_seed: int) -> SweepCell:
    try:
        dataset = collect_iid(family, xi_star, behavior_policy, n,
                              reset_distribution, cell_seed)
        obj_cfg = ObjectiveConfig(n_xi_samples=config.n_xi_samples,
                                  cov_regularizer=config.cov_regularizer,
                                  entropy_weight=0.0, rng_seed=cell_seed)
        result = fit(dataset, family, box, "exact_mixture", obj_cfg,
                     population=config.population,
                     iterations=config.iterations,
                     initial_step=config.initial_step, xi_star=xi_star)
    except Exception as exc:  # recorded, not fatal to the sweep
        return SweepCell(n=n, trial=trial, mu=[], sigma=[], error_mu=math.nan,
                         error_phi=math.nan, sigma_geomean=math.nan,
                         objective_value=math.nan, ball_mass={}, chebyshev={},
                         status=f"error: {exc}")
    g = result.fitted
    error_mu = float(np.linalg.norm(g.mu - xi_star))
    error_phi = float(math.sqrt(error_mu**2 + float(np.sum(g.sigma**2))))
    ball, cheby = {}, {}
    for i, eps in enumerate(config.epsilon_list):
        rng = stream_rng(cell_seed, "ball-mass", i)
        ball[str(eps)] = ball_mass_mc(g, xi_star, eps,
                                      config.ball_mass_samples, rng)
        cheby[str(eps)] = chebyshev_ball_lower_bound(g, xi_star, eps)
    return SweepCell(
        n=n, trial=trial, mu=g.mu.tolist(), sigma=g.sigma.tolist(),
        error_mu=error_mu, error_phi=error_phi,
        sigma_geomean=float(np.exp(np.mean(np.log(g.sigma)))),
        objective_value=result.objective_value, ball_mass=ball, chebyshev=cheby)


def informativeness_curve(report: SweepReport, alpha: float,
                          epsilon: float) -> int | None:
    """Smallest swept N whose median ball mass reaches alpha, else None."""
    if float(epsilon) not in report.epsilon_list:
        raise ValueError(
            f"epsilon {epsilon} was not part of the sweep "
            f"(recorded: {list(report.epsilon_list)})")
    for n in report.sizes():
        if report.median_ball_mass(n, epsilon) >= alpha:
            return n
    return None


# ---------------------------------------------------------------------------
# bound utilities

def covering_bound(d: int, diameter: float, lipschitz: float,
                   epsilon: float) -> int:
    """Upper bound on the epsilon/L-covering number of a set of given diameter.

    ceil(4^d (diameter * L / epsilon)^d), valid for
    0 < epsilon < 2 * diameter * L.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if diameter <= 0 or lipschitz <= 0:
        raise ValueError("diameter and lipschitz must be positive")
    if not 0 < epsilon < 2 * diameter * lipschitz:
        raise ValueError(
            f"epsilon must lie in (0, {2 * diameter * lipschitz}) for this bound")
    return math.ceil(4**d * (diameter * lipschitz / epsilon) ** d)


def hoeffding_deviation_bound(n: int, epsilon: float, m_tilde: float) -> float:
    """2 exp(-n eps^2 / (2 m_tilde^2)): deviation bound for the empirical objective."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if epsilon <= 0 or m_tilde <= 0:
        raise ValueError("epsilon and m_tilde must be positive")
    return 2.0 * math.exp(-n * epsilon**2 / (2.0 * m_tilde**2))


def m_tilde(density_bound: float, mixture_floor: float) -> float:
    """max(|log M|, |log c|): the envelope of the per-transition objective."""
    if density_bound <= 0 or mixture_floor <= 0:
        raise ValueError("bounds must be positive")
    return max(abs(math.log(density_bound)), abs(math.log(mixture_floor)))


def greedy_cover_size(lo, hi, radius: float) -> int:
    """Size of a greedy cover of the box [lo, hi] by radius-balls.

    Candidate centers live on a fine grid; the greedy pass covers grid
    points within radius minus half a grid diagonal, which guarantees the
    continuum box is covered at the full radius.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if radius <= 0:
        raise ValueError("radius must be positive")
    d = lo.size
    h = radius / (4.0 * math.sqrt(d))
    axes = [np.linspace(a, b, max(2, math.ceil((b - a) / h) + 1))
            for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    grid_diag = math.sqrt(sum((ax[1] - ax[0]) ** 2 for ax in axes))
    r_eff = radius - grid_diag / 2.0
    uncovered = np.ones(len(points), dtype=bool)
    count = 0
    while uncovered.any():
        i = int(np.argmax(uncovered))
        center = points[i]
        count += 1
        dist2 = np.sum((points - center) ** 2, axis=1)
        uncovered &= dist2 > r_eff**2
    return count


def empirical_deviation_frequency(mdp_class, sa_distribution, weights,
                                  n: int, epsilon: float, n_datasets: int,
                                  rng_seed) -> float:
    """Fraction of seeded datasets with |L_N - L| >= epsilon at fixed weights.

    Draws ``n_datasets`` datasets of ``n`` transitions from the true
    member under the given (s, a) distribution and compares the empirical
    objective against the exact population value.
    """
    sa = np.asarray(sa_distribution, dtype=float)
    weights = np.asarray(weights, dtype=float)
    n_states, n_actions = sa.shape
    q = np.tensordot(weights, mdp_class.transitions, axes=1)
    with np.errstate(divide="ignore"):
        log_q = np.log(q)
    population = population_loglik_discrete(mdp_class, sa, weights)
    rng = stream_rng(rng_seed, "hoeffding-datasets")
    flat_sa = sa.ravel()
    sa_idx = rng.choice(n_states * n_actions, size=(n_datasets, n), p=flat_sa)
    s_idx, a_idx = np.divmod(sa_idx, n_actions)
    cums = np.cumsum(mdp_class.transitions[mdp_class.true_index], axis=-1)
    u = rng.uniform(size=(n_datasets, n))
    next_idx = (cums[s_idx, a_idx] <= u[..., None]).sum(axis=-1)
    l_n = log_q[s_idx, a_idx, next_idx].mean(axis=1)
    return float(np.mean(np.abs(l_n - population) >= epsilon))
