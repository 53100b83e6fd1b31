"""Objective functions for fitting the parameter distribution.

Four objectives:

* ``exact_mixture_loglik``: the mixture log-likelihood
  (1/N) sum_i log E_{xi ~ p_phi}[p_xi(s'_i | s_i, a_i)], with the inner
  expectation either exact (finite classes) or Monte Carlo with common
  random numbers (continuous families).
* ``dropo_loglik``: rollout-based likelihood; per transition, K sampled
  parameters are rolled one step from s_t and the observed next state is
  scored under a Gaussian moment-match of the simulated next states.
* ``edropo_objective``: either base objective plus an entropy bonus.
* ``population_loglik_exact``: the exact population objective on finite
  instances, the quantity whose unique maximizer sits at the true
  parameters with collapsed covariance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .gaussian import LOG_2PI, DiagonalGaussian, entropy
from .rng import stream_rng
from .simulators import FiniteMdpClass

logger = logging.getLogger(__name__)

NEG_INF = float("-inf")


@dataclass(frozen=True)
class ObjectiveConfig:
    """Knobs shared by the fitting objectives.

    n_xi_samples is K, the parameter draws per transition;
    cov_regularizer is the epsilon added to the per-dimension variances;
    entropy_weight is the beta of the entropy bonus (0 disables it).
    cov_variant selects the rollout covariance estimator: "sample" is the
    empirical covariance of the K simulated next states, "mean_residual"
    the alternative built from deviations of their mean from the observed
    next state (rank one before regularization).
    """

    n_xi_samples: int = 10
    cov_regularizer: float = 1e-5
    entropy_weight: float = 0.0
    rng_seed: int = 0
    cov_variant: str = "sample"

    def __post_init__(self):
        if self.n_xi_samples < 1:
            raise ValueError("n_xi_samples must be >= 1")
        if self.cov_regularizer <= 0:
            raise ValueError("cov_regularizer must be positive")
        if self.entropy_weight < 0:
            raise ValueError("entropy_weight must be nonnegative")
        if self.cov_variant not in ("sample", "mean_residual"):
            raise ValueError(f"unknown cov_variant {self.cov_variant!r}")

    def replace(self, **kwargs) -> "ObjectiveConfig":
        merged = {**self.__dict__, **kwargs}
        return ObjectiveConfig(**merged)


def _logmeanexp(a: np.ndarray, axis: int) -> np.ndarray:
    """log(mean(exp(a))) along an axis, tolerating -inf entries."""
    m = np.max(a, axis=axis, keepdims=True)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.mean(np.exp(a - m_safe), axis=axis))
    out = out + np.squeeze(m_safe, axis=axis)
    all_bad = ~np.isfinite(np.squeeze(m, axis=axis))
    return np.where(all_bad, NEG_INF, out)


def _xi_draws(g: DiagonalGaussian, n_transitions: int, k: int, rng_seed) -> np.ndarray:
    """(N, K, d) parameter samples, fixed per transition for a given seed.

    The same seed always yields the same underlying standard normals, so
    objectives evaluated at different phi within one optimizer run see
    common random numbers and the objective is a deterministic function
    of phi.
    """
    z = stream_rng(rng_seed, "xi-draws").standard_normal((n_transitions, k, g.dim))
    return g.mu + g.sigma * z


def exact_mixture_per_transition(dataset, family, g: DiagonalGaussian,
                                 config: ObjectiveConfig) -> np.ndarray:
    """Per-transition log mixture densities log q_phi(s'_i | s_i, a_i)."""
    n = len(dataset)
    if n == 0:
        raise ValueError("dataset is empty")
    if isinstance(family, FiniteMdpClass):
        # finite parameter set: the xi-expectation is a weighted sum, exact
        weights = gaussian_grid_weights(g, family.param_values)
        probs = family.transitions[:, dataset.states, dataset.actions,
                                   dataset.next_states]
        q = weights @ probs
        with np.errstate(divide="ignore"):
            return np.where(q > 0, np.log(np.maximum(q, 1e-300)), NEG_INF)
    if not family.density_available:
        raise ValueError("exact mixture likelihood needs transition densities")
    xis = _xi_draws(g, n, config.n_xi_samples, config.rng_seed)
    if hasattr(family, "project_params"):
        xis = family.project_params(xis)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        logp = family.log_density_matrix(xis, dataset.states, dataset.actions,
                                         dataset.next_states)
    logp = np.where(np.isnan(logp), NEG_INF, logp)
    return _logmeanexp(logp, axis=1)


def exact_mixture_loglik(dataset, family, g: DiagonalGaussian,
                         config: ObjectiveConfig) -> float:
    """(1/N) sum_i log q_phi(s'_i | s_i, a_i); -inf flags dead transitions."""
    per = exact_mixture_per_transition(dataset, family, g, config)
    bad = np.nonzero(~np.isfinite(per))[0]
    if bad.size:
        logger.warning("mixture density is zero on transitions %s "
                       "(positivity violation); objective is -inf",
                       bad.tolist())
        return NEG_INF
    return float(np.mean(per))


def zero_mixture_transitions(dataset, family, g: DiagonalGaussian,
                             config: ObjectiveConfig) -> list[int]:
    """Indices of transitions with zero mixture density under g."""
    per = exact_mixture_per_transition(dataset, family, g, config)
    return np.nonzero(~np.isfinite(per))[0].tolist()


def mixture_density_per_transition(dataset, family, g: DiagonalGaussian,
                                   k: int, rng_seed) -> np.ndarray:
    """Monte Carlo mixture densities q_phi per transition (not logged)."""
    config = ObjectiveConfig(n_xi_samples=k, rng_seed=rng_seed)
    per = exact_mixture_per_transition(dataset, family, g, config)
    return np.exp(per)


def dropo_loglik(dataset, family, g: DiagonalGaussian,
                 config: ObjectiveConfig) -> float:
    """Rollout likelihood: sum_t log N(s_{t+1} | mean, diag var) over the data.

    Per transition, K parameters are drawn from g, the simulator is reset
    to s_t and stepped once with a_t under each draw, and the observed
    next state is scored under a diagonal Gaussian built from the
    simulated next states plus the variance regularizer.
    """
    n = len(dataset)
    if n == 0:
        raise ValueError("dataset is empty")
    if not getattr(family, "supports_reset", False):
        raise ValueError("reset unsupported: family cannot be reset to dataset states")
    if not hasattr(family, "mean_next_states"):
        raise ValueError("dropo likelihood requires a continuous-state family")
    k = config.n_xi_samples
    if k < 2:
        raise ValueError("dropo likelihood needs n_xi_samples >= 2")
    xis = _xi_draws(g, n, k, config.rng_seed)
    if hasattr(family, "project_params"):
        xis = family.project_params(xis)
    means = family.mean_next_states(xis, dataset.states[:, None, :],
                                    dataset.actions[:, None, :])
    eta = stream_rng(config.rng_seed, "rollout-noise").standard_normal(means.shape)
    sims = means + family.noise_std * eta
    s_bar = sims.mean(axis=1)
    resid = dataset.next_states - s_bar
    eps = config.cov_regularizer
    if config.cov_variant == "sample":
        var = sims.var(axis=1, ddof=1) + eps
    else:
        var = (k / (k - 1)) * resid**2 + eps
    ll = -0.5 * (LOG_2PI + np.log(var)) - resid**2 / (2.0 * var)
    return float(np.sum(ll))


def edropo_objective(dataset, family, g: DiagonalGaussian,
                     config: ObjectiveConfig, base: str = "dropo") -> float:
    """Base likelihood plus entropy_weight times the Gaussian entropy."""
    if base == "dropo":
        value = dropo_loglik(dataset, family, g, config)
    elif base == "exact_mixture":
        value = exact_mixture_loglik(dataset, family, g, config)
    else:
        raise ValueError(f"unknown base objective {base!r}")
    if config.entropy_weight == 0.0:
        return value
    return value + config.entropy_weight * entropy(g)


# ---------------------------------------------------------------------------
# exact population objective on finite instances

def gaussian_grid_weights(g: DiagonalGaussian, values) -> np.ndarray:
    """Discretize a 1-d Gaussian onto grid points by normalized density.

    sigma = 0 degenerates to a one-hot on the nearest grid point (lowest
    index on ties), the discrete analogue of the collapsed distribution.
    """
    values = np.asarray(values, dtype=float)
    if g.dim != 1:
        raise ValueError("grid weights are defined for 1-d distributions")
    mu = float(g.mu[0])
    sig = float(g.sigma[0])
    if sig == 0.0:
        weights = np.zeros(values.size)
        weights[int(np.argmin(np.abs(values - mu)))] = 1.0
        return weights
    logw = -0.5 * ((values - mu) / sig) ** 2
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def population_loglik_discrete(mdp_class: FiniteMdpClass, sa_distribution,
                               weights) -> float:
    """Exact E_{(s,a,s') ~ true}[log q_w(s'|s,a)] for member weights w."""
    sa = np.asarray(sa_distribution, dtype=float)
    if sa.shape != (mdp_class.n_states, mdp_class.n_actions):
        raise ValueError("sa_distribution must have shape (S, A)")
    if np.any(sa < 0) or abs(sa.sum() - 1.0) > 1e-9:
        raise ValueError("sa_distribution must be a probability table")
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (mdp_class.n_members,):
        raise ValueError("weights must have one entry per member")
    q = np.tensordot(weights, mdp_class.transitions, axes=1)
    p_true = mdp_class.transitions[mdp_class.true_index]
    support = (p_true > 0) & (sa[:, :, None] > 0)
    if np.any(q[support] == 0):
        return NEG_INF
    with np.errstate(divide="ignore"):
        logq = np.where(support, np.log(np.maximum(q, 1e-300)), 0.0)
    return float(np.sum(sa[:, :, None] * p_true * logq, where=support))


def population_loglik_exact(mdp_class: FiniteMdpClass, sa_distribution,
                            g: DiagonalGaussian) -> float:
    """Population objective of a Gaussian discretized onto the member grid."""
    weights = gaussian_grid_weights(g, mdp_class.param_values)
    return population_loglik_discrete(mdp_class, sa_distribution, weights)
