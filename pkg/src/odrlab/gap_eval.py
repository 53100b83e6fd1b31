"""Exact sim-to-real gap computation on finite MDP classes.

Everything here is exact dynamic programming at desk scale: optimal
values per member, Bayes-optimal history-dependent policies for the
latent MDP induced by a prior over members, the gap of a policy on the
true member, and the finite-case and ball-mass gap bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gaussian import DiagonalGaussian
from .likelihood import gaussian_grid_weights
from .simulators import FiniteMdpClass


@dataclass(frozen=True)
class DiscretePrior:
    """Probability weights over the members of a finite class."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1:
            raise ValueError("weights must be a vector")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n_members: int) -> "DiscretePrior":
        return cls(np.full(n_members, 1.0 / n_members))

    @classmethod
    def alpha_on_true(cls, n_members: int, true_index: int,
                      alpha: float) -> "DiscretePrior":
        """Mass alpha on the true member, the rest spread uniformly."""
        if not 0 < alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if n_members == 1:
            return cls(np.ones(1))
        w = np.full(n_members, (1.0 - alpha) / (n_members - 1))
        w[true_index] = alpha
        return cls(w)


def prior_from_gaussian(mdp_class: FiniteMdpClass,
                        g: DiagonalGaussian) -> DiscretePrior:
    """Bin a fitted 1-d Gaussian's mass onto the class members."""
    return DiscretePrior(gaussian_grid_weights(g, mdp_class.param_values))


def value_iteration(transitions: np.ndarray, reward: np.ndarray,
                    horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Finite-horizon Bellman optimality for one member.

    Returns values of shape (horizon+1, S) with the terminal row zero,
    and the optimal Markov policy of shape (horizon, S).  Argmax ties
    break toward the lowest action index.
    """
    transitions = np.asarray(transitions, dtype=float)
    reward = np.asarray(reward, dtype=float)
    n_states = transitions.shape[0]
    values = np.zeros((horizon + 1, n_states))
    policy = np.zeros((horizon, n_states), dtype=np.int64)
    for h in range(horizon - 1, -1, -1):
        q = reward + transitions @ values[h + 1]
        policy[h] = np.argmax(q, axis=1)
        values[h] = np.take_along_axis(q, policy[h][:, None], axis=1)[:, 0]
    return values, policy


class HistoryPolicy:
    """Deterministic policy keyed by the observed state sequence.

    Since the policy itself is deterministic, the sequence of visited
    states determines the full history; unlisted histories raise.
    """

    def __init__(self, actions: dict[tuple[int, ...], int]):
        self._actions = dict(actions)

    def action(self, state_seq: tuple[int, ...]) -> int:
        try:
            return self._actions[tuple(state_seq)]
        except KeyError:
            raise ValueError(
                f"policy undefined at reachable history {tuple(state_seq)}") from None

    def __len__(self) -> int:
        return len(self._actions)

    def items(self):
        return self._actions.items()


def policy_value(transitions: np.ndarray, reward: np.ndarray, horizon: int,
                 policy, start_state: int) -> float:
    """Exact expected return of a Markov or history-dependent policy."""
    transitions = np.asarray(transitions, dtype=float)
    reward = np.asarray(reward, dtype=float)
    if isinstance(policy, np.ndarray) or (
            isinstance(policy, (list, tuple)) and not isinstance(policy, HistoryPolicy)):
        markov = np.asarray(policy, dtype=np.int64)
        n_states = transitions.shape[0]
        values = np.zeros(n_states)
        for h in range(horizon - 1, -1, -1):
            acts = markov[h]
            rows = transitions[np.arange(n_states), acts]
            values = reward[np.arange(n_states), acts] + rows @ values
        return float(values[start_state])

    def walk(seq: tuple[int, ...], h: int) -> float:
        if h == horizon:
            return 0.0
        s = seq[-1]
        a = policy.action(seq)
        total = float(reward[s, a])
        row = transitions[s, a]
        for s2 in np.nonzero(row > 0)[0]:
            total += row[s2] * walk(seq + (int(s2),), h + 1)
        return total

    return walk((int(start_state),), 0)


def bayes_optimal_policy(mdp_class: FiniteMdpClass, prior: DiscretePrior,
                         max_nodes: int = 10**6) -> tuple[HistoryPolicy, float]:
    """Exact Bayes-optimal history-dependent policy for the latent MDP.

    Dynamic programming over the history tree: at each node the belief
    over members is the Bayes posterior given the transitions observed so
    far, the predictive next-state distribution is the belief mixture,
    and the chosen action maximizes expected remaining return (ties to
    the lowest action index).  Returns the policy and its prior-weighted
    value from the start state.
    """
    m = mdp_class.n_members
    if prior.weights.shape != (m,):
        raise ValueError("prior size does not match the class")
    size = m * (mdp_class.n_states * mdp_class.n_actions) ** mdp_class.horizon
    if size > max_nodes:
        raise ValueError(f"instance too large: {size} > {max_nodes} nodes")
    trans = mdp_class.transitions
    reward = mdp_class.reward
    horizon = mdp_class.horizon

    def plan(seq: tuple[int, ...], belief: np.ndarray,
             h: int) -> tuple[float, dict]:
        if h == horizon:
            return 0.0, {}
        s = seq[-1]
        best_val = -math.inf
        best_actions: dict | None = None
        best_a = -1
        for a in range(mdp_class.n_actions):
            rows = trans[:, s, a, :]
            mix = belief @ rows
            val = float(reward[s, a])
            merged: dict = {}
            for s2 in np.nonzero(mix > 0)[0]:
                post = belief * rows[:, s2]
                post = post / post.sum()
                child_val, child_actions = plan(seq + (int(s2),), post, h + 1)
                val += mix[s2] * child_val
                merged.update(child_actions)
            if val > best_val:
                best_val, best_a, best_actions = val, a, merged
        assert best_actions is not None
        best_actions[seq] = best_a
        return best_val, best_actions

    value, actions = plan((mdp_class.start_state,), prior.weights.copy(), 0)
    return HistoryPolicy(actions), value


def gap(policy, mdp_class: FiniteMdpClass, true_index: int | None = None) -> float:
    """V*(s1) - V^pi(s1) on the designated member; tiny negatives clip to 0."""
    member = mdp_class.true_index if true_index is None else int(true_index)
    trans = mdp_class.transitions[member]
    values, _ = value_iteration(trans, mdp_class.reward, mdp_class.horizon)
    v_pi = policy_value(trans, mdp_class.reward, mdp_class.horizon, policy,
                        mdp_class.start_state)
    diff = float(values[0, mdp_class.start_state]) - v_pi
    if -1e-9 < diff < 0.0:
        return 0.0
    return diff


@dataclass
class GapReport:
    """Gaps of the uniform-prior and fitted-prior Bayes policies.

    ``c_bound`` is the worst per-member gap of the fitted-prior policy,
    ``lemma4_rhs`` is c_bound / alpha, and ``lemma4_ok`` records whether
    the fitted-prior gap respects that bound (it must; a violation is a
    bug, not noise).
    """

    gap_udr: float
    gap_odr: float
    alpha: float
    c_bound: float
    lemma4_rhs: float
    per_model_gaps: list[float]
    lemma4_ok: bool
    bayes_value_udr: float = 0.0
    bayes_value_odr: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "gap_udr": self.gap_udr,
            "gap_odr": self.gap_odr,
            "alpha": self.alpha,
            "c_bound": self.c_bound,
            "lemma4_rhs": self.lemma4_rhs,
            "per_model_gaps": self.per_model_gaps,
            "lemma4_ok": self.lemma4_ok,
            "bayes_value_udr": self.bayes_value_udr,
            "bayes_value_odr": self.bayes_value_odr,
        }


def udr_vs_odr_report(mdp_class: FiniteMdpClass,
                      fitted_prior: DiscretePrior) -> GapReport:
    """Compare the uniform-prior policy against the fitted-prior policy."""
    uniform = DiscretePrior.uniform(mdp_class.n_members)
    pi_udr, v_udr = bayes_optimal_policy(mdp_class, uniform)
    pi_odr, v_odr = bayes_optimal_policy(mdp_class, fitted_prior)
    per_model = [gap(pi_odr, mdp_class, true_index=j)
                 for j in range(mdp_class.n_members)]
    gap_udr = gap(pi_udr, mdp_class)
    gap_odr = per_model[mdp_class.true_index]
    alpha = float(fitted_prior.weights[mdp_class.true_index])
    c_bound = max(per_model)
    lemma4_rhs = c_bound / alpha if alpha > 0 else math.inf
    return GapReport(
        gap_udr=gap_udr, gap_odr=gap_odr, alpha=alpha, c_bound=c_bound,
        lemma4_rhs=lemma4_rhs, per_model_gaps=per_model,
        lemma4_ok=bool(gap_odr <= lemma4_rhs + 1e-12),
        bayes_value_udr=v_udr, bayes_value_odr=v_odr)


def lemma5_bound(c_bound: float, ball_mass: float, lipschitz: float,
                 epsilon: float) -> float:
    """Ball-mass gap bound c / P(B(xi*, eps)) + L * eps."""
    if not 0 < ball_mass <= 1:
        raise ValueError("bound vacuous: ball mass must lie in (0, 1]")
    if lipschitz < 0 or epsilon < 0:
        raise ValueError("lipschitz and epsilon must be nonnegative")
    return c_bound / ball_mass + lipschitz * epsilon
