"""Parametric simulator families sharing state/action/reward structure.

Two concrete families are provided: a continuous-state point-mass system
with Gaussian transition noise (density available in closed form) and a
finite tabular MDP class whose members share rewards, horizon, and start
state but differ in their transition tensors.
"""

from __future__ import annotations

import abc
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .gaussian import LOG_2PI, ParamBox
from .rng import as_generator

logger = logging.getLogger(__name__)


class InvalidParameterError(ValueError):
    """A simulator parameter vector is outside its physical validity range."""


class DensityUnavailableError(RuntimeError):
    """Transition densities were requested from a family that has none."""


class SimulatorFamily(abc.ABC):
    """Contract for a parametric family of dynamics.

    Implementations are immutable after construction; ``step`` is a pure
    function of (xi, state, action, seed).
    """

    param_dim: int
    state_dim: int
    density_available: bool
    density_bound: float | None
    supports_reset: bool = True

    @abc.abstractmethod
    def validate_param(self, xi: np.ndarray) -> None:
        """Raise InvalidParameterError if xi is physically invalid."""

    @abc.abstractmethod
    def step(self, xi, state, action, rng_seed):
        """Sample the next state from P_xi(. | state, action)."""

    def transition_density(self, xi, state, action, next_state) -> float:
        raise DensityUnavailableError(
            f"{type(self).__name__} does not expose transition densities")


class PointMassSim(SimulatorFamily):
    """Point masses on a line under forces, friction, and Gaussian noise.

    Dynamics use semi-implicit Euler: the velocity is updated first from
    the acceleration force/mass - friction * v, then the position from the
    new velocity.  The state interleaves (x_i, v_i) per mass; the action
    is one force per mass.

    Two parameterizations:
      * ``mass_friction``: one mass, xi = (mass, friction), d = 2.
      * ``masses``: xi = the masses of ``n_masses`` bodies, with a known
        shared friction coefficient, d = n_masses.
    """

    def __init__(self, dt: float = 0.1, noise_std=0.05,
                 param_kind: str = "mass_friction", n_masses: int = 1,
                 friction: float = 0.1):
        if dt <= 0:
            raise ValueError("dt must be positive")
        if param_kind not in ("mass_friction", "masses"):
            raise ValueError(f"unknown param_kind {param_kind!r}")
        if param_kind == "mass_friction" and n_masses != 1:
            raise ValueError("mass_friction parameterization is single-mass")
        self.dt = float(dt)
        self.param_kind = param_kind
        self.n_masses = int(n_masses)
        self.friction = float(friction)
        self.state_dim = 2 * self.n_masses
        self.action_dim = self.n_masses
        self.param_dim = 2 if param_kind == "mass_friction" else self.n_masses
        noise = np.broadcast_to(np.asarray(noise_std, dtype=float),
                                (self.state_dim,)).copy()
        if np.any(noise < 0):
            raise ValueError("noise_std entries must be nonnegative")
        noise.setflags(write=False)
        self.noise_std = noise
        self.density_available = bool(np.all(noise > 0))
        if self.density_available:
            self.density_bound = float(np.prod(1.0 / (np.sqrt(2 * np.pi) * noise)))
        else:
            self.density_bound = None

    def validate_param(self, xi) -> None:
        xi = np.asarray(xi, dtype=float)
        if xi.shape[-1] != self.param_dim:
            raise InvalidParameterError(
                f"expected {self.param_dim} parameters, got {xi.shape[-1]}")
        masses, friction = self._split_params(xi)
        if np.any(masses <= 0):
            raise InvalidParameterError("invalid parameter: mass must be positive")
        if np.any(friction < 0):
            raise InvalidParameterError("invalid parameter: friction must be nonnegative")

    def project_params(self, xis: np.ndarray) -> np.ndarray:
        """Push sampled parameters back into the physically valid range.

        Wide fitted sigmas can place a tail of the parameter samples at
        nonpositive masses; those draws are clamped so objectives stay
        finite (the resulting dynamics are extreme and score accordingly).
        """
        out = np.array(xis, dtype=float)
        if self.param_kind == "mass_friction":
            out[..., 0] = np.maximum(out[..., 0], 1e-9)
            out[..., 1] = np.maximum(out[..., 1], 0.0)
        else:
            out = np.maximum(out, 1e-9)
        return out

    def _split_params(self, xi: np.ndarray):
        """Return (masses, friction) views broadcasting over leading axes."""
        if self.param_kind == "mass_friction":
            return xi[..., 0:1], xi[..., 1:2]
        return xi, np.asarray(self.friction)

    def mean_next_states(self, xis, states, actions) -> np.ndarray:
        """Deterministic part f_xi(s, a); broadcasts over leading axes."""
        xis = np.asarray(xis, dtype=float)
        states = np.asarray(states, dtype=float)
        actions = np.asarray(actions, dtype=float)
        if actions.shape[-1:] != (self.action_dim,):
            actions = actions.reshape(actions.shape + (1,)) if self.action_dim == 1 \
                else actions
        masses, friction = self._split_params(xis)
        x = states[..., 0::2]
        v = states[..., 1::2]
        accel = actions / masses - friction * v
        v_next = v + self.dt * accel
        x_next = x + self.dt * v_next
        out = np.empty(np.broadcast(x_next, v_next).shape[:-1] + (self.state_dim,))
        out[..., 0::2] = x_next
        out[..., 1::2] = v_next
        return out

    def step(self, xi, state, action, rng_seed) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        self.validate_param(xi)
        mean = self.mean_next_states(xi, np.asarray(state, dtype=float),
                                     np.asarray(action, dtype=float))
        rng = as_generator(rng_seed)
        return mean + self.noise_std * rng.standard_normal(self.state_dim)

    def transition_density(self, xi, state, action, next_state) -> float:
        return float(np.exp(self.log_transition_density(xi, state, action, next_state)))

    def log_transition_density(self, xi, state, action, next_state) -> float:
        if not self.density_available:
            raise DensityUnavailableError("density unavailable: noiseless dynamics")
        self.validate_param(np.asarray(xi, dtype=float))
        return float(self.log_density_matrix(
            np.asarray(xi, dtype=float)[None, None, :],
            np.asarray(state, dtype=float)[None, :],
            np.atleast_1d(np.asarray(action, dtype=float))[None, :],
            np.asarray(next_state, dtype=float)[None, :])[0, 0])

    def log_density_matrix(self, xis, states, actions, next_states) -> np.ndarray:
        """log p_xi(s'|s,a) for xis (N,K,d) against transitions (N,...).

        Returns an (N, K) matrix; the workhorse of the mixture likelihood.
        """
        if not self.density_available:
            raise DensityUnavailableError("density unavailable: noiseless dynamics")
        means = self.mean_next_states(xis, states[:, None, :], actions[:, None, :])
        z = (next_states[:, None, :] - means) / self.noise_std
        const = -0.5 * self.state_dim * LOG_2PI - float(np.sum(np.log(self.noise_std)))
        return const - 0.5 * np.sum(z * z, axis=-1)

    def config_dict(self) -> dict:
        return {
            "kind": "point_mass",
            "dt": self.dt,
            "noise_std": self.noise_std.tolist(),
            "param_kind": self.param_kind,
            "n_masses": self.n_masses,
            "friction": self.friction,
        }

    @classmethod
    def from_config_dict(cls, obj: dict) -> "PointMassSim":
        return cls(dt=obj["dt"], noise_std=obj["noise_std"],
                   param_kind=obj["param_kind"], n_masses=obj["n_masses"],
                   friction=obj["friction"])


@dataclass(frozen=True)
class FiniteMdpClass:
    """M tabular episodic MDPs sharing (S, A, R, H, s1).

    ``transitions`` has shape (M, S, A, S); each member also carries a
    scalar parameter value (``param_values``) used to place the class on
    a one-dimensional parameter axis for Gaussian fitting.
    """

    transitions: np.ndarray
    reward: np.ndarray
    horizon: int
    start_state: int = 0
    true_index: int = 0
    param_values: np.ndarray = field(default=None)

    def __post_init__(self):
        trans = np.asarray(self.transitions, dtype=float)
        rew = np.asarray(self.reward, dtype=float)
        if trans.ndim != 4 or trans.shape[1] != trans.shape[3]:
            raise ValueError("transitions must have shape (M, S, A, S)")
        if rew.shape != trans.shape[1:3]:
            raise ValueError("reward must have shape (S, A)")
        row_sums = trans.sum(axis=-1)
        if np.any(np.abs(row_sums - 1.0) > 1e-12):
            raise ValueError("transition rows must sum to 1 within 1e-12")
        if np.any(trans < 0):
            raise ValueError("transition probabilities must be nonnegative")
        if np.any((rew < 0) | (rew > 1)):
            raise ValueError("rewards must lie in [0, 1]")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not (0 <= self.start_state < trans.shape[1]):
            raise ValueError("start_state out of range")
        if not (0 <= self.true_index < trans.shape[0]):
            raise ValueError("true_index out of range")
        params = self.param_values
        if params is None:
            params = np.arange(trans.shape[0], dtype=float)
        params = np.asarray(params, dtype=float)
        if params.shape != (trans.shape[0],):
            raise ValueError("param_values must have one entry per member")
        for arr in (trans, rew, params):
            arr.setflags(write=False)
        object.__setattr__(self, "transitions", trans)
        object.__setattr__(self, "reward", rew)
        object.__setattr__(self, "param_values", params)

    @property
    def n_members(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_states(self) -> int:
        return self.transitions.shape[1]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[2]

    density_available = True
    density_bound = 1.0
    supports_reset = True

    def member_index(self, xi) -> int:
        """Map a parameter value (or index) to the nearest class member."""
        if isinstance(xi, (int, np.integer)):
            if not 0 <= xi < self.n_members:
                raise InvalidParameterError(f"member index {xi} out of range")
            return int(xi)
        value = float(np.asarray(xi, dtype=float).reshape(-1)[0])
        return int(np.argmin(np.abs(self.param_values - value)))

    def step_member(self, member: int, state: int, action: int, rng_seed) -> int:
        rng = as_generator(rng_seed)
        row = self.transitions[self.member_index(member), state, action]
        return int(rng.choice(self.n_states, p=row))

    def step(self, xi, state, action, rng_seed) -> int:
        return self.step_member(self.member_index(xi), int(state), int(action), rng_seed)

    def validate_param(self, xi) -> None:
        self.member_index(xi)

    def transition_density(self, xi, state, action, next_state) -> float:
        return float(self.transitions[self.member_index(xi), int(state),
                                      int(action), int(next_state)])

    def config_dict(self) -> dict:
        return {
            "kind": "finite_mdp",
            "transitions": self.transitions.tolist(),
            "reward": self.reward.tolist(),
            "horizon": self.horizon,
            "start_state": self.start_state,
            "true_index": self.true_index,
            "param_values": self.param_values.tolist(),
        }

    @classmethod
    def from_config_dict(cls, obj: dict) -> "FiniteMdpClass":
        return cls(np.asarray(obj["transitions"]), np.asarray(obj["reward"]),
                   obj["horizon"], obj["start_state"], obj["true_index"],
                   np.asarray(obj["param_values"]))


def l1_separation(mdp_class: FiniteMdpClass) -> float:
    """min over member pairs and (s, a) of ||P_i(.|s,a) - P_j(.|s,a)||_1.

    A strictly positive value certifies the separated regime.
    """
    if mdp_class.n_members < 2:
        raise ValueError("separation needs at least 2 members")
    trans = mdp_class.transitions
    best = math.inf
    for i in range(mdp_class.n_members):
        for j in range(i + 1, mdp_class.n_members):
            dist = np.abs(trans[i] - trans[j]).sum(axis=-1)
            best = min(best, float(dist.min()))
    return best


def random_separated_class(n_states: int, n_actions: int, horizon: int,
                           n_members: int, delta: float, rng_seed,
                           row_floor: float = 0.05,
                           max_tries: int = 2000) -> FiniteMdpClass:
    """Rejection-sample a class with l1_separation >= delta.

    Rows are Dirichlet draws smoothed by ``row_floor`` so every transition
    probability is bounded away from zero.
    """
    rng = as_generator(rng_seed)
    reward = rng.uniform(0.0, 1.0, size=(n_states, n_actions))
    for _ in range(max_tries):
        raw = rng.dirichlet(np.ones(n_states), size=(n_members, n_states, n_actions))
        trans = (raw + row_floor) / (1.0 + n_states * row_floor)
        trans /= trans.sum(axis=-1, keepdims=True)
        candidate = FiniteMdpClass(trans, reward, horizon,
                                   start_state=0,
                                   true_index=int(rng.integers(n_members)))
        if l1_separation(candidate) >= delta:
            return candidate
    raise RuntimeError(
        f"could not reach separation {delta} in {max_tries} tries "
        f"(S={n_states}, M={n_members})")


def check_mixture_positivity(family, dataset, box: ParamBox,
                             grid_resolution: int = 5, n_xi_samples: int = 64,
                             rng_seed: int = 0,
                             sigma_values=None) -> float:
    """Estimate the mixture-positivity floor over the dataset and a phi grid.

    Scans Gaussians with means on a per-dimension grid over the box and
    sigmas in ``sigma_values`` (default: the box floor and cap), returning
    the smallest Monte Carlo mixture density seen.  Purely diagnostic; a
    value near zero means some transition is essentially unexplainable by
    every distribution in the box.
    """
    from .gaussian import DiagonalGaussian
    from .likelihood import mixture_density_per_transition

    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if grid_resolution >= 2:
        axes = [np.linspace(lo, hi, grid_resolution)
                for lo, hi in zip(box.lo, box.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        mus = np.stack([m.ravel() for m in mesh], axis=-1)
    else:
        mus = box.center[None, :]
    if sigma_values is None:
        sigma_values = (box.sigma_floor, box.sigma_max)
    c_hat = math.inf
    for mu in mus:
        for sig in sigma_values:
            g = DiagonalGaussian(mu, np.full(box.dim, float(sig)))
            dens = mixture_density_per_transition(family, g, dataset,
                                                  n_xi_samples, rng_seed)
            c_hat = min(c_hat, float(np.min(dens)))
    if c_hat < 1e-12:
        logger.warning("mixture positivity floor estimate %.3e < 1e-12: "
                       "some transition is unexplained by every phi in the box",
                       c_hat)
    return c_hat
