"""Offline transition datasets: collection, storage, and JSONL round-trips.

A dataset is an immutable ordered collection of (s, a, s') transitions
gathered from the real system, either as i.i.d. draws (reset, act, step)
or as consecutive steps of rolled-out trajectories.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import as_generator, stream_rng
from .simulators import FiniteMdpClass, PointMassSim


@dataclass(frozen=True)
class Transition:
    s: object
    a: object
    s_next: object


class OfflineDataset:
    """Immutable transitions plus collection metadata.

    States and actions are stored as stacked arrays: integer vectors for
    finite state spaces, float matrices for continuous ones.
    """

    def __init__(self, states, actions, next_states, meta: dict | None = None):
        states = np.asarray(states)
        actions = np.asarray(actions)
        next_states = np.asarray(next_states)
        if len(states) != len(actions) or len(states) != len(next_states):
            raise ValueError("states, actions, next_states must share length")
        if states.shape != next_states.shape:
            raise ValueError("s and s_next must have identical shape/kind")
        for arr in (states, actions, next_states):
            arr.setflags(write=False)
        self._states = states
        self._actions = actions
        self._next_states = next_states
        self.meta = dict(meta or {})

    @property
    def states(self) -> np.ndarray:
        return self._states

    @property
    def actions(self) -> np.ndarray:
        return self._actions

    @property
    def next_states(self) -> np.ndarray:
        return self._next_states

    @property
    def discrete(self) -> bool:
        return self._states.dtype.kind in "iu"

    def __len__(self) -> int:
        return len(self._states)

    def __getitem__(self, i: int) -> Transition:
        return Transition(self._states[i], self._actions[i], self._next_states[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, OfflineDataset):
            return NotImplemented
        return (np.array_equal(self._states, other._states)
                and np.array_equal(self._actions, other._actions)
                and np.array_equal(self._next_states, other._next_states)
                and self.meta == other.meta)

    def permuted(self, order) -> "OfflineDataset":
        order = np.asarray(order)
        return OfflineDataset(self._states[order], self._actions[order],
                              self._next_states[order], self.meta)


# ---------------------------------------------------------------------------
# behavior policies and reset distributions

class UniformDiscretePolicy:
    """Uniform-random action over a finite action set."""

    def __init__(self, n_actions: int):
        self.n_actions = int(n_actions)

    def act(self, state, t, rng) -> int:
        return int(rng.integers(self.n_actions))

    def act_batch(self, states, ts, rng) -> np.ndarray:
        return rng.integers(self.n_actions, size=len(ts))


class SinusoidExcitationPolicy:
    """Deterministic sinusoidal forcing, one phase-shifted channel per mass.

    The phase offsets keep multi-mass channels linearly independent so all
    parameters stay identifiable from the logged accelerations.
    """

    def __init__(self, amplitude: float = 1.0, period: float = 17.0,
                 n_channels: int = 1):
        self.amplitude = float(amplitude)
        self.period = float(period)
        self.n_channels = int(n_channels)

    def act(self, state, t, rng=None) -> np.ndarray:
        phases = np.arange(self.n_channels) / self.n_channels
        return self.amplitude * np.sin(2 * np.pi * (t / self.period + phases))

    def act_batch(self, states, ts, rng=None) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)[:, None]
        phases = np.arange(self.n_channels)[None, :] / self.n_channels
        return self.amplitude * np.sin(2 * np.pi * (ts / self.period + phases))


class GaussianReset:
    """State reset distribution N(mean, diag(std^2))."""

    def __init__(self, mean, std):
        self.mean = np.asarray(mean, dtype=float)
        self.std = np.broadcast_to(np.asarray(std, dtype=float), self.mean.shape).copy()

    def sample_batch(self, rng, n: int) -> np.ndarray:
        return self.mean + self.std * rng.standard_normal((n, self.mean.size))

    def sample(self, rng):
        return self.sample_batch(rng, 1)[0]


class PointReset:
    """Deterministic reset to a fixed state."""

    def __init__(self, state):
        self.state = np.asarray(state, dtype=float)

    def sample_batch(self, rng, n: int) -> np.ndarray:
        return np.tile(self.state, (n, 1))

    def sample(self, rng):
        return self.state.copy()


class DiscreteUniformReset:
    """Uniform reset over {0, ..., n_states-1}."""

    def __init__(self, n_states: int):
        self.n_states = int(n_states)

    def sample_batch(self, rng, n: int) -> np.ndarray:
        return rng.integers(self.n_states, size=n)

    def sample(self, rng) -> int:
        return int(rng.integers(self.n_states))


# ---------------------------------------------------------------------------
# collection

def _sample_rows(rows_cum: np.ndarray, rng) -> np.ndarray:
    """Inverse-CDF draw of one categorical outcome per cumulative row."""
    u = rng.uniform(size=len(rows_cum))
    return (rows_cum <= u[:, None]).sum(axis=1)


def collect_iid(family, xi_star, behavior_policy, n: int,
                state_reset_distribution, rng_seed) -> OfflineDataset:
    """n independent transitions: reset, act once, observe the next state."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = stream_rng(rng_seed, "collect-iid")
    meta = {
        "family": _family_config(family),
        "mode": "iid",
        "seed": int(rng_seed),
        "xi_star": _param_record(xi_star),
        "policy": type(behavior_policy).__name__,
    }
    ts = np.arange(n)
    if isinstance(family, FiniteMdpClass):
        member = family.member_index(xi_star)
        states = state_reset_distribution.sample_batch(rng, n).astype(np.int64)
        actions = np.asarray(behavior_policy.act_batch(states, ts, rng), dtype=np.int64)
        cums = np.cumsum(family.transitions[member], axis=-1)
        next_states = _sample_rows(cums[states, actions], rng).astype(np.int64)
        return OfflineDataset(states, actions, next_states, meta)
    family.validate_param(np.asarray(xi_star, dtype=float))
    states = np.asarray(state_reset_distribution.sample_batch(rng, n), dtype=float)
    actions = np.atleast_2d(np.asarray(
        behavior_policy.act_batch(states, ts, rng), dtype=float))
    if actions.shape[0] != n:
        actions = actions.T
    means = family.mean_next_states(np.asarray(xi_star, dtype=float), states, actions)
    noise = family.noise_std * rng.standard_normal(means.shape)
    return OfflineDataset(states, actions, means + noise, meta)


def collect_trajectories(family, xi_star, behavior_policy, n_traj: int,
                         horizon: int, rng_seed,
                         state_reset_distribution=None) -> OfflineDataset:
    """Roll out n_traj episodes and keep every consecutive (s_t, a_t, s_{t+1}).

    Episodes start at the family's start state (finite classes) or at the
    reset distribution / origin (continuous families).  Records are stored
    episode-major, so within an episode each record's s_next chains into
    the next record's s.
    """
    if n_traj < 1 or horizon < 1:
        raise ValueError("n_traj and horizon must be >= 1")
    rng = stream_rng(rng_seed, "collect-traj")
    meta = {
        "family": _family_config(family),
        "mode": "trajectory",
        "seed": int(rng_seed),
        "xi_star": _param_record(xi_star),
        "policy": type(behavior_policy).__name__,
        "n_traj": int(n_traj),
        "horizon": int(horizon),
    }
    if isinstance(family, FiniteMdpClass):
        member = family.member_index(xi_star)
        cums = np.cumsum(family.transitions[member], axis=-1)
        cur = np.full(n_traj, family.start_state, dtype=np.int64)
        ss, aa, nn = [], [], []
        for t in range(horizon):
            acts = np.asarray(behavior_policy.act_batch(cur, np.full(n_traj, t), rng),
                              dtype=np.int64)
            nxt = _sample_rows(cums[cur, acts], rng).astype(np.int64)
            ss.append(cur)
            aa.append(acts)
            nn.append(nxt)
            cur = nxt
        states = np.stack(ss, axis=1).reshape(-1)
        actions = np.stack(aa, axis=1).reshape(-1)
        next_states = np.stack(nn, axis=1).reshape(-1)
        return OfflineDataset(states, actions, next_states, meta)
    family.validate_param(np.asarray(xi_star, dtype=float))
    if state_reset_distribution is None:
        cur = np.zeros((n_traj, family.state_dim))
    else:
        cur = np.asarray(state_reset_distribution.sample_batch(rng, n_traj), dtype=float)
    ss, aa, nn = [], [], []
    for t in range(horizon):
        acts = np.atleast_2d(np.asarray(
            behavior_policy.act_batch(cur, np.full(n_traj, t), rng), dtype=float))
        if acts.shape[0] != n_traj:
            acts = acts.T
        means = family.mean_next_states(np.asarray(xi_star, dtype=float), cur, acts)
        nxt = means + family.noise_std * rng.standard_normal(means.shape)
        ss.append(cur)
        aa.append(acts)
        nn.append(nxt)
        cur = nxt
    states = np.stack(ss, axis=1).reshape(n_traj * horizon, -1)
    actions = np.stack(aa, axis=1).reshape(n_traj * horizon, -1)
    next_states = np.stack(nn, axis=1).reshape(n_traj * horizon, -1)
    return OfflineDataset(states, actions, next_states, meta)


def _family_config(family) -> dict:
    if hasattr(family, "config_dict"):
        return family.config_dict()
    return {"kind": type(family).__name__}


def _param_record(xi):
    if isinstance(xi, (int, np.integer)):
        return int(xi)
    return np.asarray(xi, dtype=float).tolist()


def family_from_config(obj: dict):
    """Rebuild a simulator family from the config stored in dataset meta."""
    kind = obj.get("kind")
    if kind == "point_mass":
        return PointMassSim.from_config_dict(obj)
    if kind == "finite_mdp":
        return FiniteMdpClass.from_config_dict(obj)
    raise ValueError(f"unknown family kind {kind!r}")


# ---------------------------------------------------------------------------
# JSONL persistence

def save(dataset: OfflineDataset, path) -> None:
    """Write the dataset as JSON lines: one meta header, one transition per line."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"meta": dataset.meta}, sort_keys=True) + "\n")
        discrete = dataset.discrete
        for i in range(len(dataset)):
            if discrete:
                rec = {"s": int(dataset.states[i]), "a": int(dataset.actions[i]),
                       "s_next": int(dataset.next_states[i])}
            else:
                rec = {"s": dataset.states[i].tolist(),
                       "a": np.atleast_1d(dataset.actions[i]).tolist(),
                       "s_next": dataset.next_states[i].tolist()}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load(path) -> OfflineDataset:
    """Read a JSONL dataset written by ``save``; validates record shapes."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise ValueError(f"empty dataset file: {path}")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: malformed header line: {exc}") from exc
    meta = header.get("meta", {})
    if len(lines) == 1:
        raise ValueError(f"empty dataset: {path} has a header but no transitions")
    ss, aa, nn = [], [], []
    for idx, line in enumerate(lines[1:]):
        try:
            rec = json.loads(line)
            s, a, s_next = rec["s"], rec["a"], rec["s_next"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValueError(f"{path}: malformed record {idx}: {exc}") from exc
        ss.append(s)
        aa.append(a)
        nn.append(s_next)
        if _shape_of(s) != _shape_of(ss[0]) or _shape_of(s_next) != _shape_of(ss[0]):
            raise ValueError(f"{path}: record {idx} has inconsistent dimensions")
    if isinstance(ss[0], int):
        return OfflineDataset(np.asarray(ss, dtype=np.int64),
                              np.asarray(aa, dtype=np.int64),
                              np.asarray(nn, dtype=np.int64), meta)
    return OfflineDataset(np.asarray(ss, dtype=float),
                          np.asarray(aa, dtype=float),
                          np.asarray(nn, dtype=float), meta)


def _shape_of(value) -> tuple:
    if isinstance(value, list):
        return (len(value),)
    if isinstance(value, (int, float)):
        return ()
    return (math.nan,)
