"""Datasets of environment transitions: generation with scripted tiers,
normalisation statistics, affine reward transforms, binary persistence and
the FIFO replay buffer used during fine-tuning.

A dataset is stored columnar (one array per field) for fast minibatching;
:class:`Transition` is the single-record view used at the buffer interface.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import envs
from .errors import ConfigError, EmptySourceError

NORM_EPS = 1e-3
FORMAT_VERSION = 1

# medium-replay proxy: noise anneals from random-like to medium-like over the log
REPLAY_TIER = "medium-replay"


class Transition(NamedTuple):
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    terminal: bool


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray  # float mask, 1.0 at episode boundaries


@dataclass
class Provenance:
    env: str
    tier: str
    seed: int
    size: int
    env_params: dict = field(default_factory=dict)

    def to_dict(self):
        return {"env": self.env, "tier": self.tier, "seed": self.seed,
                "size": self.size, "env_params": self.env_params}


@dataclass
class Dataset:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray
    provenance: Provenance
    state_mean: np.ndarray = None
    state_std: np.ndarray = None
    reward_scale: float = 1.0
    reward_offset: float = 0.0

    def __post_init__(self):
        n = len(self.states)
        for arr in (self.actions, self.rewards, self.next_states, self.terminals):
            if len(arr) != n:
                raise ConfigError("dataset columns have inconsistent lengths")
        if self.state_mean is None:
            self.state_mean, self.state_std = state_stats(self.states)
        self.provenance.size = n

    def __len__(self):
        return len(self.states)

    @property
    def state_dim(self):
        return self.states.shape[1]

    @property
    def action_dim(self):
        return self.actions.shape[1]

    def transition(self, i: int) -> Transition:
        return Transition(self.states[i], self.actions[i], float(self.rewards[i]),
                          self.next_states[i], bool(self.terminals[i]))

    def gather(self, idx) -> Batch:
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.terminals[idx])


def state_stats(states: np.ndarray):
    """Per-coordinate mean and standard deviation of the dataset states."""
    if len(states) == 0:
        raise ConfigError("cannot compute statistics of an empty dataset")
    return states.mean(axis=0), states.std(axis=0)


def normalize_state(dataset_or_stats, state: np.ndarray) -> np.ndarray:
    """``(state - mean) / (std + eps)``; the epsilon floors constant coordinates."""
    if isinstance(dataset_or_stats, Dataset):
        mean, std = dataset_or_stats.state_mean, dataset_or_stats.state_std
    else:
        mean, std = dataset_or_stats
    return (state - mean) / (std + NORM_EPS)


def transform_reward(r, scale: float, offset: float):
    """Affine reward map ``scale * (r - offset)``."""
    return scale * (np.asarray(r, dtype=np.float64) - offset)


def generate_dataset(spec: envs.EnvSpec, tier: str, size: int, seed: int) -> Dataset:
    """Roll scripted-controller episodes until ``size`` transitions are logged.

    The ``medium-replay`` tier mixes the medium controller with extra uniform
    actions whose probability anneals from 1 to 0 across the log, mimicking the
    early portion of a training run; the plain tiers use their controller as is.
    """
    if size < 1:
        raise ConfigError(f"dataset size must be >= 1, got {size}")
    if tier not in envs.TIERS + (REPLAY_TIER,):
        raise ConfigError(f"unknown tier {tier!r}")
    rng = np.random.default_rng(seed)
    states = np.empty((size, spec.state_dim))
    actions = np.empty((size, spec.action_dim))
    rewards = np.empty(size)
    next_states = np.empty((size, spec.state_dim))
    terminals = np.empty(size)

    i = 0
    state = envs.reset(spec, rng)
    while i < size:
        if tier == REPLAY_TIER:
            extra_random = 1.0 - i / max(size - 1, 1)
            if rng.uniform() < extra_random:
                action = rng.uniform(-1.0, 1.0, size=spec.action_dim)
            else:
                action = envs.scripted_controller(spec, "medium", state, rng)
        else:
            action = envs.scripted_controller(spec, tier, state, rng)
        nxt, reward, done = envs.step(spec, state, action)
        states[i] = state.position
        actions[i] = action
        rewards[i] = reward
        next_states[i] = nxt.position
        terminals[i] = 1.0 if done else 0.0
        state = envs.reset(spec, rng) if done else nxt
        i += 1

    prov = Provenance(env=spec.name, tier=tier, seed=seed, size=size,
                      env_params=spec.to_dict())
    return Dataset(states, actions, rewards, next_states, terminals, prov)


def concat(a: Dataset, b: Dataset) -> Dataset:
    """Concatenate two datasets from the same environment; stats recomputed."""
    if a.provenance.env != b.provenance.env and len(b) > 0 and len(a) > 0:
        raise ConfigError(
            f"cannot concatenate datasets from {a.provenance.env!r} and "
            f"{b.provenance.env!r}")
    if len(b) > 0 and len(a) > 0 and (
            a.state_dim != b.state_dim or a.action_dim != b.action_dim):
        raise ConfigError("cannot concatenate datasets with different dimensions")
    prov = Provenance(env=a.provenance.env,
                      tier=f"{a.provenance.tier}+{b.provenance.tier}",
                      seed=a.provenance.seed, size=len(a) + len(b),
                      env_params=a.provenance.env_params)
    return Dataset(
        np.concatenate([a.states, b.states]),
        np.concatenate([a.actions, b.actions]),
        np.concatenate([a.rewards, b.rewards]),
        np.concatenate([a.next_states, b.next_states]),
        np.concatenate([a.terminals, b.terminals]),
        prov, reward_scale=a.reward_scale, reward_offset=a.reward_offset)


# ---------------------------------------------------------------------------
# persistence: JSON header line + fixed-width little-endian float64 records
# ---------------------------------------------------------------------------

def save_dataset(dataset: Dataset, path: str):
    header = {
        "format_version": FORMAT_VERSION,
        "provenance": dataset.provenance.to_dict(),
        "state_dim": dataset.state_dim,
        "action_dim": dataset.action_dim,
        "size": len(dataset),
        "state_mean": dataset.state_mean.tolist(),
        "state_std": dataset.state_std.tolist(),
        "reward_scale": dataset.reward_scale,
        "reward_offset": dataset.reward_offset,
    }
    record = np.hstack([
        dataset.states, dataset.actions, dataset.rewards[:, None],
        dataset.next_states, dataset.terminals[:, None]])
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        fh.write(record.astype("<f8").tobytes())


def load_dataset(path: str, reward_scale: float = None,
                 reward_offset: float = None) -> Dataset:
    """Read a dataset; an affine reward transform given here is applied and
    recorded (replacing any transform noted in the file)."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("format_version") != FORMAT_VERSION:
            raise ConfigError(
                f"unsupported dataset format version {header.get('format_version')}")
        ds, da, n = header["state_dim"], header["action_dim"], header["size"]
        width = 2 * ds + da + 2
        raw = np.frombuffer(fh.read(), dtype="<f8").reshape(n, width)
    states = raw[:, :ds].copy()
    actions = raw[:, ds:ds + da].copy()
    rewards = raw[:, ds + da].copy()
    next_states = raw[:, ds + da + 1:2 * ds + da + 1].copy()
    terminals = raw[:, -1].copy()
    if reward_scale is not None or reward_offset is not None:
        scale = 1.0 if reward_scale is None else float(reward_scale)
        offset = 0.0 if reward_offset is None else float(reward_offset)
        rewards = transform_reward(rewards, scale, offset)
    else:
        scale = header.get("reward_scale", 1.0)
        offset = header.get("reward_offset", 0.0)
    prov = Provenance(**header["provenance"])
    return Dataset(states, actions, rewards, next_states, terminals, prov,
                   state_mean=np.array(header["state_mean"]),
                   state_std=np.array(header["state_std"]),
                   reward_scale=scale, reward_offset=offset)


def export_csv(dataset: Dataset, path: str):
    """Human-readable dump with one row per transition."""
    ds, da = dataset.state_dim, dataset.action_dim
    cols = ([f"s{i}" for i in range(ds)] + [f"a{i}" for i in range(da)]
            + ["reward"] + [f"ns{i}" for i in range(ds)] + ["terminal"])
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(len(dataset)):
            row = (list(dataset.states[i]) + list(dataset.actions[i])
                   + [dataset.rewards[i]] + list(dataset.next_states[i])
                   + [dataset.terminals[i]])
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


# ---------------------------------------------------------------------------
# replay buffer
# ---------------------------------------------------------------------------

class ReplayBuffer:
    """Fixed-capacity FIFO buffer with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ConfigError(f"capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.states = np.empty((capacity, state_dim))
        self.actions = np.empty((capacity, action_dim))
        self.rewards = np.empty(capacity)
        self.next_states = np.empty((capacity, state_dim))
        self.terminals = np.empty(capacity)
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def push(self, t: Transition):
        i = self.cursor
        self.states[i] = t.state
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.next_states[i] = t.next_state
        self.terminals[i] = 1.0 if t.terminal else 0.0
        self.cursor = (self.cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def gather(self, idx) -> Batch:
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.terminals[idx])


def seed_buffer(buffer: ReplayBuffer, dataset: Dataset, last_k: int) -> ReplayBuffer:
    """Preload the buffer with the final ``last_k`` dataset transitions, in order."""
    if last_k > len(dataset):
        raise ConfigError(
            f"last_k={last_k} exceeds dataset size {len(dataset)}")
    for i in range(len(dataset) - last_k, len(dataset)):
        buffer.push(dataset.transition(i))
    return buffer


def sample_minibatch(source, batch: int, rng: np.random.Generator) -> Batch:
    """Uniform with-replacement minibatch from a dataset or replay buffer."""
    n = len(source)
    if n == 0:
        raise EmptySourceError("cannot sample from an empty source")
    if batch < 1:
        raise ConfigError(f"batch size must be >= 1, got {batch}")
    idx = rng.integers(0, n, size=batch)
    return source.gather(idx)
