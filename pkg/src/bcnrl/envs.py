"""Deterministic point-mass environments and the scripted data-collection
controllers used to build behaviour datasets at three quality tiers.

Two tasks share the same dynamics (position clamped to the arena box, moved
by ``step_scale * action``) and differ only in reward: ``point-dense`` pays
the negative distance to the goal every step, ``point-sparse`` pays 1 inside
the goal radius and ends the episode there.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError

TIERS = ("random", "medium", "expert")

EXPERT_NOISE = 0.05
MEDIUM_NOISE = 0.4
MEDIUM_RANDOM_PROB = 0.3


@dataclass(frozen=True)
class EnvSpec:
    name: str
    reward_mode: str  # "dense" | "sparse"
    state_dim: int = 2
    action_dim: int = 2
    max_episode_steps: int = 100
    step_scale: float = 0.05
    goal: tuple = (0.7, 0.7)
    goal_radius: float = 0.1
    arena_half_width: float = 1.0

    def __post_init__(self):
        if self.reward_mode not in ("dense", "sparse"):
            raise ConfigError(f"unknown reward mode {self.reward_mode!r}")
        if self.state_dim <= 0 or self.action_dim <= 0 or self.max_episode_steps <= 0:
            raise ConfigError("dimensions and horizon must be positive")

    @property
    def goal_array(self) -> np.ndarray:
        return np.asarray(self.goal, dtype=np.float64)

    def to_dict(self) -> dict:
        return {
            "name": self.name, "reward_mode": self.reward_mode,
            "state_dim": self.state_dim, "action_dim": self.action_dim,
            "max_episode_steps": self.max_episode_steps,
            "step_scale": self.step_scale, "goal": list(self.goal),
            "goal_radius": self.goal_radius,
            "arena_half_width": self.arena_half_width,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnvSpec":
        d = dict(d)
        d["goal"] = tuple(d["goal"])
        return cls(**d)


_REGISTRY = {
    "point-dense": EnvSpec(name="point-dense", reward_mode="dense"),
    "point-sparse": EnvSpec(name="point-sparse", reward_mode="sparse"),
}


def make_env(name: str, **overrides) -> EnvSpec:
    """Look up an environment by name, optionally overriding dynamics constants."""
    if name not in _REGISTRY:
        raise ConfigError(f"unknown environment {name!r}; known: {sorted(_REGISTRY)}")
    spec = _REGISTRY[name]
    return replace(spec, **overrides) if overrides else spec


def env_names():
    return sorted(_REGISTRY)


@dataclass
class EnvState:
    position: np.ndarray
    step_count: int = 0

    @property
    def observation(self) -> np.ndarray:
        return self.position.copy()


def reset(spec: EnvSpec, rng: np.random.Generator) -> EnvState:
    """Place the agent uniformly at random inside the arena."""
    pos = rng.uniform(-spec.arena_half_width, spec.arena_half_width,
                      size=spec.state_dim)
    return EnvState(position=pos, step_count=0)


def step(spec: EnvSpec, state: EnvState, action: np.ndarray):
    """Deterministic point-mass transition; returns ``(next_state, reward, done)``."""
    action = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
    pos = np.clip(state.position + spec.step_scale * action,
                  -spec.arena_half_width, spec.arena_half_width)
    dist = float(np.linalg.norm(pos - spec.goal_array))
    count = state.step_count + 1
    at_goal = dist <= spec.goal_radius
    if spec.reward_mode == "dense":
        reward = -dist
        done = count >= spec.max_episode_steps
    else:
        reward = 1.0 if at_goal else 0.0
        done = at_goal or count >= spec.max_episode_steps
    return EnvState(position=pos, step_count=count), reward, done


def _expert_direction(spec: EnvSpec, position: np.ndarray) -> np.ndarray:
    delta = spec.goal_array - position
    norm = np.linalg.norm(delta)
    if norm < 1e-9:  # standing on the goal: nothing to correct
        return np.zeros(spec.action_dim)
    return delta / norm


def scripted_controller(spec: EnvSpec, tier: str, state, rng: np.random.Generator):
    """Behaviour-policy action for one of the three data tiers.

    ``state`` may be an :class:`EnvState` or a bare position vector.  Expert
    heads straight for the goal with light noise, medium is a noisy and
    occasionally uniformly random version of the same, random ignores the
    state entirely.
    """
    position = state.position if isinstance(state, EnvState) else np.asarray(state)
    if tier == "random":
        action = rng.uniform(-1.0, 1.0, size=spec.action_dim)
    elif tier == "expert":
        action = _expert_direction(spec, position) + \
            EXPERT_NOISE * rng.standard_normal(spec.action_dim)
    elif tier == "medium":
        if rng.uniform() < MEDIUM_RANDOM_PROB:
            action = rng.uniform(-1.0, 1.0, size=spec.action_dim)
        else:
            action = _expert_direction(spec, position) + \
                MEDIUM_NOISE * rng.standard_normal(spec.action_dim)
    else:
        raise ConfigError(f"unknown tier {tier!r}; known: {TIERS}")
    return np.clip(action, -1.0, 1.0)


def rollout_episode(spec: EnvSpec, action_fn, rng: np.random.Generator) -> float:
    """Run one episode with ``action_fn(observation, rng) -> action``; return the return."""
    state = reset(spec, rng)
    total = 0.0
    done = False
    while not done:
        action = action_fn(state.observation, rng)
        state, reward, done = step(spec, state, action)
        total += reward
    return total


def rollout_tier(spec: EnvSpec, tier: str, episodes: int, rng: np.random.Generator):
    """Returns of ``episodes`` scripted-controller episodes."""
    action_fn = lambda obs, r: scripted_controller(spec, tier, obs, r)
    return np.array([rollout_episode(spec, action_fn, rng) for _ in range(episodes)])
