"""Offline-to-online fine-tuning: exponential decay of the behavioural-cloning
coefficient plus the interaction/update loop that stores new transitions in a
replay buffer seeded with the tail of the offline dataset."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import envs
from .data import Dataset, ReplayBuffer, Transition, sample_minibatch, seed_buffer
from .errors import ConfigError
from .metrics import MetricsLog

FINETUNE_COLUMNS = ("step", "eval_score_mean", "eval_score_stderr", "beta",
                    "buffer_size")


def decay_rate(beta_start: float, beta_end: float, decay_steps: int) -> float:
    """Per-step multiplier such that ``beta_start * rate**decay_steps == beta_end``."""
    if beta_start <= 0 or beta_end <= 0:
        raise ConfigError(
            f"decay endpoints must be positive, got ({beta_start}, {beta_end}); "
            "use the schedule's floor for effectively-zero targets (e.g. 1e-12)")
    if decay_steps < 1:
        raise ConfigError(f"decay_steps must be >= 1, got {decay_steps}")
    return math.exp(math.log(beta_end / beta_start) / decay_steps)


@dataclass
class DecaySchedule:
    """Exponentially decaying BC coefficient, floored at ``beta_end``."""

    beta_start: float
    beta_end: float
    decay_steps: int = 50_000
    kappa: float = field(init=False)
    beta: float = field(init=False)

    def __post_init__(self):
        if self.beta_end > self.beta_start:
            raise ConfigError(
                f"beta_end {self.beta_end} must not exceed beta_start {self.beta_start}")
        if self.beta_start == 0.0 and self.beta_end == 0.0:
            self.kappa = 1.0
        else:
            self.kappa = decay_rate(self.beta_start, self.beta_end, self.decay_steps)
        self.beta = self.beta_start

    def step(self) -> float:
        """``beta <- max(beta_end, kappa * beta)``; returns the updated value."""
        self.beta = max(self.beta_end, self.kappa * self.beta)
        return self.beta


def decay_step(schedule: DecaySchedule) -> float:
    return schedule.step()


def evaluate_returns(agent, spec: envs.EnvSpec, episodes: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Deterministic-policy rollouts (noise-free / squashed-mean actions)."""
    return np.array([
        envs.rollout_episode(spec, lambda obs, r: agent.eval_action(obs), rng)
        for _ in range(episodes)])


def run_finetune(agent, spec: envs.EnvSpec, dataset: Dataset,
                 schedule: DecaySchedule, total_steps: int, *,
                 warmup: int = 2500, eval_every: int = 5000, last_k: int = 2500,
                 buffer_capacity: int = 1_000_000, eval_episodes: int = 10,
                 seed: int = 0, score_ref=None, eval_callback=None) -> MetricsLog:
    """Online fine-tuning loop.

    Seeds the buffer with the final ``last_k`` dataset transitions, interacts
    for ``warmup`` steps without learning, then alternates one environment
    step with one full agent update (the agent keeps its own critic-to-actor
    cadence) and one schedule decay per interaction.  The inflated-beta warm
    start never applies online: the schedule's value is passed straight to the
    agent.  Policies are evaluated with the deterministic action rule every
    ``eval_every`` interactions plus once before any interaction.

    When ``score_ref`` is given, eval rows log normalised scores; otherwise
    raw returns.  Returns the metrics table.
    """
    rng = np.random.default_rng(seed)
    eval_rng_seed = np.random.default_rng(seed + 1).integers(2**31)
    buffer = ReplayBuffer(buffer_capacity, spec.state_dim, spec.action_dim)
    seed_buffer(buffer, dataset, last_k)
    log = MetricsLog(FINETUNE_COLUMNS)

    def record_eval(step_count):
        rets = evaluate_returns(agent, spec,
                                eval_episodes, np.random.default_rng(eval_rng_seed))
        if score_ref is not None:
            rets = score_ref.normalize(rets)
        stderr = float(rets.std(ddof=1) / np.sqrt(len(rets))) if len(rets) > 1 else 0.0
        log.append(step=step_count, eval_score_mean=float(rets.mean()),
                   eval_score_stderr=stderr, beta=schedule.beta,
                   buffer_size=len(buffer))
        if eval_callback is not None:
            eval_callback(agent, step_count, rets)

    record_eval(0)
    state = envs.reset(spec, rng)

    def interact(state):
        action = agent.explore_action(state.observation, rng)
        nxt, reward, done = envs.step(spec, state, action)
        buffer.push(Transition(state.observation, action, reward,
                               nxt.observation, done))
        return envs.reset(spec, rng) if done else nxt

    for _ in range(min(warmup, total_steps)):
        state = interact(state)

    for step in range(warmup, total_steps):
        state = interact(state)
        batch = sample_minibatch(buffer, agent.config.batch_size, rng)
        agent.train_step(batch, rng, beta=schedule.beta)
        schedule.step()
        if (step + 1) % eval_every == 0:
            record_eval(step + 1)
    if total_steps > warmup and total_steps % eval_every != 0:
        record_eval(total_steps)
    return log
