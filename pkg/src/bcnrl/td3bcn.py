"""TD3-BC-N: deterministic-policy actor-critic with an N-critic ensemble and
a mean-squared behavioural-cloning term in the policy objective.

Policy evaluation bootstraps either a shared ensemble-minimum target or each
member's own target network.  Policy improvement ascends the ensemble minimum
normalised by the batch mean of its absolute value (the denominator is a
constant, never differentiated) minus ``beta`` times the BC mean squared
error, averaged over batch and action dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import data, nn, updates
from .errors import ConfigError, DivergenceError
from .metrics import MetricsLog

TARGET_MODES = ("shared", "independent")


@dataclass
class Td3BcnConfig:
    n_critics: int = 10
    hidden_width: int = 256
    hidden_layers: int = 3
    gamma: float = 0.99
    tau: float = 0.005
    policy_noise: float = 0.2
    noise_clip: float = 0.5
    beta: float = 0.04
    target_mode: str = "shared"
    critic_per_policy: int = 2  # critic-to-actor update ratio
    beta_inflation: float = 10.0
    inflation_steps: int = 50_000
    batch_size: int = 256
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    exploration_noise: float = 0.1
    divergence_ceiling: float = 1e6

    def __post_init__(self):
        if self.n_critics < 1:
            raise ConfigError(f"need at least one critic, got {self.n_critics}")
        if self.target_mode not in TARGET_MODES:
            raise ConfigError(f"target_mode must be one of {TARGET_MODES}")
        if self.beta < 0:
            raise ConfigError(f"beta must be non-negative, got {self.beta}")
        if self.critic_per_policy < 1:
            raise ConfigError("critic-to-actor ratio must be >= 1")


def policy_loss_and_grads(policy: nn.Mlp, critics: nn.MlpEnsemble,
                          states_norm: np.ndarray, data_actions: np.ndarray,
                          beta: float, denom: float = None):
    """Loss (negated ascent objective) and policy gradients for one batch.

    The objective is ``mean(min_i Q_i(s, pi(s))) / denom - beta * mse`` where
    ``denom`` defaults to this batch's mean |min Q| and is treated as a
    constant either way; critic parameters receive no gradient.

    Returns ``(loss, grads, stats)`` with ``stats = (q_term, bc_term,
    q_min_mean, denom)``.
    """
    pre_tanh, cache_p = policy.forward_cached(states_norm)
    actions = np.tanh(pre_tanh)
    x = updates.critic_input(states_norm, actions)
    q, cache_q = critics.forward_cached(x)
    q_min, onehot = updates.min_with_onehot(q[..., 0])
    if denom is None:
        denom = updates.norm_denominator(q_min)
    batch = len(q_min)

    q_term = float(q_min.mean() / denom)
    diff = actions - data_actions
    bc_term = float(np.mean(np.square(diff)))
    loss = -(q_term - beta * bc_term)

    # gradient of the loss w.r.t. the policy action
    d_q = (-1.0 / (batch * denom)) * onehot[..., None]
    _, d_x = critics.backward(cache_q, d_q, param_grads=False, input_grad=True)
    d_action = d_x.sum(axis=0)[:, states_norm.shape[1]:]
    d_action = d_action + beta * (2.0 / diff.size) * diff
    d_pre_tanh = d_action * (1.0 - np.square(actions))
    grads, _ = policy.backward(cache_p, d_pre_tanh)
    return loss, grads, (q_term, bc_term, float(q_min.mean()), denom)


class Td3BcnAgent:
    kind = "td3bcn"
    METRIC_COLUMNS = ("step", "critic_loss_mean", "policy_loss", "bc_term",
                      "q_term", "beta_effective", "q_min_mean")

    def __init__(self, state_dim: int, action_dim: int,
                 config: Td3BcnConfig = None, seed: int = 0,
                 state_mean=None, state_std=None):
        self.config = config or Td3BcnConfig()
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        rng = np.random.default_rng(seed)
        hidden = [self.config.hidden_width] * self.config.hidden_layers
        self.policy = nn.Mlp.init([state_dim, *hidden, action_dim], rng)
        self.policy_target = self.policy.copy()
        self.critics = nn.MlpEnsemble.init(
            [state_dim + action_dim, *hidden, 1], self.config.n_critics, rng)
        self.critic_targets = self.critics.copy()
        self.policy_adam = nn.AdamState.init(self.policy.params, self.config.actor_lr)
        self.critic_adam = nn.AdamState.init(self.critics.params, self.config.critic_lr)
        self.updates_done = 0
        self.denom_floor_hits = 0
        self.state_mean = (np.zeros(state_dim) if state_mean is None
                           else np.asarray(state_mean, dtype=np.float64))
        self.state_std = (np.ones(state_dim) if state_std is None
                          else np.asarray(state_std, dtype=np.float64))

    # -- plumbing -----------------------------------------------------------

    def set_normalizer(self, dataset: data.Dataset):
        self.state_mean = dataset.state_mean.copy()
        self.state_std = dataset.state_std.copy()

    def _norm(self, states):
        return data.normalize_state((self.state_mean, self.state_std), states)

    def beta_effective(self, beta: float = None) -> float:
        """Offline schedule: inflated during the initial window."""
        beta = self.config.beta if beta is None else beta
        if self.updates_done < self.config.inflation_steps:
            return beta * self.config.beta_inflation
        return beta

    # -- acting ---------------------------------------------------------------

    def policy_action(self, states_norm, net: nn.Mlp = None) -> np.ndarray:
        net = net or self.policy
        return np.tanh(net.forward(states_norm))

    def select_action(self, state, noise_scale: float = 0.0,
                      rng: np.random.Generator = None) -> np.ndarray:
        """Greedy action plus optional exploration noise, clamped to bounds."""
        if noise_scale < 0:
            raise ConfigError(f"noise scale must be >= 0, got {noise_scale}")
        action = self.policy_action(self._norm(np.asarray(state)[None]))[0]
        if noise_scale > 0:
            action = action + noise_scale * rng.standard_normal(self.action_dim)
        return np.clip(action, -1.0, 1.0)

    def explore_action(self, state, rng) -> np.ndarray:
        return self.select_action(state, self.config.exploration_noise, rng)

    def eval_action(self, state) -> np.ndarray:
        return self.select_action(state, 0.0)

    def target_action(self, next_states, rng: np.random.Generator) -> np.ndarray:
        """Smoothed target-policy action: clipped Gaussian noise, clamped output."""
        a = self.policy_action(self._norm(next_states), net=self.policy_target)
        noise = np.clip(self.config.policy_noise * rng.standard_normal(a.shape),
                        -self.config.noise_clip, self.config.noise_clip)
        return np.clip(a + noise, -1.0, 1.0)

    # -- updates ----------------------------------------------------------------

    def bootstrap_targets(self, batch: data.Batch, rng, mode: str = None):
        """Regression targets ``(n, batch)``; terminal transitions do not bootstrap."""
        mode = mode or self.config.target_mode
        if mode not in TARGET_MODES:
            raise ConfigError(f"target_mode must be one of {TARGET_MODES}")
        next_action = self.target_action(batch.next_states, rng)
        x2 = updates.critic_input(self._norm(batch.next_states), next_action)
        q2 = self.critic_targets.forward(x2)[..., 0]
        boot = q2.min(axis=0, keepdims=True) if mode == "shared" else q2
        y = batch.rewards + self.config.gamma * (1.0 - batch.terminals) * boot
        y = np.broadcast_to(y, (self.config.n_critics, len(batch.rewards)))
        updates.check_targets_finite(y)
        return y

    def critic_update(self, batch: data.Batch, rng, mode: str = None) -> np.ndarray:
        """One Adam step of every ensemble member; returns per-member losses."""
        y = self.bootstrap_targets(batch, rng, mode)
        x = updates.critic_input(self._norm(batch.states), batch.actions)
        return updates.critic_regression_step(self.critics, self.critic_adam, x, y)

    def policy_update(self, batch: data.Batch, beta: float = None):
        """Ascend normalised min-Q minus the BC penalty; returns
        ``(policy_loss, bc_term, q_term, q_min_mean)``."""
        beta = self.config.beta if beta is None else beta
        states_norm = self._norm(batch.states)
        holder = {}

        def loss_fn(params):
            loss, grads, stats = policy_loss_and_grads(
                self.policy, self.critics, states_norm, batch.actions, beta)
            holder["stats"] = stats
            return loss, grads

        loss, grads = nn.value_and_grad(loss_fn, self.policy.params)
        nn.adam_step(self.policy.params, grads, self.policy_adam)
        q_term, bc_term, q_min_mean, denom = holder["stats"]
        if denom <= updates.DENOM_FLOOR:
            self.denom_floor_hits += 1
        return loss, bc_term, q_term, q_min_mean

    def polyak_targets(self):
        nn.polyak_update(self.critic_targets.params, self.critics.params,
                         self.config.tau)
        nn.polyak_update(self.policy_target.params, self.policy.params,
                         self.config.tau)

    def train_step(self, batch: data.Batch, rng, beta: float = None) -> dict:
        """One training-loop step honouring the critic-to-actor ratio.

        ``beta`` overrides the offline inflation schedule (used online where
        a decay schedule supplies the coefficient directly).
        """
        beta_eff = self.beta_effective() if beta is None else beta
        losses = self.critic_update(batch, rng)
        critic_loss = float(losses.mean())
        if not np.isfinite(critic_loss) or critic_loss > self.config.divergence_ceiling:
            raise DivergenceError(self.updates_done, critic_loss)
        out = {"critic_loss_mean": critic_loss, "beta_effective": beta_eff}
        if (self.updates_done + 1) % self.config.critic_per_policy == 0:
            policy_loss, bc_term, q_term, q_min_mean = self.policy_update(batch, beta_eff)
            self.polyak_targets()
            out.update(policy_loss=policy_loss, bc_term=bc_term,
                       q_term=q_term, q_min_mean=q_min_mean)
        self.updates_done += 1
        return out

    def train_offline(self, dataset: data.Dataset, gradient_steps: int,
                      seed: int = 0, metrics_every: int = 1000,
                      eval_hook=None, eval_every: int = 5000) -> MetricsLog:
        """Offline training loop; returns the metrics table.

        Raises :class:`DivergenceError` when the mean critic loss crosses the
        configured ceiling.
        """
        if len(dataset) == 0:
            raise ConfigError("dataset is empty")
        rng = np.random.default_rng(seed)
        log = MetricsLog(self.METRIC_COLUMNS)
        last = {"policy_loss": np.nan, "bc_term": np.nan, "q_term": np.nan,
                "q_min_mean": np.nan}
        for t in range(gradient_steps):
            batch = data.sample_minibatch(dataset, self.config.batch_size, rng)
            info = self.train_step(batch, rng)
            for key in last:
                if key in info:
                    last[key] = info[key]
            if (t + 1) % metrics_every == 0 or t + 1 == gradient_steps:
                log.append(step=self.updates_done,
                           critic_loss_mean=info["critic_loss_mean"],
                           beta_effective=info["beta_effective"], **last)
            if eval_hook is not None and (t + 1) % eval_every == 0:
                eval_hook(self, self.updates_done)
        return log

    # -- checkpointing ------------------------------------------------------------

    def config_dict(self) -> dict:
        return asdict(self.config)

    def to_arrays(self) -> dict:
        out = {"state_mean": self.state_mean, "state_std": self.state_std,
               "updates_done": np.array(self.updates_done)}
        groups = {
            "policy": self.policy.params,
            "policy_target": self.policy_target.params,
            "critics": self.critics.params,
            "critic_targets": self.critic_targets.params,
            "policy_adam_m": self.policy_adam.m, "policy_adam_v": self.policy_adam.v,
            "critic_adam_m": self.critic_adam.m, "critic_adam_v": self.critic_adam.v,
        }
        for name, params in groups.items():
            for i, p in enumerate(params):
                out[f"{name}_{i}"] = p
        out["policy_adam_step"] = np.array(self.policy_adam.step)
        out["critic_adam_step"] = np.array(self.critic_adam.step)
        return out

    @classmethod
    def from_arrays(cls, state_dim: int, action_dim: int, config: Td3BcnConfig,
                    arrays: dict) -> "Td3BcnAgent":
        agent = cls(state_dim, action_dim, config,
                    state_mean=arrays["state_mean"], state_std=arrays["state_std"])

        def grab(name, n):
            return [np.array(arrays[f"{name}_{i}"]) for i in range(n)]

        n_params = 2 * (config.hidden_layers + 1)
        agent.policy.params = grab("policy", n_params)
        agent.policy_target.params = grab("policy_target", n_params)
        agent.critics.params = grab("critics", n_params)
        agent.critic_targets.params = grab("critic_targets", n_params)
        agent.policy_adam.m = grab("policy_adam_m", n_params)
        agent.policy_adam.v = grab("policy_adam_v", n_params)
        agent.critic_adam.m = grab("critic_adam_m", n_params)
        agent.critic_adam.v = grab("critic_adam_v", n_params)
        agent.policy_adam.step = int(arrays["policy_adam_step"])
        agent.critic_adam.step = int(arrays["critic_adam_step"])
        agent.updates_done = int(arrays["updates_done"])
        return agent
