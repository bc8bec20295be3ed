"""SAC-BC-N: maximum-entropy actor-critic with an N-critic ensemble,
automatically tuned entropy coefficient and a behavioural-cloning term in
either mean-squared-error or log-likelihood form.

The policy is a tanh-squashed Gaussian; all policy gradients are
reparameterised.  Bootstrap targets subtract the entropy penalty inside the
discounted term: ``y = r + gamma * (1 - terminal) * (boot - alpha * log pi)``.
The entropy coefficient is optimised in log space by ascending
``alpha * (mean log pi + target_entropy)``, which raises ``alpha`` whenever
policy entropy falls below the target.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import data, nn, updates
from .errors import ConfigError, DivergenceError
from .metrics import MetricsLog
from .td3bcn import TARGET_MODES

BC_FORMS = ("mse", "loglik")


@dataclass
class SacBcnConfig:
    n_critics: int = 10
    hidden_width: int = 256
    hidden_layers: int = 3
    gamma: float = 0.99
    tau: float = 0.005
    beta: float = 0.04
    bc_form: str = "mse"
    target_mode: str = "shared"
    beta_inflation: float = 10.0
    inflation_steps: int = 50_000
    batch_size: int = 256
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    alpha_lr: float = 3e-4
    init_alpha: float = 1.0
    entropy_target: float = None  # None resolves to -action_dim
    divergence_ceiling: float = 1e6

    def __post_init__(self):
        if self.n_critics < 1:
            raise ConfigError(f"need at least one critic, got {self.n_critics}")
        if self.target_mode not in TARGET_MODES:
            raise ConfigError(f"target_mode must be one of {TARGET_MODES}")
        if self.bc_form not in BC_FORMS:
            raise ConfigError(f"bc_form must be one of {BC_FORMS}")
        if self.beta < 0:
            raise ConfigError(f"beta must be non-negative, got {self.beta}")
        if self.init_alpha <= 0:
            raise ConfigError(f"init_alpha must be positive, got {self.init_alpha}")


def split_head(out: np.ndarray, action_dim: int):
    """Split raw policy output into mean and clamped log-std plus clamp mask."""
    mean = out[..., :action_dim]
    log_std_raw = out[..., action_dim:]
    log_std = np.clip(log_std_raw, nn.LOG_STD_MIN, nn.LOG_STD_MAX)
    mask = (log_std_raw > nn.LOG_STD_MIN) & (log_std_raw < nn.LOG_STD_MAX)
    return mean, log_std, mask


def policy_loss_and_grads(policy: nn.Mlp, critics: nn.MlpEnsemble,
                          states_norm: np.ndarray, data_actions: np.ndarray,
                          noise: np.ndarray, alpha: float, beta: float,
                          bc_form: str, denom: float = None):
    """Loss (negated ascent objective) and policy gradients for one batch.

    The ascent objective is
    ``mean(min_i Q_i(s, a_p)) / denom - alpha * mean(log pi(a_p|s)) + bc``
    with ``a_p = tanh(mean + std * noise)`` reparameterised through ``noise``,
    ``bc = -beta * mse(tanh(mean), a)`` or ``beta * mean(log pi(a|s))``.
    ``denom`` defaults to this batch's mean |min Q| and is constant either
    way; critic parameters and ``alpha`` receive no gradient.

    Returns ``(loss, grads, stats)`` with ``stats = (q_term, bc_term,
    entropy_estimate, q_min_mean, denom)``.
    """
    if bc_form not in BC_FORMS:
        raise ConfigError(f"bc_form must be one of {BC_FORMS}")
    action_dim = data_actions.shape[1]
    batch = len(states_norm)
    out, cache_p = policy.forward_cached(states_norm)
    mean, log_std, clamp_mask = split_head(out, action_dim)
    std = np.exp(log_std)
    a_p, log_prob, pre_tanh = nn.tanh_gaussian_from_noise(mean, log_std, noise)
    tanh_u = np.tanh(pre_tanh)  # == a_p

    x = updates.critic_input(states_norm, a_p)
    q, cache_q = critics.forward_cached(x)
    q_min, onehot = updates.min_with_onehot(q[..., 0])
    if denom is None:
        denom = updates.norm_denominator(q_min)

    q_term = float(q_min.mean() / denom)
    entropy_est = float(-log_prob.mean())

    # Q path: d(objective)/d a_p through the minimising member only
    d_q = (1.0 / (batch * denom)) * onehot[..., None]
    _, d_x = critics.backward(cache_q, d_q, param_grads=False, input_grad=True)
    d_ap = d_x.sum(axis=0)[:, states_norm.shape[1]:]
    squash = 1.0 - np.square(a_p)
    d_mean = d_ap * squash
    d_log_std = d_ap * squash * std * noise

    # entropy path: -(alpha / batch) * d log pi(a_p|s)
    coeff = -alpha / batch
    d_mean = d_mean + coeff * 2.0 * tanh_u
    d_log_std = d_log_std + coeff * (-1.0 + 2.0 * tanh_u * std * noise)

    if bc_form == "mse":
        mode_action = np.tanh(mean)
        diff = mode_action - data_actions
        bc_term = float(np.mean(np.square(diff)))
        d_mean = d_mean - beta * (2.0 / diff.size) * diff * (1.0 - np.square(mode_action))
        objective = q_term - alpha * float(log_prob.mean()) - beta * bc_term
    else:
        v = np.arctanh(np.clip(data_actions, -nn.ATANH_CLIP, nn.ATANH_CLIP))
        w = (v - mean) / std
        data_log_prob = nn.tanh_gaussian_log_prob(mean, log_std, data_actions)
        bc_term = float(data_log_prob.mean())
        d_mean = d_mean + (beta / batch) * w / std
        d_log_std = d_log_std + (beta / batch) * (np.square(w) - 1.0)
        objective = q_term - alpha * float(log_prob.mean()) + beta * bc_term

    d_out = np.concatenate([-d_mean, -d_log_std * clamp_mask], axis=-1)
    grads, _ = policy.backward(cache_p, d_out)
    return -objective, grads, (q_term, bc_term, entropy_est,
                               float(q_min.mean()), denom)


def entropy_objective_grad(alpha: float, log_prob_mean: float,
                           entropy_target: float) -> float:
    """d/d(log alpha) of the ascent objective ``alpha * (mean log pi + H)``."""
    return alpha * (log_prob_mean + entropy_target)


class SacBcnAgent:
    kind = "sacbcn"
    METRIC_COLUMNS = ("step", "critic_loss_mean", "policy_loss", "bc_term",
                      "q_term", "beta_effective", "q_min_mean", "alpha",
                      "policy_entropy_estimate", "bc_form")

    def __init__(self, state_dim: int, action_dim: int,
                 config: SacBcnConfig = None, seed: int = 0,
                 state_mean=None, state_std=None):
        self.config = config or SacBcnConfig()
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        rng = np.random.default_rng(seed)
        hidden = [self.config.hidden_width] * self.config.hidden_layers
        self.policy = nn.Mlp.init([state_dim, *hidden, 2 * action_dim], rng)
        self.critics = nn.MlpEnsemble.init(
            [state_dim + action_dim, *hidden, 1], self.config.n_critics, rng)
        self.critic_targets = self.critics.copy()
        self.policy_adam = nn.AdamState.init(self.policy.params, self.config.actor_lr)
        self.critic_adam = nn.AdamState.init(self.critics.params, self.config.critic_lr)
        self.log_alpha = np.array([np.log(self.config.init_alpha)])
        self.alpha_adam = nn.AdamState.init([self.log_alpha], self.config.alpha_lr)
        self.entropy_target = (self.config.entropy_target
                               if self.config.entropy_target is not None
                               else -float(action_dim))
        self.updates_done = 0
        self.denom_floor_hits = 0
        self._last_q_min_mean = np.nan
        self.state_mean = (np.zeros(state_dim) if state_mean is None
                           else np.asarray(state_mean, dtype=np.float64))
        self.state_std = (np.ones(state_dim) if state_std is None
                          else np.asarray(state_std, dtype=np.float64))

    # -- plumbing ---------------------------------------------------------------

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    def set_normalizer(self, dataset: data.Dataset):
        self.state_mean = dataset.state_mean.copy()
        self.state_std = dataset.state_std.copy()

    def _norm(self, states):
        return data.normalize_state((self.state_mean, self.state_std), states)

    def beta_effective(self, beta: float = None) -> float:
        beta = self.config.beta if beta is None else beta
        if self.updates_done < self.config.inflation_steps:
            return beta * self.config.beta_inflation
        return beta

    def policy_head(self, states_norm, with_cache=False):
        if with_cache:
            out, cache = self.policy.forward_cached(states_norm)
        else:
            out, cache = self.policy.forward(states_norm), None
        mean, log_std, mask = split_head(out, self.action_dim)
        return (mean, log_std, mask, cache) if with_cache else (mean, log_std)

    # -- acting -------------------------------------------------------------------

    def select_action(self, state, mode: str = "mean",
                      rng: np.random.Generator = None) -> np.ndarray:
        """Evaluation uses the squashed mean; exploration samples the head."""
        mean, log_std = self.policy_head(self._norm(np.asarray(state)[None]))
        if mode == "mean":
            return nn.tanh_gaussian_mean_action(mean)[0]
        if mode == "sample":
            head = nn.GaussianHead(mean=mean, log_std=log_std)
            action, _ = nn.tanh_gaussian_sample(head, rng)
            return action[0]
        raise ConfigError(f"unknown action mode {mode!r}")

    def explore_action(self, state, rng) -> np.ndarray:
        return self.select_action(state, "sample", rng)

    def eval_action(self, state) -> np.ndarray:
        return self.select_action(state, "mean")

    # -- updates ---------------------------------------------------------------------

    def bootstrap_targets(self, batch: data.Batch, rng, mode: str = None):
        """Entropy-regularised targets ``(n, batch)`` from the current policy."""
        mode = mode or self.config.target_mode
        if mode not in TARGET_MODES:
            raise ConfigError(f"target_mode must be one of {TARGET_MODES}")
        ns_norm = self._norm(batch.next_states)
        mean, log_std = self.policy_head(ns_norm)
        noise = rng.standard_normal(mean.shape)
        next_action, next_log_prob, _ = nn.tanh_gaussian_from_noise(
            mean, log_std, noise)
        x2 = updates.critic_input(ns_norm, next_action)
        q2 = self.critic_targets.forward(x2)[..., 0]
        boot = q2.min(axis=0, keepdims=True) if mode == "shared" else q2
        y = batch.rewards + self.config.gamma * (1.0 - batch.terminals) * (
            boot - self.alpha * next_log_prob)
        y = np.broadcast_to(y, (self.config.n_critics, len(batch.rewards)))
        updates.check_targets_finite(y)
        return y

    def critic_update(self, batch: data.Batch, rng, mode: str = None) -> np.ndarray:
        y = self.bootstrap_targets(batch, rng, mode)
        x = updates.critic_input(self._norm(batch.states), batch.actions)
        return updates.critic_regression_step(self.critics, self.critic_adam, x, y)

    def policy_update(self, batch: data.Batch, rng, beta: float = None,
                      bc_form: str = None):
        """Reparameterised ascent step; returns
        ``(policy_loss, bc_term, q_term, entropy_estimate)``."""
        beta = self.config.beta if beta is None else beta
        bc_form = bc_form or self.config.bc_form
        states_norm = self._norm(batch.states)
        noise = rng.standard_normal((len(batch.states), self.action_dim))
        holder = {}

        def loss_fn(params):
            loss, grads, stats = policy_loss_and_grads(
                self.policy, self.critics, states_norm, batch.actions,
                noise, self.alpha, beta, bc_form)
            holder["stats"] = stats
            return loss, grads

        loss, grads = nn.value_and_grad(loss_fn, self.policy.params)
        nn.adam_step(self.policy.params, grads, self.policy_adam)
        q_term, bc_term, entropy_est, q_min_mean, denom = holder["stats"]
        if denom <= updates.DENOM_FLOOR:
            self.denom_floor_hits += 1
        self._last_q_min_mean = q_min_mean
        return loss, bc_term, q_term, entropy_est

    def entropy_update(self, batch: data.Batch, rng) -> float:
        """One Adam step on log(alpha); the policy is held constant."""
        states_norm = self._norm(batch.states)
        mean, log_std = self.policy_head(states_norm)
        noise = rng.standard_normal(mean.shape)
        _, log_prob, _ = nn.tanh_gaussian_from_noise(mean, log_std, noise)
        g = entropy_objective_grad(self.alpha, float(log_prob.mean()),
                                   self.entropy_target)
        nn.adam_step([self.log_alpha], [np.array([-g])], self.alpha_adam)
        return self.alpha

    def polyak_targets(self):
        nn.polyak_update(self.critic_targets.params, self.critics.params,
                         self.config.tau)

    def train_step(self, batch: data.Batch, rng, beta: float = None) -> dict:
        """Critic, policy, entropy and target updates every step (1:1 ratio)."""
        beta_eff = self.beta_effective() if beta is None else beta
        losses = self.critic_update(batch, rng)
        critic_loss = float(losses.mean())
        if not np.isfinite(critic_loss) or critic_loss > self.config.divergence_ceiling:
            raise DivergenceError(self.updates_done, critic_loss)
        policy_loss, bc_term, q_term, entropy_est = self.policy_update(
            batch, rng, beta_eff)
        alpha = self.entropy_update(batch, rng)
        self.polyak_targets()
        self.updates_done += 1
        return {"critic_loss_mean": critic_loss, "policy_loss": policy_loss,
                "bc_term": bc_term, "q_term": q_term, "beta_effective": beta_eff,
                "q_min_mean": self._last_q_min_mean, "alpha": alpha,
                "policy_entropy_estimate": entropy_est}

    def train_offline(self, dataset: data.Dataset, gradient_steps: int,
                      seed: int = 0, metrics_every: int = 1000,
                      eval_hook=None, eval_every: int = 5000) -> MetricsLog:
        if len(dataset) == 0:
            raise ConfigError("dataset is empty")
        rng = np.random.default_rng(seed)
        log = MetricsLog(self.METRIC_COLUMNS)
        for t in range(gradient_steps):
            batch = data.sample_minibatch(dataset, self.config.batch_size, rng)
            info = self.train_step(batch, rng)
            if (t + 1) % metrics_every == 0 or t + 1 == gradient_steps:
                log.append(step=self.updates_done, bc_form=self.config.bc_form,
                           **info)
            if eval_hook is not None and (t + 1) % eval_every == 0:
                eval_hook(self, self.updates_done)
        return log

    # -- checkpointing -------------------------------------------------------------

    def config_dict(self) -> dict:
        return asdict(self.config)

    def to_arrays(self) -> dict:
        out = {"state_mean": self.state_mean, "state_std": self.state_std,
               "updates_done": np.array(self.updates_done),
               "log_alpha": self.log_alpha,
               "alpha_adam_m": self.alpha_adam.m[0],
               "alpha_adam_v": self.alpha_adam.v[0],
               "alpha_adam_step": np.array(self.alpha_adam.step)}
        groups = {
            "policy": self.policy.params,
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
    def from_arrays(cls, state_dim: int, action_dim: int, config: SacBcnConfig,
                    arrays: dict) -> "SacBcnAgent":
        agent = cls(state_dim, action_dim, config,
                    state_mean=arrays["state_mean"], state_std=arrays["state_std"])

        def grab(name, n):
            return [np.array(arrays[f"{name}_{i}"]) for i in range(n)]

        n_params = 2 * (config.hidden_layers + 1)
        agent.policy.params = grab("policy", n_params)
        agent.critics.params = grab("critics", n_params)
        agent.critic_targets.params = grab("critic_targets", n_params)
        agent.policy_adam.m = grab("policy_adam_m", n_params)
        agent.policy_adam.v = grab("policy_adam_v", n_params)
        agent.critic_adam.m = grab("critic_adam_m", n_params)
        agent.critic_adam.v = grab("critic_adam_v", n_params)
        agent.policy_adam.step = int(arrays["policy_adam_step"])
        agent.critic_adam.step = int(arrays["critic_adam_step"])
        agent.log_alpha = np.array(arrays["log_alpha"])
        agent.alpha_adam = nn.AdamState.init([agent.log_alpha], config.alpha_lr)
        agent.alpha_adam.m = [np.array(arrays["alpha_adam_m"])]
        agent.alpha_adam.v = [np.array(arrays["alpha_adam_v"])]
        agent.alpha_adam.step = int(arrays["alpha_adam_step"])
        agent.updates_done = int(arrays["updates_done"])
        return agent
