"""Minimal differentiable core: ReLU MLPs with analytic backprop, Adam,
Polyak averaging and tanh-squashed Gaussian heads.

Everything runs in double precision on plain numpy arrays.  Parameters are
flat lists ``[W0, b0, W1, b1, ...]``; an :class:`Mlp` stores single matrices
``(fan_in, fan_out)`` while an :class:`MlpEnsemble` stores one stacked matrix
``(n_members, fan_in, fan_out)`` per layer so that a whole critic ensemble is
evaluated with a handful of batched matmuls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0

Params = list  # list[np.ndarray], alternating weight / bias per layer


def _validate_widths(widths):
    if len(widths) < 2:
        raise ConfigError(f"need at least input and output widths, got {widths}")
    if any(int(w) <= 0 for w in widths):
        raise ConfigError(f"layer widths must be positive, got {widths}")


def _init_layer(rng: np.random.Generator, shape_w, shape_b, fan_in: int):
    bound = 1.0 / np.sqrt(fan_in)
    w = rng.uniform(-bound, bound, size=shape_w)
    b = rng.uniform(-bound, bound, size=shape_b)
    return w, b


def _forward(params: Params, x: np.ndarray, n_layers: int):
    h = x
    for layer in range(n_layers):
        w, b = params[2 * layer], params[2 * layer + 1]
        z = h @ w
        z += b
        if layer < n_layers - 1:
            np.maximum(z, 0.0, out=z)
        h = z
    return h


def _forward_cached(params: Params, x: np.ndarray, n_layers: int):
    inputs = [x]
    masks = []
    h = x
    for layer in range(n_layers):
        w, b = params[2 * layer], params[2 * layer + 1]
        z = h @ w
        z += b
        if layer < n_layers - 1:
            mask = z > 0.0  # ReLU subgradient at 0 is 0
            z *= mask
            masks.append(mask)
            inputs.append(z)
        h = z
    return h, (inputs, masks)


def _backward(params: Params, cache, d_out: np.ndarray, n_layers: int,
              param_grads: bool = True, input_grad: bool = False):
    """Backpropagate ``d_out`` through the cached forward pass.

    Returns ``(grads, d_input)`` where ``grads`` mirrors the parameter list
    (or is None when ``param_grads`` is False) and ``d_input`` is the
    gradient with respect to the network input (or None).  Works unchanged
    for stacked ensemble parameters: the member axis rides along as a matmul
    batch dimension, and a shared 2-d input broadcasts across members.
    """
    inputs, masks = cache
    grads = [None] * (2 * n_layers) if param_grads else None
    delta = d_out
    d_input = None
    for layer in reversed(range(n_layers)):
        w, b = params[2 * layer], params[2 * layer + 1]
        if param_grads:
            x_l = inputs[layer]
            # matmul broadcasts a shared (batch, fan_in) input across members
            dw = np.swapaxes(x_l, -1, -2) @ delta
            db = delta.sum(axis=-2, keepdims=b.ndim > 1)
            if b.ndim == 1:
                db = db.reshape(b.shape)
            grads[2 * layer] = dw
            grads[2 * layer + 1] = db
        if layer > 0:
            delta = delta @ np.swapaxes(w, -1, -2)
            delta *= masks[layer - 1]
        elif input_grad:
            d_input = delta @ np.swapaxes(w, -1, -2)
    return grads, d_input


class Mlp:
    """Fully connected network: ReLU hidden layers, linear output."""

    def __init__(self, widths, params: Params):
        _validate_widths(widths)
        self.widths = tuple(int(w) for w in widths)
        self.params = params
        self._check_params()

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    def _check_params(self):
        if len(self.params) != 2 * self.n_layers:
            raise ConfigError("parameter list does not match layer count")
        for layer in range(self.n_layers):
            w, b = self.params[2 * layer], self.params[2 * layer + 1]
            want_w = (self.widths[layer], self.widths[layer + 1])
            if w.shape != want_w or b.shape != (self.widths[layer + 1],):
                raise ConfigError(
                    f"layer {layer} parameter shapes {w.shape}/{b.shape} "
                    f"incompatible with widths {self.widths}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise NumericalError(f"non-finite parameters in layer {layer}")

    @classmethod
    def init(cls, widths, rng: np.random.Generator) -> "Mlp":
        """Uniform fan-in initialisation per layer."""
        _validate_widths(widths)
        params = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            w, b = _init_layer(rng, (fan_in, fan_out), (fan_out,), fan_in)
            params.extend([w, b])
        return cls(widths, params)

    def _check_input(self, x):
        if x.shape[-1] != self.widths[0]:
            raise ConfigError(
                f"input width {x.shape[-1]} != first layer width {self.widths[0]}")

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._check_input(x)
        return _forward(self.params, x, self.n_layers)

    def forward_cached(self, x: np.ndarray):
        self._check_input(x)
        return _forward_cached(self.params, x, self.n_layers)

    def backward(self, cache, d_out, param_grads=True, input_grad=False):
        return _backward(self.params, cache, d_out, self.n_layers,
                         param_grads=param_grads, input_grad=input_grad)

    def copy(self) -> "Mlp":
        return Mlp(self.widths, [p.copy() for p in self.params])


class MlpEnsemble:
    """``n_members`` independently initialised MLPs stored stacked per layer.

    Layer weights have shape ``(n, fan_in, fan_out)`` and biases
    ``(n, 1, fan_out)``.  A shared input of shape ``(batch, fan_in)``
    broadcasts across members; outputs have shape ``(n, batch, fan_out)``.
    """

    def __init__(self, widths, n_members: int, params: Params):
        _validate_widths(widths)
        if n_members < 1:
            raise ConfigError(f"ensemble needs at least one member, got {n_members}")
        self.widths = tuple(int(w) for w in widths)
        self.n_members = int(n_members)
        self.params = params
        self._check_params()

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    def _check_params(self):
        if len(self.params) != 2 * self.n_layers:
            raise ConfigError("parameter list does not match layer count")
        for layer in range(self.n_layers):
            w, b = self.params[2 * layer], self.params[2 * layer + 1]
            want_w = (self.n_members, self.widths[layer], self.widths[layer + 1])
            want_b = (self.n_members, 1, self.widths[layer + 1])
            if w.shape != want_w or b.shape != want_b:
                raise ConfigError(
                    f"ensemble layer {layer} shapes {w.shape}/{b.shape} "
                    f"incompatible with widths {self.widths} x {self.n_members}")

    @classmethod
    def init(cls, widths, n_members: int, rng: np.random.Generator) -> "MlpEnsemble":
        _validate_widths(widths)
        params = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            w, b = _init_layer(rng, (n_members, fan_in, fan_out),
                               (n_members, 1, fan_out), fan_in)
            params.extend([w, b])
        return cls(widths, n_members, params)

    def _check_input(self, x):
        if x.shape[-1] != self.widths[0]:
            raise ConfigError(
                f"input width {x.shape[-1]} != first layer width {self.widths[0]}")

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._check_input(x)
        return _forward(self.params, x, self.n_layers)

    def forward_cached(self, x: np.ndarray):
        self._check_input(x)
        return _forward_cached(self.params, x, self.n_layers)

    def backward(self, cache, d_out, param_grads=True, input_grad=False):
        return _backward(self.params, cache, d_out, self.n_layers,
                         param_grads=param_grads, input_grad=input_grad)

    def member(self, i: int) -> Mlp:
        """Detached single-member copy (for inspection and tests)."""
        params = []
        for layer in range(self.n_layers):
            params.append(self.params[2 * layer][i].copy())
            params.append(self.params[2 * layer + 1][i, 0].copy())
        return Mlp(self.widths, params)

    def copy(self) -> "MlpEnsemble":
        return MlpEnsemble(self.widths, self.n_members,
                           [p.copy() for p in self.params])


def value_and_grad(loss_fn, params: Params):
    """Evaluate an analytically differentiated loss at ``params``.

    ``loss_fn`` maps the parameter list to ``(loss, grads)`` where the
    gradients come from explicit backpropagation.  The wrapper checks the
    pair: the loss must be finite and every gradient must match its
    parameter's shape.
    """
    loss, grads = loss_fn(params)
    loss = float(loss)
    if not np.isfinite(loss):
        raise NumericalError(f"loss is not finite: {loss}")
    if len(grads) != len(params):
        raise ConfigError(f"got {len(grads)} gradients for {len(params)} parameters")
    for i, (g, p) in enumerate(zip(grads, params)):
        if np.shape(g) != np.shape(p):
            raise ConfigError(
                f"gradient {i} has shape {np.shape(g)}, parameter has {np.shape(p)}")
    return loss, grads


@dataclass
class AdamState:
    """First/second moment accumulators plus step counter for one parameter list."""

    m: Params
    v: Params
    step: int = 0
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params: Params, lr: float = 3e-4, **kw) -> "AdamState":
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params], lr=lr, **kw)


def adam_step(params: Params, grads: Params, state: AdamState):
    """One in-place Adam update; returns ``(params, state)`` for convenience."""
    if len(grads) != len(params) or any(
            g.shape != p.shape for g, p in zip(grads, params)):
        raise ConfigError("gradient shapes do not match parameter shapes")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    scale = state.lr / bc1
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        denom = np.sqrt(v / bc2)
        denom += state.eps
        denom /= scale
        p -= m / denom
    return params, state


def polyak_update(target_params: Params, online_params: Params, tau: float):
    """``target <- tau * online + (1 - tau) * target`` elementwise, in place."""
    if not 0.0 < tau <= 1.0:
        raise ConfigError(f"tau must lie in (0, 1], got {tau}")
    if len(target_params) != len(online_params) or any(
            t.shape != o.shape for t, o in zip(target_params, online_params)):
        raise ConfigError("target and online parameter shapes do not match")
    for t, o in zip(target_params, online_params):
        # in-place form of tau * online + (1 - tau) * target, bit-identical
        t *= (1.0 - tau)
        t += tau * o
    return target_params


# ---------------------------------------------------------------------------
# tanh-squashed Gaussian head
# ---------------------------------------------------------------------------

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass
class GaussianHead:
    """Per-sample mean and (clamped) log standard deviation of a squashed Gaussian."""

    mean: np.ndarray
    log_std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.log_std = np.asarray(self.log_std, dtype=np.float64)
        if self.mean.shape != self.log_std.shape:
            raise ConfigError("mean and log_std must have identical shapes")


def _log_one_minus_tanh_sq(u: np.ndarray) -> np.ndarray:
    # log(1 - tanh(u)^2) = 2*(log 2 - u - softplus(-2u)), stable for large |u|
    return 2.0 * (np.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))


def tanh_gaussian_from_noise(mean, log_std, noise):
    """Deterministic reparameterised draw: ``action = tanh(mean + std * noise)``.

    Returns ``(action, log_prob, pre_tanh)`` with ``log_prob`` summed over the
    trailing action dimension (one scalar per sample).
    """
    std = np.exp(log_std)
    u = mean + std * noise
    action = np.tanh(u)
    log_prob = (-0.5 * np.square(noise) - _HALF_LOG_2PI - log_std
                - _log_one_minus_tanh_sq(u)).sum(axis=-1)
    return action, log_prob, u


def tanh_gaussian_sample(head: GaussianHead, rng: np.random.Generator):
    """Sample an action in ``[-1, 1]^d`` with its log density."""
    noise = rng.standard_normal(head.mean.shape)
    action, log_prob, _ = tanh_gaussian_from_noise(head.mean, head.log_std, noise)
    return action, log_prob


ATANH_CLIP = 1.0 - 1e-6


def tanh_gaussian_log_prob(mean, log_std, action):
    """Log density of the squashed Gaussian at a given action in (-1, 1)^d.

    Actions are clamped slightly inside the open interval before the inverse
    tanh so that boundary actions stay finite.
    """
    u = np.arctanh(np.clip(action, -ATANH_CLIP, ATANH_CLIP))
    std = np.exp(log_std)
    z = (u - mean) / std
    return (-0.5 * np.square(z) - _HALF_LOG_2PI - log_std
            - _log_one_minus_tanh_sq(u)).sum(axis=-1)


def tanh_gaussian_mean_action(mean) -> np.ndarray:
    return np.tanh(mean)
