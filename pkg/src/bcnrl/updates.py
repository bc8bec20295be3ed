"""Update machinery shared by both agents: ensemble minimums, the
normalised-Q denominator, and the per-member critic regression step."""

from __future__ import annotations

import numpy as np

from . import nn
from .errors import NumericalError

DENOM_FLOOR = 1e-8


def critic_input(states_norm: np.ndarray, actions: np.ndarray) -> np.ndarray:
    return np.concatenate([states_norm, actions], axis=-1)


def min_with_onehot(q: np.ndarray):
    """Minimum over ensemble members plus a one-hot routing mask.

    ``q`` has shape ``(n, batch)``; returns ``(q_min (batch,), onehot (n, batch))``
    where the mask selects the (first) minimising member per sample, i.e. the
    subgradient route of the pointwise minimum.
    """
    arg = q.argmin(axis=0)
    cols = np.arange(q.shape[1])
    q_min = q[arg, cols]
    onehot = np.zeros_like(q)
    onehot[arg, cols] = 1.0
    return q_min, onehot


def norm_denominator(q_min: np.ndarray) -> float:
    """Batch mean of |min Q|, floored away from zero; treated as a constant
    (never differentiated) wherever it divides a policy objective."""
    return max(float(np.mean(np.abs(q_min))), DENOM_FLOOR)


def check_targets_finite(y: np.ndarray):
    """``y`` shaped ``(n, batch)``; raises with the first offending indices."""
    bad = ~np.isfinite(y)
    if bad.any():
        member, index = np.argwhere(bad)[0]
        raise NumericalError(
            f"non-finite bootstrap target for member {member}, batch index {index}")


def critic_loss_and_grads(critics: nn.MlpEnsemble, x: np.ndarray, y: np.ndarray):
    """Mean-squared regression of every member onto its target.

    ``y`` has shape ``(n, batch)`` (shared targets arrive pre-broadcast).
    Returns ``(per_member_losses (n,), grads)``; the summed loss/grads pair is
    what the optimiser consumes, identical member-wise since parameters are
    disjoint.
    """
    q, cache = critics.forward_cached(x)
    resid = q[..., 0] - y
    batch = resid.shape[1]
    per_member = np.mean(np.square(resid), axis=1)
    d_q = (2.0 / batch) * resid[..., None]
    grads, _ = critics.backward(cache, d_q)
    return per_member, grads


def critic_regression_step(critics: nn.MlpEnsemble, adam: nn.AdamState,
                           x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """One Adam step of every member toward its (constant) target."""
    holder = {}

    def loss_fn(params):
        per_member, grads = critic_loss_and_grads(critics, x, y)
        holder["per_member"] = per_member
        return per_member.sum(), grads

    _, grads = nn.value_and_grad(loss_fn, critics.params)
    nn.adam_step(critics.params, grads, adam)
    return holder["per_member"]
