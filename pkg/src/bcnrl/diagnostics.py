"""Uncertainty diagnostics for critic ensembles: the Gaussian expected-minimum
approximation, dispersion statistics, and profiles of uncertainty as a
function of how far probe actions sit from the data's actions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from . import updates
from .data import Dataset, normalize_state, sample_minibatch
from .errors import ConfigError
from .nn import MlpEnsemble

_STD_NORMAL = NormalDist()


def expected_min_gaussian(mu: float, sigma: float, n: int) -> float:
    """Approximate expectation of the minimum of ``n`` draws from N(mu, sigma^2).

    Uses the standard order-statistic approximation
    ``mu - Phi^inv((n - pi/8) / (n - pi/4 + 1)) * sigma``.
    """
    if sigma < 0:
        raise ConfigError(f"sigma must be non-negative, got {sigma}")
    if n < 1:
        raise ConfigError(f"n must be a positive integer, got {n}")
    a = n - math.pi / 8.0
    # denominator grouped as a + (1 - pi/8) so n=1 lands exactly on the median
    quantile = a / (a + (1.0 - math.pi / 8.0))
    return mu - _STD_NORMAL.inv_cdf(quantile) * sigma


def ensemble_stats(critics: MlpEnsemble, state: np.ndarray, action: np.ndarray):
    """``(q_mean, q_std, q_min, q_clip)`` across members at one state-action pair.

    ``q_std`` is the population standard deviation (the ensemble is the whole
    population, not a sample); ``q_clip = q_mean - q_min`` is the pessimism
    applied when the minimum replaces the mean.
    """
    x = updates.critic_input(np.asarray(state)[None], np.asarray(action)[None])
    q = critics.forward(x)[:, 0, 0]
    return float(q.mean()), float(q.std()), float(q.min()), float(q.mean() - q.min())


def ensemble_stats_batch(critics: MlpEnsemble, states: np.ndarray,
                         actions: np.ndarray):
    """Vectorised member statistics; returns a dict of per-sample arrays."""
    q = critics.forward(updates.critic_input(states, actions))[..., 0]
    q_mean = q.mean(axis=0)
    q_min = q.min(axis=0)
    return {"q_mean": q_mean, "q_std": q.std(axis=0), "q_min": q_min,
            "q_clip": q_mean - q_min, "q_members": q}


@dataclass
class UncertaintyProfile:
    """Distance-binned uncertainty aggregates plus run provenance."""

    bin_edges: np.ndarray          # (bins + 1,)
    counts: np.ndarray             # (bins,) samples per bin
    q_std: np.ndarray              # per-bin means; NaN marks empty/divergent cells
    q_clip: np.ndarray
    q_min: np.ndarray
    q_mean: np.ndarray
    n_members: int
    beta: float = math.nan
    target_mode: str = ""
    diverged: bool = False
    sample_budget: int = 0

    @property
    def n_bins(self) -> int:
        return len(self.counts)


def distance_profile(dataset: Dataset, critics: MlpEnsemble, sample_budget: int,
                     bin_count: int, rng: np.random.Generator, *,
                     normalize_states: bool = True, beta: float = math.nan,
                     target_mode: str = "", diverged: bool = False,
                     chunk: int = 20_000) -> UncertaintyProfile:
    """Uncertainty as a function of action distance from the data.

    Draws ``sample_budget`` (state, data action) pairs from the dataset and the
    same number of uniform random actions, evaluates the ensemble at
    ``(state, random action)`` and averages each dispersion metric inside
    equal-width bins of the Euclidean distance between random and data action.
    Empty bins are reported with count 0 and NaN aggregates; a run flagged as
    divergent yields NaN everywhere, mirroring how unreliable cells are blanked
    out of the heatmaps.
    """
    if len(dataset) == 0:
        raise ConfigError("dataset is empty")
    if sample_budget < bin_count:
        raise ConfigError(
            f"budget {sample_budget} smaller than bin count {bin_count}")
    action_dim = dataset.action_dim
    dists = np.empty(sample_budget)
    metrics = {k: np.empty(sample_budget) for k in ("q_std", "q_clip", "q_min", "q_mean")}
    done = 0
    while done < sample_budget:
        m = min(chunk, sample_budget - done)
        batch = sample_minibatch(dataset, m, rng)
        random_actions = rng.uniform(-1.0, 1.0, size=(m, action_dim))
        dists[done:done + m] = np.linalg.norm(
            random_actions - batch.actions, axis=1)
        if not diverged:
            states = batch.states
            if normalize_states:
                states = normalize_state(dataset, states)
            stats = ensemble_stats_batch(critics, states, random_actions)
            for k in metrics:
                metrics[k][done:done + m] = stats[k]
        done += m

    lo, hi = float(dists.min()), float(dists.max())
    if hi <= lo:
        hi = lo + 1e-12
    edges = np.linspace(lo, hi, bin_count + 1)
    which = np.clip(np.digitize(dists, edges[1:-1]), 0, bin_count - 1)
    counts = np.bincount(which, minlength=bin_count)
    agg = {}
    for k in metrics:
        sums = np.bincount(which, weights=metrics[k], minlength=bin_count)
        with np.errstate(invalid="ignore"):
            agg[k] = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
        if diverged:
            agg[k] = np.full(bin_count, np.nan)
    return UncertaintyProfile(
        bin_edges=edges, counts=counts, q_std=agg["q_std"], q_clip=agg["q_clip"],
        q_min=agg["q_min"], q_mean=agg["q_mean"], n_members=critics.n_members,
        beta=beta, target_mode=target_mode, diverged=diverged,
        sample_budget=sample_budget)


def profile_to_csv(profile: UncertaintyProfile, path: str):
    with open(path, "w") as fh:
        fh.write("bin_lo,bin_hi,count,q_std,q_clip,q_min,q_mean\n")
        for i in range(profile.n_bins):
            cells = [profile.bin_edges[i], profile.bin_edges[i + 1],
                     int(profile.counts[i]), profile.q_std[i], profile.q_clip[i],
                     profile.q_min[i], profile.q_mean[i]]
            fh.write(",".join(
                str(c) if isinstance(c, int) else repr(float(c)) for c in cells) + "\n")


def member_q_dump(dataset: Dataset, critics: MlpEnsemble, sample_budget: int,
                  rng: np.random.Generator, path: str,
                  normalize_states: bool = True):
    """Raw per-member Q values at (data state, random action) pairs."""
    batch = sample_minibatch(dataset, sample_budget, rng)
    random_actions = rng.uniform(-1.0, 1.0, size=(sample_budget, dataset.action_dim))
    states = batch.states
    if normalize_states:
        states = normalize_state(dataset, states)
    stats = ensemble_stats_batch(critics, states, random_actions)
    dists = np.linalg.norm(random_actions - batch.actions, axis=1)
    q = stats["q_members"]
    with open(path, "w") as fh:
        fh.write("distance," + ",".join(f"q_{i}" for i in range(critics.n_members)) + "\n")
        for j in range(sample_budget):
            fh.write(repr(float(dists[j])) + ","
                     + ",".join(repr(float(v)) for v in q[:, j]) + "\n")


def policy_qmin_distribution(dataset: Dataset, critics: MlpEnsemble, policy_fn,
                             sample_budget: int, rng: np.random.Generator,
                             normalize_states: bool = True) -> dict:
    """Five-number summary of normalised min-Q at policy actions.

    ``policy_fn`` maps a batch of (normalised) states to actions.  Values are
    divided by the batch mean of |q_min| so summaries are comparable across
    reward scales.
    """
    if len(dataset) == 0:
        raise ConfigError("dataset is empty")
    batch = sample_minibatch(dataset, sample_budget, rng)
    states = batch.states
    if normalize_states:
        states = normalize_state(dataset, states)
    actions = policy_fn(states)
    stats = ensemble_stats_batch(critics, states, actions)
    q_min = stats["q_min"]
    denom = updates.norm_denominator(q_min)
    normed = q_min / denom
    q1, med, q3 = np.percentile(normed, [25, 50, 75])
    return {"min": float(normed.min()), "q1": float(q1), "median": float(med),
            "q3": float(q3), "max": float(normed.max()), "denominator": denom}
