"""Experiment orchestration: sectioned text configs, seeded multi-run offline
training, policy evaluation, normalised scoring and result bundles on disk."""

from __future__ import annotations

import configparser
import dataclasses
import io
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import data, envs, finetune
from .checkpoint import save_agent
from .errors import ConfigError, DivergenceError, NumericalError
from .sacbcn import SacBcnAgent, SacBcnConfig
from .td3bcn import Td3BcnAgent, Td3BcnConfig

OUTPUT_ROOT_ENV = "BCNRL_OUTPUT_ROOT"

AGENT_KINDS = ("td3bcn", "sacbcn")


@dataclass
class ExperimentConfig:
    agent: str = "td3bcn"
    env: str = "point-dense"
    dataset: str = ""
    seeds: tuple = (0, 1, 2, 3, 4)
    gradient_steps: int = 200_000
    eval_episodes: int = 0       # 0 resolves to 10 (dense) / 100 (sparse)
    metrics_every: int = 1000
    out_dir: str = "runs/experiment"
    reward_scale: float = 1.0
    reward_offset: float = 0.0
    # ablation switches
    disable_bc: bool = False
    ensemble_n_override: int = 0      # 0 leaves the agent's N untouched
    disable_inflation: bool = False
    target_mode_override: str = ""    # "" keeps the agent default
    td3: Td3BcnConfig = field(default_factory=Td3BcnConfig)
    sac: SacBcnConfig = field(default_factory=SacBcnConfig)

    def __post_init__(self):
        if self.agent not in AGENT_KINDS:
            raise ConfigError(f"agent must be one of {AGENT_KINDS}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        self.seeds = tuple(int(s) for s in self.seeds)

    def resolved_eval_episodes(self, spec: envs.EnvSpec) -> int:
        if self.eval_episodes > 0:
            return self.eval_episodes
        return 10 if spec.reward_mode == "dense" else 100

    def agent_config(self):
        """Agent hyperparameters with the ablation switches applied."""
        cfg = self.td3 if self.agent == "td3bcn" else self.sac
        patch = {}
        if self.disable_bc:
            patch["beta"] = 0.0
        if self.ensemble_n_override > 0:
            patch["n_critics"] = self.ensemble_n_override
        if self.disable_inflation:
            patch["beta_inflation"] = 1.0
        if self.target_mode_override:
            patch["target_mode"] = self.target_mode_override
        return replace(cfg, **patch) if patch else replace(cfg)


_TOP_SECTION = "experiment"
_SKIP_TOP = ("td3", "sac")


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    if v is None:
        return "auto"
    return repr(v) if isinstance(v, float) else str(v)


def _parse_value(text: str, default):
    text = text.strip()
    if isinstance(default, bool):
        if text.lower() not in ("true", "false"):
            raise ConfigError(f"expected true/false, got {text!r}")
        return text.lower() == "true"
    if isinstance(default, tuple):
        return tuple(int(x) for x in text.split(",") if x.strip())
    if isinstance(default, int):
        return int(text)
    if default is None or isinstance(default, float):
        if text == "auto":
            return None
        return float(text)
    return text


def serialize_config(config: ExperimentConfig) -> str:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    top = {}
    for f in dataclasses.fields(ExperimentConfig):
        if f.name in _SKIP_TOP:
            continue
        top[f.name] = _format_value(getattr(config, f.name))
    parser[_TOP_SECTION] = top
    for section, sub in (("td3bcn", config.td3), ("sacbcn", config.sac)):
        parser[section] = {f.name: _format_value(getattr(sub, f.name))
                           for f in dataclasses.fields(sub)}
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


def parse_config(text: str) -> ExperimentConfig:
    """Parse a sectioned key=value config; unknown sections or keys are errors."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from e

    known_sections = {_TOP_SECTION, "td3bcn", "sacbcn"}
    unknown = set(parser.sections()) - known_sections
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    def read_section(name, cls, defaults):
        fields = {f.name: f for f in dataclasses.fields(cls)}
        got = dict(defaults)
        if parser.has_section(name):
            for key, raw in parser.items(name):
                if key not in fields:
                    raise ConfigError(f"unknown key {key!r} in section [{name}]")
                got[key] = _parse_value(raw, got[key])
        return got

    td3_defaults = dataclasses.asdict(Td3BcnConfig())
    sac_defaults = dataclasses.asdict(SacBcnConfig())
    td3 = Td3BcnConfig(**read_section("td3bcn", Td3BcnConfig, td3_defaults))
    sac = SacBcnConfig(**read_section("sacbcn", SacBcnConfig, sac_defaults))

    top_fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)
                  if f.name not in _SKIP_TOP}
    top_defaults = {name: getattr(ExperimentConfig(), name) for name in top_fields}
    top = dict(top_defaults)
    if parser.has_section(_TOP_SECTION):
        for key, raw in parser.items(_TOP_SECTION):
            if key not in top_fields:
                raise ConfigError(f"unknown key {key!r} in section [{_TOP_SECTION}]")
            top[key] = _parse_value(raw, top_defaults[key])
    return ExperimentConfig(**top, td3=td3, sac=sac)


def load_config(path: str) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


# ---------------------------------------------------------------------------
# evaluation and scoring
# ---------------------------------------------------------------------------

class EvalResult(NamedTuple):
    mean: float
    stderr: float
    returns: np.ndarray
    degenerate: bool  # single-episode evaluations report stderr 0 with this flag


def evaluate_policy(agent, spec: envs.EnvSpec, episodes: int, seed: int) -> EvalResult:
    """Deterministic-policy rollouts; raw (untransformed) returns."""
    if episodes < 1:
        raise ConfigError(f"episodes must be >= 1, got {episodes}")
    rng = np.random.default_rng(seed)
    returns = finetune.evaluate_returns(agent, spec, episodes, rng)
    if episodes == 1:
        return EvalResult(float(returns[0]), 0.0, returns, True)
    stderr = float(returns.std(ddof=1) / np.sqrt(episodes))
    return EvalResult(float(returns.mean()), stderr, returns, False)


@dataclass
class ScoreReference:
    env: str
    random_return: float
    expert_return: float
    rollouts: int
    seed: int

    def __post_init__(self):
        if not self.expert_return > self.random_return:
            raise ConfigError(
                f"degenerate score reference: expert {self.expert_return} "
                f"<= random {self.random_return}")

    def normalize(self, raw):
        return 100.0 * (np.asarray(raw, dtype=np.float64) - self.random_return) / (
            self.expert_return - self.random_return)

    def save(self, path):
        Path(path).write_text(json.dumps(dataclasses.asdict(self), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ScoreReference":
        return cls(**json.loads(Path(path).read_text()))


def normalized_score(raw: float, ref: ScoreReference) -> float:
    """0 at the random-policy anchor, 100 at the expert anchor; may exceed 100."""
    return float(ref.normalize(raw))


def compute_score_reference(spec: envs.EnvSpec, rollouts: int = 1000,
                            seed: int = 997) -> ScoreReference:
    """Rollout anchors: uniform-random policy and the scripted expert."""
    if rollouts < 100:
        raise ConfigError(f"need at least 100 rollouts, got {rollouts}")
    rng = np.random.default_rng(seed)
    random_return = float(envs.rollout_tier(spec, "random", rollouts, rng).mean())
    expert_return = float(envs.rollout_tier(spec, "expert", rollouts, rng).mean())
    return ScoreReference(env=spec.name, random_return=random_return,
                          expert_return=expert_return, rollouts=rollouts, seed=seed)


def behavior_score(spec: envs.EnvSpec, tier: str, ref: ScoreReference,
                   rollouts: int = 1000, seed: int = 998):
    """Normalised score of a scripted behaviour tier, with its standard error."""
    rng = np.random.default_rng(seed)
    scores = ref.normalize(envs.rollout_tier(spec, tier, rollouts, rng))
    return float(scores.mean()), float(scores.std(ddof=1) / np.sqrt(rollouts))


# ---------------------------------------------------------------------------
# experiment driver
# ---------------------------------------------------------------------------

SUMMARY_COLUMNS = ("label", "episodes", "mean_return", "stderr_return",
                   "score_mean", "score_stderr", "worst_gap_pct", "diverged")


def resolve_out_dir(out_dir: str) -> Path:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    path = Path(out_dir)
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def build_agent(config: ExperimentConfig, dataset: data.Dataset, seed: int):
    cls = Td3BcnAgent if config.agent == "td3bcn" else SacBcnAgent
    agent = cls(dataset.state_dim, dataset.action_dim, config.agent_config(),
                seed=seed)
    agent.set_normalizer(dataset)
    return agent


def worst_gap_pct(scores: np.ndarray) -> float:
    """Percentage gap between the mean and the worst episode score."""
    mean = scores.mean()
    if mean <= 0:
        return float("nan")
    return float(100.0 * (mean - scores.min()) / mean)


def run_experiment(config: ExperimentConfig, score_ref: ScoreReference = None,
                   progress=None) -> dict:
    """Train/evaluate one agent kind across seeds and persist the bundle.

    Per seed: a fresh agent, offline training (divergence recorded, not
    fatal), deterministic evaluation, and a seed directory holding
    metrics.csv, checkpoint.npz and the resolved config.  The bundle root
    gets summary.csv with per-seed rows plus a pooled row whose standard
    error pools every evaluation episode across seeds.
    """
    spec = envs.make_env(config.env)
    if not config.dataset:
        raise ConfigError("config.dataset must point to a dataset file")
    dataset = data.load_dataset(
        config.dataset,
        reward_scale=None if config.reward_scale == 1.0 else config.reward_scale,
        reward_offset=None if config.reward_offset == 0.0 else config.reward_offset)
    out = resolve_out_dir(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(serialize_config(config))
    if score_ref is None:
        ref_path = out / "score_reference.json"
        if ref_path.exists():
            score_ref = ScoreReference.load(ref_path)
        else:
            score_ref = compute_score_reference(spec)
            score_ref.save(ref_path)

    episodes = config.resolved_eval_episodes(spec)
    rows, all_scores, all_returns = [], [], []
    results = {"seeds": {}, "config": config, "score_ref": score_ref}
    for seed in config.seeds:
        seed_dir = out / f"seed_{seed}"
        seed_dir.mkdir(exist_ok=True)
        (seed_dir / "config.ini").write_text(serialize_config(config))
        agent = build_agent(config, dataset, seed)
        diverged = False
        try:
            log = agent.train_offline(dataset, config.gradient_steps, seed=seed,
                                      metrics_every=config.metrics_every)
        except (DivergenceError, NumericalError) as err:
            diverged = True
            log = _divergence_log(agent, err)
        log.write_csv(seed_dir / "metrics.csv")
        save_agent(agent, seed_dir / "checkpoint.npz")
        ev = evaluate_policy(agent, spec, episodes, seed=10_000 + seed)
        scores = score_ref.normalize(ev.returns)
        all_scores.append(scores)
        all_returns.append(ev.returns)
        (seed_dir / "eval.json").write_text(json.dumps({
            "returns": ev.returns.tolist(), "scores": scores.tolist(),
            "diverged": diverged}, indent=2) + "\n")
        rows.append({
            "label": f"seed_{seed}", "episodes": episodes,
            "mean_return": ev.mean, "stderr_return": ev.stderr,
            "score_mean": float(scores.mean()),
            "score_stderr": float(scores.std(ddof=1) / np.sqrt(len(scores)))
            if len(scores) > 1 else 0.0,
            "worst_gap_pct": worst_gap_pct(scores), "diverged": diverged,
        })
        results["seeds"][seed] = {"diverged": diverged,
                                  "score_mean": float(scores.mean()),
                                  "agent": agent}
        if progress is not None:
            progress(seed, rows[-1])

    pooled_scores = np.concatenate(all_scores)
    pooled_returns = np.concatenate(all_returns)
    pooled = {
        "label": "pooled", "episodes": len(pooled_scores),
        "mean_return": float(pooled_returns.mean()),
        "stderr_return": float(pooled_returns.std(ddof=1) / np.sqrt(len(pooled_returns))),
        "score_mean": float(pooled_scores.mean()),
        "score_stderr": float(pooled_scores.std(ddof=1) / np.sqrt(len(pooled_scores))),
        "worst_gap_pct": worst_gap_pct(pooled_scores),
        "diverged": any(r["diverged"] for r in rows),
    }
    rows.append(pooled)
    _write_summary(out / "summary.csv", rows)
    results["pooled_score"] = pooled["score_mean"]
    results["pooled_stderr"] = pooled["score_stderr"]
    results["summary_rows"] = rows
    results["out_dir"] = out
    return results


def _divergence_log(agent, err):
    from .metrics import MetricsLog
    log = MetricsLog(agent.METRIC_COLUMNS)
    row = {c: float("nan") for c in agent.METRIC_COLUMNS}
    row.update(step=getattr(err, "step", -1),
               critic_loss_mean=getattr(err, "critic_loss", float("nan")))
    if "bc_form" in agent.METRIC_COLUMNS:
        row["bc_form"] = agent.config.bc_form
    log.append(**row)
    return log


def _write_summary(path: Path, rows):
    from .metrics import MetricsLog
    log = MetricsLog(SUMMARY_COLUMNS)
    for row in rows:
        log.append(**row)
    log.write_csv(path)
