"""Command-line entry points: gen-data, train-offline, finetune, diagnose,
eval and refscore subcommands."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import data, diagnostics, envs, experiment, finetune
from .checkpoint import load_agent, save_agent
from .errors import BcnrlError


def _add_gen_data(sub):
    p = sub.add_parser("gen-data", help="generate a behaviour dataset")
    p.add_argument("--env", required=True, choices=envs.env_names())
    p.add_argument("--tier", required=True,
                   choices=list(envs.TIERS) + [data.REPLAY_TIER])
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="also export a CSV copy to this path")
    p.add_argument("--step-scale", type=float)
    p.add_argument("--goal-radius", type=float)
    p.add_argument("--max-steps", type=int)
    p.set_defaults(fn=_run_gen_data)


def _env_from_args(args):
    overrides = {}
    if getattr(args, "step_scale", None) is not None:
        overrides["step_scale"] = args.step_scale
    if getattr(args, "goal_radius", None) is not None:
        overrides["goal_radius"] = args.goal_radius
    if getattr(args, "max_steps", None) is not None:
        overrides["max_episode_steps"] = args.max_steps
    return envs.make_env(args.env, **overrides)


def _run_gen_data(args):
    spec = _env_from_args(args)
    ds = data.generate_dataset(spec, args.tier, args.size, args.seed)
    data.save_dataset(ds, args.out)
    if args.csv:
        data.export_csv(ds, args.csv)
    print(f"wrote {len(ds)} transitions to {args.out}")


def _add_train_offline(sub):
    p = sub.add_parser("train-offline", help="offline-train one experiment bundle")
    p.add_argument("--config", help="experiment config file (ini)")
    p.add_argument("--agent", choices=experiment.AGENT_KINDS)
    p.add_argument("--env", choices=envs.env_names())
    p.add_argument("--dataset")
    p.add_argument("--seeds", help="comma-separated, e.g. 0,1,2,3,4")
    p.add_argument("--steps", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=_run_train_offline)


def _run_train_offline(args):
    cfg = (experiment.load_config(args.config) if args.config
           else experiment.ExperimentConfig())
    patch = {}
    if args.agent:
        patch["agent"] = args.agent
    if args.env:
        patch["env"] = args.env
    if args.dataset:
        patch["dataset"] = args.dataset
    if args.seeds:
        patch["seeds"] = tuple(int(s) for s in args.seeds.split(","))
    if args.steps is not None:
        patch["gradient_steps"] = args.steps
    if args.out:
        patch["out_dir"] = args.out
    from dataclasses import replace
    cfg = replace(cfg, **patch) if patch else cfg

    def progress(seed, row):
        print(f"seed {seed}: score {row['score_mean']:.1f} "
              f"(diverged={row['diverged']})", flush=True)

    results = experiment.run_experiment(cfg, progress=progress)
    print(f"pooled score {results['pooled_score']:.1f} "
          f"+/- {results['pooled_stderr']:.1f} -> {results['out_dir']}")


def _add_finetune(sub):
    p = sub.add_parser("finetune", help="online fine-tuning from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--env", required=True, choices=envs.env_names())
    p.add_argument("--dataset", required=True)
    p.add_argument("--beta-start", type=float, required=True)
    p.add_argument("--beta-end", type=float, required=True)
    p.add_argument("--decay-steps", type=int, default=50_000)
    p.add_argument("--warmup", type=int, default=2500)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--eval-every", type=int, default=5000)
    p.add_argument("--last-k", type=int, default=2500)
    p.add_argument("--eval-episodes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--refscore", help="score reference json for normalised eval")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_run_finetune)


def _run_finetune(args):
    agent = load_agent(args.checkpoint)
    spec = envs.make_env(args.env)
    dataset = data.load_dataset(args.dataset)
    schedule = finetune.DecaySchedule(args.beta_start, args.beta_end,
                                      args.decay_steps)
    ref = experiment.ScoreReference.load(args.refscore) if args.refscore else None
    out = experiment.resolve_out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log = finetune.run_finetune(
        agent, spec, dataset, schedule, args.steps, warmup=args.warmup,
        eval_every=args.eval_every, last_k=args.last_k,
        eval_episodes=args.eval_episodes, seed=args.seed, score_ref=ref)
    log.write_csv(out / "finetune_metrics.csv")
    save_agent(agent, out / "finetuned_checkpoint.npz")
    print(f"final eval {log.last('eval_score_mean'):.2f} -> {out}")


def _add_diagnose(sub):
    p = sub.add_parser("diagnose", help="distance-binned uncertainty profile")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--budget", type=int, default=50_000)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-members", help="also dump raw per-member Q values here")
    p.set_defaults(fn=_run_diagnose)


def _run_diagnose(args):
    agent = load_agent(args.checkpoint)
    dataset = data.load_dataset(args.dataset)
    rng = np.random.default_rng(args.seed)
    profile = diagnostics.distance_profile(
        dataset, agent.critics, args.budget, args.bins, rng,
        beta=agent.config.beta, target_mode=agent.config.target_mode)
    diagnostics.profile_to_csv(profile, args.out)
    if args.dump_members:
        diagnostics.member_q_dump(dataset, agent.critics, min(args.budget, 10_000),
                                  np.random.default_rng(args.seed + 1),
                                  args.dump_members)
    print(f"profile over {args.budget} pairs, {args.bins} bins -> {args.out}")


def _add_eval(sub):
    p = sub.add_parser("eval", help="evaluate a checkpoint deterministically")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--env", required=True, choices=envs.env_names())
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--refscore", help="score reference json for normalised output")
    p.set_defaults(fn=_run_eval)


def _run_eval(args):
    agent = load_agent(args.checkpoint)
    spec = envs.make_env(args.env)
    result = experiment.evaluate_policy(agent, spec, args.episodes, args.seed)
    line = f"mean return {result.mean:.3f} +/- {result.stderr:.3f}"
    if args.refscore:
        ref = experiment.ScoreReference.load(args.refscore)
        scores = ref.normalize(result.returns)
        line += (f" | normalised {scores.mean():.1f} "
                 f"+/- {scores.std(ddof=1) / np.sqrt(len(scores)):.1f}"
                 if len(scores) > 1 else f" | normalised {scores.mean():.1f}")
    print(line)


def _add_refscore(sub):
    p = sub.add_parser("refscore", help="compute random/expert scoring anchors")
    p.add_argument("--env", required=True, choices=envs.env_names())
    p.add_argument("--rollouts", type=int, default=1000)
    p.add_argument("--seed", type=int, default=997)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_run_refscore)


def _run_refscore(args):
    spec = envs.make_env(args.env)
    ref = experiment.compute_score_reference(spec, args.rollouts, args.seed)
    ref.save(args.out)
    print(f"random {ref.random_return:.2f}, expert {ref.expert_return:.2f} "
          f"-> {args.out}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bcnrl",
        description="ensemble-critic offline RL with BC constraints")
    sub = parser.add_subparsers(dest="command", required=True)
    for add in (_add_gen_data, _add_train_offline, _add_finetune, _add_diagnose,
                _add_eval, _add_refscore):
        add(sub)
    args = parser.parse_args(argv)
    try:
        args.fn(args)
    except BcnrlError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
