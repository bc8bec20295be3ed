#!/usr/bin/env python3
"""Offline benchmark across tiers: train both agents on each dataset and
tabulate pooled normalised scores (the desk-scale analogue of the usual
benchmark tables).

By default one BC coefficient per environment is used for every tier,
matching the fixed-within-task protocol; --beta-by-tier unlocks the
variable-beta study.
"""
import argparse
from dataclasses import replace
from pathlib import Path

from bcnrl import envs, experiment


def parse_beta_by_tier(text):
    out = {}
    for part in text.split(","):
        tier, value = part.split("=")
        out[tier.strip()] = float(value)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--datasets", default="datasets", help="make_datasets.py output")
    ap.add_argument("--env", default="point-dense", choices=envs.env_names())
    ap.add_argument("--tiers", default="medium,expert,medium-replay,medium-expert")
    ap.add_argument("--agents", default="td3bcn,sacbcn")
    ap.add_argument("--steps", type=int, default=50_000)
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--width", type=int, default=32)
    ap.add_argument("--beta", type=float, default=0.04,
                    help="single BC coefficient used for every tier")
    ap.add_argument("--beta-by-tier", default="",
                    help="e.g. 'medium=0.01,expert=0.1'; overrides --beta per tier")
    ap.add_argument("--out", default="runs/offline_benchmark")
    args = ap.parse_args()

    per_tier = parse_beta_by_tier(args.beta_by_tier) if args.beta_by_tier else {}
    seeds = tuple(int(s) for s in args.seeds.split(","))
    out_root = Path(args.out)
    ref = None
    lines = ["agent,tier,beta,pooled_score,pooled_stderr,diverged_seeds"]
    for agent in args.agents.split(","):
        for tier in args.tiers.split(","):
            beta = per_tier.get(tier, args.beta)
            cfg = experiment.ExperimentConfig(
                agent=agent, env=args.env,
                dataset=str(Path(args.datasets) / f"{args.env}-{tier}.bin"),
                seeds=seeds, gradient_steps=args.steps,
                out_dir=str(out_root / f"{agent}-{tier}"))
            cfg = replace(cfg, td3=replace(cfg.td3, hidden_width=args.width, beta=beta),
                          sac=replace(cfg.sac, hidden_width=args.width, beta=beta))
            if ref is None:
                ref = experiment.compute_score_reference(envs.make_env(args.env))
            results = experiment.run_experiment(cfg, score_ref=ref)
            n_div = sum(1 for info in results["seeds"].values() if info["diverged"])
            lines.append(f"{agent},{tier},{beta},{results['pooled_score']:.2f},"
                         f"{results['pooled_stderr']:.2f},{n_div}")
            print(lines[-1], flush=True)
    out_root.mkdir(parents=True, exist_ok=True)
    (out_root / "benchmark.csv").write_text("\n".join(lines) + "\n")
    print(f"table -> {out_root / 'benchmark.csv'}")


if __name__ == "__main__":
    main()
