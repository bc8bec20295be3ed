#!/usr/bin/env python3
"""Constraint-vs-ensemble-size study: train a grid of (N, beta) agents on one
dataset, then emit (a) a score heatmap CSV and (b) distance-binned uncertainty
profiles per cell, the ingredients of the performance/uncertainty heatmaps.
"""
import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from bcnrl import data, diagnostics, envs, experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dataset", required=True)
    ap.add_argument("--env", default="point-dense", choices=envs.env_names())
    ap.add_argument("--ns", default="2,5,10")
    ap.add_argument("--betas", default="0.002,0.04,0.5")
    ap.add_argument("--steps", type=int, default=50_000)
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--width", type=int, default=32)
    ap.add_argument("--budget", type=int, default=50_000)
    ap.add_argument("--bins", type=int, default=20)
    ap.add_argument("--out", default="runs/uncertainty_study")
    args = ap.parse_args()

    ns = [int(n) for n in args.ns.split(",")]
    betas = [float(b) for b in args.betas.split(",")]
    seeds = tuple(int(s) for s in args.seeds.split(","))
    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    dataset = data.load_dataset(args.dataset)
    ref = experiment.compute_score_reference(envs.make_env(args.env))

    score_lines = ["n,beta,pooled_score,diverged_seeds"]
    for n in ns:
        for beta in betas:
            cfg = experiment.ExperimentConfig(
                agent="td3bcn", env=args.env, dataset=args.dataset, seeds=seeds,
                gradient_steps=args.steps,
                out_dir=str(out_root / f"n{n}-beta{beta}"))
            cfg = replace(cfg, td3=replace(
                cfg.td3, n_critics=n, beta=beta, hidden_width=args.width))
            results = experiment.run_experiment(cfg, score_ref=ref)
            n_div = sum(1 for i in results["seeds"].values() if i["diverged"])
            score_lines.append(
                f"{n},{beta},{results['pooled_score']:.2f},{n_div}")
            print(score_lines[-1], flush=True)
            for seed, info in results["seeds"].items():
                prof = diagnostics.distance_profile(
                    dataset, info["agent"].critics, args.budget, args.bins,
                    np.random.default_rng(seed), beta=beta,
                    target_mode=cfg.td3.target_mode, diverged=info["diverged"])
                diagnostics.profile_to_csv(
                    prof, out_root / f"profile-n{n}-beta{beta}-seed{seed}.csv")
    (out_root / "scores.csv").write_text("\n".join(score_lines) + "\n")
    print(f"heatmap table -> {out_root / 'scores.csv'}")


if __name__ == "__main__":
    main()
