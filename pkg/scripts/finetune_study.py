#!/usr/bin/env python3
"""Offline-to-online study: fine-tune every seed checkpoint of an offline
bundle and pool the evaluation curves (the stability-plot ingredient)."""
import argparse
import json
from pathlib import Path

import numpy as np

from bcnrl import data, envs, experiment, finetune
from bcnrl.checkpoint import load_agent
from bcnrl.metrics import MetricsLog


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--bundle", required=True, help="offline run_experiment dir")
    ap.add_argument("--dataset", required=True)
    ap.add_argument("--env", default="point-dense", choices=envs.env_names())
    ap.add_argument("--beta-start", type=float, default=0.04)
    ap.add_argument("--beta-end", type=float, default=0.005)
    ap.add_argument("--decay-steps", type=int, default=50_000)
    ap.add_argument("--steps", type=int, default=100_000)
    ap.add_argument("--warmup", type=int, default=2500)
    ap.add_argument("--eval-every", type=int, default=5000)
    ap.add_argument("--out", default="runs/finetune_study")
    args = ap.parse_args()

    bundle = Path(args.bundle)
    spec = envs.make_env(args.env)
    dataset = data.load_dataset(args.dataset)
    ref_path = bundle / "score_reference.json"
    ref = (experiment.ScoreReference.load(ref_path) if ref_path.exists()
           else experiment.compute_score_reference(spec))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    curves = []
    for ckpt in sorted(bundle.glob("seed_*/checkpoint.npz")):
        seed = int(ckpt.parent.name.split("_")[1])
        agent = load_agent(ckpt)
        sched = finetune.DecaySchedule(args.beta_start, args.beta_end,
                                       args.decay_steps)
        log = finetune.run_finetune(
            agent, spec, dataset, sched, args.steps, warmup=args.warmup,
            eval_every=args.eval_every, seed=7000 + seed, score_ref=ref)
        log.write_csv(out / f"seed_{seed}.csv")
        curves.append((log.column("step"), log.column("eval_score_mean")))
        print(f"seed {seed}: start {curves[-1][1][0]:.1f} "
              f"-> final {curves[-1][1][-1]:.1f}", flush=True)

    steps = curves[0][0]
    pooled = np.array([c[1] for c in curves])
    table = MetricsLog(("step", "pooled_score", "seed_spread"))
    for i, s in enumerate(steps):
        table.append(step=s, pooled_score=float(pooled[:, i].mean()),
                     seed_spread=float(pooled[:, i].std(ddof=1)))
    table.write_csv(out / "pooled.csv")
    print(f"pooled curve -> {out / 'pooled.csv'}")


if __name__ == "__main__":
    main()
