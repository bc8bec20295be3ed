"""Dev helper: populate the acceptance cache with the heavy training runs,
using exactly the recipes the acceptance tests will ask for."""
import sys
import time

sys.path.insert(0, "tests")

import numpy as np

import acceptance_helpers as H
from test_acceptance import (ABLATION_STEPS, C6_STEPS, FINETUNE_STEPS,
                             TREND_STEPS, base_config)
from bcnrl import data, envs, finetune
from dataclasses import replace


def log(msg):
    print(f"[{time.strftime('%H:%M:%S')}] {msg}", flush=True)


def main(stages):
    if "c6" in stages:
        for agent in ("td3bcn", "sacbcn"):
            cfg = base_config(agent, "medium", gradient_steps=C6_STEPS,
                              seeds=(0, 1, 2, 3, 4))
            t0 = time.time()
            out = H.offline_bundle(f"c6-{agent}", cfg)
            log(f"c6-{agent}: {out} ({time.time()-t0:.0f}s) "
                f"pooled={H.bundle_pooled(out)['score_mean']:.1f}")

    if "c8" in stages:
        for beta in (0.04, 0.5):
            cfg = base_config("td3bcn", "medium", gradient_steps=TREND_STEPS,
                              seeds=(0, 1, 2, 3, 4))
            cfg = replace(cfg, td3=replace(cfg.td3, beta=beta))
            t0 = time.time()
            out = H.offline_bundle(f"c8-beta{beta}", cfg)
            log(f"c8-beta{beta}: done ({time.time()-t0:.0f}s)")

    if "c10" in stages:
        bundle = H.offline_bundle(
            "c6-td3bcn", base_config("td3bcn", "medium", gradient_steps=C6_STEPS,
                                     seeds=(0, 1, 2, 3, 4)))
        recipe = {"kind": "finetune", "label": "c10", "bundle": str(bundle),
                  "steps": FINETUNE_STEPS, "beta": (0.04, 0.005, 50_000)}
        dataset = data.load_dataset(H.dataset_file("medium"))
        dense = envs.make_env("point-dense")

        def produce(out):
            for seed in range(5):
                agent = H.bundle_agent(bundle, seed)
                sched = finetune.DecaySchedule(0.04, 0.005, 50_000)
                flog = finetune.run_finetune(
                    agent, dense, dataset, sched, FINETUNE_STEPS, warmup=2500,
                    eval_every=5000, last_k=2500, eval_episodes=10,
                    seed=7000 + seed, score_ref=H.score_reference())
                flog.write_csv(out / f"seed_{seed}.csv")
                log(f"  c10 seed{seed}: final "
                    f"{flog.last('eval_score_mean'):.1f}")

        t0 = time.time()
        H.cached_run(recipe, produce)
        log(f"c10: done ({time.time()-t0:.0f}s)")

    if "c11" in stages:
        for agent in ("td3bcn", "sacbcn"):
            cfg = base_config(agent, "medium", gradient_steps=C6_STEPS,
                              seeds=(0, 1, 2, 3, 4))
            t0 = time.time()
            H.offline_bundle(f"c11-{agent}-rerun", cfg)
            log(f"c11-{agent}-rerun: done ({time.time()-t0:.0f}s)")

    if "c5" in stages:
        from test_acceptance import _bc_limit_bundle
        for agent in ("td3bcn", "sacbcn"):
            t0 = time.time()
            out = _bc_limit_bundle(agent)
            log(f"c5-{agent}: pooled={H.bundle_pooled(out)['score_mean']:.1f} "
                f"({time.time()-t0:.0f}s)")

    if "c7" in stages:
        cfg = base_config("td3bcn", "expert", gradient_steps=ABLATION_STEPS,
                          seeds=(0, 1, 2, 3, 4), disable_bc=True,
                          ensemble_n_override=2)
        t0 = time.time()
        out = H.offline_bundle("c7-nobc", cfg)
        rows = H.bundle_seed_rows(out)
        log(f"c7: scores={[round(r['score_mean'],1) for r in rows]} "
            f"div={[r['diverged'] for r in rows]} ({time.time()-t0:.0f}s)")

    if "c9" in stages:
        corner = base_config("td3bcn", "expert", gradient_steps=ABLATION_STEPS,
                             seeds=(0, 1, 2, 3, 4))
        corner = replace(corner, td3=replace(corner.td3, n_critics=2, beta=0.002))
        strong = base_config("td3bcn", "expert", gradient_steps=ABLATION_STEPS,
                             seeds=(0, 1, 2, 3, 4))
        for label, cfg in (("c9-corner", corner), ("c9-strong", strong)):
            t0 = time.time()
            out = H.offline_bundle(label, cfg)
            log(f"{label}: pooled={H.bundle_pooled(out)['score_mean']:.1f} "
                f"({time.time()-t0:.0f}s)")


if __name__ == "__main__":
    main(sys.argv[1:] or ["c6", "c8", "c10", "c11"])
