#!/usr/bin/env python3
"""Generate the standard dataset suite for both built-in environments.

Writes <out>/<env>-<tier>.bin for every tier (plus medium-expert as the
concatenation), mirroring the usual offline benchmark layout.
"""
import argparse
from pathlib import Path

from bcnrl import data, envs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="datasets")
    ap.add_argument("--size", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for env_name in envs.env_names():
        spec = envs.make_env(env_name)
        parts = {}
        for i, tier in enumerate(("random", "medium", "expert", "medium-replay")):
            ds = data.generate_dataset(spec, tier, args.size, args.seed + i)
            path = out / f"{env_name}-{tier}.bin"
            data.save_dataset(ds, path)
            parts[tier] = ds
            print(f"wrote {path} ({len(ds)} transitions)")
        combo = data.concat(parts["medium"], parts["expert"])
        path = out / f"{env_name}-medium-expert.bin"
        data.save_dataset(combo, path)
        print(f"wrote {path} ({len(combo)} transitions)")


if __name__ == "__main__":
    main()
