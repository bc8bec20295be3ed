"""Dev probe: does offline training lift scores above the behaviour policy?

Trains short TD3/SAC runs at widths 16 and 32 on the medium dataset and
reports normalized scores. Not part of the deliverable test suite.
"""
import time
import numpy as np
from bcnrl import data, envs, td3bcn, sacbcn

dense = envs.make_env("point-dense")
ds = data.generate_dataset(dense, "medium", 50_000, seed=7)

ref_rng = np.random.default_rng(997)
rand_ret = envs.rollout_tier(dense, "random", 500, ref_rng).mean()
exp_ret = envs.rollout_tier(dense, "expert", 500, ref_rng).mean()
med_ret = envs.rollout_tier(dense, "medium", 500, ref_rng).mean()
norm = lambda r: 100.0 * (r - rand_ret) / (exp_ret - rand_ret)
print(f"refs: random={rand_ret:.1f} expert={exp_ret:.1f} medium={med_ret:.1f} "
      f"(medium score {norm(med_ret):.1f})", flush=True)


def evaluate(agent, episodes=20, seed=1234):
    rng = np.random.default_rng(seed)
    rets = []
    for _ in range(episodes):
        state = envs.reset(dense, rng)
        total, done = 0.0, False
        while not done:
            a = agent.eval_action(state.observation)
            state, r, done = envs.step(dense, state, a)
            total += r
        rets.append(total)
    return float(np.mean(rets))


STEPS = 30_000
for width in (16, 32):
    cfg = td3bcn.Td3BcnConfig(hidden_width=width, inflation_steps=5000)
    agent = td3bcn.Td3BcnAgent(2, 2, cfg, seed=0)
    agent.set_normalizer(ds)
    t0 = time.time()
    agent.train_offline(ds, STEPS, seed=0, metrics_every=10_000)
    r = evaluate(agent)
    print(f"TD3 w{width}: {STEPS} steps in {time.time()-t0:.0f}s -> "
          f"return {r:.1f}, score {norm(r):.1f}", flush=True)

    scfg = sacbcn.SacBcnConfig(hidden_width=width, inflation_steps=5000)
    sagent = sacbcn.SacBcnAgent(2, 2, scfg, seed=0)
    sagent.set_normalizer(ds)
    t0 = time.time()
    sagent.train_offline(ds, STEPS, seed=0, metrics_every=10_000)
    r = evaluate(sagent)
    print(f"SAC w{width}: {STEPS} steps in {time.time()-t0:.0f}s -> "
          f"return {r:.1f}, score {norm(r):.1f}", flush=True)
