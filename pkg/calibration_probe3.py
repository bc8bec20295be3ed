"""Dev probe: exact planned acceptance recipes for the risky criteria, on the
narrow (10k) expert dataset at width 32.
A: C7 no-BC N=2, 200k steps, 5 seeds
D: C5 pure-BC sanity on the same data
B: C9 corner (N=2, beta=0.002), 2 seeds; C: C9 strong (N=10, beta=0.04), 1 seed
"""
import time
import numpy as np
from bcnrl import data, envs, td3bcn, sacbcn
from bcnrl.errors import DivergenceError, NumericalError

dense = envs.make_env("point-dense")
expert = data.generate_dataset(dense, "expert", 10_000, seed=11)

ref_rng = np.random.default_rng(997)
rand_ret = envs.rollout_tier(dense, "random", 1000, ref_rng).mean()
exp_ret = envs.rollout_tier(dense, "expert", 1000, ref_rng).mean()
norm = lambda r: 100.0 * (r - rand_ret) / (exp_ret - rand_ret)


def evaluate(agent, episodes=10, seed=10_000):
    rng = np.random.default_rng(seed)
    rets = []
    for _ in range(episodes):
        state = envs.reset(dense, rng)
        total, done = 0.0, False
        while not done:
            state, r, done = envs.step(dense, state, agent.eval_action(state.observation))
            total += r
        rets.append(total)
    return norm(np.mean(rets))


def train_td3(cfg, steps, seed):
    agent = td3bcn.Td3BcnAgent(2, 2, cfg, seed=seed)
    agent.set_normalizer(expert)
    try:
        agent.train_offline(expert, steps, seed=seed)
        return agent, None
    except (DivergenceError, NumericalError) as e:
        return agent, e


print("A: C7 exact recipe (noBC, N=2, w32, 200k, 10k expert)", flush=True)
fails = 0
for seed in range(5):
    cfg = td3bcn.Td3BcnConfig(hidden_width=32, n_critics=2, beta=0.0)
    t0 = time.time()
    agent, err = train_td3(cfg, 200_000, seed)
    s = evaluate(agent)
    failed = (err is not None) or (s < 90.0)
    fails += failed
    print(f"  seed{seed}: {'DIV@'+str(err.step) if err else 'done'} score={s:7.1f} "
          f"fail={failed} ({time.time()-t0:.0f}s)", flush=True)
print(f"A: {fails}/5 failures (need >=4)", flush=True)

print("D: C5 pure-BC on 10k expert (20k steps)", flush=True)
cfg = td3bcn.Td3BcnConfig(hidden_width=32, beta=1e6)
agent, err = train_td3(cfg, 20_000, 0)
held = data.generate_dataset(dense, "expert", 5000, seed=12013)
a_p = agent.policy_action(agent._norm(held.states))
mse = float(np.mean((a_p - held.actions) ** 2))
print(f"  TD3 BC: score={evaluate(agent):.1f} heldout-mse={mse:.2e} "
      f"{'DIV' if err else ''}", flush=True)

scfg = sacbcn.SacBcnConfig(hidden_width=32, beta=1e6, bc_form="mse")
sagent = sacbcn.SacBcnAgent(2, 2, scfg, seed=0)
sagent.set_normalizer(expert)
sagent.train_offline(expert, 20_000, seed=0)
mean, _ = sagent.policy_head(sagent._norm(held.states))
mse = float(np.mean((np.tanh(mean) - held.actions) ** 2))
print(f"  SAC BC: score={evaluate(sagent):.1f} heldout-mse={mse:.2e}", flush=True)

print("B/C: C9 exact recipes (200k, 10k expert)", flush=True)
for n, b, seeds in ((2, 0.002, (0, 1)), (10, 0.04, (0,))):
    for seed in seeds:
        cfg = td3bcn.Td3BcnConfig(hidden_width=32, n_critics=n, beta=b)
        t0 = time.time()
        agent, err = train_td3(cfg, 200_000, seed)
        print(f"  N={n:2d} b={b} seed{seed}: {'DIV@'+str(err.step) if err else 'done'} "
              f"score={evaluate(agent):7.1f} ({time.time()-t0:.0f}s)", flush=True)
