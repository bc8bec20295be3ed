"""Dev probe: C7 escalation study.
1) no-BC N=2 on 10k expert data, eval trajectory to 400k steps
2) no-BC N=2 on 2.5k expert data, eval trajectory to 200k steps
3) pure-BC score on 2.5k (C5 feasibility) and strong config (C9 feasibility)
"""
import time
import numpy as np
from bcnrl import data, envs, td3bcn
from bcnrl.errors import DivergenceError, NumericalError

dense = envs.make_env("point-dense")
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


def trajectory(ds, cfg, steps, seed, every=50_000):
    agent = td3bcn.Td3BcnAgent(2, 2, cfg, seed=seed)
    agent.set_normalizer(ds)
    scores = []
    hook = lambda a, step: scores.append((step, round(evaluate(a), 1)))
    try:
        agent.train_offline(ds, steps, seed=seed, eval_hook=hook, eval_every=every)
        err = None
    except (DivergenceError, NumericalError) as e:
        err = e
    return scores, err


for size, steps in ((10_000, 400_000), (2_500, 200_000)):
    ds = data.generate_dataset(dense, "expert", size, seed=11)
    print(f"== noBC N2 w32, expert {size}, to {steps}", flush=True)
    for seed in range(3):
        cfg = td3bcn.Td3BcnConfig(hidden_width=32, n_critics=2, beta=0.0)
        t0 = time.time()
        scores, err = trajectory(ds, cfg, steps, seed)
        print(f"  seed{seed}: {scores} {'DIV@'+str(err.step) if err else ''} "
              f"({time.time()-t0:.0f}s)", flush=True)

ds = data.generate_dataset(dense, "expert", 2_500, seed=11)
print("== C5/C9 feasibility on 2.5k", flush=True)
cfg = td3bcn.Td3BcnConfig(hidden_width=32, beta=1e6)
agent = td3bcn.Td3BcnAgent(2, 2, cfg, seed=0)
agent.set_normalizer(ds)
agent.train_offline(ds, 20_000, seed=0)
held = data.generate_dataset(dense, "expert", 5000, seed=12013)
mse = float(np.mean((agent.policy_action(agent._norm(held.states)) - held.actions) ** 2))
print(f"  pure-BC: score={evaluate(agent):.1f} heldout-mse={mse:.2e}", flush=True)
for n, b in ((10, 0.04), (2, 0.002)):
    cfg = td3bcn.Td3BcnConfig(hidden_width=32, n_critics=n, beta=b)
    t0 = time.time()
    scores, err = trajectory(ds, cfg, 200_000, 0)
    print(f"  N={n} b={b}: {scores} {'DIV@'+str(err.step) if err else ''} "
          f"({time.time()-t0:.0f}s)", flush=True)
