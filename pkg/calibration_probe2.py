"""Dev probe for the ablation-style behaviours: no-BC divergence on narrow
data, the small-N/small-beta corner, and the uncertainty-distance trend."""
import time
import numpy as np
from bcnrl import data, diagnostics, envs, td3bcn
from bcnrl.errors import DivergenceError, NumericalError

dense = envs.make_env("point-dense")
expert = data.generate_dataset(dense, "expert", 50_000, seed=11)
medium = data.generate_dataset(dense, "medium", 50_000, seed=7)

ref_rng = np.random.default_rng(997)
rand_ret = envs.rollout_tier(dense, "random", 500, ref_rng).mean()
exp_ret = envs.rollout_tier(dense, "expert", 500, ref_rng).mean()
med_ret = envs.rollout_tier(dense, "medium", 500, ref_rng).mean()
norm = lambda r: 100.0 * (r - rand_ret) / (exp_ret - rand_ret)
print(f"medium score = {norm(med_ret):.1f}", flush=True)


def evaluate(agent, episodes=20, seed=1234):
    rng = np.random.default_rng(seed)
    rets = []
    for _ in range(episodes):
        state = envs.reset(dense, rng)
        total, done = 0.0, False
        while not done:
            state, r, done = envs.step(dense, state, agent.eval_action(state.observation))
            total += r
        rets.append(total)
    return float(np.mean(rets))


def train(cfg, ds, steps, seed):
    agent = td3bcn.Td3BcnAgent(2, 2, cfg, seed=seed)
    agent.set_normalizer(ds)
    try:
        agent.train_offline(ds, steps, seed=seed)
        return agent, None
    except (DivergenceError, NumericalError) as e:
        return agent, e


def spearman(x, y):
    rx = np.argsort(np.argsort(x)).astype(float)
    ry = np.argsort(np.argsort(y)).astype(float)
    rx -= rx.mean(); ry -= ry.mean()
    return float((rx @ ry) / np.sqrt((rx @ rx) * (ry @ ry)))


for width in (16, 32):
    print(f"== width {width}", flush=True)
    # (a) no-BC, N=2 on expert data
    for seed in range(3):
        cfg = td3bcn.Td3BcnConfig(hidden_width=width, n_critics=2, beta=0.0)
        t0 = time.time()
        agent, err = train(cfg, expert, 100_000, seed)
        score = norm(evaluate(agent))
        print(f"  noBC N2 seed{seed}: {'DIVERGED@'+str(err.step) if err else 'done':>14} "
              f"score={score:7.1f}  ({time.time()-t0:.0f}s)", flush=True)
    # (b) corner: N=2 beta=0.002 vs N=10 beta=0.04
    for n, b in ((2, 0.002), (10, 0.04)):
        cfg = td3bcn.Td3BcnConfig(hidden_width=width, n_critics=n, beta=b)
        t0 = time.time()
        agent, err = train(cfg, expert, 100_000, 0)
        score = norm(evaluate(agent))
        print(f"  corner N={n:2d} b={b}: {'DIVERGED@'+str(err.step) if err else 'done':>14} "
              f"score={score:7.1f}  ({time.time()-t0:.0f}s)", flush=True)

# (c) uncertainty trend at width 32
width = 32
for beta in (0.04, 0.5):
    cfg = td3bcn.Td3BcnConfig(hidden_width=width, n_critics=10, beta=beta)
    agent, err = train(cfg, medium, 50_000, 0)
    prof = diagnostics.distance_profile(medium, agent.critics, 50_000, 20,
                                        np.random.default_rng(5), beta=beta)
    ok = prof.counts > 0
    rho = spearman(np.arange(20)[ok], prof.q_std[ok])
    topq = prof.q_std[ok][-max(1, ok.sum() // 4):].mean()
    print(f"trend beta={beta}: spearman={rho:.3f} top-quartile q_std={topq:.4f} "
          f"{'DIVERGED' if err else ''}", flush=True)
    print("  q_std per bin:", np.array2string(prof.q_std, precision=3), flush=True)
