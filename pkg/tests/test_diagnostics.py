import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bcnrl import data, diagnostics, envs, nn
from bcnrl.errors import ConfigError


@pytest.fixture(scope="module")
def dataset():
    return data.generate_dataset(envs.make_env("point-dense"), "medium", 2000, seed=3)


@pytest.fixture
def critics(rng):
    return nn.MlpEnsemble.init([4, 8, 8, 1], 5, rng)


# -- expected minimum ---------------------------------------------------------

def test_expected_min_n1_is_exact_mu():
    assert diagnostics.expected_min_gaussian(0.0, 1.0, 1) == 0.0
    assert diagnostics.expected_min_gaussian(3.25, 2.0, 1) == 3.25


def test_expected_min_sigma_zero():
    for n in (1, 2, 10, 50):
        assert diagnostics.expected_min_gaussian(-1.5, 0.0, n) == -1.5


def test_expected_min_vs_monte_carlo_large_n(rng):
    # the order-statistic approximation is accurate for larger ensembles
    approx = diagnostics.expected_min_gaussian(0.0, 1.0, 50)
    mc = np.mean([rng.standard_normal((100_000, 50)).min(axis=1).mean()
                  for _ in range(2)])
    assert abs(approx - mc) / abs(mc) < 0.01


def test_expected_min_invalid_args():
    with pytest.raises(ConfigError):
        diagnostics.expected_min_gaussian(0.0, -1.0, 5)
    with pytest.raises(ConfigError):
        diagnostics.expected_min_gaussian(0.0, 1.0, 0)


@given(n=st.integers(1, 200), mu=st.floats(-5, 5), sigma=st.floats(0, 3))
def test_expected_min_monotone_and_affine(n, mu, sigma):
    val = diagnostics.expected_min_gaussian(mu, sigma, n)
    nxt = diagnostics.expected_min_gaussian(mu, sigma, n + 1)
    assert nxt <= val + 1e-12  # non-increasing in ensemble size
    # affine in mu and linear in sigma
    assert np.isclose(diagnostics.expected_min_gaussian(mu + 1.0, sigma, n),
                      val + 1.0, atol=1e-12)
    assert np.isclose(diagnostics.expected_min_gaussian(0.0, 2 * sigma, n),
                      2 * (diagnostics.expected_min_gaussian(0.0, sigma, n)),
                      atol=1e-12)


# -- ensemble stats ------------------------------------------------------------

def test_stats_identical_members(rng):
    ens = nn.MlpEnsemble.init([4, 6, 1], 4, rng)
    for layer in range(ens.n_layers):
        for k in (2 * layer, 2 * layer + 1):
            ens.params[k][:] = ens.params[k][0]
    mean, std, q_min, clip = diagnostics.ensemble_stats(
        ens, np.zeros(2), np.zeros(2))
    assert std == 0.0 and clip == 0.0 and mean == q_min


def test_stats_two_member_arithmetic():
    # members outputting exactly 1 and 3: zero-weight nets, bias-only output
    ens = nn.MlpEnsemble.init([4, 2, 1], 2, np.random.default_rng(0))
    for p in ens.params:
        p[...] = 0.0
    ens.params[-1][0, 0, 0] = 1.0
    ens.params[-1][1, 0, 0] = 3.0
    mean, std, q_min, clip = diagnostics.ensemble_stats(ens, np.zeros(2), np.zeros(2))
    assert (mean, q_min, clip, std) == (2.0, 1.0, 1.0, 1.0)


def test_clip_penalty_nonnegative(critics, rng):
    for _ in range(20):
        _, _, _, clip = diagnostics.ensemble_stats(
            critics, rng.normal(size=2), rng.uniform(-1, 1, 2))
        assert clip >= 0.0


# -- distance profiles -----------------------------------------------------------

def test_profile_constant_ensemble_is_flat(dataset):
    ens = nn.MlpEnsemble.init([4, 6, 1], 5, np.random.default_rng(1))
    for p in ens.params:
        p[...] = 0.0
    prof = diagnostics.distance_profile(dataset, ens, 2000, 10,
                                        np.random.default_rng(0))
    filled = prof.counts > 0
    assert np.allclose(prof.q_std[filled], 0.0)
    assert np.allclose(prof.q_clip[filled], 0.0)
    assert prof.counts.sum() == 2000


def test_profile_deterministic_given_seed(dataset, critics):
    p1 = diagnostics.distance_profile(dataset, critics, 1000, 8,
                                      np.random.default_rng(42))
    p2 = diagnostics.distance_profile(dataset, critics, 1000, 8,
                                      np.random.default_rng(42))
    assert np.array_equal(p1.bin_edges, p2.bin_edges)
    assert np.array_equal(p1.counts, p2.counts)
    assert np.array_equal(p1.q_std, p2.q_std, equal_nan=True)


def test_profile_single_pair_per_bin(dataset, critics):
    prof = diagnostics.distance_profile(dataset, critics, 12, 12,
                                        np.random.default_rng(7))
    filled = prof.counts > 0
    assert prof.counts.sum() == 12
    # bins holding exactly one pair carry that pair's raw value (no averaging)
    assert np.isfinite(prof.q_std[filled]).all()
    assert np.isnan(prof.q_std[~filled]).all()


def test_profile_divergent_run_marks_nan(dataset, critics):
    prof = diagnostics.distance_profile(dataset, critics, 500, 6,
                                        np.random.default_rng(0), diverged=True,
                                        beta=0.5, target_mode="shared")
    assert np.isnan(prof.q_std).all() and np.isnan(prof.q_min).all()
    assert prof.counts.sum() == 500
    assert prof.diverged and prof.beta == 0.5


def test_profile_budget_validation(dataset, critics):
    with pytest.raises(ConfigError):
        diagnostics.distance_profile(dataset, critics, 5, 10,
                                     np.random.default_rng(0))


def test_profile_csv(tmp_path, dataset, critics):
    prof = diagnostics.distance_profile(dataset, critics, 300, 5,
                                        np.random.default_rng(1))
    path = tmp_path / "prof.csv"
    diagnostics.profile_to_csv(prof, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "bin_lo,bin_hi,count,q_std,q_clip,q_min,q_mean"
    assert len(lines) == 6
    assert sum(int(l.split(",")[2]) for l in lines[1:]) == 300


def test_member_dump(tmp_path, dataset, critics):
    path = tmp_path / "dump.csv"
    diagnostics.member_q_dump(dataset, critics, 50, np.random.default_rng(0), path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "distance," + ",".join(f"q_{i}" for i in range(5))
    assert len(lines) == 51


# -- policy q-min distribution -----------------------------------------------------

def test_qmin_distribution_constant_ensemble(dataset):
    ens = nn.MlpEnsemble.init([4, 6, 1], 3, np.random.default_rng(2))
    for p in ens.params:
        p[...] = 0.0
    ens.params[-1][...] = 2.0  # all members output exactly 2
    summary = diagnostics.policy_qmin_distribution(
        dataset, ens, lambda s: np.zeros((len(s), 2)), 500,
        np.random.default_rng(0))
    assert summary["min"] == summary["max"] == summary["median"] == 1.0


def test_qmin_distribution_scale_invariant(dataset, critics):
    policy = lambda s: np.tanh(s[:, :2])
    s1 = diagnostics.policy_qmin_distribution(dataset, critics, policy, 400,
                                              np.random.default_rng(3))
    critics.params[-2] *= 5.0
    critics.params[-1] *= 5.0
    s2 = diagnostics.policy_qmin_distribution(dataset, critics, policy, 400,
                                              np.random.default_rng(3))
    for key in ("min", "q1", "median", "q3", "max"):
        assert np.isclose(s1[key], s2[key], atol=1e-10)
