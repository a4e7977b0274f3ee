"""Single-subnetwork machinery against closed forms and enumeration oracles."""

import math

import numpy as np
import pytest

from mnsbm import kernels
from mnsbm.sbm_kernel import (
    MH_SIGMA,
    Assignment,
    BlockStats,
    Hyperparams,
    block_stats,
    collapsed_log_likelihood,
    crp_log_density,
    gibbs_sweep_z,
    mh_log_ratio,
    mh_three_moves,
    mh_update_hyperparams,
    sample_crp,
    sample_eta,
)

import oracles

BACKENDS = [kernels.select_backend(name) for name in kernels.available_backends()]
IDS = [k.NAME for k in BACKENDS]


def assignment(labels):
    return Assignment.from_labels(labels)


# ---------------------------------------------------------------- CRP prior

def test_crp_closed_forms():
    # n=2: both partitions have probability 1/2 at alpha=1
    assert crp_log_density(assignment([0, 0]), 1.0) == pytest.approx(math.log(0.5), abs=1e-12)
    assert crp_log_density(assignment([0, 1]), 1.0) == pytest.approx(math.log(0.5), abs=1e-12)
    # n=1: the only partition has probability 1
    for alpha in (0.3, 1.0, 7.5):
        assert crp_log_density(assignment([0]), alpha) == pytest.approx(0.0, abs=1e-12)


def test_crp_rejects_bad_alpha():
    with pytest.raises(ValueError):
        crp_log_density(assignment([0, 0]), 0.0)
    with pytest.raises(ValueError):
        sample_crp(3, -1.0, np.random.default_rng(0))


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.3])
def test_crp_normalizes_over_all_partitions(alpha):
    for n in range(1, 7):
        total = sum(math.exp(crp_log_density(assignment(p), alpha))
                    for p in oracles.set_partitions(n))
        assert abs(total - 1.0) < 1e-10, (n, alpha)


def test_crp_density_matches_independent_formula(rng):
    for _ in range(50):
        n = int(rng.integers(2, 9))
        labels = oracles.partition_key(rng.integers(0, 4, size=n).tolist())
        alpha = float(rng.uniform(0.1, 5.0))
        ref = oracles.crp_log_pmf(labels, alpha)
        assert crp_log_density(assignment(labels), alpha) == pytest.approx(ref, rel=1e-12)


def test_sample_crp_n1_is_always_one_block(rng):
    for _ in range(10):
        a = sample_crp(1, 0.7, rng)
        assert a.L == 1 and a.z.tolist() == [0]


def test_sample_crp_n2_same_block_frequency(rng):
    draws = 100_000
    same = sum(sample_crp(2, 1.0, rng).L == 1 for _ in range(draws))
    se = math.sqrt(0.25 / draws)
    assert abs(same / draws - 0.5) < 3 * se


def test_sample_crp_n4_matches_enumeration_chi2(rng):
    # all 15 partitions of 4 elements against exp(crp_log_density)
    alpha = 0.5
    parts = oracles.set_partitions(4)
    probs = {p: math.exp(crp_log_density(assignment(p), alpha)) for p in parts}
    draws = 1_000_000
    counts = dict.fromkeys(parts, 0)
    for _ in range(draws):
        counts[tuple(sample_crp(4, alpha, rng).z.tolist())] += 1
    chi2 = sum((counts[p] - draws * probs[p]) ** 2 / (draws * probs[p]) for p in parts)
    # 99.9th percentile of chi-square with 14 degrees of freedom
    assert chi2 < 36.12


# ------------------------------------------------------ sufficient statistics

def test_block_stats_single_block():
    s = block_stats(assignment([0, 0, 0]), [(0, 1), (0, 2), (1, 2)], [2, 0, 1])
    assert s.N.tolist() == [[3]]
    assert s.M.tolist() == [[3]]


def test_block_stats_two_blocks():
    z = assignment([0, 1, 1])
    s = block_stats(z, [(0, 1), (0, 2), (1, 2)], [2, 0, 1])
    assert s.N.tolist() == [[0, 2], [2, 1]]
    assert s.M.tolist() == [[0, 2], [2, 1]]


def test_block_stats_omits_unlisted_dyads():
    z = assignment([0, 1, 1])
    full = block_stats(z, [(0, 1), (0, 2), (1, 2)], [2, 0, 1])
    part = block_stats(z, [(0, 2), (1, 2)], [0, 1])
    assert full.M[0, 1] - part.M[0, 1] == 1
    assert full.N[0, 1] - part.N[0, 1] == 2


def test_block_stats_validation():
    with pytest.raises(ValueError):
        BlockStats(N=np.array([[1, 2], [3, 4]]), M=np.zeros((2, 2), dtype=int))
    with pytest.raises(ValueError):
        BlockStats(N=-np.ones((1, 1), dtype=int), M=np.ones((1, 1), dtype=int))


# ------------------------------------------------- collapsed marginal

def test_collapsed_closed_forms():
    z = assignment([0, 0])
    for count, expect in ((0, 0.5), (1, 0.25)):
        s = block_stats(z, [(0, 1)], [count])
        got = collapsed_log_likelihood(s, [count], 1.0, 1.0)
        assert got == pytest.approx(math.log(expect), abs=1e-12)


def test_collapsed_rejects_bad_hyperparams():
    s = block_stats(assignment([0, 0]), [(0, 1)], [1])
    with pytest.raises(ValueError):
        collapsed_log_likelihood(s, [1], 0.0, 1.0)
    with pytest.raises(ValueError):
        collapsed_log_likelihood(s, [1], 1.0, -1.0)


@pytest.mark.parametrize("kern", BACKENDS, ids=IDS)
def test_collapsed_matches_quadrature_on_random_4v_instances(kern, rng):
    dyads = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    for _ in range(12):
        labels = oracles.partition_key(rng.integers(0, 3, size=4).tolist())
        counts = rng.integers(0, 5, size=6).tolist()
        kappa = float(rng.uniform(1.0, 3.0))
        lam = float(rng.uniform(0.5, 3.0))
        z = assignment(labels)
        s = block_stats(z, dyads, counts)
        got = collapsed_log_likelihood(s, counts, kappa, lam, kern=kern)
        by_dyad = dict(zip(dyads, counts))
        ref = oracles.quad_collapsed_loglik(labels, by_dyad, kappa, lam)
        assert abs(got - ref) <= 1e-6 * max(1.0, abs(ref))


# ------------------------------------------------------------- eta draws

def test_sample_eta_posterior_mean(rng):
    s = BlockStats(N=np.array([[3]]), M=np.array([[4]]))
    draws = np.array([sample_eta(s, 1.0, 1.0, rng)[0, 0] for _ in range(100_000)])
    mean = 4.0 / 5.0
    var = 4.0 / 25.0
    assert abs(draws.mean() - mean) < 3 * math.sqrt(var / draws.size)


def test_sample_eta_no_data_is_the_prior(rng):
    s = BlockStats(N=np.zeros((1, 1), dtype=int), M=np.zeros((1, 1), dtype=int))
    draws = np.array([sample_eta(s, 2.0, 4.0, rng)[0, 0] for _ in range(100_000)])
    assert abs(draws.mean() - 0.5) < 3 * math.sqrt(2.0 / 16.0 / draws.size)


def test_sample_eta_deterministic_and_symmetric():
    s = BlockStats(N=np.array([[3, 1], [1, 0]]), M=np.array([[4, 6], [6, 2]]))
    a = sample_eta(s, 1.0, 1.0, np.random.default_rng(5))
    b = sample_eta(s, 1.0, 1.0, np.random.default_rng(5))
    assert np.array_equal(a, b)
    assert np.array_equal(a, a.T)
    assert (a > 0).all()


# ------------------------------------------------------------------ MH moves

def test_mh_log_ratio_antisymmetric(rng):
    for _ in range(100):
        ta, tb = rng.normal(size=2) * 50
        a, b = np.exp(rng.normal(size=2))
        assert mh_log_ratio(ta, tb, a, b) + mh_log_ratio(tb, ta, b, a) == 0.0


def test_mh_three_moves_replays_its_draw_schedule():
    # each coordinate consumes exactly one normal and one uniform, in order
    kern = kernels.get_backend()
    n_l = np.array([2, 3], dtype=np.int64)
    N = np.array([[4, 1], [1, 2]], dtype=np.int64)
    M = np.array([[1, 6], [6, 3]], dtype=np.int64)
    hp = Hyperparams(1.3, 0.8, 2.2)
    got = mh_three_moves(5, n_l, N, M, hp, np.random.default_rng(77), kern)

    from mnsbm.sbm_kernel import _crp_core, pair_term_sum

    g = np.random.default_rng(77)
    lg = kern.lgamma
    state = [hp.alpha, hp.kappa, hp.lambda_rate]

    def target(idx, val):
        a, k, lam = (val if i == idx else state[i] for i in range(3))
        if idx == 0:
            core = _crp_core(5, n_l, a, lg)
        else:
            core = pair_term_sum(N, M, k, lam, lg)
        return core + math.log(val) - val

    for idx in range(3):
        xi = kern.std_normal(g)
        u = g.random()
        prop = state[idx] * math.exp(MH_SIGMA * xi)
        ratio = mh_log_ratio(target(idx, state[idx]), target(idx, prop),
                             state[idx], prop)
        if math.log(max(u, 1.1102230246251565e-16)) < ratio:
            state[idx] = prop
    assert (got.alpha, got.kappa, got.lambda_rate) == tuple(state)


def test_mh_flat_likelihood_recovers_the_prior():
    # n=1: CRP and pair terms are constant, so every coordinate samples its
    # Gamma(2, 1) prior; check the alpha chain's mean by batch means
    kern = kernels.get_backend()
    n_l = np.array([1], dtype=np.int64)
    N = np.zeros((1, 1), dtype=np.int64)
    M = np.zeros((1, 1), dtype=np.int64)
    g = np.random.default_rng(2024)
    hp = Hyperparams(2.0, 2.0, 2.0)
    n_batches, batch_len = 30, 8000
    means = []
    for _ in range(n_batches):
        acc = 0.0
        for _ in range(batch_len):
            hp = mh_three_moves(1, n_l, N, M, hp, g, kern)
            acc += hp.alpha
        means.append(acc / batch_len)
    grand = float(np.mean(means))
    se = float(np.std(means, ddof=1)) / math.sqrt(n_batches)
    assert abs(grand - 2.0) < 3 * se


def test_mh_update_hyperparams_wrapper(rng):
    z = assignment([0, 0, 1])
    s = block_stats(z, [(0, 1), (0, 2), (1, 2)], [2, 1, 0])
    hp = Hyperparams(1.0, 1.0, 1.0)
    out = mh_update_hyperparams(hp, z, s, [2, 1, 0], rng)
    assert out.alpha > 0 and out.kappa > 0 and out.lambda_rate > 0


# ------------------------------------------------------------ Gibbs sweeps

def test_gibbs_sweep_n1_is_trivial(rng):
    z = assignment([0])
    out, stats = gibbs_sweep_z(z, [], [], Hyperparams(1.0, 1.0, 1.0), rng)
    assert out.z.tolist() == [0] and out.L == 1
    assert stats.N.shape == (1, 1) and stats.M[0, 0] == 0


@pytest.mark.parametrize("kern", BACKENDS, ids=IDS)
def test_gibbs_sweep_stats_consistency(kern, rng):
    # incremental stats after a sweep equal a from-scratch recount
    n = 9
    dyads = [(i, j) for i in range(n) for j in range(i + 1, n)]
    keep = rng.random(len(dyads)) < 0.5
    train = [d for d, k in zip(dyads, keep) if k]
    rest = [d for d in dyads if d not in set(train)]
    ho = rest[::3]
    counts = rng.integers(1, 4, size=len(train)).tolist()
    ho_counts = rng.integers(0, 3, size=len(ho)).tolist()
    z = sample_crp(n, 1.0, rng)
    hp = Hyperparams(1.0, 2.0, 2.0)
    for _ in range(5):
        z, stats = gibbs_sweep_z(z, train, counts, hp, rng, kern=kern,
                                 heldout_dyads=ho, heldout_counts=ho_counts)
        # labels compacted: Assignment construction validates occupancy
        assert sorted(set(z.z.tolist())) == list(range(z.L))
        ref_n = np.zeros((z.L, z.L), dtype=np.int64)
        for (i, j), c in list(zip(train, counts)) + list(zip(ho, ho_counts)):
            a, b = sorted((z.z[i], z.z[j]))
            ref_n[a, b] += c
            if a != b:
                ref_n[b, a] += c
        assert np.array_equal(stats.N, ref_n)
        occ = z.n_l
        ref_m = np.outer(occ, occ)
        np.fill_diagonal(ref_m, occ * (occ - 1) // 2)
        assert np.array_equal(stats.M, ref_m)


def test_gibbs_sweep_rejects_inconsistent_input(rng):
    z = assignment([0, 0, 0])
    hp = Hyperparams(1.0, 1.0, 1.0)
    with pytest.raises(ValueError, match="align"):
        gibbs_sweep_z(z, [(0, 1)], [1, 2], hp, rng)
    with pytest.raises(ValueError, match="duplicate"):
        gibbs_sweep_z(z, [(0, 1), (0, 1)], [1, 2], hp, rng)
    with pytest.raises(ValueError, match="also observed"):
        gibbs_sweep_z(z, [(0, 1)], [1], hp, rng,
                      heldout_dyads=[(0, 1)], heldout_counts=[0])


@pytest.mark.parametrize("kern", BACKENDS, ids=IDS)
def test_gibbs_sweep_matches_enumerated_posterior_fixed_counts(kern):
    # stationary law of the z sweep at frozen counts, against enumeration
    n = 4
    dyads = [(i, j) for i in range(n) for j in range(i + 1, n)]
    counts = [2, 0, 0, 1, 0, 3]
    alpha, kappa, lam = 1.0, 2.0, 1.5
    hp = Hyperparams(alpha, kappa, lam)
    ref = oracles.collapsed_posterior_fixed_counts(
        n, dict(zip(dyads, counts)), alpha, kappa, lam)

    g = np.random.default_rng(99)
    z = sample_crp(n, alpha, g)
    for _ in range(500):
        z, _ = gibbs_sweep_z(z, dyads, counts, hp, g, kern=kern)
    keys = []
    for _ in range(40_000):
        z, _ = gibbs_sweep_z(z, dyads, counts, hp, g, kern=kern)
        keys.append(oracles.partition_key(z.z.tolist()))
    dist = oracles.tv(oracles.empirical(keys), ref)
    assert dist < 0.02, dist
