import numpy as np
import pytest
from scipy.stats import ks_2samp

from permlab import density, markov, samplers
from permlab.errors import BandTooNarrow, DomainError, InvalidKilledChain
from permlab.rng import substream

FLIP = np.array([[0.0, 1.0], [1.0, 0.0]])


def lt_worst_z(samples, G, lam_rows, alpha=1.0):
    worst = 0.0
    for lam in lam_rows:
        vals = np.exp(-samples @ lam)
        se = vals.std(ddof=1) / np.sqrt(len(vals))
        exact = density.laplace_transform_exact(G, lam, alpha)
        if se > 0:
            worst = max(worst, abs(vals.mean() - exact) / se)
    return worst


def test_psd_sampler_marginal_and_lt():
    g = 1.7
    x = samplers.sample_permanental_psd(np.array([[g]]), 100_000, substream(0, "p"))
    assert x.min() >= 0
    se = x.std(ddof=1) / np.sqrt(len(x))
    assert abs(x.mean() - g) <= 3.5 * se
    G = np.array([[1.0, 0.4], [0.4, 1.2]])
    X = samplers.sample_permanental_psd(G, 100_000, substream(1, "p"))
    assert lt_worst_z(X, G, [np.array([0.5, 0.2]), np.array([1.0, 1.0])]) < 3.5


def test_psd_sampler_requires_spd():
    with pytest.raises(DomainError):
        samplers.sample_permanental_psd(np.array([[1.0, 0.9], [0.1, 1.0]]), 10, substream(2, "p"))
    with pytest.raises(DomainError):
        samplers.sample_permanental_psd(np.array([[1.0, 2.0], [2.0, 1.0]]), 10, substream(3, "p"))


def test_k_permanental_gamma_marginal():
    X = samplers.sample_k_permanental(np.array([[1.0]]), 2, 200_000, substream(4, "k"))
    se_m = X.std(ddof=1) / np.sqrt(len(X))
    assert abs(X.mean() - 2.0) <= 3.5 * se_m
    assert abs(X.var(ddof=1) - 2.0) <= 0.05
    assert lt_worst_z(X, np.array([[1.0]]), [np.array([0.4]), np.array([1.5])], alpha=2) < 3.5


def test_loop_soup_single_state():
    occ = samplers.sample_loop_soup_generator(np.array([[-2.0]]), 200_000, substream(5, "s"))
    se = occ.std(ddof=1) / np.sqrt(len(occ))
    assert abs(occ.mean() - 0.5) <= 3.5 * se


def test_loop_soup_lt_oracle_nonreversible():
    P = np.array([[0, 0.8, 0.2], [0.3, 0, 0.7], [0.5, 0.5, 0]])
    m = markov.MarkovModel.from_transition_matrix(P)
    h = np.array([0.6, 0.9, 0.4])
    G = markov.green_kernel(markov.killed_laplacian(m.Q, h)).G
    X = samplers.sample_loop_soup(m, h, 100_000, substream(6, "s"))
    assert X.min() >= 0
    rows = [np.zeros(3), np.array([0.5, 0, 0]), np.array([0.2, 0.4, 0.8]), np.ones(3)]
    assert lt_worst_z(X, G, rows) < 3.5


def test_loop_soup_agrees_with_gaussian_when_reversible():
    m = markov.MarkovModel.from_transition_matrix(np.array([[0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]]))
    h = np.full(3, 0.7)
    G = markov.green_kernel(markov.killed_laplacian(m.Q, h)).G
    a = samplers.sample_loop_soup(m, h, 50_000, substream(7, "a"))
    b = samplers.sample_permanental_psd(G, 50_000, substream(8, "b"))
    assert max(ks_2samp(a[:, i], b[:, i]).statistic for i in range(3)) < 0.015


def test_loop_soup_rejects_critical_chain():
    # zero killing: jump chain is stochastic, spectral radius 1
    m = markov.MarkovModel.from_transition_matrix(FLIP)
    with pytest.raises(InvalidKilledChain):
        samplers.LoopSoupTables.build(m.Q)


def test_sampler_determinism():
    G = np.array([[1.0, 0.4], [0.4, 1.2]])
    a = samplers.sample_permanental_psd(G, 1000, substream(9, "d"))
    b = samplers.sample_permanental_psd(G, 1000, substream(9, "d"))
    np.testing.assert_array_equal(a, b)
    m = markov.MarkovModel.from_transition_matrix(FLIP)
    h = np.array([0.5, 0.5])
    x = samplers.sample_loop_soup(m, h, 1000, substream(10, "d"))
    y = samplers.sample_loop_soup(m, h, 1000, substream(10, "d"))
    np.testing.assert_array_equal(x, y)


def test_conditioned_chi2_r0_matches_marginal_law():
    G = np.array([[1.0, 0.45, 0.2], [0.45, 1.1, 0.3], [0.2, 0.3, 0.9]])
    Q = -np.linalg.inv(G)
    sub = np.linalg.inv(-Q[1:, 1:])
    a = samplers.sample_conditioned_chi2(G, 0, 0.0, 50_000, substream(11, "c"))
    b = samplers.sample_permanental_psd(sub, 50_000, substream(12, "c"))
    assert max(ks_2samp(a[:, i], b[:, i]).statistic for i in range(2)) < 0.015


def test_conditioned_chi2_agrees_with_band_rejection():
    G = np.array([[1.0, 0.45], [0.45, 1.0]])
    r, band = 0.9, 0.02
    full = samplers.sample_permanental_psd(G, 1_000_000, substream(13, "c"))
    sel = np.abs(full[:, 0] - r) <= band
    cond = samplers.sample_conditioned_chi2(G, 0, r, 50_000, substream(14, "c"))[:, 0]
    assert ks_2samp(full[sel][:, 1], cond).statistic < 0.03


def test_rejection_band_rate_and_support():
    m = markov.MarkovModel.from_transition_matrix(np.array([[0, 0.8, 0.2], [0.3, 0, 0.7], [0.5, 0.5, 0]]))
    X, rate = samplers.sample_conditioned_rejection(m, 0, 1.0, 1.0, 0.05, 10_000, substream(15, "r"))
    predicted = np.exp(-0.95) - np.exp(-1.05)
    assert np.all(np.abs(X[:, 0] - 1.0) <= 0.05)
    assert rate == pytest.approx(predicted, rel=0.1)
    with pytest.raises(BandTooNarrow):
        samplers.sample_conditioned_rejection(
            m, 0, 30.0, 1.0, 1e-4, 100, substream(16, "r"), rate_floor=1e-6, max_proposals=300_000
        )


def test_inverse_local_time():
    m = markov.MarkovModel.from_transition_matrix(FLIP)
    L = samplers.batch_inverse_local_time(m.Q, 0, 0.7, 20_000, substream(17, "i"))
    assert np.all(L[:, 0] == 0.7)
    se = L[:, 1].std(ddof=1) / np.sqrt(len(L))
    assert abs(L[:, 1].mean() - 0.7) <= 3.5 * se
    np.testing.assert_array_equal(
        samplers.batch_inverse_local_time(m.Q, 0, 0.0, 10, substream(18, "i")), np.zeros((10, 2))
    )
    one = samplers.inverse_local_time_field(m, 1, 0.4, substream(19, "i"))
    assert one[1] == 0.4


def test_cover_functionals_flip_chain():
    m = markov.MarkovModel.from_transition_matrix(FLIP)
    out = samplers.batch_cover_functionals(m, 0, 30_000, substream(20, "c"))
    assert abs(out["tau_cov"].mean() - 1.0) < 0.04
    assert abs(out["tau_cov_plus"].mean() - 2.0) < 0.06
    assert np.all(out["tau_cov"] <= out["tau_cov_plus"] + 1e-12)
    assert np.all(out["tau_hit"][:, 0] == 0.0)
    single = samplers.cover_and_hitting_functionals(m, 0, substream(21, "c"))
    assert single["tau_cov"] <= single["tau_cov_plus"]


def test_simulate_ctmc_stop_rules():
    m = markov.MarkovModel.from_transition_matrix(FLIP)
    rng = substream(22, "t")
    tr = samplers.simulate_ctmc(m, 0, ("horizon", 5.0), rng)
    assert tr.terminal == "horizon"
    assert tr.local_time.sum() == pytest.approx(5.0, abs=1e-10)
    tr = samplers.simulate_ctmc(m, 0, ("local_time_at", 0, 0.8), rng)
    assert tr.local_time[0] == pytest.approx(0.8, abs=1e-12)
    tr = samplers.simulate_ctmc(m, 0, ("hit", 1), rng)
    assert tr.states[-1] == 1 and tr.local_time[1] == 0.0
    assert tr.local_time.sum() == pytest.approx(tr.jump_times[-1], abs=1e-10)
    tr = samplers.simulate_ctmc(m, 0, ("covered",), rng)
    assert set(tr.states) == {0, 1}
    tr = samplers.simulate_ctmc(m, 0, ("killed", np.array([1.0, 1.0])), rng)
    assert tr.terminal == "killed"
    assert tr.local_time.sum() > 0


def test_killed_paths_survival_consistency():
    # explicit-cemetery local times reproduce the Green kernel row: the
    # pathwise survival weight e^{-sum h L} is realized by the jumps
    m = markov.MarkovModel.from_transition_matrix(FLIP)
    h = np.array([1.0, 0.5])
    Gh = markov.green_kernel(markov.killed_laplacian(m.Q, h)).G
    out = samplers.batch_local_times_killed(m.Q, h, 0, 200_000, substream(23, "k"))
    means = out["local_times"].mean(axis=0)
    ses = out["local_times"].std(axis=0, ddof=1) / np.sqrt(200_000)
    assert np.all(np.abs(means - Gh[0, :]) <= 4 * ses)


def test_k_permanental_tail_under_envelope():
    G = np.array([[1.0, 0.3], [0.3, 0.8]])
    X = samplers.sample_k_permanental(G, 2, 100_000, substream(24, "e"))
    for t in [np.array([1.0, 1.0]), np.array([2.0, 3.0]), np.array([5.0, 4.0])]:
        hit = np.all(X >= t[None, :], axis=1)
        p = hit.mean()
        se = hit.std(ddof=1) / np.sqrt(len(hit))
        assert p <= density.tail_envelope(G, t, k=2) + 3 * se
