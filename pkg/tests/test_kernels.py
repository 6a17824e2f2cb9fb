import numpy as np
import pytest

from permlab import kernels
from permlab.errors import DomainError, InvalidKernel


def random_pd_sym_part(rng, n, skew_scale=1.0):
    A = rng.standard_normal((n, n))
    spd = A @ A.T + n * np.eye(n)
    K = rng.standard_normal((n, n))
    return spd + skew_scale * (K - K.T)


def test_symmetric_part_examples():
    np.testing.assert_allclose(kernels.symmetric_part([[1, 2], [0, 1]]), [[1, 1], [1, 1]])
    S = np.array([[2.0, 0.5], [0.5, 1.0]])
    np.testing.assert_array_equal(kernels.symmetric_part(S), S)


def test_symmetric_part_matches_independent_loop():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((5, 5))
    S = kernels.symmetric_part(M)
    for i in range(5):
        for j in range(5):
            assert S[i, j] == pytest.approx((M[i, j] + M[j, i]) / 2, abs=0)
    assert np.array_equal(S, S.T)


def test_has_pd_symmetric_part():
    ok, lam = kernels.has_pd_symmetric_part(np.eye(3))
    assert ok and lam == pytest.approx(1.0)
    ok, lam = kernels.has_pd_symmetric_part([[0, 1], [-1, 0]])
    assert not ok and lam == pytest.approx(0.0, abs=1e-12)
    ok, lam = kernels.has_pd_symmetric_part([[1, 1], [-1, 1]])
    assert ok and lam == pytest.approx(1.0)
    with pytest.raises(DomainError):
        kernels.has_pd_symmetric_part(np.eye(2), tol=0.0)


def test_pd_sym_part_implies_invertible():
    rng = np.random.default_rng(1)
    for _ in range(50):
        M = random_pd_sym_part(rng, 4, skew_scale=3.0)
        ok, _ = kernels.has_pd_symmetric_part(M)
        assert ok
        x = np.linalg.solve(M, np.ones(4))
        assert np.all(np.isfinite(x))


def test_is_m_matrix():
    assert kernels.is_m_matrix(np.eye(3))
    assert not kernels.is_m_matrix([[1, 2], [2, 1]])
    A = np.array([[2.0, -1.0], [-1.0, 2.0]])
    assert kernels.is_m_matrix(A)
    np.testing.assert_allclose(np.linalg.inv(A), np.array([[2, 1], [1, 2]]) / 3.0)
    assert not kernels.is_m_matrix([[1.0, -1.0], [-1.0, 1.0]])  # singular


def test_is_inverse_m_matrix():
    assert kernels.is_inverse_m_matrix(np.eye(2))
    assert kernels.is_inverse_m_matrix(np.array([[2, 1], [1, 2]]) / 3.0)
    assert not kernels.is_inverse_m_matrix([[1, -0.5], [-0.5, 1]])
    assert not kernels.is_inverse_m_matrix(np.zeros((2, 2)))


def test_m_matrix_inverse_duality():
    rng = np.random.default_rng(2)
    for _ in range(25):
        B = rng.random((4, 4))
        A = (kernels.spectral_radius(B) + rng.random() + 0.1) * np.eye(4) - B
        assert kernels.is_m_matrix(A)
        assert kernels.is_inverse_m_matrix(np.linalg.inv(A))


def test_spectral_radius():
    assert kernels.spectral_radius(np.eye(4)) == pytest.approx(1.0)
    assert kernels.spectral_radius([[0, 1], [0, 0]]) == pytest.approx(0.0, abs=1e-12)
    rng = np.random.default_rng(3)
    P = rng.random((5, 5))
    P /= P.sum(axis=1, keepdims=True)
    assert kernels.spectral_radius(P) == pytest.approx(1.0, abs=1e-10)


def test_diagonal_dominance():
    d = kernels.diagonal_dominance([[2, -1], [-1, 2]])
    assert (d.rows, d.columns) == ("strict", "strict")
    assert d.summary() == ("strict", "both")
    d = kernels.diagonal_dominance([[1, -1], [-1, 1]])
    assert d.summary() == ("weak", "both")
    d = kernels.diagonal_dominance([[1, -2], [0, 1]])
    assert d.rows == "none" and d.columns == "none"


def test_gamma_symmetrization():
    S = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert kernels.gamma_symmetrization(S) == pytest.approx(1.0)
    assert kernels.gamma_symmetrization([[1, 1], [-1, 1]]) == pytest.approx(2.0)
    rng = np.random.default_rng(4)
    for _ in range(50):
        G = random_pd_sym_part(rng, 4, skew_scale=2.0)
        assert kernels.gamma_symmetrization(G) >= 1.0 - 1e-9
    with pytest.raises(InvalidKernel):
        kernels.gamma_symmetrization([[0, 1], [-1, 0]])


def test_inverse_keeps_pd_sym_part():
    assert kernels.check_inverse_pd_sym(np.eye(3))
    assert kernels.check_inverse_pd_sym([[1, 1], [-1, 1]])
    rng = np.random.default_rng(5)
    for _ in range(100):
        G = random_pd_sym_part(rng, 5, skew_scale=rng.random() * 4)
        assert kernels.check_inverse_pd_sym(G)


def test_find_pd_equivalent_scaling_heuristic():
    A = np.array([[1.0, 0.0], [-10.0, 1.0]])
    assert not kernels.has_pd_symmetric_part(A)[0]
    sc = kernels.find_pd_equivalent_scaling(A)
    assert sc is not None
    assert kernels.has_pd_symmetric_part(sc.apply(A))[0]


def test_find_pd_equivalent_scaling_identity_when_already_pd():
    A = np.array([[2.0, -0.5], [-0.5, 2.0]])
    sc = kernels.find_pd_equivalent_scaling(A)
    np.testing.assert_allclose(sc.d, np.ones(2))


def test_find_pd_equivalent_scaling_never_uncertified():
    # not an M-matrix: every diagonal similarity keeps an indefinite symmetric part
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert kernels.find_pd_equivalent_scaling(A, max_iter=40, n_restarts=2) is None
    rng = np.random.default_rng(6)
    for _ in range(10):
        B = rng.random((3, 3))
        A = (kernels.spectral_radius(B) + 0.2) * np.eye(3) - B
        sc = kernels.find_pd_equivalent_scaling(A)
        if sc is not None:
            assert kernels.has_pd_symmetric_part(sc.apply(A))[0]


def test_strict_dominance_m_pattern_implies_pd_sym():
    rng = np.random.default_rng(7)
    for _ in range(25):
        B = rng.random((4, 4))
        np.fill_diagonal(B, 0.0)
        A = -B
        margin = 0.05 + rng.random()
        np.fill_diagonal(A, np.maximum(B.sum(axis=0), B.sum(axis=1)) + margin)
        d = kernels.diagonal_dominance(A)
        assert d.summary() == ("strict", "both")
        assert kernels.has_pd_symmetric_part(A)[0]


def test_classify_kernel_families():
    rep = kernels.classify_kernel(np.array([[2, 1], [1, 2]]) / 3.0)
    assert rep.is_inverse_m_matrix and rep.has_pd_sym_part
    assert rep.certified_family == "psd_symmetric"  # symmetric wins
    rep = kernels.classify_kernel(np.array([[1.0, 0.9], [0.1, 1.0]]))
    assert rep.certified_family == "inverse_m"
    rep = kernels.classify_kernel(np.array([[1.0, -0.5], [-0.5, 1.0]]))
    assert rep.certified_family == "psd_symmetric"
    assert rep.gamma == pytest.approx(1.0)
    d = rep.to_dict()
    assert d["diag_dominance"]["scope"] == "both"
