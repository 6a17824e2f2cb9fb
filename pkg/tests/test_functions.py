import numpy as np
import pytest

from permlab import functions
from permlab.errors import DomainError


def orthant_points(n, m=200, seed=0):
    return np.random.default_rng(seed).exponential(1.0, size=(m, n))


def test_const_one():
    f = functions.const_one(3)
    assert np.all(f(orthant_points(3)) == 1.0)
    assert functions.check_sign_declarations(f, orthant_points(3))


def test_exp_linear_values_and_signs():
    lam = np.array([0.5, 1.0])
    f = functions.exp_linear(lam)
    L = orthant_points(2)
    np.testing.assert_allclose(f(L), np.exp(-L @ lam))
    assert f.offdiag_sign == +1 and f.diag_sign is None
    assert functions.check_sign_declarations(f, L)
    # finite-difference check of the mixed partial
    e = 1e-5
    base = np.array([[0.7, 0.9]])
    fd = (
        f(base + [[e, e]]) - f(base + [[e, 0]]) - f(base + [[0, e]]) + f(base)
    ) / e**2
    assert fd[0] == pytest.approx(f.mixed_partial(base, 0, 1)[0], rel=1e-3)


def test_poly_signs_and_growth():
    f = functions.poly([(1.0, (1, 0, 0)), (0.5, (0, 1, 1)), (0.2, (2, 1, 1))], 3)
    L = orthant_points(3)
    assert f.diag_sign == +1 and f.offdiag_sign == +1
    assert functions.check_sign_declarations(f, L)
    assert functions.check_sign_declarations(f, L, k=2)
    with pytest.raises(DomainError):
        functions.poly([(-1.0, (1, 0, 0))], 3)
    with pytest.raises(DomainError):
        functions.poly([(1.0, (3, 1, 1))], 3)  # degree 5


def test_smoothstep_shape_and_signs():
    f = functions.smoothstep_product(np.array([1.0, 1.5]), 0.5)
    low = f(np.array([[0.5, 1.0]]))[0]
    high = f(np.array([[2.0, 3.0]]))[0]
    assert low == 1.0 and high == 0.0
    mid = f(np.array([[1.25, 1.6]]))[0]
    assert 0.0 < mid < 1.0
    assert functions.check_sign_declarations(f, orthant_points(2))
    # gradient is nonpositive coordinatewise
    g = f.grad(orthant_points(2))
    assert np.all(g <= 1e-12)


def test_log_barrier_sign_pattern():
    S = np.array([[1, -1], [1, -1]])
    f = functions.log_barrier_sign_pattern(S)
    L = orthant_points(2)
    dc = f.diag_condition(L)
    assert np.all(S[0, 0] * dc[:, 0] > 0)
    assert np.all(S[1, 1] * dc[:, 1] > 0)
    assert np.all(S[0, 1] * f.mixed_partial(L, 0, 1) > 0)
    assert np.all(S[1, 0] * f.mixed_partial(L, 1, 0) > 0)
    assert f.growth == "exponential"


def test_catalog_for_dim():
    cat = functions.catalog_for_dim(3)
    assert any(f.kind == "exp_linear" for f in cat)
    pts = orthant_points(3)
    for f in cat:
        assert functions.check_sign_declarations(f, pts)
