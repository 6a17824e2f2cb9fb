"""Catalog of test functions for verification experiments.

Each entry is vectorized over rows of an (m, n) array of nonnegative
vectors and carries the metadata the comparison machinery needs: a growth
class (what it may be integrated against) and the signs, where constant,
of the quantities

    diag condition    d_i f + l_i d_ii f        (per coordinate),
    k-fold variant    k d_i f + l_i d_ii f,
    mixed partials    d_ij f   (i != j).

Sign declarations are verified numerically by `check_sign_declarations`,
which evaluates the analytic derivative formulas on a sample of points;
monotone-comparison preconditions are enforced against these declared
signs rather than by Monte Carlo.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "TestFunction",
    "const_one",
    "exp_linear",
    "poly",
    "smoothstep_product",
    "log_barrier_sign_pattern",
    "check_sign_declarations",
    "catalog_for_dim",
]


@dataclass(frozen=True)
class TestFunction:
    name: str
    kind: str
    n: int
    growth: str  # 'bounded' | 'polynomial' | 'exponential'
    fn: callable
    diag_condition: callable | None = None  # (m, n) -> (m, n) values of d_i f + l_i d_ii f
    mixed_partial: callable | None = None  # (m, n), i, j -> (m,)
    grad: callable | None = None  # (m, n) -> (m, n)
    diag_sign: int | None = None  # +1 / -1 / 0 when constant over the orthant, else None
    offdiag_sign: int | None = None
    params: dict = field(default_factory=dict)

    def __call__(self, L) -> np.ndarray:
        L = np.atleast_2d(np.asarray(L, dtype=float))
        if L.shape[1] != self.n:
            raise DomainError(f"{self.name} expects vectors of length {self.n}")
        return self.fn(L)

    def kdiag_sign(self, k: int) -> int | None:
        """Sign of k d_i f + l_i d_ii f when constant; None when indefinite.

        For the shipped catalog the k-fold condition has the same constant
        sign as the k = 1 condition whenever that one is constant.
        """
        return self.diag_sign


def const_one(n: int) -> TestFunction:
    return TestFunction(
        name="one",
        kind="const",
        n=n,
        growth="bounded",
        fn=lambda L: np.ones(L.shape[0]),
        diag_condition=lambda L: np.zeros_like(L),
        mixed_partial=lambda L, i, j: np.zeros(L.shape[0]),
        grad=lambda L: np.zeros_like(L),
        diag_sign=0,
        offdiag_sign=0,
    )


def exp_linear(lam) -> TestFunction:
    """u(l) = exp(-<lam, l>) with lam >= 0; bounded, mixed partials >= 0."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise DomainError("exp_linear needs nonnegative rates")
    n = lam.size

    def f(L):
        return np.exp(-L @ lam)

    return TestFunction(
        name=f"exp_linear({np.array2string(lam, precision=3)})",
        kind="exp_linear",
        n=n,
        growth="bounded",
        fn=f,
        diag_condition=lambda L: f(L)[:, None] * (-lam[None, :] + L * lam[None, :] ** 2),
        mixed_partial=lambda L, i, j: lam[i] * lam[j] * f(L),
        grad=lambda L: -lam[None, :] * f(L)[:, None],
        diag_sign=None,
        offdiag_sign=+1,
        params={"lam": lam.tolist()},
    )


def poly(terms, n: int) -> TestFunction:
    """Polynomial sum of c * prod l_i^(p_i) with c >= 0 and total degree <= 4.

    Nonnegative coefficients make every partial derivative nonnegative on
    the orthant, so both monotone conditions hold with the + sign.
    """
    terms = [(float(c), tuple(int(p) for p in pw)) for c, pw in terms]
    for c, pw in terms:
        if c < 0:
            raise DomainError("poly catalog entries need nonnegative coefficients")
        if len(pw) != n or any(p < 0 for p in pw) or sum(pw) > 4:
            raise DomainError("poly terms must have nonnegative powers with total degree <= 4")

    def mono(L, pw):
        out = np.ones(L.shape[0])
        for i, p in enumerate(pw):
            if p:
                out = out * L[:, i] ** p
        return out

    def f(L):
        return sum(c * mono(L, pw) for c, pw in terms)

    def d1(L, i):
        out = np.zeros(L.shape[0])
        for c, pw in terms:
            if pw[i]:
                q = list(pw)
                q[i] -= 1
                out += c * pw[i] * mono(L, tuple(q))
        return out

    def d2(L, i, j):
        out = np.zeros(L.shape[0])
        for c, pw in terms:
            q = list(pw)
            q[i] -= 1
            if q[i] < 0:
                continue
            cij = c * pw[i]
            q[j] -= 1
            if q[j] < 0:
                continue
            cij *= q[j] + 1
            out += cij * mono(L, tuple(q))
        return out

    return TestFunction(
        name=f"poly[{len(terms)} terms]",
        kind="poly",
        n=n,
        growth="polynomial",
        fn=f,
        diag_condition=lambda L: np.stack(
            [d1(L, i) + L[:, i] * d2(L, i, i) for i in range(n)], axis=1
        ),
        mixed_partial=d2,
        grad=lambda L: np.stack([d1(L, i) for i in range(n)], axis=1),
        diag_sign=+1,
        offdiag_sign=+1,
        params={"terms": [[c, list(pw)] for c, pw in terms]},
    )


def _quintic_step(x, eps):
    """Decreasing C^2 cutoff: 1 below 0, 0 above eps."""
    t = np.clip(x / eps, 0.0, 1.0)
    return np.where(x < 0, 1.0, np.where(x >= eps, 0.0, 1.0 - (6 * t**5 - 15 * t**4 + 10 * t**3)))


def _quintic_step_d1(x, eps):
    t = np.clip(x / eps, 0.0, 1.0)
    inside = (x >= 0) & (x < eps)
    return np.where(inside, -(30 * t**4 - 60 * t**3 + 30 * t**2) / eps, 0.0)


def _quintic_step_d2(x, eps):
    t = np.clip(x / eps, 0.0, 1.0)
    inside = (x >= 0) & (x < eps)
    return np.where(inside, -(120 * t**3 - 180 * t**2 + 60 * t) / eps**2, 0.0)


def smoothstep_product(s, eps: float) -> TestFunction:
    """f(l) = prod_i g((l_i - s_i)) with the decreasing quintic cutoff g.

    Smoothly approximates the orthant indicator 1{l <= s}: bounded,
    coordinatewise nonincreasing, mixed partials nonnegative.  The diagonal
    condition changes sign, so this entry only combines with families whose
    kernel diagonals are constant.
    """
    s = np.asarray(s, dtype=float)
    if eps <= 0:
        raise DomainError("smoothstep width must be positive")
    n = s.size

    def parts(L):
        x = L - s[None, :]
        return _quintic_step(x, eps), _quintic_step_d1(x, eps), _quintic_step_d2(x, eps)

    def f(L):
        g, _, _ = parts(L)
        return np.prod(g, axis=1)

    def others(g, i):
        out = np.prod(np.delete(g, i, axis=1), axis=1)
        return out

    def diag_cond(L):
        g, g1, g2 = parts(L)
        cols = []
        for i in range(n):
            rest = others(g, i)
            cols.append((g1[:, i] + L[:, i] * g2[:, i]) * rest)
        return np.stack(cols, axis=1)

    def mixed(L, i, j):
        g, g1, _ = parts(L)
        rest = np.prod(np.delete(g, [i, j], axis=1), axis=1)
        return g1[:, i] * g1[:, j] * rest

    def grad(L):
        g, g1, _ = parts(L)
        return np.stack([g1[:, i] * others(g, i) for i in range(n)], axis=1)

    return TestFunction(
        name=f"smoothstep(s={np.array2string(s, precision=3)}, eps={eps:g})",
        kind="smoothstep_product",
        n=n,
        growth="bounded",
        fn=f,
        diag_condition=diag_cond,
        mixed_partial=mixed,
        grad=grad,
        diag_sign=None,
        offdiag_sign=+1,
        params={"s": s.tolist(), "eps": eps},
    )


def log_barrier_sign_pattern(signs) -> TestFunction:
    """Barrier realizing an arbitrary sign pattern for the monotone conditions.

    f(l) = sum_{i != j} -s_ij log(1 + l_i + l_j) + sum_i s_ii 2n e^{l_i};
    the diagonal condition has the sign of s_ii and the mixed partial the
    sign of s_ij everywhere on the orthant.  Growth is exponential, so the
    entry is for symbolic sign checks only, never for sampling.
    """
    S = np.asarray(signs, dtype=int)
    n = S.shape[0]
    if S.shape != (n, n) or not np.all(np.abs(S) == 1):
        raise DomainError("sign pattern must be a square matrix of +-1")

    def f(L):
        out = np.zeros(L.shape[0])
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                out -= S[i, j] * np.log(1.0 + L[:, i] + L[:, j])
        out += (2.0 * n) * (np.exp(L) * np.diag(S)[None, :]).sum(axis=1)
        return out

    def diag_cond(L):
        cols = []
        for i in range(n):
            acc = 2.0 * n * S[i, i] * np.exp(L[:, i]) * (1.0 + L[:, i])
            for j in range(n):
                if j == i:
                    continue
                den = 1.0 + L[:, i] + L[:, j]
                acc += -S[i, j] / den + S[i, j] * L[:, i] / den**2
            cols.append(acc)
        return np.stack(cols, axis=1)

    def mixed(L, i, j):
        return S[i, j] / (1.0 + L[:, i] + L[:, j]) ** 2

    return TestFunction(
        name="log_barrier",
        kind="log_barrier_sign_pattern",
        n=n,
        growth="exponential",
        fn=f,
        diag_condition=diag_cond,
        mixed_partial=mixed,
        diag_sign=None,  # per-coordinate signs prescribed by S, not one constant
        offdiag_sign=None,
        params={"signs": S.tolist()},
    )


def check_sign_declarations(f: TestFunction, points, k: int = 1) -> bool:
    """Verify declared condition signs on a sample of orthant points."""
    L = np.atleast_2d(np.asarray(points, dtype=float))
    ok = True
    if f.diag_sign is not None and f.diag_condition is not None:
        vals = f.diag_condition(L)
        if k != 1 and f.grad is not None:
            vals = vals + (k - 1) * f.grad(L)
        if f.diag_sign > 0:
            ok &= bool(np.all(vals >= -1e-12))
        elif f.diag_sign < 0:
            ok &= bool(np.all(vals <= 1e-12))
        else:
            ok &= bool(np.all(np.abs(vals) <= 1e-12))
    if f.offdiag_sign is not None and f.mixed_partial is not None:
        for i in range(f.n):
            for j in range(f.n):
                if i == j:
                    continue
                vals = f.mixed_partial(L, i, j)
                if f.offdiag_sign > 0:
                    ok &= bool(np.all(vals >= -1e-12))
                elif f.offdiag_sign < 0:
                    ok &= bool(np.all(vals <= 1e-12))
                else:
                    ok &= bool(np.all(np.abs(vals) <= 1e-12))
    return ok


def catalog_for_dim(n: int) -> list:
    """Default shipped catalog at dimension n."""
    lam = 0.5 + 0.25 * np.arange(n)
    entries = [
        const_one(n),
        exp_linear(lam),
        poly([(1.0, tuple(1 if i == 0 else 0 for i in range(n)))], n),
        poly([(1.0, tuple([1] * min(n, 2) + [0] * max(n - 2, 0)))], n),
        smoothstep_product(np.linspace(1.0, 2.0, n), 0.5),
    ]
    return entries
