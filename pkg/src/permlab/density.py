"""Densities, Laplace transforms, and phase-weighted integrals of permanental vectors.

A nonnegative random vector ``l`` is 1-permanental with kernel G when
``E exp(-<lam, l>) = det(I + diag(lam) G)^{-1}``.  Whenever G has a positive
definite symmetric part the density exists as an absolutely convergent
oscillatory integral over the torus,

    rho(l) = (2 pi)^{-n} det(G)^{-1} *
             Integral exp( sum_{ij} Q_ij sqrt(l_i l_j) e^{i(th_i - th_j)} ) dth,

with Q = -G^{-1}.  The integrand only depends on angle differences, so one
angle can be pinned at zero ("rotation reduction") at no cost in accuracy.
This module evaluates that integral by tensor-product trapezoid rules
(spectrally accurate for smooth periodic integrands), evaluates an
independent nonnegative series expansion available for inverse-M kernels,
and estimates expectations against the complex phase measure
``exp(<phi, Q phibar>)`` by importance sampling with unit-modulus weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammainc, gammaln

from . import kernels
from .errors import CostGuardExceeded, DomainError, InvalidKernel
from .estimates import MCEstimate

__all__ = [
    "AngularGrid",
    "DensityEvaluation",
    "SeriesTruncation",
    "density_quadrature",
    "density_series",
    "conditioned_density",
    "laplace_transform_exact",
    "symmetrization_bound_check",
    "tail_envelope",
    "twisted_mean",
    "twisted_expectation",
    "chi2_conditional_params",
    "density_box_integral",
    "conditioned_box_integral",
    "DEFAULT_COST_CAP",
]

DEFAULT_COST_CAP = 20_000_000  # torus grid points per evaluation


@dataclass(frozen=True)
class AngularGrid:
    """Uniform tensor grid on the torus: K points per angular dimension."""

    K: int = 64
    reduced: bool = True
    cost_cap: int = DEFAULT_COST_CAP

    def __post_init__(self):
        if self.K < 4:
            raise DomainError("angular grid needs K >= 4")


@dataclass(frozen=True)
class DensityEvaluation:
    value: float
    imag_residue: float
    method: str
    params: dict = field(default_factory=dict)
    tail_bound: float | None = None


@dataclass(frozen=True)
class SeriesTruncation:
    max_total_degree: int = 24

    def __post_init__(self):
        if self.max_total_degree < 0:
            raise DomainError("max_total_degree must be >= 0")


# ---------------------------------------------------------------------------
# torus quadrature core
# ---------------------------------------------------------------------------


def _phase_grid_means(C, b_plus, b_minus, K, n_free, pinned, cost_cap=DEFAULT_COST_CAP):
    """Mean over the K^n_free tensor grid of exp(phi^T C phibar + linear terms).

    C : (L, m, m) real coefficient batch; entry (i, j) multiplies
        exp(i (th_i - th_j)).
    b_plus, b_minus : (L, m) coefficients of exp(+i th_i) and exp(-i th_i).
    pinned : number of leading angle variables pinned at zero
        (m = n_free + pinned).
    Returns complex means, shape (L,).
    """
    C = np.asarray(C, dtype=float)
    L, m, _ = C.shape
    total = K**n_free if n_free > 0 else 1
    if total > cost_cap:
        raise CostGuardExceeded(
            f"angular grid has {total} points, exceeding the cap of {cost_cap}"
        )
    acc = np.zeros(L, dtype=complex)
    Cc = C.reshape(L, m * m).astype(complex)
    bp = np.asarray(b_plus, dtype=complex)
    bm = np.asarray(b_minus, dtype=complex)

    point_chunk = max(1, min(total, 1 << 14))
    l_chunk = max(1, (1 << 22) // max(point_chunk, 1))
    base = 2.0 * np.pi / K
    for start in range(0, total, point_chunk):
        idx = np.arange(start, min(start + point_chunk, total))
        P = idx.size
        theta = np.zeros((P, m))
        for j in range(n_free):
            theta[:, pinned + j] = base * ((idx // (K**j)) % K)
        E = np.exp(1j * theta)
        # F[p, i, j] = E_pi * conj(E_pj); quadratic part is a single GEMM
        F = (E[:, :, None] * np.conj(E)[:, None, :]).reshape(P, m * m)
        for ls in range(0, L, l_chunk):
            le = min(ls + l_chunk, L)
            Mx = Cc[ls:le] @ F.T
            if bp.size:
                Mx += bp[ls:le] @ E.T
                Mx += bm[ls:le] @ np.conj(E).T
            acc[ls:le] += np.exp(Mx).sum(axis=1)
    return acc / total


def _validate_kernel(G) -> tuple[np.ndarray, np.ndarray, float]:
    G = np.asarray(G, dtype=float)
    detG = float(np.linalg.det(G))
    ok, lam = kernels.has_pd_symmetric_part(G)
    if not ok:
        raise InvalidKernel(f"kernel needs a PD symmetric part (lambda_min={lam:.3e})")
    if detG <= 0:
        raise InvalidKernel(f"det(G) = {detG:.3e} <= 0")
    Q = -np.linalg.inv(G)
    return G, Q, detG


def density_quadrature(G, l, grid: AngularGrid | None = None) -> DensityEvaluation:
    """Evaluate the permanental density at one point l >= 0 by torus quadrature."""
    grid = grid or AngularGrid()
    G, Q, detG = _validate_kernel(G)
    l = np.asarray(l, dtype=float)
    n = G.shape[0]
    if l.shape != (n,):
        raise DomainError(f"l must have shape ({n},)")
    if np.any(l < 0):
        raise DomainError("l must be nonnegative")
    vals = _density_quadrature_batch(Q, detG, l[None, :], grid)
    v = vals[0]
    return DensityEvaluation(
        value=float(np.real(v)),
        imag_residue=float(abs(np.imag(v))),
        method="quadrature",
        params={"K": grid.K, "reduced": grid.reduced},
    )


def _density_quadrature_batch(Q, detG, L_pts, grid: AngularGrid) -> np.ndarray:
    """Vectorized density over a batch of l points; returns complex values."""
    n = Q.shape[0]
    sqrtl = np.sqrt(L_pts)  # (B, n)
    C = Q[None, :, :] * sqrtl[:, :, None] * sqrtl[:, None, :]
    nb = np.zeros((L_pts.shape[0], 0))
    if n == 1:
        # no angular dependence: the integrand is the constant exp(Q11 l)
        return np.exp(C[:, 0, 0]).astype(complex) / detG
    if grid.reduced:
        means = _phase_grid_means(C, nb, nb, grid.K, n - 1, 1, grid.cost_cap)
    else:
        means = _phase_grid_means(C, nb, nb, grid.K, n, 0, grid.cost_cap)
    return means / detG


_TERM_CACHE: dict = {}


def _flow_conserving_terms(n: int, max_degree: int):
    """Multi-indices {k_ij >= 0, i != j} with zero net flow at every node.

    Returns (k, deg, edges): k has one column per directed edge in ``edges``
    order, deg[t, i] is the total number of edge endpoints at node i in term
    t (so l_i enters as l_i^(deg/2)).
    """
    key = (n, max_degree)
    if key in _TERM_CACHE:
        return _TERM_CACHE[key]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    edges = []
    for i, j in pairs:
        edges.append((i, j))
        edges.append((j, i))
    last_pair_of = {}
    for idx, (i, j) in enumerate(pairs):
        last_pair_of[i] = idx
        last_pair_of[j] = idx
    terms = []
    k_work = np.zeros(2 * len(pairs), dtype=np.int64)
    div = np.zeros(n, dtype=np.int64)

    def assign(idx, budget):
        if idx == len(pairs):
            terms.append(k_work.copy())
            return
        i, j = pairs[idx]
        e_ij, e_ji = 2 * idx, 2 * idx + 1
        last_i = last_pair_of[i] == idx
        last_j = last_pair_of[j] == idx

        def put(kij, kji):
            k_work[e_ij], k_work[e_ji] = kij, kji
            div[i] += kij - kji
            div[j] += kji - kij
            assign(idx + 1, budget - kij - kji)
            div[i] -= kij - kji
            div[j] -= kji - kij
            k_work[e_ij] = k_work[e_ji] = 0

        if last_i or last_j:
            if last_i and last_j and div[i] + div[j] != 0:
                return
            d = -div[i] if last_i else div[j]
            lo = abs(d)
            if lo > budget:
                return
            for t in range((budget - lo) // 2 + 1):
                put(t + max(d, 0), t + max(-d, 0))
        else:
            for kij in range(budget + 1):
                for kji in range(budget - kij + 1):
                    put(kij, kji)

    if n >= 2:
        assign(0, max_degree)
        k = np.asarray(terms, dtype=np.int64)
    else:
        k = np.zeros((1, 0), dtype=np.int64)
    deg = np.zeros((k.shape[0], n), dtype=np.int64)
    for e, (i, j) in enumerate(edges):
        deg[:, i] += k[:, e]
        deg[:, j] += k[:, e]
    _TERM_CACHE[key] = (k, deg, edges)
    return _TERM_CACHE[key]


def density_series(G, l, trunc: SeriesTruncation | None = None) -> DensityEvaluation:
    """Evaluate the density by its nonnegative flow-conserving expansion.

    Requires A = G^{-1} to be an M-matrix with a PD symmetric part, so that
    every summand

        prod_{i != j} (-A_ij)^{k_ij} (l_i l_j)^{k_ij / 2} / k_ij!

    is nonnegative; the multi-indices are constrained to have zero net flow
    sum_{j != i} (k_ij - k_ji) at every node, which is what survives the
    angular averaging.  The reported tail bound comes from dropping the flow
    constraint, whose unconstrained total is exp(B) with
    B = sum |A_ij| sqrt(l_i l_j).
    """
    trunc = trunc or SeriesTruncation()
    G = np.asarray(G, dtype=float)
    l = np.asarray(l, dtype=float)
    n = G.shape[0]
    if l.shape != (n,):
        raise DomainError(f"l must have shape ({n},)")
    if np.any(l < 0):
        raise DomainError("l must be nonnegative")
    try:
        A = np.linalg.inv(G)
    except np.linalg.LinAlgError as exc:
        raise InvalidKernel(f"kernel is singular: {exc}") from exc
    ok, lam = kernels.has_pd_symmetric_part(A)
    if not ok:
        raise InvalidKernel(f"G^-1 needs a PD symmetric part (lambda_min={lam:.3e})")
    if not kernels.is_m_matrix(A):
        raise InvalidKernel("series expansion needs G^-1 to be an M-matrix")
    vals, tails = _density_series_batch(A, l[None, :], trunc.max_total_degree)
    return DensityEvaluation(
        value=float(vals[0]),
        imag_residue=0.0,
        method="series",
        params={"max_total_degree": trunc.max_total_degree},
        tail_bound=float(tails[0]),
    )


def _density_series_batch(A, L_pts, max_degree):
    n = A.shape[0]
    k, deg, edges = _flow_conserving_terms(n, max_degree)
    x = np.array([max(-A[i, j], 0.0) for (i, j) in edges])
    detA = float(np.linalg.det(A))
    with np.errstate(divide="ignore"):
        logx = np.log(x)
    dead = (k > 0) & ~np.isfinite(logx)[None, :]
    alive = ~dead.any(axis=1)
    kk = k[alive]
    logcoef = np.where(kk > 0, kk * np.where(np.isfinite(logx), logx, 0.0)[None, :], 0.0).sum(
        axis=1
    ) - gammaln(kk + 1).sum(axis=1)
    dg = deg[alive]

    B = L_pts.shape[0]
    vals = np.empty(B)
    tails = np.empty(B)
    diagA = np.diag(A)
    chunk = max(1, (1 << 22) // max(kk.shape[0], 1))
    for s in range(0, B, chunk):
        e = min(s + chunk, B)
        lc = L_pts[s:e]
        with np.errstate(divide="ignore"):
            logl = np.log(lc)  # (b, n); -inf at 0 handled below
        W = 0.5 * (dg @ np.where(np.isfinite(logl), logl, 0.0).T)
        zero_hit = (dg @ (~np.isfinite(logl)).T.astype(np.int64)) > 0
        with np.errstate(over="ignore"):
            terms = np.exp(logcoef[:, None] + W)
        terms[zero_hit] = 0.0
        series = terms.sum(axis=0)
        pref = detA * np.exp(-(lc @ diagA))
        vals[s:e] = pref * series
        sq = np.sqrt(lc)
        Bmag = np.einsum("bi,ij,bj->b", sq, np.abs(A - np.diag(diagA)), sq)
        tails[s:e] = pref * np.exp(Bmag) * gammainc(max_degree + 1, Bmag)
    return vals, tails


def conditioned_density(G, a: int, r: float, l_star, grid: AngularGrid | None = None) -> DensityEvaluation:
    """Density of the remaining coordinates given that coordinate a equals r.

    The formula integrates over n-1 angles; the angle of the conditioned
    coordinate has already been rotated away, so no further reduction
    applies.  At r = 0 this is exactly the unconditioned density of the
    kernel (-Q_**)^{-1}.
    """
    grid = grid or AngularGrid()
    G, Q, detG = _validate_kernel(G)
    n = G.shape[0]
    if not (0 <= a < n):
        raise DomainError(f"state index {a} out of range")
    if r < 0:
        raise DomainError("conditioning level r must be nonnegative")
    l_star = np.asarray(l_star, dtype=float)
    if l_star.shape != (n - 1,):
        raise DomainError(f"l_star must have shape ({n - 1},)")
    if np.any(l_star < 0):
        raise DomainError("l_star must be nonnegative")
    vals = _conditioned_density_batch(Q, a, r, l_star[None, :], grid)
    return DensityEvaluation(
        value=float(np.real(vals[0])),
        imag_residue=float(abs(np.imag(vals[0]))),
        method="quadrature",
        params={"K": grid.K, "a": a, "r": r},
    )


def _conditioned_blocks(Q, a):
    keep = [i for i in range(Q.shape[0]) if i != a]
    Qss = Q[np.ix_(keep, keep)]
    col = Q[keep, a]  # Q_{*a}
    row = Q[a, keep]  # Q_{a*}
    return keep, Qss, col, row


def _conditioned_density_batch(Q, a, r, Lstar_pts, grid: AngularGrid) -> np.ndarray:
    n = Q.shape[0]
    keep, Qss, col, row = _conditioned_blocks(Q, a)
    det_mQss = float(np.linalg.det(-Qss))
    const = r * float(row @ np.linalg.solve(Qss, col))
    sqrtl = np.sqrt(Lstar_pts)
    C = Qss[None, :, :] * sqrtl[:, :, None] * sqrtl[:, None, :]
    b_plus = np.sqrt(r) * sqrtl * col[None, :]
    b_minus = np.sqrt(r) * sqrtl * row[None, :]
    if n == 1:
        raise DomainError("conditioning needs at least two states")
    means = _phase_grid_means(C, b_plus, b_minus, grid.K, n - 1, 0, grid.cost_cap)
    return det_mQss * np.exp(const) * means


def laplace_transform_exact(G, lam, alpha: float = 1.0) -> float:
    """det(I + diag(lam) G)^{-alpha}."""
    G = np.asarray(G, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    M = np.eye(G.shape[0]) + lam[:, None] * G
    det = float(np.linalg.det(M))
    if det <= 0:
        if float(alpha).is_integer():
            return float(det ** (-alpha))
        raise DomainError(f"det(I + Lambda G) = {det:.3e} <= 0 with non-integer alpha")
    return float(det ** (-alpha))


def symmetrization_bound_check(G, l, grid: AngularGrid | None = None, tol: float = 1e-8):
    """Evaluate rho(l) against gamma * rho_bar(l) for the symmetrized kernel.

    rho_bar uses the kernel (-S)^{-1} with S the symmetric part of -G^{-1};
    returns (rho, gamma * rho_bar, ok).
    """
    G, Q, _ = _validate_kernel(G)
    S = kernels.symmetric_part(Q)
    Gbar = np.linalg.inv(-S)
    rho = density_quadrature(G, l, grid)
    rho_bar = density_quadrature(Gbar, l, grid)
    gamma = kernels.gamma_symmetrization(G)
    bound = gamma * rho_bar.value
    ok = rho.value <= bound + tol * max(1.0, abs(bound))
    return rho.value, bound, bool(ok)


def tail_envelope(G, t, k: int = 1) -> float:
    """Analytic envelope for P(sum of k independent copies >= t, componentwise).

    Uses the exponential envelope of the density with decay rate
    lambda_min(sym(G^{-1})) and the k-fold union bound k P(l >= t/k).
    """
    G, Q, detG = _validate_kernel(G)
    if k < 1:
        raise DomainError("k must be a positive integer")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("t must be nonnegative")
    n = G.shape[0]
    lam = kernels.min_symmetric_eigenvalue(-Q)  # = lambda_min(sym(G^{-1}))
    return float(k / detG / lam**n * np.exp(-lam * t.sum() / k))


# ---------------------------------------------------------------------------
# phase-weighted importance sampling
# ---------------------------------------------------------------------------


def _twisted_setup(Qmat):
    Qmat = np.asarray(Qmat, dtype=float)
    ok, lam = kernels.has_pd_symmetric_part(-Qmat)
    if not ok:
        raise InvalidKernel(f"-Q needs a PD symmetric part (lambda_min={lam:.3e})")
    S = kernels.symmetric_part(Qmat)
    Askew = Qmat - S
    Ls = np.linalg.cholesky(-S)
    sign_q, logdet_q = np.linalg.slogdet(-Qmat)
    sign_s, logdet_s = np.linalg.slogdet(-S)
    if sign_q <= 0 or sign_s <= 0:
        raise InvalidKernel("determinants of -Q and -S must be positive")
    gamma = float(np.exp(logdet_q - logdet_s))
    return Qmat, S, Askew, Ls, gamma


def _twisted_draw(Ls, Askew, n_samples, rng):
    """Draw phi = u + iv with u, v ~ N(0, (1/2)(-S)^{-1}) and the unit phase weight."""
    n = Ls.shape[0]
    Z = rng.standard_normal((2 * n_samples, n))
    X = solve_triangular(Ls, Z.T, lower=True, trans="T").T / np.sqrt(2.0)
    u, v = X[:n_samples], X[n_samples:]
    phi = u + 1j * v
    w = np.exp(2j * np.einsum("ij,ij->i", v, u @ Askew.T))
    return phi, w


def twisted_mean(Qmat, integrand, n_samples: int, rng, seed=()) -> MCEstimate:
    """Estimate the normalized phase-measure integral of ``integrand(phi)``.

    The measure with density proportional to exp(<phi, Q phibar>) is sampled
    through its Gaussian envelope exp(<phi, S phibar>); the leftover factor
    exp(<phi, (Q - S) phibar>) has a purely imaginary exponent, hence unit
    modulus, and the determinant ratio det(-Q)/det(-S) restores the
    normalization.  The real part is the estimate; the imaginary part of the
    mean is reported as a residue, never silently dropped.
    """
    if n_samples < 2:
        raise DomainError("need at least two samples")
    _, _, Askew, Ls, gamma = _twisted_setup(Qmat)
    chunk = 1 << 16
    vals = np.empty(n_samples, dtype=complex)
    for s in range(0, n_samples, chunk):
        e = min(s + chunk, n_samples)
        phi, w = _twisted_draw(Ls, Askew, e - s, rng)
        vals[s:e] = np.asarray(integrand(phi), dtype=complex) * w
    mean = gamma * vals.mean()
    stderr = gamma * float(np.real(vals).std(ddof=1) / np.sqrt(n_samples))
    return MCEstimate(
        mean=float(np.real(mean)),
        stderr=stderr,
        n_replicates=n_samples,
        imag_residue=float(abs(np.imag(mean))),
        seed=seed,
    )


def twisted_expectation(Qmat, f, n_samples: int, rng, seed=()) -> MCEstimate:
    """E f(l) for the permanental vector with kernel (-Q)^{-1}, by phase sampling.

    ``f`` must have at most polynomial growth; test-function objects carry a
    growth tag which is enforced here.
    """
    growth = getattr(f, "growth", "polynomial")
    if growth not in ("bounded", "polynomial"):
        raise DomainError(f"test function growth class {growth!r} not integrable here")
    return twisted_mean(Qmat, lambda phi: f(np.abs(phi) ** 2), n_samples, rng, seed=seed)


def chi2_conditional_params(G, a: int, r: float):
    """Mean and covariance of the Gaussian whose square realizes the conditioned law.

    For symmetric positive definite G and l a squared Gaussian pair with
    kernel G, the law of the off-a coordinates given l_a = r is
    (U + sqrt(r) m)^2 + V^2 with U, V ~ N(0, (1/2)(-Q_**)^{-1}) and
    m = -Q_**^{-1} Q_{*a}.  This returns the full-covariance form
    (mean = sqrt(r) m, covariance (-Q_**)^{-1}).
    """
    G = np.asarray(G, dtype=float)
    if not np.allclose(G, G.T, atol=1e-10 * max(1.0, np.abs(G).max())):
        raise DomainError("conditioned chi-squared parameters need a symmetric kernel")
    if r < 0:
        raise DomainError("r must be nonnegative")
    G, Q, _ = _validate_kernel(G)
    keep, Qss, col, row = _conditioned_blocks(Q, a)
    mean = -np.sqrt(r) * np.linalg.solve(Qss, col)
    cov = np.linalg.inv(-Qss)
    return mean, cov


# ---------------------------------------------------------------------------
# box integration of densities (normalization and test-function moments)
# ---------------------------------------------------------------------------


def _gauss_legendre_grid(n_dims, upper, nodes_per_dim):
    """Tensor Gauss-Legendre rule for integral over [0, U]^d in sqrt coordinates.

    Substituting l = u^2 per coordinate removes the square-root cusp at the
    origin, leaving a smooth integrand; the Jacobian prod 2 u_i is folded
    into the weights.
    """
    x, w = np.polynomial.legendre.leggauss(nodes_per_dim)
    u = 0.5 * np.sqrt(upper) * (x + 1.0)
    wu = 0.5 * np.sqrt(upper) * w
    grids = np.meshgrid(*([u] * n_dims), indexing="ij")
    U = np.stack([g.ravel() for g in grids], axis=1)
    W = np.ones(U.shape[0])
    for d in range(n_dims):
        idx = np.meshgrid(*([np.arange(nodes_per_dim)] * n_dims), indexing="ij")[d].ravel()
        W *= wu[idx] * 2.0 * U[:, d]
    return U**2, W


def density_box_integral(
    G,
    f=None,
    *,
    grid: AngularGrid | None = None,
    nodes_per_dim: int = 32,
    tail_target: float = 1e-6,
    box: float | None = None,
):
    """Integrate f(l) rho(l) over a truncated box, with an analytic tail bound.

    Returns (value, tail_bound).  With f None this checks normalization:
    the exact answer is 1.
    """
    grid = grid or AngularGrid()
    G, Q, detG = _validate_kernel(G)
    n = G.shape[0]
    if n > 3:
        raise DomainError("box integration is supported for n <= 3")
    lam = kernels.min_symmetric_eigenvalue(-Q)
    if box is None:
        box = float(np.log(max(n, 1) / (lam**n * detG * tail_target)) / lam)
        box = max(box, 4.0 / lam)
    L_pts, W = _gauss_legendre_grid(n, box, nodes_per_dim)
    vals = np.real(_density_quadrature_batch(Q, detG, L_pts, grid))
    if f is not None:
        vals = vals * np.asarray(f(L_pts), dtype=float)
    # mass outside the box: n one-sided exponential-envelope tails
    tail = n / detG / lam**n * np.exp(-lam * box)
    if f is not None:
        tail *= float(np.max(np.abs(f(L_pts))))
    return float(vals @ W), float(tail)


def conditioned_box_integral(
    G,
    a: int,
    r: float,
    f,
    *,
    grid: AngularGrid | None = None,
    nodes_per_dim: int = 32,
    tail_target: float = 1e-6,
    box: float | None = None,
):
    """Integrate f(l_star) against the conditioned density over a box."""
    grid = grid or AngularGrid()
    G, Q, detG = _validate_kernel(G)
    n = G.shape[0]
    if n - 1 > 3:
        raise DomainError("box integration is supported for n - 1 <= 3")
    keep, Qss, _, _ = _conditioned_blocks(Q, a)
    lam = kernels.min_symmetric_eigenvalue(-Qss)
    det_sub = float(np.linalg.det(-Qss))
    if box is None:
        box = float(np.log(max(n - 1, 1) * det_sub / (lam ** (n - 1) * tail_target)) / lam)
        box = max(box, 4.0 / lam, 4.0 * r)
    L_pts, W = _gauss_legendre_grid(n - 1, box, nodes_per_dim)
    vals = np.real(_conditioned_density_batch(Q, a, r, L_pts, grid))
    fv = np.asarray(f(L_pts), dtype=float)
    # conditional density envelope: gamma_sub * symmetrized Gaussian tail
    gamma_sub = float(np.linalg.det(-2 * Qss) / np.linalg.det(-(Qss + Qss.T)))
    tail = gamma_sub * (n - 1) * np.exp(-lam * (np.sqrt(box) - np.sqrt(r)) ** 2) * max(
        1.0, float(np.max(np.abs(fv)))
    )
    return float((vals * fv) @ W), float(tail)
