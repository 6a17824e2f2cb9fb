"""Matrix analysis and classification of candidate permanental kernels.

Two families of kernels are certified here: symmetric positive definite
matrices, and inverse M-matrices (up to diagonal similarity).  Both imply a
positive definite symmetric part, which is the hypothesis every density and
sampling routine in the package rests on.  An algorithmically complete
characterization of valid kernels is not known; this module only certifies
the two known sufficient families and reports everything else as
uncertified.

All tests are dense; matrices at the scale this package targets (n <= 64)
do not justify sparse or iterative machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvalidKernel, NumericalError

__all__ = [
    "DEFAULT_TOL",
    "KernelReport",
    "DiagonalScaling",
    "symmetric_part",
    "antisymmetric_part",
    "has_pd_symmetric_part",
    "min_symmetric_eigenvalue",
    "is_m_matrix",
    "is_inverse_m_matrix",
    "spectral_radius",
    "diagonal_dominance",
    "DiagDominance",
    "gamma_symmetrization",
    "find_pd_equivalent_scaling",
    "check_inverse_pd_sym",
    "classify_kernel",
]

DEFAULT_TOL = 1e-9


def _as_square(M) -> np.ndarray:
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise DomainError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError("matrix has non-finite entries")
    return A


def _scaled_tol(A: np.ndarray, tol: float) -> float:
    # tolerances are relative to the max-norm so tests are scale-free
    return tol * max(1.0, float(np.abs(A).max()))


def symmetric_part(M) -> np.ndarray:
    """Return (M + M^T)/2; the result is exactly symmetric."""
    A = _as_square(M)
    return (A + A.T) / 2.0


def antisymmetric_part(M) -> np.ndarray:
    """Return (M - M^T)/2."""
    A = _as_square(M)
    return (A - A.T) / 2.0


def min_symmetric_eigenvalue(M) -> float:
    """Smallest eigenvalue of the symmetric part of M."""
    S = symmetric_part(M)
    try:
        w = np.linalg.eigvalsh(S)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - eigh on finite input
        raise NumericalError(f"symmetric eigensolver failed: {exc}") from exc
    return float(w[0])


def has_pd_symmetric_part(M, tol: float = DEFAULT_TOL) -> tuple[bool, float]:
    """Test whether the symmetric part of M is positive definite.

    Returns ``(flag, lambda_min)`` where ``lambda_min`` is the smallest
    eigenvalue of (M + M^T)/2.  A positive answer certifies that M itself is
    invertible.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    A = _as_square(M)
    lam = min_symmetric_eigenvalue(A)
    return lam > _scaled_tol(A, tol), lam


def is_m_matrix(A, tol: float = DEFAULT_TOL) -> bool:
    """Non-singular M-matrix test: nonpositive off-diagonal and nonnegative inverse.

    A singular matrix returns False rather than raising.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    A = _as_square(A)
    eps = _scaled_tol(A, tol)
    off = A - np.diag(np.diag(A))
    if off.max(initial=0.0) > eps:
        return False
    try:
        Ainv = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        return False
    if not np.all(np.isfinite(Ainv)):
        return False
    inv_eps = tol * max(1.0, float(np.abs(Ainv).max()))
    return bool(Ainv.min() >= -inv_eps)


def is_inverse_m_matrix(G, tol: float = DEFAULT_TOL) -> bool:
    """True iff G is invertible and G^{-1} is a non-singular M-matrix."""
    G = _as_square(G)
    try:
        Ginv = np.linalg.inv(G)
    except np.linalg.LinAlgError:
        return False
    if not np.all(np.isfinite(Ginv)):
        return False
    return is_m_matrix(Ginv, tol)


def spectral_radius(A) -> float:
    """max |eigenvalue|, via a dense eigendecomposition."""
    A = _as_square(A)
    try:
        w = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    return float(np.abs(w).max())


@dataclass(frozen=True)
class DiagDominance:
    """Row/column diagonal-dominance levels, each in {'none', 'weak', 'strict'}."""

    rows: str
    columns: str

    def summary(self) -> tuple[str, str]:
        """(level, scope) with scope in {'rows', 'columns', 'both', 'none'}."""
        order = {"none": 0, "weak": 1, "strict": 2}
        if self.rows == self.columns:
            return self.rows, ("both" if self.rows != "none" else "none")
        hi, lo = max(self.rows, self.columns, key=order.get), min(
            self.rows, self.columns, key=order.get
        )
        if lo == "none":
            scope = "rows" if self.rows == hi else "columns"
            return hi, scope
        # one strict, one weak: weak holds in both orientations
        return "weak", "both"


def _dominance_level(diag: np.ndarray, offsums: np.ndarray) -> str:
    if np.all(diag > offsums):
        return "strict"
    if np.all(diag >= offsums):
        return "weak"
    return "none"


def diagonal_dominance(A) -> DiagDominance:
    """Classify |A_ii| against the off-diagonal absolute row and column sums."""
    A = _as_square(A)
    d = np.abs(np.diag(A))
    absA = np.abs(A)
    row_off = absA.sum(axis=1) - d
    col_off = absA.sum(axis=0) - d
    return DiagDominance(
        rows=_dominance_level(d, row_off), columns=_dominance_level(d, col_off)
    )


def gamma_symmetrization(G) -> float:
    """det(2G)/det(G + G^T) for G with a positive definite symmetric part.

    Always >= 1 (Ostrowski-Taussky); equals 1 exactly when G is symmetric.
    """
    G = _as_square(G)
    ok, lam = has_pd_symmetric_part(G)
    if not ok:
        raise InvalidKernel(
            f"gamma is only defined for PD-symmetric-part matrices (lambda_min={lam:g})"
        )
    n = G.shape[0]
    num = np.linalg.det(2.0 * G)
    den = np.linalg.det(G + G.T)
    if den <= 0:
        raise NumericalError("det(G + G^T) <= 0 despite PD symmetric part")
    return float(num / den)


def check_inverse_pd_sym(G, tol: float = DEFAULT_TOL) -> bool:
    """Assert that G^{-1} inherits the positive definite symmetric part of G."""
    G = _as_square(G)
    ok, lam = has_pd_symmetric_part(G, tol)
    if not ok:
        raise InvalidKernel(f"precondition failed: lambda_min(sym G) = {lam:g}")
    try:
        Ginv = np.linalg.inv(G)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"PD-symmetric-part matrix reported singular: {exc}") from exc
    ok_inv, _ = has_pd_symmetric_part(Ginv, tol)
    return ok_inv


@dataclass(frozen=True)
class DiagonalScaling:
    """Positive diagonal d defining the similarity D^{-1} A D."""

    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 1 or np.any(d <= 0):
            raise DomainError("diagonal scaling must be a positive vector")
        object.__setattr__(self, "d", d)

    def apply(self, A) -> np.ndarray:
        A = _as_square(A)
        return (A * self.d[None, :]) / self.d[:, None]


def _scaling_certificate(A: np.ndarray, log_d: np.ndarray, tol: float) -> tuple[bool, float]:
    d = np.exp(log_d - log_d.max())
    scaled = (A * d[None, :]) / d[:, None]
    return has_pd_symmetric_part(scaled, tol)


def find_pd_equivalent_scaling(
    A, max_iter: int = 200, tol: float = DEFAULT_TOL, n_restarts: int = 8, seed: int = 0
) -> DiagonalScaling | None:
    """Search for a positive diagonal D such that D^{-1} A D has a PD symmetric part.

    For a non-singular M-matrix such a D exists.  The search first tries the
    closed-form candidate d = A^{-1} 1 (positive whenever A^{-1} >= 0), then
    falls back to gradient ascent on lambda_min(sym(D^{-1} A D)) over log d
    with random restarts.  Every returned scaling is certified by
    `has_pd_symmetric_part`; None means no certificate was found within the
    iteration budget, never that one cannot exist.
    """
    A = _as_square(A)
    n = A.shape[0]

    candidates = [np.zeros(n)]
    try:
        d0 = np.linalg.solve(A, np.ones(n))
        if np.all(d0 > 0):
            candidates.append(np.log(d0))
    except np.linalg.LinAlgError:
        pass
    for log_d in candidates:
        ok, _ = _scaling_certificate(A, log_d, tol)
        if ok:
            d = np.exp(log_d - log_d.max())
            return DiagonalScaling(d)

    rng = np.random.default_rng(seed)
    starts = [c for c in candidates]
    starts += [rng.normal(scale=1.0, size=n) for _ in range(n_restarts)]
    for log_d in starts:
        log_d = log_d.copy()
        step = 0.5
        for _ in range(max_iter):
            d = np.exp(log_d - log_d.max())
            scaled = (A * d[None, :]) / d[:, None]
            S = (scaled + scaled.T) / 2.0
            w, V = np.linalg.eigh(S)
            lam, v = w[0], V[:, 0]
            if lam > _scaled_tol(scaled, tol):
                return DiagonalScaling(d)
            # gradient of lambda_min w.r.t. log d_k for a simple eigenvalue:
            # d(scaled)_ij/d log d_k = scaled_ij (delta_jk - delta_ik)
            grad = v * (scaled.T @ v) - v * (scaled @ v)
            gnorm = np.linalg.norm(grad)
            if gnorm < 1e-14:
                break
            trial = log_d + step * grad / gnorm
            _, lam_trial = _scaling_certificate(A, trial, tol)
            if lam_trial > lam:
                log_d = trial
                step = min(step * 1.5, 4.0)
            else:
                step *= 0.5
                if step < 1e-8:
                    break
    return None


@dataclass(frozen=True)
class KernelReport:
    """Classification summary for a candidate kernel."""

    n: int
    has_pd_sym_part: bool
    min_sym_eigenvalue: float
    is_m_matrix: bool
    is_inverse_m_matrix: bool
    spectral_radius: float
    diag_dominance: DiagDominance
    gamma: float | None = None
    certified_family: str = "none"  # 'psd_symmetric' | 'inverse_m' | 'none'
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        level, scope = self.diag_dominance.summary()
        out = {
            "n": self.n,
            "has_pd_sym_part": self.has_pd_sym_part,
            "min_sym_eigenvalue": self.min_sym_eigenvalue,
            "is_m_matrix": self.is_m_matrix,
            "is_inverse_m_matrix": self.is_inverse_m_matrix,
            "spectral_radius": self.spectral_radius,
            "diag_dominance": {
                "rows": self.diag_dominance.rows,
                "columns": self.diag_dominance.columns,
                "level": level,
                "scope": scope,
            },
            "gamma": self.gamma,
            "certified_family": self.certified_family,
        }
        out.update(self.extras)
        return out


def classify_kernel(G, tol: float = DEFAULT_TOL) -> KernelReport:
    """Run the full battery of structural tests on a candidate kernel."""
    G = _as_square(G)
    pd_ok, lam = has_pd_symmetric_part(G, tol)
    m_flag = is_m_matrix(G, tol)
    inv_m_flag = is_inverse_m_matrix(G, tol)
    gamma = gamma_symmetrization(G) if pd_ok else None
    symmetric = bool(np.allclose(G, G.T, atol=_scaled_tol(G, tol)))
    if symmetric and pd_ok:
        family = "psd_symmetric"
    elif inv_m_flag and pd_ok:
        family = "inverse_m"
    else:
        family = "none"
    return KernelReport(
        n=G.shape[0],
        has_pd_sym_part=pd_ok,
        min_sym_eigenvalue=lam,
        is_m_matrix=m_flag,
        is_inverse_m_matrix=inv_m_flag,
        spectral_radius=spectral_radius(G),
        diag_dominance=diagonal_dominance(G),
        gamma=gamma,
        certified_family=family,
        extras={"symmetric": symmetric},
    )
