"""Monte-Carlo verification of distributional identities and bounds.

Every verifier reduces to comparisons of the form
|estimate_A - estimate_B| <= 3 combined standard errors (a deterministic
side contributes its numerical tolerance instead of a stderr), or to
one-sided dominance checks with the same 3-sigma slack.  Reports carry the
full table of standardized discrepancies; `passed` summarizes the worst
one.  Replicates are drawn in fixed-size blocks with substreams keyed by
block index, so results are reproducible and independent of how many
worker threads execute the blocks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import ks_2samp

from . import density, kernels, samplers
from .errors import (
    DomainError,
    HorizonTooShort,
    InvalidFamily,
    InvalidPair,
)
from .estimates import MCEstimate, combine_z
from .functions import TestFunction, check_sign_declarations
from .markov import MarkovModel, killed_laplacian, ray_knight_kernel
from .rng import substream

__all__ = [
    "VerifyReport",
    "default_lambda_grid",
    "verify_laplace",
    "verify_lejan",
    "verify_dynkin",
    "verify_ray_knight",
    "verify_eisenbaum",
    "verify_ward",
    "SubStochasticFamily",
    "LinearKernelFamily",
    "check_kahane",
    "check_slepian",
    "check_tail_bound",
    "estimate_cover_time",
]

BLOCK = 25_000


@dataclass
class VerifyReport:
    name: str
    passed: bool
    max_z: float
    details: dict = field(default_factory=dict)
    seed: int | None = None

    def to_dict(self) -> dict:
        def conv(x):
            if isinstance(x, MCEstimate):
                return x.to_dict()
            if isinstance(x, np.ndarray):
                return x.tolist()
            if isinstance(x, (np.floating, np.integer)):
                return x.item()
            if isinstance(x, dict):
                return {k: conv(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [conv(v) for v in x]
            return x

        return {
            "name": self.name,
            "passed": bool(self.passed),
            "max_z": float(self.max_z),
            "seed": self.seed,
            "details": conv(self.details),
        }


def map_blocks(n_total: int, worker, seed: int, tag: str, threads: int = 1, block: int = BLOCK):
    """Run ``worker(block_index, size, rng)`` over fixed-size blocks.

    Block boundaries and substreams depend only on (seed, tag, index), so
    the concatenated result is the same whatever ``threads`` is.
    """
    sizes = [min(block, n_total - s) for s in range(0, n_total, block)]
    def run(i):
        return worker(i, sizes[i], substream(seed, tag, i))
    if threads <= 1 or len(sizes) == 1:
        parts = [run(i) for i in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate([p[k] for p in parts]) for k in range(len(parts[0])))
    return np.concatenate(parts)


def default_lambda_grid(n: int, n_points: int = 8, scale: float = 1.0) -> np.ndarray:
    """Deterministic grid of nonnegative rate vectors; the first row is zero."""
    rng = substream(90210, "lambda-grid", n, n_points)
    rows = [np.zeros(n)]
    while len(rows) < n_points:
        rows.append(scale * rng.random(n) * rng.choice([0.4, 1.0, 2.0]))
    return np.stack(rows)


# ---------------------------------------------------------------------------
# sampler oracle
# ---------------------------------------------------------------------------


def verify_laplace(
    G,
    sampler,
    lambda_grid=None,
    n_samples: int = 100_000,
    seed: int = 0,
    alpha: float = 1.0,
    threads: int = 1,
) -> VerifyReport:
    """Check a sampler's empirical Laplace transform against det(I + Lam G)^-alpha.

    ``sampler(size, rng) -> (size, n)``.  Every grid row must agree within
    3 standard errors; the zero row is exact by construction.
    """
    G = np.asarray(G, dtype=float)
    n = G.shape[0]
    if lambda_grid is None:
        lambda_grid = default_lambda_grid(n)
    X = map_blocks(n_samples, lambda i, m, rng: sampler(m, rng), seed, "laplace", threads)
    rows = []
    max_z = 0.0
    for lam in np.atleast_2d(lambda_grid):
        vals = np.exp(-X @ lam)
        emp = float(vals.mean())
        se = float(vals.std(ddof=1) / np.sqrt(n_samples))
        exact = density.laplace_transform_exact(G, lam, alpha)
        z = 0.0 if emp == exact else (abs(emp - exact) / se if se > 0 else float("inf"))
        max_z = max(max_z, z)
        rows.append({"lambda": lam.tolist(), "empirical": emp, "exact": exact, "stderr": se, "z": z})
    return VerifyReport(
        name="laplace",
        passed=max_z <= 3.0,
        max_z=max_z,
        details={"rows": rows, "alpha": alpha, "n_samples": n_samples},
        seed=seed,
    )


# ---------------------------------------------------------------------------
# isomorphism identities
# ---------------------------------------------------------------------------


def _twisted_k_expectation(Qmat, f, k: int, n_samples: int, rng, seed=()) -> MCEstimate:
    """Product-measure phase estimate of E f(l^(k)) for the k-fold sum."""
    _, _, Askew, Ls, gamma = density._twisted_setup(np.asarray(Qmat, dtype=float))
    chunk = 1 << 15
    vals = np.empty(n_samples, dtype=complex)
    for s in range(0, n_samples, chunk):
        e = min(s + chunk, n_samples)
        acc = None
        w = np.ones(e - s, dtype=complex)
        for _ in range(k):
            phi, wi = density._twisted_draw(Ls, Askew, e - s, rng)
            l = np.abs(phi) ** 2
            acc = l if acc is None else acc + l
            w = w * wi
        vals[s:e] = np.asarray(f(acc), dtype=complex) * w
    mean = gamma**k * vals.mean()
    stderr = gamma**k * float(np.real(vals).std(ddof=1) / np.sqrt(n_samples))
    return MCEstimate(float(np.real(mean)), stderr, n_samples, float(abs(np.imag(mean))), seed)


def verify_lejan(
    G,
    f: TestFunction,
    sampler,
    n_samples: int = 100_000,
    seed: int = 0,
    k: int = 1,
    quadrature_nodes: int = 24,
) -> VerifyReport:
    """Sampler mean of f against the phase-measure integral (and quadrature when n <= 3).

    For k >= 2 the sampler sums k draws and the phase route uses the
    product measure.  The tensor quadrature leg runs only at k = 1 and only
    for analytic test functions (constants, decaying exponentials,
    polynomials); piecewise cutoffs are not resolved by a fixed
    Gauss-Legendre rule, so for those the two Monte-Carlo routes are
    compared against each other.
    """
    G = np.asarray(G, dtype=float)
    Q = -np.linalg.inv(G)
    rng_s = substream(seed, "lejan-sampler")
    X = sampler(n_samples, rng_s)
    for _ in range(k - 1):
        X = X + sampler(n_samples, rng_s)
    mc = MCEstimate.from_values(f(X), seed=(seed, "sampler"))
    tw = (
        density.twisted_expectation(Q, f, n_samples, substream(seed, "lejan-twisted"))
        if k == 1
        else _twisted_k_expectation(Q, f, k, n_samples, substream(seed, "lejan-twisted"))
    )
    pairs = {"sampler_vs_twisted": combine_z(mc, tw)}
    details = {"sampler": mc, "twisted": tw, "k": k}
    if k == 1 and G.shape[0] <= 3 and f.kind in ("const", "exp_linear", "poly"):
        val, tail = density.density_box_integral(G, f, nodes_per_dim=quadrature_nodes)
        quad = MCEstimate(val, max(tail, 1e-8), 2, seed=(seed, "quadrature"))
        pairs["sampler_vs_quadrature"] = combine_z(mc, quad, extra_tol=1e-3)
        pairs["twisted_vs_quadrature"] = combine_z(tw, quad, extra_tol=1e-3)
        details["quadrature"] = quad
    max_z = max(pairs.values())
    details["pairs"] = pairs
    return VerifyReport("lejan", max_z <= 3.0, max_z, details, seed)


def verify_dynkin(
    model: MarkovModel,
    h,
    a: int,
    u: TestFunction,
    n_samples: int = 100_000,
    seed: int = 0,
) -> VerifyReport:
    """E[l_a u(l)] against the sojourn integral of the killed chain, both directions.

    The left side samples the permanental vector with kernel
    (diag(h) - Q)^{-1} by loop soup.  The right side pairs each killed path
    from a (explicit cemetery jumps realize the pathwise survival factor)
    with a fresh permanental draw and integrates u along the local time at
    a; the reversed-chain variant must agree as well.
    """
    h = np.asarray(h, dtype=float)
    Qh = killed_laplacian(model.Q, h)
    tables = samplers.LoopSoupTables.build(Qh)

    draws = samplers.sample_loop_soup_generator(Qh, n_samples, substream(seed, "dynkin-lhs"), tables=tables)
    lhs = MCEstimate.from_values(draws[:, a] * u(draws), seed=(seed, "lhs"))

    def rhs_for(Q, tag):
        rng = substream(seed, tag)
        shifts = samplers.sample_loop_soup_generator(Qh, n_samples, rng, tables=tables)
        out = samplers.batch_local_times_killed(
            Q, h, a, n_samples, rng, sojourn_state=a, sojourn_fn=u, shifts=shifts
        )
        return MCEstimate.from_values(out["integrals"], seed=(seed, tag))

    rhs_fwd = rhs_for(model.Q, "dynkin-fwd")
    rhs_rev = rhs_for(model.Q.T, "dynkin-rev")
    pairs = {
        "lhs_vs_forward": combine_z(lhs, rhs_fwd),
        "lhs_vs_reversed": combine_z(lhs, rhs_rev),
        "forward_vs_reversed": combine_z(rhs_fwd, rhs_rev),
    }
    max_z = max(pairs.values())
    return VerifyReport(
        "dynkin",
        max_z <= 3.0,
        max_z,
        {"lhs": lhs, "rhs_forward": rhs_fwd, "rhs_reversed": rhs_rev, "pairs": pairs, "u": u.name},
        seed,
    )


def verify_ray_knight(
    model: MarkovModel,
    a: int,
    h: float,
    r: float,
    n_samples: int = 100_000,
    seed: int = 0,
    band: float = 0.02,
    ks_threshold: float = 0.02,
    lambda_grid=None,
    density_check: bool = True,
) -> VerifyReport:
    """Inverse-local-time field plus an independent zero-conditioned vector
    against the r-conditioned vector, in distribution.

    Ensemble A adds the path field L_{tau_inv(r)} started at a to a
    permanental vector with the hit-killing kernel (the law of the vector
    conditioned to vanish at a).  Ensemble B realizes the conditioning at
    level r: exactly via the shifted squared-Gaussian construction when the
    chain is reversible, by band rejection otherwise; at r = 0 both
    ensembles reduce to the hit-killing law and the conditioned sampler is
    taken from it directly.
    """
    n = model.n
    keep = [i for i in range(n) if i != a]
    Q_sub = model.Q[np.ix_(keep, keep)]
    G_rk = ray_knight_kernel(model, a, h).G
    sub_tables = samplers.LoopSoupTables.build(Q_sub)

    ilt = samplers.batch_inverse_local_time(model.Q, a, r, n_samples, substream(seed, "rk-path"))
    zero_cond = samplers.sample_loop_soup_generator(
        Q_sub, n_samples, substream(seed, "rk-zero"), tables=sub_tables
    )
    ens_a = ilt[:, keep] + zero_cond

    meta = {}
    if r == 0:
        ens_b = samplers.sample_loop_soup_generator(
            Q_sub, n_samples, substream(seed, "rk-cond"), tables=sub_tables
        )
        meta["conditioned_sampler"] = "hit_killing_law"
    elif model.is_reversible():
        ens_b = samplers.sample_conditioned_chi2(G_rk, a, r, n_samples, substream(seed, "rk-cond"))
        meta["conditioned_sampler"] = "shifted_chi2"
    else:
        ens_b, rate = samplers.sample_conditioned_rejection(
            model, a, r, h, band, n_samples, substream(seed, "rk-cond")
        )
        ens_b = ens_b[:, keep]
        meta["conditioned_sampler"] = "band_rejection"
        meta["acceptance_rate"] = rate
        meta["band"] = band

    ks_vals = [float(ks_2samp(ens_a[:, j], ens_b[:, j]).statistic) for j in range(n - 1)]
    ks_max = max(ks_vals)

    if lambda_grid is None:
        lambda_grid = default_lambda_grid(n - 1, n_points=6)
    lt_rows = []
    lt_max_z = 0.0
    for lam in np.atleast_2d(lambda_grid):
        va, vb = np.exp(-ens_a @ lam), np.exp(-ens_b @ lam)
        ea, eb = MCEstimate.from_values(va), MCEstimate.from_values(vb)
        z = combine_z(ea, eb)
        lt_max_z = max(lt_max_z, z)
        lt_rows.append({"lambda": lam.tolist(), "A": ea.mean, "B": eb.mean, "z": z})

    dens_rows = []
    dens_max_z = 0.0
    if density_check and n <= 3:
        from .functions import exp_linear

        for lam in np.atleast_2d(lambda_grid)[1:3]:
            f = exp_linear(lam)
            val, tail = density.conditioned_box_integral(G_rk, a, r, f)
            emp = MCEstimate.from_values(f(ens_b))
            quad = MCEstimate(val, max(tail, 1e-8), 2)
            z = combine_z(emp, quad, extra_tol=1e-3)
            dens_max_z = max(dens_max_z, z)
            dens_rows.append({"lambda": lam.tolist(), "sample": emp.mean, "density": val, "z": z})

    passed = ks_max <= ks_threshold and lt_max_z <= 3.0 and dens_max_z <= 3.0
    return VerifyReport(
        "rayknight",
        passed,
        max(lt_max_z, dens_max_z),
        {
            "ks_per_coordinate": ks_vals,
            "ks_max": ks_max,
            "ks_threshold": ks_threshold,
            "laplace_rows": lt_rows,
            "density_rows": dens_rows,
            **meta,
        },
        seed,
    )


def verify_eisenbaum(
    model: MarkovModel,
    h,
    a: int,
    r: float,
    u: TestFunction,
    n_outer: int = 20_000,
    m_inner: int = 32,
    seed: int = 0,
) -> VerifyReport:
    """Shifted-field identity: phase average of the tilted test function against
    the inner path expectation, under uniform or componentwise killing.

    With scalar h the right side runs the reversed chain from a for an
    independent Exp(h) lifetime.  With vector h it evaluates the killed-path
    form sum_i h_i E_i[ integral of u against the sojourn time at a ].
    """
    if r <= 0:
        raise DomainError("the shifted-field identity needs r > 0")
    h_arr = np.asarray(h, dtype=float)
    uniform = h_arr.ndim == 0
    hvec = np.full(model.n, float(h_arr)) if uniform else h_arr
    Qh = killed_laplacian(model.Q, hvec)
    _, _, Askew, Ls, gamma = density._twisted_setup(Qh)

    rng = substream(seed, "eis-outer")
    phi, w = density._twisted_draw(Ls, Askew, n_outer, rng)
    shifted = np.abs(phi + np.sqrt(r)) ** 2  # (N, n)
    lhs_vals = ((phi[:, a] + np.sqrt(r)) / np.sqrt(r)) * u(shifted) * w
    lhs = MCEstimate(
        float(gamma * np.real(lhs_vals.mean())),
        float(gamma * np.real(lhs_vals).std(ddof=1) / np.sqrt(n_outer)),
        n_outer,
        float(abs(gamma * np.imag(lhs_vals.mean()))),
        (seed, "lhs"),
    )

    rng_in = substream(seed, "eis-inner")
    shifts = np.repeat(shifted, m_inner, axis=0)
    if uniform:
        paths = samplers.batch_local_times_killed(
            model.Q.T, hvec, a, n_outer * m_inner, rng_in
        )
        inner_vals = u(shifts + paths["local_times"]).reshape(n_outer, m_inner).mean(axis=1)
    else:
        inner_vals = np.zeros(n_outer)
        for i in np.nonzero(hvec > 0)[0]:
            out = samplers.batch_local_times_killed(
                model.Q,
                hvec,
                int(i),
                n_outer * m_inner,
                rng_in,
                sojourn_state=a,
                sojourn_fn=u,
                shifts=shifts,
            )
            inner_vals += hvec[i] * out["integrals"].reshape(n_outer, m_inner).mean(axis=1)
    rhs_vals = inner_vals * w
    rhs = MCEstimate(
        float(gamma * np.real(rhs_vals.mean())),
        float(gamma * np.real(rhs_vals).std(ddof=1) / np.sqrt(n_outer)),
        n_outer,
        float(abs(gamma * np.imag(rhs_vals.mean()))),
        (seed, "rhs"),
    )
    z = combine_z(lhs, rhs)
    return VerifyReport(
        "eisenbaum",
        z <= 3.0,
        z,
        {"lhs": lhs, "rhs": rhs, "uniform": bool(uniform), "u": u.name, "m_inner": m_inner},
        seed,
    )


def verify_ward(
    model: MarkovModel,
    h,
    a: int,
    b: int,
    u: TestFunction,
    n_samples: int = 100_000,
    seed: int = 0,
    t_max: float | None = None,
    truncation_tol: float = 1e-3,
) -> VerifyReport:
    """Killed-form integration-by-parts identities for the phase measure.

    First identity: the phase average of phi_a conj(phi_b) u(|phi|^2)
    equals the phase average of the forward killed path integral from b of
    u(|phi|^2 + L_t) along the local time at a.  The second identity swaps
    the field factors and runs the reversed chain.
    """
    hvec = np.asarray(h, dtype=float)
    Qh = killed_laplacian(model.Q, hvec)
    _, _, Askew, Ls, gamma = density._twisted_setup(Qh)
    rng = substream(seed, "ward-outer")
    phi, w = density._twisted_draw(Ls, Askew, n_samples, rng)
    labs = np.abs(phi) ** 2
    uvals = u(labs)

    def bracket(vals, tag):
        mean = gamma * vals.mean()
        return MCEstimate(
            float(np.real(mean)),
            float(gamma * np.real(vals).std(ddof=1) / np.sqrt(n_samples)),
            n_samples,
            float(abs(np.imag(mean))),
            (seed, tag),
        )

    lhs1 = bracket(phi[:, a] * np.conj(phi[:, b]) * uvals * w, "lhs1")
    lhs2 = bracket(phi[:, b] * np.conj(phi[:, a]) * uvals * w, "lhs2")

    def rhs(Q, tag):
        out = samplers.batch_local_times_killed(
            Q,
            hvec,
            b,
            n_samples,
            substream(seed, tag),
            sojourn_state=a,
            sojourn_fn=u,
            shifts=labs,
            t_max=t_max,
        )
        if t_max is not None and out["n_truncated"] / n_samples > truncation_tol:
            raise HorizonTooShort(
                f"{out['n_truncated']} of {n_samples} paths hit the {t_max} horizon"
            )
        return bracket(out["integrals"] * w, tag)

    rhs1 = rhs(model.Q, "ward-fwd")
    rhs2 = rhs(model.Q.T, "ward-rev")
    pairs = {"first_identity": combine_z(lhs1, rhs1), "second_identity": combine_z(lhs2, rhs2)}
    max_z = max(pairs.values())
    return VerifyReport(
        "ward",
        max_z <= 3.0,
        max_z,
        {"lhs1": lhs1, "rhs1": rhs1, "lhs2": lhs2, "rhs2": rhs2, "pairs": pairs, "a": a, "b": b},
        seed,
    )


# ---------------------------------------------------------------------------
# comparison inequalities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubStochasticFamily:
    """G_alpha = (s I - P_alpha)^{-1} along P_alpha = alpha P1 + (1-alpha) P0.

    P0 <= P1 entrywise, both sub-stochastic, s > 1; every entry of G_alpha
    is nondecreasing in alpha.  Sampling is by loop soup of the killed
    generator P_alpha - s I.
    """

    P0: np.ndarray
    P1: np.ndarray
    s: float

    def __post_init__(self):
        P0, P1 = np.asarray(self.P0, float), np.asarray(self.P1, float)
        object.__setattr__(self, "P0", P0)
        object.__setattr__(self, "P1", P1)
        if self.s <= 1:
            raise InvalidFamily("sub-stochastic interpolation needs s > 1")
        if np.any(P0 < 0) or np.any(P1 < P0):
            raise InvalidFamily("need 0 <= P0 <= P1 entrywise")
        if np.any(P0.sum(axis=1) > 1 + 1e-12) or np.any(P1.sum(axis=1) > 1 + 1e-12):
            raise InvalidFamily("rows of P0 and P1 must sum to at most 1")

    def kernel(self, alpha: float) -> np.ndarray:
        P = alpha * self.P1 + (1 - alpha) * self.P0
        return np.linalg.inv(self.s * np.eye(P.shape[0]) - P)

    def d_sign(self) -> np.ndarray:
        d = self.P1 - self.P0
        base = np.where(d > 0, 1, 0)
        # any positive increment spreads to every kernel entry through the
        # Neumann series, so a conservative constant sign matrix is all +1
        return np.ones_like(self.P0, dtype=int) if base.any() else np.zeros_like(base)

    def sample(self, alpha: float, size: int, rng) -> np.ndarray:
        P = alpha * self.P1 + (1 - alpha) * self.P0
        return samplers.sample_loop_soup_generator(P - self.s * np.eye(P.shape[0]), size, rng)


@dataclass(frozen=True)
class LinearKernelFamily:
    """Straight-line path (1-alpha) G0 + alpha G1 between symmetric kernels."""

    G0: np.ndarray
    G1: np.ndarray

    def kernel(self, alpha: float) -> np.ndarray:
        return (1 - alpha) * np.asarray(self.G0, float) + alpha * np.asarray(self.G1, float)

    def d_sign(self) -> np.ndarray:
        d = np.asarray(self.G1, float) - np.asarray(self.G0, float)
        return np.sign(np.where(np.abs(d) < 1e-14, 0.0, d)).astype(int)

    def sample(self, alpha: float, size: int, rng) -> np.ndarray:
        return samplers.sample_permanental_psd(self.kernel(alpha), size, rng)


def _kahane_conditions_ok(f: TestFunction, d_sign: np.ndarray, k: int) -> bool:
    n = d_sign.shape[0]
    kd = f.kdiag_sign(k)
    for i in range(n):
        if d_sign[i, i] > 0 and (kd is None or kd < 0):
            return False
        if d_sign[i, i] < 0 and (kd is None or kd > 0):
            return False
    off = f.offdiag_sign
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if d_sign[i, j] > 0 and (off is None or off < 0):
                return False
            if d_sign[i, j] < 0 and (off is None or off > 0):
                return False
    return True


def check_kahane(
    family,
    f: TestFunction,
    alpha_grid=None,
    n_samples: int = 100_000,
    seed: int = 0,
    k: int = 1,
    n_blocks: int = 50,
) -> VerifyReport:
    """Monotonicity of E f(l_alpha) along a kernel interpolation, with common
    random numbers across alpha.

    Every kernel on the grid must certify as an inverse M-matrix with a PD
    symmetric part, and the test function's declared condition signs must
    match the entrywise derivative signs of the family; both are enforced
    before any sampling.
    """
    if alpha_grid is None:
        alpha_grid = np.linspace(0.0, 1.0, 11)
    alpha_grid = np.asarray(alpha_grid, dtype=float)
    d_sign = family.d_sign()
    for alpha in alpha_grid:
        G = family.kernel(alpha)
        ok_pd, lam = kernels.has_pd_symmetric_part(G)
        if not (ok_pd and kernels.is_inverse_m_matrix(G)):
            raise InvalidFamily(f"kernel at alpha={alpha:g} failed certification (lambda={lam:g})")
    if not _kahane_conditions_ok(f, d_sign, k):
        raise DomainError(
            f"test function {f.name} does not satisfy the sign conditions for this family"
        )
    probe = substream(seed, "kahane-signs").exponential(1.0, size=(256, f.n))
    if not check_sign_declarations(f, probe, k=k):
        raise DomainError(f"declared signs of {f.name} failed the numerical probe")

    block = max(2, n_samples // n_blocks)
    n_blocks = (n_samples + block - 1) // block
    means = np.zeros((n_blocks, alpha_grid.size))
    for bi in range(n_blocks):
        size = min(block, n_samples - bi * block)
        for ai, alpha in enumerate(alpha_grid):
            rng = substream(seed, "kahane", bi)  # identical stream for every alpha
            X = family.sample(alpha, size, rng)
            for _ in range(k - 1):
                X = X + family.sample(alpha, size, rng)
            means[bi, ai] = float(np.mean(f(X)))

    est = means.mean(axis=0)
    se = means.std(axis=0, ddof=1) / np.sqrt(n_blocks)
    diffs = means[:, 1:] - means[:, :-1]
    dmean = diffs.mean(axis=0)
    dse = diffs.std(axis=0, ddof=1) / np.sqrt(n_blocks)
    z_adj = np.where(dse > 0, dmean / np.where(dse > 0, dse, 1.0), 0.0)
    max_violation = float(max(0.0, -z_adj.min())) if z_adj.size else 0.0
    indep_var = se[1:] ** 2 + se[:-1] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        crn_ratio = np.where(indep_var > 0, (dse**2) / indep_var, 0.0)
    monotone_ok = max_violation <= 3.0
    return VerifyReport(
        "kahane",
        monotone_ok,
        max_violation,
        {
            "alpha_grid": alpha_grid.tolist(),
            "estimates": est.tolist(),
            "stderr": se.tolist(),
            "adjacent_z": z_adj.tolist(),
            "crn_variance_ratio": crn_ratio.tolist(),
            "k": k,
            "f": f.name,
        },
        seed,
    )


def check_slepian(
    G0,
    G1,
    n_samples: int = 100_000,
    seed: int = 0,
    x_grid=None,
    s_grid=None,
    lambda_grid=None,
    tol: float = 1e-12,
) -> VerifyReport:
    """Supremum-tail and orthant dominance between comparable kernels.

    Preconditions: G1_ii <= G0_ii and G1_ij >= G0_ij off the diagonal.
    The supremum of the G0 vector must stochastically dominate that of the
    G1 vector; when the diagonals agree the orthant probabilities compare
    as well.  The diagonal-rescaled kernel diag(c) G0 is validated against
    its Laplace transform as the internal consistency leg.
    """
    G0 = np.asarray(G0, dtype=float)
    G1 = np.asarray(G1, dtype=float)
    n = G0.shape[0]
    offmask = ~np.eye(n, dtype=bool)
    if np.any(np.diag(G1) > np.diag(G0) + tol) or np.any(G1[offmask] < G0[offmask] - tol):
        raise InvalidPair("need G1 <= G0 on the diagonal and G1 >= G0 off it")
    equal_diag = np.allclose(np.diag(G0), np.diag(G1), atol=1e-12)

    l0 = samplers.sample_permanental_psd(G0, n_samples, substream(seed, "slepian-0"))
    l1 = samplers.sample_permanental_psd(G1, n_samples, substream(seed, "slepian-1"))
    sup0, sup1 = l0.max(axis=1), l1.max(axis=1)
    if x_grid is None:
        x_grid = np.quantile(sup1, [0.1, 0.25, 0.5, 0.75, 0.9, 0.97])
    sup_rows, worst = [], 0.0
    for x in np.atleast_1d(x_grid):
        p0 = MCEstimate.from_values(sup0 >= x)
        p1 = MCEstimate.from_values(sup1 >= x)
        margin = (p0.mean - p1.mean) / max(np.hypot(p0.stderr, p1.stderr), 1e-300)
        worst = max(worst, -margin)
        sup_rows.append({"x": float(x), "P0": p0.mean, "P1": p1.mean, "z_margin": margin})

    orthant_rows = []
    if equal_diag:
        if s_grid is None:
            qs = np.quantile(l1, [0.3, 0.5, 0.7, 0.9], axis=0)
            s_grid = list(qs)
        for s in s_grid:
            s = np.asarray(s, dtype=float)
            p1 = MCEstimate.from_values(np.all(l1 <= s[None, :], axis=1))
            p0 = MCEstimate.from_values(np.all(l0 <= s[None, :], axis=1))
            margin = (p1.mean - p0.mean) / max(np.hypot(p0.stderr, p1.stderr), 1e-300)
            worst = max(worst, -margin)
            orthant_rows.append({"s": s.tolist(), "P1": p1.mean, "P0": p0.mean, "z_margin": margin})

    c = np.diag(G1) / np.diag(G0)
    scaled = c[None, :] * l0
    CG0 = c[:, None] * G0
    if lambda_grid is None:
        lambda_grid = default_lambda_grid(n, n_points=5)
    scale_rows, lt_max = [], 0.0
    for lam in np.atleast_2d(lambda_grid):
        emp = MCEstimate.from_values(np.exp(-scaled @ lam))
        exact = density.laplace_transform_exact(CG0, lam)
        z = 0.0 if emp.stderr == 0 else abs(emp.mean - exact) / emp.stderr
        lt_max = max(lt_max, z)
        scale_rows.append({"lambda": lam.tolist(), "empirical": emp.mean, "exact": exact, "z": z})

    passed = worst <= 3.0 and lt_max <= 3.0
    return VerifyReport(
        "slepian",
        passed,
        max(worst, lt_max),
        {
            "sup_rows": sup_rows,
            "orthant_rows": orthant_rows,
            "scaled_kernel_rows": scale_rows,
            "equal_diagonal": bool(equal_diag),
        },
        seed,
    )


# ---------------------------------------------------------------------------
# inverse-local-time tail and cover time
# ---------------------------------------------------------------------------


def _tail_parameters(model: MarkovModel, a: int):
    keep = [i for i in range(model.n) if i != a]
    Q_sub = model.Q[np.ix_(keep, keep)]
    S_sub = kernels.symmetric_part(Q_sub)
    cov = 0.5 * np.linalg.inv(-S_sub)
    sigma2 = float(np.max(np.diag(cov)))
    G_sub = np.linalg.inv(-Q_sub)
    gamma = kernels.gamma_symmetrization(G_sub)
    return keep, cov, sigma2, gamma


def check_tail_bound(
    model: MarkovModel,
    a: int,
    r: float,
    lambda_grid=(1.0, 2.0, 4.0, 8.0),
    n_samples: int = 100_000,
    seed: int = 0,
) -> VerifyReport:
    """Exceedance of the stationary-weighted inverse-local-time field against
    the symmetrized envelope 5 gamma exp(-lambda/8)."""
    keep, cov, sigma2, gamma = _tail_parameters(model, a)
    sigma = np.sqrt(sigma2)
    L = samplers.batch_inverse_local_time(model.Q, a, r, n_samples, substream(seed, "tail"))
    weighted = L @ model.pi
    rows, worst = [], 0.0
    for lam in lambda_grid:
        c = (np.sqrt(r) + np.sqrt(lam) * sigma) ** 2
        p = MCEstimate.from_values(weighted >= c)
        bound = 5.0 * gamma * np.exp(-lam / 8.0)
        margin = (bound + 3 * p.stderr - p.mean) / max(p.stderr, 1e-300)
        worst = max(worst, -(margin))
        rows.append(
            {
                "lambda": float(lam),
                "threshold": float(c),
                "empirical": p.mean,
                "stderr": p.stderr,
                "bound": float(bound),
                "tightness": p.mean / bound if bound > 0 else 0.0,
            }
        )
    passed = all(row["empirical"] <= row["bound"] + 3 * row["stderr"] for row in rows)
    return VerifyReport(
        "tail",
        passed,
        worst,
        {"rows": rows, "sigma2": sigma2, "gamma": gamma, "r": r, "a": a},
        seed,
    )


def estimate_cover_time(
    model: MarkovModel,
    n_samples: int = 20_000,
    seed: int = 0,
    a: int = 0,
    n_gauss: int = 200_000,
    threads: int = 1,
) -> VerifyReport:
    """Cover-time estimates, the cover/cover-and-return sandwich, and the
    symmetrization-bound ratio.

    The bound scale M^2 + sigma^2 log gamma + sigma^2 uses the Gaussian
    supremum mean M for covariance half the inverse symmetrized sub-block,
    the largest diagonal sigma^2 of that covariance, and the symmetrization
    constant of the hit-killing kernel at ``a``; the asymptotic bound has no
    finite-n constant, so the ratio is reported, not asserted.
    """
    n = model.n
    per_start = []
    for start in range(n):
        out = map_blocks(
            n_samples,
            lambda i, m, rng, s=start: (
                lambda d: (d["tau_cov"], d["tau_cov_plus"], d["tau_hit"])
            )(samplers.batch_cover_functionals(model, s, m, rng)),
            seed,
            f"cover-{start}",
            threads,
        )
        per_start.append(out)
    cov_means = [MCEstimate.from_values(p[0]) for p in per_start]
    covp_means = [MCEstimate.from_values(p[1]) for p in per_start]
    i_max = int(np.argmax([e.mean for e in cov_means]))
    t_cov = cov_means[i_max]
    t_cov_plus = covp_means[int(np.argmax([e.mean for e in covp_means]))]
    z_lower = (t_cov_plus.mean - t_cov.mean) / max(np.hypot(t_cov.stderr, t_cov_plus.stderr), 1e-300)
    z_upper = (2 * t_cov.mean - t_cov_plus.mean) / max(
        np.hypot(2 * t_cov.stderr, t_cov_plus.stderr), 1e-300
    )
    sandwich_ok = z_lower >= -3.0 and z_upper >= -3.0

    t_hit = max(
        float(p[2][:, j].mean()) for p in per_start for j in range(n)
    )

    keep, cov, sigma2, gamma = _tail_parameters(model, a)
    C = np.linalg.cholesky(cov)
    eta = substream(seed, "cover-gauss").standard_normal((n_gauss, n - 1)) @ C.T
    sup_eta = eta.max(axis=1)
    M = MCEstimate.from_values(sup_eta)
    scale = M.mean**2 + sigma2 * np.log(gamma) + sigma2
    ratio = t_cov.mean / scale if scale > 0 else float("inf")
    matthews_scale = t_hit * np.log(n)
    return VerifyReport(
        "cover",
        sandwich_ok,
        max(0.0, -min(z_lower, z_upper)),
        {
            "t_cov": t_cov,
            "t_cov_plus": t_cov_plus,
            "per_start_cover": [e.mean for e in cov_means],
            "sandwich_z": {"lower": z_lower, "upper": z_upper},
            "gauss_sup_mean": M,
            "sigma2": sigma2,
            "gamma": gamma,
            "bound_scale": scale,
            "ratio": ratio,
            "t_hit": t_hit,
            "matthews_scale": matthews_scale,
        },
        seed,
    )
