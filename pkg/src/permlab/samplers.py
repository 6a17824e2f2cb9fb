"""Samplers for permanental vectors, loop-soup occupation fields, and chain paths.

Three exact routes to a 1-permanental vector are implemented:

* squared Gaussians, for symmetric positive definite kernels:
  l = U^2 + V^2 with U, V i.i.d. N(0, G/2);
* the conditioned variant of the same construction, realizing the law of
  the remaining coordinates given one coordinate's value;
* a Poisson gas of loops of a killed chain, for any generator with
  positive exit rates and nonnegative off-diagonal jump rates, whose
  occupation field has kernel (-Q_kill)^{-1}.  Trivial (jump-free) loops
  at a state with exit rate q contribute an Exp(q) total duration; loops
  with k >= 2 jumps are drawn from a Poisson number with mass
  sum_k tr(Ptil^k)/k, length-k skeletons are cycle bridges of the jump
  matrix Ptil, and every visit carries an Exp(q_state) holding time.

Approximate conditioning for non-reversible kernels is by band rejection
on the conditioned coordinate.  Path functionals (local times, inverse
local times, cover and hitting functionals, sojourn integrals) come from
vectorized jump-chain simulation; all batches advance in lockstep under a
single substream so results are reproducible and thread-count free.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BandTooNarrow,
    DomainError,
    InvalidKilledChain,
    NumericalError,
)
from .kernels import spectral_radius
from .markov import MarkovModel, killed_laplacian, ray_knight_kernel

__all__ = [
    "SampleBatch",
    "Trajectory",
    "sample_permanental_psd",
    "sample_k_permanental",
    "sample_conditioned_chi2",
    "LoopSoupTables",
    "sample_loop_soup_generator",
    "sample_loop_soup",
    "sample_conditioned_rejection",
    "simulate_ctmc",
    "batch_local_times_killed",
    "batch_inverse_local_time",
    "batch_cover_functionals",
    "inverse_local_time_field",
    "cover_and_hitting_functionals",
]

_MAX_SWEEPS = 1_000_000


@dataclass(frozen=True)
class SampleBatch:
    """A batch of nonnegative vectors with provenance and the stream that made it."""

    values: np.ndarray  # (N, n)
    provenance: str
    seed: tuple = ()
    meta: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Trajectory:
    """One chain path: jump instants, visited states, and final local times."""

    jump_times: np.ndarray
    states: np.ndarray
    terminal: str
    local_time: np.ndarray

    def elapsed(self) -> float:
        return float(self.local_time.sum())


# ---------------------------------------------------------------------------
# Gaussian-based samplers
# ---------------------------------------------------------------------------


def _chol_psd(G) -> np.ndarray:
    G = np.asarray(G, dtype=float)
    if not np.allclose(G, G.T, atol=1e-10 * max(1.0, float(np.abs(G).max()))):
        raise DomainError("squared-Gaussian sampling needs a symmetric kernel")
    try:
        return np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise DomainError(f"kernel is not positive definite: {exc}") from exc


def sample_permanental_psd(G, n_samples: int, rng) -> np.ndarray:
    """Exact 1-permanental batch for symmetric PD G: (N, n) nonnegative."""
    L = _chol_psd(G)
    n = L.shape[0]
    Z = rng.standard_normal((2 * n_samples, n))
    X = Z @ L.T / np.sqrt(2.0)
    return X[:n_samples] ** 2 + X[n_samples:] ** 2


def sample_k_permanental(G, k: int, n_samples: int, rng, base_sampler=None) -> np.ndarray:
    """Sum of k independent 1-permanental batches with the same kernel."""
    if k < 1:
        raise DomainError("k must be a positive integer")
    draw = base_sampler or sample_permanental_psd
    out = draw(G, n_samples, rng)
    for _ in range(k - 1):
        out = out + draw(G, n_samples, rng)
    return out


def sample_conditioned_chi2(G, a: int, r: float, n_samples: int, rng) -> np.ndarray:
    """Law of the off-a coordinates given coordinate a equals r (symmetric PD G).

    Realized as (U + sqrt(r) m)^2 + V^2 with U, V i.i.d. N(0, (1/2)(-Q_**)^{-1})
    and m = -Q_**^{-1} Q_{*a}; returns (N, n-1) in the original coordinate
    order with a removed.
    """
    from .density import chi2_conditional_params

    if r < 0:
        raise DomainError("r must be nonnegative")
    mean, cov = chi2_conditional_params(G, a, r)  # mean = sqrt(r) m, cov = (-Q_**)^{-1}
    L = np.linalg.cholesky(cov / 2.0)
    m = cov.shape[0]
    Z = rng.standard_normal((2 * n_samples, m))
    X = Z @ L.T
    U = X[:n_samples] + mean[None, :]
    V = X[n_samples:]
    return U**2 + V**2


# ---------------------------------------------------------------------------
# loop soup
# ---------------------------------------------------------------------------


def _killed_jump_chain(Q_kill) -> tuple[np.ndarray, np.ndarray]:
    Q_kill = np.asarray(Q_kill, dtype=float)
    q = -np.diag(Q_kill)
    if np.any(q <= 0):
        raise DomainError("killed generator needs positive exit rates on the diagonal")
    off = Q_kill - np.diag(np.diag(Q_kill))
    if off.min(initial=0.0) < -1e-12 * max(1.0, float(np.abs(Q_kill).max())):
        raise DomainError("killed generator needs nonnegative off-diagonal rates")
    Ptil = np.clip(off, 0.0, None) / q[:, None]
    return q, Ptil


@dataclass(frozen=True)
class LoopSoupTables:
    """Precomputed jump-chain tables reused across batches."""

    q: np.ndarray
    Ptil: np.ndarray
    powers: list
    lengths: np.ndarray
    length_probs: np.ndarray
    mass: float
    k_max: int

    @classmethod
    def build(cls, Q_kill, neglect: float = 1e-12) -> "LoopSoupTables":
        q, Ptil = _killed_jump_chain(Q_kill)
        n = q.size
        rho = spectral_radius(Ptil)
        if rho >= 1.0:
            raise InvalidKilledChain(f"jump matrix has spectral radius {rho:.6f} >= 1")
        if n == 1 or rho == 0.0:
            return cls(q, Ptil, [np.eye(n)], np.zeros(0, dtype=int), np.zeros(0), 0.0, 1)
        k_max = 2
        while n * rho ** (k_max + 1) / ((k_max + 1) * (1.0 - rho)) >= neglect:
            k_max += 1
            if k_max > 10_000:
                raise InvalidKilledChain("loop-length cap exploded; chain is too close to critical")
        powers = [np.eye(n)]
        for _ in range(k_max):
            powers.append(powers[-1] @ Ptil)
        masses = np.array([np.trace(powers[k]) / k for k in range(2, k_max + 1)])
        masses = np.clip(masses, 0.0, None)
        mass = float(masses.sum())
        exact = -np.linalg.slogdet(np.eye(n) - Ptil)[1]
        if abs(mass - exact) > 1e-9 * max(1.0, abs(exact)) + 10 * neglect:
            raise NumericalError(
                f"loop mass mismatch: truncated {mass:.12g} vs -log det {exact:.12g}"
            )
        lengths = np.arange(2, k_max + 1)
        probs = masses / mass if mass > 0 else masses
        return cls(q, Ptil, powers, lengths, probs, mass, k_max)


def _rows_categorical(W: np.ndarray, rng) -> np.ndarray:
    """One categorical draw per row of the nonnegative weight matrix W."""
    cum = np.cumsum(W, axis=1)
    total = cum[:, -1]
    if np.any(total <= 0):
        raise NumericalError("bridge weights vanished; inconsistent jump tables")
    u = rng.random(W.shape[0]) * total
    idx = (u[:, None] >= cum).sum(axis=1)
    return np.minimum(idx, W.shape[1] - 1)


def sample_loop_soup_generator(
    Q_kill, n_samples: int, rng, tables: LoopSoupTables | None = None
) -> np.ndarray:
    """Occupation field of the unit-intensity loop soup of a killed chain.

    Exact sampler for the 1-permanental vector with kernel (-Q_kill)^{-1};
    (N, n) nonnegative.
    """
    tables = tables or LoopSoupTables.build(Q_kill)
    q, Ptil, powers = tables.q, tables.Ptil, tables.powers
    n = q.size
    occ = rng.exponential(1.0 / q, size=(n_samples, n))
    if tables.mass <= 0:
        return occ
    counts = rng.poisson(tables.mass, size=n_samples)
    total = int(counts.sum())
    if total == 0:
        return occ
    sample_idx = np.repeat(np.arange(n_samples), counts)
    k_draw = tables.lengths[
        _rows_categorical(np.broadcast_to(tables.length_probs, (total, tables.lengths.size)), rng)
    ]
    for k in np.unique(k_draw):
        sel = np.nonzero(k_draw == k)[0]
        owners = sample_idx[sel]
        cnt = sel.size
        base_w = np.clip(np.diag(powers[k]), 0.0, None)
        x1 = _rows_categorical(np.broadcast_to(base_w, (cnt, n)), rng)
        cur = x1
        np.add.at(occ, (owners, cur), rng.exponential(1.0 / q[cur]))
        for step in range(1, k):
            # choose position step+1: weight Ptil[cur, y] * (Ptil^(k-step))[y, x1]
            W = Ptil[cur, :] * powers[k - step][:, x1].T
            cur = _rows_categorical(W, rng)
            np.add.at(occ, (owners, cur), rng.exponential(1.0 / q[cur]))
    return occ


def sample_loop_soup(model: MarkovModel, h, n_samples: int, rng) -> np.ndarray:
    """Loop-soup occupation field for the model killed at rates h (kernel G_h)."""
    Qh = killed_laplacian(model.Q, np.asarray(h, dtype=float))
    return sample_loop_soup_generator(Qh, n_samples, rng)


def sample_conditioned_rejection(
    model: MarkovModel,
    a: int,
    r: float,
    h: float,
    band: float,
    n_samples: int,
    rng,
    rate_floor: float = 1e-6,
    max_proposals: int = 100_000_000,
):
    """Band rejection for {l : |l_a - r| <= band} under the node-killed kernel.

    Proposals are loop-soup draws for the kernel (h e_a e_a^T - Q)^{-1},
    whose a-marginal is Exp(1/h), so the acceptance rate is predictable.
    Returns (samples (N, n), acceptance_rate).
    """
    if band <= 0:
        raise DomainError("band must be positive")
    gk = ray_knight_kernel(model, a, h)
    hvec = np.zeros(model.n)
    hvec[a] = h
    Q_kill = model.Q - np.diag(hvec)
    tables = LoopSoupTables.build(Q_kill)
    predicted = np.exp(-h * max(r - band, 0.0)) - np.exp(-h * (r + band))
    chunk = int(min(max(1.3 * n_samples / max(predicted, 1e-12), 10_000), 2_000_000))
    out = np.empty((n_samples, model.n))
    got = 0
    accepted = 0
    proposed = 0
    while got < n_samples:
        draw = sample_loop_soup_generator(Q_kill, chunk, rng, tables=tables)
        proposed += chunk
        keep = np.abs(draw[:, a] - r) <= band
        accepted += int(keep.sum())
        take = min(int(keep.sum()), n_samples - got)
        out[got : got + take] = draw[keep][:take]
        got += take
        if proposed >= 100_000 and accepted / proposed < rate_floor:
            raise BandTooNarrow(
                f"acceptance rate {accepted / proposed:.2e} below floor {rate_floor:.1e}"
            )
        if proposed > max_proposals:
            raise BandTooNarrow(f"exceeded {max_proposals} proposals with {got} acceptances")
    return out, accepted / proposed


# ---------------------------------------------------------------------------
# vectorized jump-chain simulation
# ---------------------------------------------------------------------------


def _jump_tables(Q) -> tuple[np.ndarray, np.ndarray]:
    """Exit rates and cumulative jump distributions for a conservative generator."""
    Q = np.asarray(Q, dtype=float)
    q = -np.diag(Q)
    if np.any(q <= 0):
        raise DomainError("every state needs a positive exit rate")
    jump = np.clip(Q - np.diag(np.diag(Q)), 0.0, None) / q[:, None]
    return q, np.cumsum(jump, axis=1)


def _next_states(cum, states, rng) -> np.ndarray:
    u = rng.random(states.size)
    c = cum[states]
    idx = (u[:, None] >= c).sum(axis=1)
    return np.minimum(idx, cum.shape[1] - 1)


def batch_local_times_killed(
    Q,
    h,
    start: int,
    n_paths: int,
    rng,
    *,
    sojourn_state: int | None = None,
    sojourn_fn=None,
    shifts: np.ndarray | None = None,
    gl_nodes: int = 24,
    t_max: float | None = None,
):
    """Local times of the killed chain, with optional sojourn integrals.

    The chain with rate matrix Q is killed at rates h (explicit cemetery
    jumps).  When ``sojourn_state`` and ``sojourn_fn`` are given, the return
    includes for each path the pathwise integral of
    ``sojourn_fn(L_t + shift)`` against the local time at that state over
    the killed lifetime; Gauss-Legendre nodes resolve each sojourn exactly
    for smooth integrands.

    Returns dict with 'local_times' (B, n), optionally 'integrals' (B,),
    and 'n_truncated' when t_max is set.
    """
    Q = np.asarray(Q, dtype=float)
    h = np.asarray(h, dtype=float)
    n = Q.shape[0]
    Qk = Q - np.diag(h)
    q_tot = -np.diag(Qk)
    if np.any(q_tot <= 0):
        raise DomainError("killed chain needs positive total exit rates")
    moves = np.concatenate([np.clip(Q - np.diag(np.diag(Q)), 0.0, None), h[:, None]], axis=1)
    cum = np.cumsum(moves / q_tot[:, None], axis=1)

    L = np.zeros((n_paths, n))
    elapsed = np.zeros(n_paths)
    integrals = np.zeros(n_paths) if sojourn_fn is not None else None
    states = np.full(n_paths, start, dtype=np.int64)
    alive = np.arange(n_paths)
    n_truncated = 0
    if sojourn_fn is not None:
        gx, gw = np.polynomial.legendre.leggauss(gl_nodes)
    sweeps = 0
    while alive.size:
        sweeps += 1
        if sweeps > _MAX_SWEEPS:
            raise NumericalError("path simulation exceeded the sweep cap")
        dwell = rng.exponential(1.0 / q_tot[states])
        if t_max is not None:
            over = elapsed[alive] + dwell > t_max
            dwell = np.where(over, t_max - elapsed[alive], dwell)
        if sojourn_fn is not None:
            at_a = states == sojourn_state
            if np.any(at_a):
                rows = alive[at_a]
                d = dwell[at_a]
                pts = 0.5 * d[:, None] * (gx[None, :] + 1.0)  # (m, gl)
                base = L[rows][:, None, :] + (shifts[rows][:, None, :] if shifts is not None else 0.0)
                eval_pts = np.repeat(base, gl_nodes, axis=1).reshape(-1, n)
                eval_pts[:, sojourn_state] += pts.ravel()
                fv = np.asarray(sojourn_fn(eval_pts), dtype=float).reshape(-1, gl_nodes)
                integrals[rows] += 0.5 * d * (fv @ gw)
        L[alive, states] += dwell
        elapsed[alive] += dwell
        if t_max is not None:
            timed_out = elapsed[alive] >= t_max
            n_truncated += int(np.count_nonzero(timed_out))
        else:
            timed_out = np.zeros(alive.size, dtype=bool)
        nxt = _next_states(cum, states, rng)
        stay = (nxt < n) & ~timed_out
        alive = alive[stay]
        states = nxt[stay]
    out = {"local_times": L}
    if integrals is not None:
        out["integrals"] = integrals
    if t_max is not None:
        out["n_truncated"] = n_truncated
    return out


def batch_local_times_horizon(Q, start: int, horizons: np.ndarray, rng) -> np.ndarray:
    """Local times of the recurrent chain at per-path fixed horizons."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    q, cum = _jump_tables(Q)
    B = horizons.size
    L = np.zeros((B, n))
    elapsed = np.zeros(B)
    states = np.full(B, start, dtype=np.int64)
    alive = np.arange(B)
    sweeps = 0
    while alive.size:
        sweeps += 1
        if sweeps > _MAX_SWEEPS:
            raise NumericalError("path simulation exceeded the sweep cap")
        dwell = rng.exponential(1.0 / q[states])
        room = horizons[alive] - elapsed[alive]
        clipped = np.minimum(dwell, room)
        L[alive, states] += clipped
        elapsed[alive] += clipped
        done = dwell >= room
        nxt = _next_states(cum, states, rng)
        alive = alive[~done]
        states = nxt[~done]
    return L


def batch_inverse_local_time(Q, a: int, r: float, n_paths: int, rng) -> np.ndarray:
    """Local-time vectors at the first instant the local time at a reaches r.

    Paths start at a; column a of the result equals r exactly.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if r < 0:
        raise DomainError("r must be nonnegative")
    q, cum = _jump_tables(Q)
    L = np.zeros((n_paths, n))
    if r == 0:
        return L
    states = np.full(n_paths, a, dtype=np.int64)
    alive = np.arange(n_paths)
    sweeps = 0
    while alive.size:
        sweeps += 1
        if sweeps > _MAX_SWEEPS:
            raise NumericalError("path simulation exceeded the sweep cap")
        dwell = rng.exponential(1.0 / q[states])
        at_a = states == a
        room = r - L[alive[at_a], a]
        hit = np.zeros(alive.size, dtype=bool)
        hit[at_a] = dwell[at_a] >= room
        dwell[at_a] = np.minimum(dwell[at_a], room)
        L[alive, states] += dwell
        L[alive[hit], a] = r  # exact by construction, not up to accumulation error
        nxt = _next_states(cum, states, rng)
        alive = alive[~hit]
        states = nxt[~hit]
    return L


def batch_cover_functionals(model: MarkovModel, start: int, n_paths: int, rng) -> dict:
    """Cover, cover-and-return, and hitting functionals from one path per replicate.

    All functionals are stationary-weighted local-time totals
    sum_i pi_i L^i at the relevant instants: first full coverage, first
    return to the start after coverage, and first hit of each state.
    """
    n = model.n
    q, cum = _jump_tables(model.Q)
    pi = model.pi
    wsum = np.zeros(n_paths)
    visited = np.zeros((n_paths, n), dtype=bool)
    visited[:, start] = True
    tau_hit = np.zeros((n_paths, n))
    tau_cov = np.zeros(n_paths)
    tau_cov_plus = np.zeros(n_paths)
    covered = np.zeros(n_paths, dtype=bool)
    states = np.full(n_paths, start, dtype=np.int64)
    alive = np.arange(n_paths)
    sweeps = 0
    while alive.size:
        sweeps += 1
        if sweeps > _MAX_SWEEPS:
            raise NumericalError("path simulation exceeded the sweep cap")
        dwell = rng.exponential(1.0 / q[states])
        wsum[alive] += pi[states] * dwell
        nxt = _next_states(cum, states, rng)
        first = ~visited[alive, nxt]
        rows = alive[first]
        tau_hit[rows, nxt[first]] = wsum[rows]
        visited[rows, nxt[first]] = True
        newly_cov = first & visited[alive].all(axis=1) & ~covered[alive]
        tau_cov[alive[newly_cov]] = wsum[alive[newly_cov]]
        covered[alive[newly_cov]] = True
        finish = covered[alive] & (nxt == start)
        tau_cov_plus[alive[finish]] = wsum[alive[finish]]
        alive = alive[~finish]
        states = nxt[~finish]
    return {"tau_cov": tau_cov, "tau_cov_plus": tau_cov_plus, "tau_hit": tau_hit}


def inverse_local_time_field(model: MarkovModel, a: int, r: float, rng) -> np.ndarray:
    """One local-time vector at the inverse local time tau_inv(r) from state a."""
    return batch_inverse_local_time(model.Q, a, r, 1, rng)[0]


def cover_and_hitting_functionals(model: MarkovModel, start: int, rng) -> dict:
    """Single-path cover/cover-and-return/hitting functionals."""
    out = batch_cover_functionals(model, start, 1, rng)
    return {k: v[0] for k, v in out.items()}


def simulate_ctmc(model: MarkovModel, start: int, stop, rng) -> Trajectory:
    """Single-trajectory jump-chain simulation with an explicit stopping rule.

    ``stop`` is a tuple: ('horizon', T) | ('local_time_at', a, r) |
    ('covered',) | ('hit', j) | ('killed', h_vector).
    """
    kind = stop[0]
    n = model.n
    Q = model.Q
    if kind == "killed":
        h = np.asarray(stop[1], dtype=float)
        if h.shape != (n,) or np.any(h < 0) or h.sum() <= 0:
            raise DomainError("killed stop needs nonnegative rates with positive sum")
        q_tot = -np.diag(Q) + h
        moves = np.concatenate([np.clip(Q - np.diag(np.diag(Q)), 0.0, None), h[:, None]], axis=1)
        cum = np.cumsum(moves / q_tot[:, None], axis=1)
    else:
        q_tot, cum = None, None
        q, cum_jump = _jump_tables(Q)
    L = np.zeros(n)
    t = 0.0
    s = start
    jump_times = [0.0]
    states = [start]
    visited = np.zeros(n, dtype=bool)
    visited[start] = True
    for _ in range(_MAX_SWEEPS):
        if kind == "killed":
            dwell = rng.exponential(1.0 / q_tot[s])
        else:
            dwell = rng.exponential(1.0 / q[s])
        if kind == "horizon" and t + dwell >= stop[1]:
            L[s] += stop[1] - t
            return Trajectory(np.array(jump_times), np.array(states), "horizon", L)
        if kind == "local_time_at" and s == stop[1]:
            room = stop[2] - L[s]
            if dwell >= room:
                L[s] += room
                return Trajectory(np.array(jump_times), np.array(states), "stopped", L)
        L[s] += dwell
        t += dwell
        if kind == "killed":
            u = rng.random()
            nxt = int(np.searchsorted(cum[s], u, side="right"))
            nxt = min(nxt, n)
            if nxt == n:
                return Trajectory(np.array(jump_times), np.array(states), "killed", L)
        else:
            u = rng.random()
            nxt = int(np.searchsorted(cum_jump[s], u, side="right"))
            nxt = min(nxt, n - 1)
        jump_times.append(t)
        states.append(nxt)
        visited[nxt] = True
        if kind == "hit" and nxt == stop[1]:
            return Trajectory(np.array(jump_times), np.array(states), "stopped", L)
        if kind == "covered" and visited.all():
            return Trajectory(np.array(jump_times), np.array(states), "stopped", L)
        s = nxt
    raise NumericalError("single-path simulation exceeded the sweep cap")
