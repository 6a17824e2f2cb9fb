"""Markov models, Laplacians, killed generators, and their Green kernels.

Conventions.  P is a row-stochastic transition matrix of an irreducible
discrete-time chain with stationary distribution pi.  The rate matrix used
throughout is Q = diag(pi) (P - I), whose continuous-time chain has uniform
stationary law; both row and column sums of Q vanish.  Killing at rates
h >= 0 (componentwise, sum > 0) gives the generator Q_h = Q - diag(h), and
G_h = (-Q_h)^{-1} is the associated Green kernel: entrywise nonnegative,
inverse M-matrix, positive definite symmetric part.  Deleting the row and
column of a state a instead kills the chain on hitting a.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from . import kernels
from .errors import (
    DomainError,
    InvalidRate,
    IrreducibleViolation,
    NumericalError,
    ParseError,
    SingularKilling,
)
from .matio import matrix_from_obj, read_matrix

__all__ = [
    "MarkovModel",
    "GreenKernel",
    "stationary_distribution",
    "laplacian",
    "killed_laplacian",
    "green_kernel",
    "time_reversal",
    "additive_reversibilization",
    "hit_killing_kernel",
    "ray_knight_kernel",
    "model_from_obj",
    "model_from_file",
]


def _check_stochastic(P: np.ndarray, tol: float = 1e-12) -> None:
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DomainError(f"P must be square, got {P.shape}")
    if np.any(P < -tol):
        raise DomainError("P has negative entries")
    rowsum = P.sum(axis=1)
    if np.max(np.abs(rowsum - 1.0)) > max(tol, 1e-12):
        raise DomainError(f"rows of P must sum to 1 (max deviation {np.max(np.abs(rowsum-1)):.3e})")


def _check_irreducible(P: np.ndarray) -> None:
    support = (P > 0).astype(int)
    n_comp, _ = connected_components(support, directed=True, connection="strong")
    if n_comp != 1:
        raise IrreducibleViolation(
            f"support graph of P has {n_comp} strongly connected components"
        )


def stationary_distribution(P) -> np.ndarray:
    """Solve pi^T P = pi^T, sum(pi) = 1 as a dense linear system.

    One balance equation is replaced by the normalization row, which is
    exact at this scale.  Raises IrreducibleViolation for reducible P.
    """
    P = np.asarray(P, dtype=float)
    _check_stochastic(P)
    _check_irreducible(P)
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"stationary solve failed: {exc}") from exc
    if np.any(pi <= 0):
        raise NumericalError("stationary distribution has nonpositive entries")
    return pi


def laplacian(P, pi) -> np.ndarray:
    """Q = diag(pi) (P - I); rows and columns sum to zero."""
    P = np.asarray(P, dtype=float)
    pi = np.asarray(pi, dtype=float)
    return pi[:, None] * (P - np.eye(P.shape[0]))


@dataclass(frozen=True)
class MarkovModel:
    """Irreducible chain: transition matrix, stationary law, rate matrix."""

    P: np.ndarray
    pi: np.ndarray
    Q: np.ndarray
    labels: tuple = ()

    @classmethod
    def from_transition_matrix(cls, P, labels=None) -> "MarkovModel":
        P = np.asarray(P, dtype=float)
        pi = stationary_distribution(P)
        Q = laplacian(P, pi)
        if labels is None:
            labels = tuple(range(P.shape[0]))
        return cls(P=P, pi=pi, Q=Q, labels=tuple(labels))

    @property
    def n(self) -> int:
        return self.P.shape[0]

    def is_reversible(self, tol: float = 1e-10) -> bool:
        PiP = self.pi[:, None] * self.P
        return bool(np.max(np.abs(PiP - PiP.T)) <= tol)

    def reversed(self) -> "MarkovModel":
        Pstar = time_reversal(self.P, self.pi)
        return MarkovModel(P=Pstar, pi=self.pi.copy(), Q=self.Q.T.copy(), labels=self.labels)

    def to_dict(self) -> dict:
        return {
            "P": [[float(x) for x in row] for row in self.P],
            "pi": [float(x) for x in self.pi],
            "labels": list(self.labels),
        }


def time_reversal(P, pi) -> np.ndarray:
    """P* = Pi^{-1} P^T Pi; row-stochastic with the same stationary law."""
    P = np.asarray(P, dtype=float)
    pi = np.asarray(pi, dtype=float)
    return (P.T * pi[None, :]) / pi[:, None]


def additive_reversibilization(P, pi) -> np.ndarray:
    """M = (P + P*)/2, the reversible chain sharing pi.

    Its Laplacian diag(pi)(M - I) equals the symmetric part of Q exactly.
    """
    return (np.asarray(P, dtype=float) + time_reversal(P, pi)) / 2.0


def killed_laplacian(Q, h) -> np.ndarray:
    """Q_h = Q - diag(h);  requires sum(h) > 0 so that -Q_h is non-singular."""
    Q = np.asarray(Q, dtype=float)
    h = np.asarray(h, dtype=float)
    if h.shape != (Q.shape[0],):
        raise DomainError(f"h must have shape ({Q.shape[0]},), got {h.shape}")
    if np.any(h < 0):
        raise DomainError("killing rates must be nonnegative")
    if h.sum() <= 0:
        raise SingularKilling("killing rates sum to zero; killed generator is singular")
    return Q - np.diag(h)


@dataclass(frozen=True)
class GreenKernel:
    """Green kernel with provenance and the state labels it lives on."""

    G: np.ndarray
    provenance: str
    params: dict = field(default_factory=dict)
    labels: tuple = ()

    @property
    def n(self) -> int:
        return self.G.shape[0]


def green_kernel(Q_h, labels=None, provenance: str = "full_killing", params=None) -> GreenKernel:
    """G = (-Q_h)^{-1}; validates nonnegative entries and PD symmetric part."""
    Q_h = np.asarray(Q_h, dtype=float)
    try:
        G = np.linalg.inv(-Q_h)
    except np.linalg.LinAlgError as exc:
        raise SingularKilling(f"killed generator is singular: {exc}") from exc
    tol = 1e-10 * max(1.0, float(np.abs(G).max()))
    if G.min() < -tol:
        raise NumericalError(f"Green kernel has a negative entry ({G.min():.3e})")
    ok, lam = kernels.has_pd_symmetric_part(G)
    if not ok:
        raise NumericalError(f"Green kernel lost its PD symmetric part (lambda={lam:.3e})")
    if labels is None:
        labels = tuple(range(G.shape[0]))
    return GreenKernel(G=G, provenance=provenance, params=dict(params or {}), labels=tuple(labels))


def hit_killing_kernel(model: MarkovModel, a: int) -> GreenKernel:
    """Green kernel of the chain killed on hitting state a.

    Deletes row and column a from Q; the result lives on the remaining
    n - 1 states, whose original labels are preserved.
    """
    if model.n < 2:
        raise DomainError("hit-killing needs at least two states")
    if not (0 <= a < model.n):
        raise DomainError(f"state index {a} out of range")
    keep = [i for i in range(model.n) if i != a]
    Qsub = model.Q[np.ix_(keep, keep)]
    labels = tuple(model.labels[i] for i in keep)
    return green_kernel(Qsub, labels=labels, provenance="hit_killing", params={"a": a})


def ray_knight_kernel(model: MarkovModel, a: int, h: float) -> GreenKernel:
    """Green kernel (h e_a e_a^T - Q)^{-1} for killing at rate h at state a only.

    Column a and row a of the result are identically 1/h.
    """
    if h <= 0:
        raise InvalidRate(f"killing rate must be positive, got {h}")
    if not (0 <= a < model.n):
        raise DomainError(f"state index {a} out of range")
    hvec = np.zeros(model.n)
    hvec[a] = h
    Qh = model.Q - np.diag(hvec)
    return green_kernel(Qh, labels=model.labels, provenance="node_killing", params={"a": a, "h": h})


def model_from_obj(obj, origin: str = "<config>") -> MarkovModel:
    """Build a model from {'P': rows, 'pi': optional, 'labels': optional}.

    pi is recomputed when absent; when present it is validated against P.
    """
    if not isinstance(obj, dict) or "P" not in obj:
        raise ParseError(f"{origin}: model object must contain 'P'")
    P = matrix_from_obj(obj["P"], origin=origin)
    model = MarkovModel.from_transition_matrix(P, labels=obj.get("labels"))
    if "pi" in obj and obj["pi"] is not None:
        pi = np.asarray(obj["pi"], dtype=float)
        if pi.shape != model.pi.shape or np.max(np.abs(pi - model.pi)) > 1e-8:
            raise ParseError(f"{origin}: provided pi is not stationary for P")
    return model


def model_from_file(path: str) -> MarkovModel:
    """Load a model from JSON ({'P', ...}) or from a bare CSV transition matrix."""
    if path.endswith(".json"):
        with open(path, "r", encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(
                    f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}"
                ) from exc
        return model_from_obj(obj, origin=path)
    return MarkovModel.from_transition_matrix(read_matrix(path))
