"""Monte-Carlo estimate record shared by samplers and verifiers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["MCEstimate", "combine_z"]


@dataclass(frozen=True)
class MCEstimate:
    """Mean with standard error; the unit of every verification result."""

    mean: float
    stderr: float
    n_replicates: int
    imag_residue: float = 0.0
    seed: tuple = ()

    def __post_init__(self):
        if self.n_replicates < 2:
            raise ValueError("an estimate needs at least two replicates")
        if self.stderr < 0:
            raise ValueError("stderr must be nonnegative")

    @classmethod
    def from_values(cls, values, seed=()) -> "MCEstimate":
        v = np.asarray(values)
        real = np.real(v)
        n = real.size
        mean = float(real.mean())
        stderr = float(real.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        resid = float(np.abs(np.imag(np.mean(v)))) if np.iscomplexobj(v) else 0.0
        return cls(mean=mean, stderr=stderr, n_replicates=n, imag_residue=resid, seed=seed)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "n_replicates": self.n_replicates,
            "imag_residue": self.imag_residue,
            "seed": list(self.seed),
        }


def combine_z(a: MCEstimate, b: MCEstimate, extra_tol: float = 0.0) -> float:
    """Standardized discrepancy |mean_a - mean_b| / combined stderr.

    ``extra_tol`` widens the denominator for comparisons against
    deterministic values carrying a known numerical tolerance.
    """
    diff = abs(a.mean - b.mean)
    denom = float(np.hypot(a.stderr, b.stderr)) + extra_tol
    if denom == 0.0:
        return 0.0 if diff == 0.0 else float("inf")
    return diff / denom
