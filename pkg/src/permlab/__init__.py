"""Permanental vectors of finite non-reversible Markov chains.

Density evaluation, exact and approximate sampling, and Monte-Carlo
verification of the isomorphism identities, comparison inequalities, and
cover-time bounds that hold for them.
"""

from . import density, functions, kernels, markov, matio, samplers, verify
from .errors import PermlabError
from .estimates import MCEstimate
from .rng import substream

__version__ = "0.1.0"

__all__ = [
    "density",
    "functions",
    "kernels",
    "markov",
    "matio",
    "samplers",
    "verify",
    "PermlabError",
    "MCEstimate",
    "substream",
    "__version__",
]
