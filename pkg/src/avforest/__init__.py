"""Boundary avalanches in the Abelian sandpile model.

Samplers for the induced measure on simply-connected polyominoes (two
provably equivalent processes), exact small-graph oracles, Green-function
observables, and heavy-tailed avalanche statistics.  Hot kernels run in a
compiled extension with a pure-Python fallback; see ``avforest.kernels``.
"""

__version__ = "0.1.0"

from .kernels import BACKEND

__all__ = ["BACKEND", "__version__"]
