"""psdrank: positive semidefinite rank toolkit.

Computes, bounds, and certifies psd rank facts for nonnegative matrices
and polytopes: slack matrices and nested pairs, spectrahedral lifts,
numeric psd factorization search, an LMI feasibility engine with Farkas
dual rays, and certified minimal-psd-rank decisions.
"""

from .backend import BACKEND, HAVE_COMPILED

__version__ = "0.1.0"

__all__ = ["BACKEND", "HAVE_COMPILED", "__version__"]
