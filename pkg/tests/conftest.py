"""Shared helpers for the test suite.

Random states and observables are drawn through plain functions instead of
fixtures so tests can control the generator seed explicitly; reproducibility
matters more here than fixture magic.
"""

import numpy as np

from ergoquench.ergodic_ensemble import DensityMatrix
from ergoquench.spin_chain import HermitianOperator


def random_density(rng, dim, rank=None):
    """Full-rank (or rank-limited) random density matrix."""
    r = rank or dim
    g = rng.normal(size=(dim, r)) + 1j * rng.normal(size=(dim, r))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


def random_hermitian(rng, dim):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return HermitianOperator((g + g.conj().T) / 2)


def random_pure(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)
