"""Disordered XXX spin chains in a fixed-magnetization sector.

Conventions used throughout:

* Pauli matrices with eigenvalues +-1 (not spin-1/2 operators), so a single
  XXX bond J sigma.sigma has eigenvalues {-3J, +J}.
* Basis configurations are integers where bit j encodes site j, with a set
  bit meaning spin up (sigma^z = +1).  Within a sector the configurations
  are listed in ascending integer order.
* Open boundary conditions, bond j couples sites (j, j+1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionError, SectorError

HERMITICITY_ATOL = 1e-12
NORM_ATOL = 1e-10


@dataclass(frozen=True)
class SpinBasis:
    """Computational basis of the total-S^z sector of an L-site chain."""

    n_sites: int
    total_sz: int
    states: np.ndarray  # sorted configuration integers, shape (dim,)

    @property
    def dim(self) -> int:
        return len(self.states)

    def index_of(self, state: int) -> int:
        """Position of a configuration integer within the sector."""
        i = int(np.searchsorted(self.states, state))
        if i >= self.dim or self.states[i] != state:
            raise SectorError(f"configuration {state:#x} not in sector "
                              f"(L={self.n_sites}, Sz={self.total_sz})")
        return i

    def occupations(self) -> np.ndarray:
        """(dim, L) array of bits, entry [a, j] is 1 if site j is up in state a."""
        sites = np.arange(self.n_sites)
        return (self.states[:, None] >> sites[None, :]) & 1


def build_basis(n_sites: int, total_sz: int) -> SpinBasis:
    """Enumerate the fixed-magnetization sector of an n_sites chain.

    total_sz is the eigenvalue of sum_j sigma_j^z, so it ranges over
    -L, -L+2, ..., L and must have the parity of L.  Chains of a single
    site are allowed (they appear as the halves of an L=2 split).
    """
    if n_sites < 1:
        raise SectorError(f"need at least one site, got {n_sites}")
    if abs(total_sz) > n_sites or (n_sites + total_sz) % 2 != 0:
        raise SectorError(f"no sector with total Sz={total_sz} on {n_sites} sites")
    n_up = (n_sites + total_sz) // 2
    states = np.array(
        [s for s in range(1 << n_sites) if bin(s).count("1") == n_up],
        dtype=np.int64,
    )
    return SpinBasis(n_sites=n_sites, total_sz=total_sz, states=states)


@dataclass(frozen=True)
class DisorderRealization:
    """One draw of the on-site longitudinal fields h_j, uniform on [-h, h]."""

    h_fields: np.ndarray
    h_bound: float
    seed: int | None = None

    def restrict(self, lo: int, hi: int) -> "DisorderRealization":
        """Fields for the sub-chain covering sites [lo, hi], relabeled from 0."""
        if not (0 <= lo <= hi < len(self.h_fields)):
            raise ConstructionError(f"site window [{lo}, {hi}] out of range")
        return DisorderRealization(self.h_fields[lo:hi + 1].copy(),
                                   self.h_bound, self.seed)


def draw_disorder(n_sites: int, h_bound: float, seed: int) -> DisorderRealization:
    rng = np.random.default_rng(seed)
    fields = rng.uniform(-h_bound, h_bound, size=n_sites)
    return DisorderRealization(h_fields=fields, h_bound=float(h_bound), seed=seed)


@dataclass(frozen=True)
class HermitianOperator:
    """A dense operator on the sector, validated to be Hermitian on creation."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.entries, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConstructionError(f"operator must be square, got {m.shape}")
        dev = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
        if dev > HERMITICITY_ATOL:
            raise ConstructionError(f"operator not Hermitian, max deviation {dev:.3e}")
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def symmetrized(entries: np.ndarray) -> HermitianOperator:
    """Wrap (M + M^dag)/2, for matrices Hermitian only up to rounding
    (e.g. after a basis rotation)."""
    m = np.asarray(entries, dtype=np.complex128)
    return HermitianOperator(0.5 * (m + m.conj().T))


def build_hamiltonian(
    basis: SpinBasis,
    coupling: float,
    disorder: DisorderRealization,
    bond_range: tuple[int, int] | None = None,
    field_sites: tuple[int, int] | None = None,
) -> HermitianOperator:
    """Restriction of H = sum_j J sigma_j.sigma_{j+1} + sum_j h_j sigma_j^z.

    Parameters
    ----------
    basis : sector basis the operator acts on.
    coupling : exchange constant J, shared by all bonds.
    disorder : field realization; must provide one h_j per site of `basis`.
    bond_range : inclusive interval (lo, hi) of bond indices to keep,
        default all bonds [0, L-2].  An interval with hi < lo is empty,
        which is how a single-site "chain" gets a field-only Hamiltonian.
    field_sites : inclusive interval of site indices whose field terms to
        keep, default all sites.  The same builder therefore produces the
        full chain and both halves of a split.

    Returns
    -------
    HermitianOperator on the sector.  Off-diagonal hop elements are exactly
    2J; diagonal elements collect J zz terms and the fields.
    """
    n = basis.n_sites
    if len(disorder.h_fields) != n:
        raise ConstructionError(
            f"disorder has {len(disorder.h_fields)} fields for {n} sites")
    bonds = _resolve_interval(bond_range, n - 2, "bond")
    sites = _resolve_interval(field_sites, n - 1, "field site")

    occ = basis.occupations()
    z = 2.0 * occ - 1.0  # sigma^z eigenvalues per site
    diag = np.zeros(basis.dim)
    for j in bonds:
        diag += coupling * z[:, j] * z[:, j + 1]
    for j in sites:
        diag += disorder.h_fields[j] * z[:, j]

    entries = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
    entries[np.diag_indices(basis.dim)] = diag
    for j in bonds:
        # sigma^x sigma^x + sigma^y sigma^y flips an anti-aligned pair with
        # amplitude 2; each configuration pair is connected by at most one bond.
        movable = occ[:, j] != occ[:, j + 1]
        src = np.nonzero(movable)[0]
        flipped = basis.states[src] ^ ((1 << j) | (1 << (j + 1)))
        dst = np.searchsorted(basis.states, flipped)
        entries[dst, src] += 2.0 * coupling
    return HermitianOperator(entries)


def _resolve_interval(interval, last_valid, what) -> range:
    if interval is None:
        return range(0, last_valid + 1)
    lo, hi = interval
    if hi < lo:
        return range(0)
    if lo < 0 or hi > last_valid:
        raise ConstructionError(
            f"{what} interval [{lo}, {hi}] outside valid range [0, {last_valid}]")
    return range(lo, hi + 1)


def build_projector_observable(phi1: np.ndarray, phi2: np.ndarray) -> HermitianOperator:
    """The swap-like observable |phi1><phi2| + |phi2><phi1|.

    Both vectors must be unit-normalized and of equal dimension.  For an
    orthonormal pair the result has trace 0 and squared trace 2.
    """
    v1 = np.asarray(phi1, dtype=np.complex128).ravel()
    v2 = np.asarray(phi2, dtype=np.complex128).ravel()
    if v1.shape != v2.shape:
        raise ConstructionError(f"vector dimensions differ: {v1.shape} vs {v2.shape}")
    for k, v in (("first", v1), ("second", v2)):
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > NORM_ATOL:
            raise ConstructionError(f"{k} vector not normalized, |norm-1|={abs(norm-1):.3e}")
    m = np.outer(v1, v2.conj())
    return HermitianOperator(m + m.conj().T)
