"""Lattice Hilbert spaces: grids, configuration bases, states, and operators.

Everything lives on a 1D uniform lattice.  Three basis kinds are supported:

* ``SiteBasis``      -- one particle, basis state j = particle at site j.
* ``ProductBasis``   -- k distinguishable particles, tensor-product configurations.
* ``BosonicBasis``   -- n identical bosons, occupation vectors with fixed total n.

Each basis exposes an ``occupations`` table (dimension x sites) giving the
particle count at every site for every basis state.  Site number operators
are diagonal with those counts, so they all commute exactly.
"""

from dataclasses import dataclass
from functools import cached_property
from math import comb, factorial

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateInputError,
    ResourceLimitError,
    UnsupportedModelError,
)

DEFAULT_DIMENSION_CAP = 4096

NORM_TOL = 1e-10
HERMITICITY_RTOL = 1e-12


@dataclass(frozen=True)
class LatticeGrid:
    """Uniform 1D lattice with ``sites`` points spaced ``spacing`` apart."""

    sites: int
    spacing: float

    def __post_init__(self):
        if not isinstance(self.sites, (int, np.integer)) or self.sites < 2:
            raise ConfigurationError("lattice needs at least 2 sites")
        if not np.isfinite(self.spacing) or self.spacing <= 0:
            raise ConfigurationError("lattice spacing must be positive and finite")

    @cached_property
    def positions(self) -> np.ndarray:
        x = np.arange(self.sites, dtype=float) * float(self.spacing)
        x.setflags(write=False)
        return x

    @property
    def extent(self):
        return 0.0, float(self.spacing) * (self.sites - 1)


def build_lattice(sites: int, spacing: float) -> LatticeGrid:
    """Construct a grid with positions j * spacing for j = 0 .. sites-1."""
    return LatticeGrid(int(sites), float(spacing))


@dataclass(frozen=True)
class SiteBasis:
    """Single particle on a lattice; basis state j puts the particle at site j."""

    grid: LatticeGrid

    particles: int = 1

    @property
    def dimension(self) -> int:
        return self.grid.sites

    @cached_property
    def occupations(self) -> np.ndarray:
        occ = np.eye(self.grid.sites)
        occ.setflags(write=False)
        return occ

    @cached_property
    def particle_positions(self) -> np.ndarray:
        pos = self.grid.positions[:, None].copy()
        pos.setflags(write=False)
        return pos

    def describe(self):
        return f"site basis ({self.grid.sites} sites)"


@dataclass(frozen=True)
class ProductBasis:
    """k distinguishable particles; basis states are site tuples (j_1, ..., j_k)."""

    grid: LatticeGrid
    particles: int

    def __post_init__(self):
        if self.particles < 2:
            raise ConfigurationError("ProductBasis needs at least 2 particles; use SiteBasis for one")

    @property
    def dimension(self) -> int:
        return self.grid.sites ** self.particles

    @cached_property
    def site_indices(self) -> np.ndarray:
        """(dimension, particles) array: site index of each particle per basis state."""
        idx = np.stack(
            np.unravel_index(np.arange(self.dimension), (self.grid.sites,) * self.particles),
            axis=1,
        )
        idx.setflags(write=False)
        return idx

    @cached_property
    def occupations(self) -> np.ndarray:
        occ = np.zeros((self.dimension, self.grid.sites))
        for p in range(self.particles):
            occ[np.arange(self.dimension), self.site_indices[:, p]] += 1.0
        occ.setflags(write=False)
        return occ

    @cached_property
    def particle_positions(self) -> np.ndarray:
        pos = self.grid.positions[self.site_indices]
        pos.setflags(write=False)
        return pos

    def describe(self):
        return f"{self.particles} distinguishable particles ({self.grid.sites} sites)"


def _occupation_vectors(sites, total):
    """All occupation vectors with the given total, first site count descending."""
    if sites == 1:
        return [(total,)]
    out = []
    for head in range(total, -1, -1):
        out.extend((head,) + tail for tail in _occupation_vectors(sites - 1, total - head))
    return out


@dataclass(frozen=True)
class BosonicBasis:
    """n identical bosons; basis states are occupation vectors with fixed total n."""

    grid: LatticeGrid
    particles: int

    def __post_init__(self):
        if self.particles < 1:
            raise ConfigurationError("BosonicBasis needs at least 1 particle")

    @property
    def dimension(self) -> int:
        return comb(self.particles + self.grid.sites - 1, self.particles)

    @cached_property
    def occupations(self) -> np.ndarray:
        occ = np.array(_occupation_vectors(self.grid.sites, self.particles), dtype=float)
        occ.setflags(write=False)
        return occ

    @property
    def particle_positions(self):
        raise UnsupportedModelError(
            "identical bosons carry no per-particle coordinate; "
            "localization hits require a distinguishable basis"
        )

    def describe(self):
        return f"{self.particles} bosons ({self.grid.sites} sites)"


def compose_distinguishable(grid: LatticeGrid, particles: int, cap: int = DEFAULT_DIMENSION_CAP):
    """Tensor-product basis for k distinguishable particles on one grid.

    k = 1 returns the plain single-particle site basis.  Raises
    ResourceLimitError when sites**k exceeds the dimension cap.
    """
    if particles < 1:
        raise ConfigurationError("particle count must be >= 1")
    dim = grid.sites ** particles
    if dim > cap:
        raise ResourceLimitError(f"product dimension {dim} exceeds cap {cap}")
    if particles == 1:
        return SiteBasis(grid)
    return ProductBasis(grid, particles)


def bosonic_basis(grid: LatticeGrid, particles: int, cap: int = DEFAULT_DIMENSION_CAP) -> BosonicBasis:
    """Occupation-number basis for n identical bosons on one grid."""
    basis = BosonicBasis(grid, int(particles))
    if basis.dimension > cap:
        raise ResourceLimitError(f"bosonic dimension {basis.dimension} exceeds cap {cap}")
    return basis


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized complex amplitudes over a configuration basis."""

    basis: object
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.basis.dimension,):
            raise ConfigurationError(
                f"amplitude shape {amps.shape} does not match basis dimension {self.basis.dimension}"
            )
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > NORM_TOL:
            raise ConfigurationError(f"state norm {norm!r} deviates from 1 beyond {NORM_TOL}")
        amps = amps.copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dimension(self) -> int:
        return self.basis.dimension

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @staticmethod
    def normalized(basis, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(amps)
        if norm <= 0 or not np.isfinite(norm):
            raise DegenerateInputError("cannot normalize a zero or non-finite amplitude vector")
        return StateVector(basis, amps / norm)


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense matrix over a declared basis, with an optional Hermiticity guarantee."""

    matrix: np.ndarray
    basis: object
    hermitian: bool = False

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        dim = self.basis.dimension
        if mat.shape != (dim, dim):
            raise ConfigurationError(f"operator shape {mat.shape} does not match basis dimension {dim}")
        if self.hermitian:
            scale = np.max(np.abs(mat))
            dev = np.max(np.abs(mat - mat.conj().T))
            if scale > 0 and dev > HERMITICITY_RTOL * scale:
                raise ConfigurationError(f"operator flagged Hermitian but |A - A^dag| = {dev:g}")
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def dimension(self) -> int:
        return self.basis.dimension

    @cached_property
    def diagonal_part(self):
        """Real diagonal if the operator is diagonal in its basis, else None."""
        off = self.matrix - np.diag(np.diag(self.matrix))
        if np.max(np.abs(off)) == 0.0 and np.max(np.abs(np.diag(self.matrix).imag)) == 0.0:
            d = np.diag(self.matrix).real.copy()
            d.setflags(write=False)
            return d
        return None

    def apply(self, state: StateVector) -> np.ndarray:
        self._check_basis(state.basis)
        return self.matrix @ state.amplitudes

    def expectation(self, state: StateVector):
        self._check_basis(state.basis)
        val = np.vdot(state.amplitudes, self.matrix @ state.amplitudes)
        return val.real if self.hermitian else val

    def _check_basis(self, other):
        if other != self.basis:
            raise ConfigurationError("operator and state live on different bases")


def site_number_operators(grid: LatticeGrid, basis) -> list[Operator]:
    """Diagonal operators counting particles at each site in the given basis.

    They commute exactly (all diagonal) and sum to (total particles) * identity.
    """
    if basis.grid != grid:
        raise ConfigurationError("basis was built on a different grid")
    occ = basis.occupations
    return [Operator(np.diag(occ[:, j]).astype(complex), basis, hermitian=True) for j in range(grid.sites)]


def _packet_amplitudes(grid: LatticeGrid, center: float, width: float) -> np.ndarray:
    """Unnormalized single-particle packet exp(-(x-c)^2 / (4 width^2)).

    The squared amplitude then has standard deviation ``width``.  Width 0
    degenerates to a delta peak at the nearest site.
    """
    lo, hi = grid.extent
    pad = 1e-9 * max(hi - lo, 1.0)
    if center < lo - pad or center > hi + pad:
        raise ConfigurationError(f"packet center {center} lies outside the grid extent [{lo}, {hi}]")
    if width < 0:
        raise ConfigurationError("packet width must be >= 0")
    if width > 0 and width**2 > 0:
        amps = np.exp(-((grid.positions - center) ** 2) / (4.0 * width**2))
        if np.linalg.norm(amps) > 0:
            return amps
        # width far below the spacing underflows everywhere: a point packet
    amps = np.zeros(grid.sites)
    amps[int(round((center - lo) / grid.spacing))] = 1.0
    return amps


def _multinomial(total, counts):
    out = factorial(total)
    for c in counts:
        out //= factorial(int(c))
    return out


def make_superposition(grid, centers, width, weights, basis=None) -> StateVector:
    """Weighted superposition of localized packets, one packet per center.

    For a single particle each center contributes a Gaussian packet (or a
    single-site peak at width 0).  For multi-particle bases a center means
    "all particles in the same packet at that center", which prepares the
    co-located branch superpositions used in amplification studies; identical
    bosons get the symmetrized product amplitudes.
    """
    if basis is None:
        basis = SiteBasis(grid)
    if basis.grid != grid:
        raise ConfigurationError("basis was built on a different grid")
    centers = list(centers)
    weights = np.asarray(list(weights), dtype=complex)
    if len(centers) != len(weights):
        raise ConfigurationError("need one weight per center")
    if len(centers) == 0 or not np.any(np.abs(weights) > 0):
        raise DegenerateInputError("superposition weights are all zero")

    total = np.zeros(basis.dimension, dtype=complex)
    for center, weight in zip(centers, weights):
        if weight == 0:
            continue
        packet = _packet_amplitudes(grid, float(center), float(width))
        packet = packet / np.linalg.norm(packet)
        if isinstance(basis, SiteBasis):
            branch = packet.astype(complex)
        elif isinstance(basis, ProductBasis):
            branch = np.prod(packet[basis.site_indices], axis=1).astype(complex)
        elif isinstance(basis, BosonicBasis):
            occ = basis.occupations
            n = basis.particles
            coeff = np.array([_multinomial(n, row) for row in occ], dtype=float)
            branch = np.sqrt(coeff) * np.prod(packet[None, :] ** occ, axis=1)
            branch = branch.astype(complex)
        else:
            raise ConfigurationError(f"unsupported basis type {type(basis).__name__}")
        total += weight * branch

    norm = np.linalg.norm(total)
    if norm <= 1e-14:
        raise DegenerateInputError("superposition branches cancel to zero norm")
    return StateVector(basis, total / norm)


def kinetic_hamiltonian(grid: LatticeGrid, basis, mass: float = 1.0) -> Operator:
    """Discrete-Laplacian kinetic energy summed over particles (open boundaries).

    Single-particle matrix elements: 1/(m dx^2) on the diagonal and
    -1/(2 m dx^2) between neighboring sites.
    """
    if mass <= 0:
        raise ConfigurationError("mass must be positive")
    if basis.grid != grid:
        raise ConfigurationError("basis was built on a different grid")
    m = grid.sites
    hop = -1.0 / (2.0 * mass * grid.spacing**2)
    single = np.zeros((m, m))
    np.fill_diagonal(single, -2.0 * hop)
    idx = np.arange(m - 1)
    single[idx, idx + 1] = hop
    single[idx + 1, idx] = hop

    if isinstance(basis, SiteBasis):
        mat = single.astype(complex)
    elif isinstance(basis, ProductBasis):
        dim = basis.dimension
        mat = np.zeros((dim, dim), dtype=complex)
        sites = basis.site_indices
        for p in range(basis.particles):
            # hop particle p while the others stay put; group basis states by
            # the frozen coordinates of the other particles
            others = np.delete(sites, p, axis=1)
            key = others @ (m ** np.arange(others.shape[1]))
            order = np.argsort(key, kind="stable")
            sorted_keys = key[order]
            starts = np.flatnonzero(np.r_[True, sorted_keys[1:] != sorted_keys[:-1]])
            for s, e in zip(starts, np.r_[starts[1:], len(order)]):
                group = order[s:e]
                block = single[np.ix_(sites[group, p], sites[group, p])]
                mat[np.ix_(group, group)] += block
    elif isinstance(basis, BosonicBasis):
        occ = basis.occupations.astype(int)
        index_of = {tuple(row): i for i, row in enumerate(occ)}
        dim = basis.dimension
        mat = np.zeros((dim, dim), dtype=complex)
        for a, row in enumerate(occ):
            mat[a, a] = -2.0 * hop * row.sum()
            for j in range(m - 1):
                # a_j^dag a_{j+1} moves one boson left across the bond
                if row[j + 1] > 0:
                    dest = row.copy()
                    dest[j] += 1
                    dest[j + 1] -= 1
                    b = index_of[tuple(dest)]
                    amp = hop * np.sqrt((row[j] + 1) * row[j + 1])
                    mat[b, a] += amp
                    mat[a, b] += amp
    else:
        raise ConfigurationError(f"unsupported basis type {type(basis).__name__}")
    return Operator(mat, basis, hermitian=True)
