"""Collapse operator construction: noise kernel, whitening, CSL sets, GRW hits.

The spatially correlated collapse noise has covariance
``D_jk = exp(-(x_j - x_k)^2 / (4 rc^2))`` between lattice sites.  Factorizing
``D = S S^T`` rewrites the correlated noise as K independent standard Wiener
processes driving the operators ``L_k = sqrt(rate) * sum_j S_jk n_j``, which is
the form the trajectory integrator consumes.  Per-site noise increments carry
no lattice-measure weight, so the dephasing rate between two sites separated
by d is exactly ``rate * (1 - exp(-d^2/(4 rc^2)))`` independent of the grid
spacing; ``rate`` is therefore the collapse rate of one constituent.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateHitError,
    KernelIntegrityError,
)
from .lattice import LatticeGrid, Operator, StateVector

WHITEN_DEFAULT_THRESHOLD = 1e-12
WHITEN_ROUNDTRIP_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Gaussian spatial correlation matrix of the collapse noise."""

    matrix: np.ndarray
    grid: LatticeGrid
    correlation_length: float

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        m = self.grid.sites
        if mat.shape != (m, m):
            raise ConfigurationError("kernel shape does not match grid")
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def size(self) -> int:
        return self.grid.sites


def gaussian_kernel(grid: LatticeGrid, correlation_length: float) -> KernelMatrix:
    """Noise correlation D_jk = exp(-(x_j - x_k)^2 / (4 rc^2))."""
    if correlation_length <= 0:
        raise ConfigurationError("correlation length must be positive")
    x = grid.positions
    sep = x[:, None] - x[None, :]
    mat = np.exp(-(sep**2) / (4.0 * correlation_length**2))
    return KernelMatrix(mat, grid, float(correlation_length))


@dataclass(frozen=True, eq=False)
class WhiteningTransform:
    """Factor S with S S^T ~= D, columns ordered by descending eigenvalue."""

    factor: np.ndarray
    threshold: float
    correlation_length: float = float("nan")

    @property
    def rank(self) -> int:
        return self.factor.shape[1]

    def roundtrip_error(self, kernel: KernelMatrix) -> float:
        return float(np.max(np.abs(self.factor @ self.factor.T - kernel.matrix)))


def whiten(kernel: KernelMatrix, threshold: float = WHITEN_DEFAULT_THRESHOLD) -> WhiteningTransform:
    """Symmetric eigendecomposition of the kernel with relative truncation.

    Eigenvalues below ``threshold * max(eig)`` are dropped; tiny negative
    eigenvalues (roundoff) are clamped to zero, genuinely negative ones raise
    KernelIntegrityError.
    """
    if not 0 <= threshold < 1:
        raise ConfigurationError("truncation threshold must lie in [0, 1)")
    evals, evecs = np.linalg.eigh(kernel.matrix)
    top = float(evals.max())
    if top <= 0:
        raise KernelIntegrityError("kernel has no positive eigenvalues")
    if evals.min() < -1e-8 * top:
        raise KernelIntegrityError(f"kernel eigenvalue {evals.min():g} is negative beyond tolerance")
    evals = np.clip(evals, 0.0, None)
    # descending order, stable so that degenerate spectra keep basis order
    order = np.argsort(-evals, kind="stable")
    keep = order[evals[order] > threshold * top]
    factor = evecs[:, keep] * np.sqrt(evals[keep])[None, :]
    return WhiteningTransform(factor, float(threshold), kernel.correlation_length)


@dataclass(frozen=True, eq=False)
class CollapseOperatorSet:
    """Hermitian collapse operators with the coupling already absorbed.

    ``rate`` is the per-constituent collapse rate and ``correlation_length``
    the noise correlation length (both kept as metadata); ``model`` tags how
    the set was built (generic | csl | grw-reference).
    """

    operators: tuple
    rate: float
    model: str = "generic"
    correlation_length: float = field(default=float("nan"))

    def __post_init__(self):
        ops = tuple(self.operators)
        if self.rate < 0:
            raise ConfigurationError("collapse rate must be >= 0")
        basis = None
        for op in ops:
            if not isinstance(op, Operator) or not op.hermitian:
                raise ConfigurationError("collapse operators must be Hermitian Operator instances")
            if basis is None:
                basis = op.basis
            elif op.basis != basis:
                raise ConfigurationError("collapse operators live on different bases")
        object.__setattr__(self, "operators", ops)

    def __len__(self):
        return len(self.operators)

    @property
    def basis(self):
        return self.operators[0].basis if self.operators else None

    @cached_property
    def diagonals(self):
        """(K, dim) real diagonals if every operator is diagonal, else None."""
        if not self.operators:
            return None
        diags = [op.diagonal_part for op in self.operators]
        if any(d is None for d in diags):
            return None
        out = np.array(diags)
        out.setflags(write=False)
        return out

    @cached_property
    def max_operator_norm(self) -> float:
        if not self.operators:
            return 0.0
        if self.diagonals is not None:
            return float(np.max(np.abs(self.diagonals)))
        return max(float(np.linalg.norm(op.matrix, 2)) for op in self.operators)

    @cached_property
    def eigenspace_labels(self):
        """Per-basis-state index of its common eigenspace, numbered by first appearance.

        Only supported for diagonal sets (all shipped models).  States whose
        eigenvalue tuples agree to 10 decimals share an eigenspace.
        """
        if not self.operators:
            return None
        if self.diagonals is None:
            raise ConfigurationError("common eigenspaces are only computed for diagonal operator sets")
        scale = max(1.0, float(np.max(np.abs(self.diagonals))))
        rounded = np.round(self.diagonals.T / scale, 10)
        _, first_idx, inverse = np.unique(rounded, axis=0, return_index=True, return_inverse=True)
        rank_by_first = np.argsort(np.argsort(first_idx))
        labels = rank_by_first[np.asarray(inverse).ravel()]
        labels.setflags(write=False)
        return labels

    def eigenspace_members(self):
        labels = self.eigenspace_labels
        if labels is None:
            return [np.arange(self.basis.dimension if self.basis else 1)]
        return [np.flatnonzero(labels == g) for g in range(labels.max() + 1)]


def csl_operators(grid, site_ops, rate, whitening) -> CollapseOperatorSet:
    """Whitened collapse operators L_k = sqrt(rate) * sum_j S_jk n_j.

    Driving these with independent Wiener increments reproduces the lattice
    dynamics of density-coupled collapse noise with Gaussian spatial
    correlation.  All outputs are diagonal, hence mutually commuting.
    """
    if rate < 0:
        raise ConfigurationError("collapse rate must be >= 0")
    if len(site_ops) != grid.sites:
        raise ConfigurationError("need one site number operator per lattice site")
    factor = whitening.factor
    if factor.shape[0] != grid.sites:
        raise ConfigurationError("whitening factor does not match the grid")
    basis = site_ops[0].basis
    occ_diags = []
    for op in site_ops:
        d = op.diagonal_part
        if d is None:
            raise ConfigurationError("site number operators must be diagonal")
        occ_diags.append(d)
    occ = np.array(occ_diags)  # (sites, dim)
    coeff = np.sqrt(rate) * factor.T @ occ  # (K, dim)
    ops = tuple(
        Operator(np.diag(coeff[k]).astype(complex), basis, hermitian=True) for k in range(coeff.shape[0])
    )
    return CollapseOperatorSet(
        ops, rate=float(rate), model="csl", correlation_length=float(whitening.correlation_length)
    )


def unitary_set(basis=None) -> CollapseOperatorSet:
    """Empty operator set: pure Schroedinger evolution."""
    return CollapseOperatorSet((), rate=0.0, model="generic")


def grw_hit_multipliers(basis, particle: int, correlation_length: float) -> np.ndarray:
    """(centers, dim) amplitude multipliers exp(-(x_p - c)^2/(4 rc^2)) per lattice center."""
    positions = basis.particle_positions[:, particle]
    centers = basis.grid.positions
    return np.exp(-((positions[None, :] - centers[:, None]) ** 2) / (4.0 * correlation_length**2))


def grw_hit_weights(state: StateVector, particle: int, correlation_length: float) -> np.ndarray:
    """Normalized probabilities of hit centers (lattice sites) for one particle.

    The raw weight of center c is the squared norm of the state after the
    localization multiplier; weights are normalized over candidate centers.
    """
    mult = grw_hit_multipliers(state.basis, particle, correlation_length)
    raw = (mult**2) @ state.probabilities()
    total = raw.sum()
    if total <= 0:
        raise DegenerateHitError("all candidate hit centers have zero weight")
    return raw / total


def grw_localization(state: StateVector, particle: int, center: float, correlation_length: float):
    """Apply one localization hit to the given particle around ``center``.

    Amplitudes are multiplied by exp(-(x_p - center)^2 / (4 rc^2)) and
    renormalized; the squared pre-normalization norm (the hit's probability
    weight) is returned alongside.
    """
    if correlation_length <= 0:
        raise ConfigurationError("correlation length must be positive")
    lo, hi = state.basis.grid.extent
    pad = 1e-9 * max(hi - lo, 1.0)
    if center < lo - pad or center > hi + pad:
        raise ConfigurationError(f"hit center {center} lies outside the grid extent")
    positions = state.basis.particle_positions[:, particle]
    mult = np.exp(-((positions - center) ** 2) / (4.0 * correlation_length**2))
    hit = state.amplitudes * mult
    weight = float(np.linalg.norm(hit) ** 2)
    if weight <= 1e-300:
        raise DegenerateHitError("localization hit annihilated the state")
    return StateVector(state.basis, hit / np.sqrt(weight)), weight
