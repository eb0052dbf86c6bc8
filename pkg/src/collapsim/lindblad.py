"""Deterministic density-matrix oracle for cross-validating the trajectory engine.

For Hermitian collapse operators the noise average of the trajectory dynamics
obeys the Lindblad equation

    drho/dt = -i [H, rho] + sum_k ( L_k rho L_k - 1/2 {L_k^2, rho} ).

This module integrates it with fixed-step classical RK4 and provides the
closed-form two-site dephasing rate used throughout the test suite.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, UnsupportedModelError

DENSITY_HERMITICITY_TOL = 1e-10
DENSITY_TRACE_TOL = 1e-8
DENSITY_POSITIVITY_TOL = 1e-8
POSITIVITY_FLAG_LEVEL = 1e-6


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, (numerically) positive matrix over a basis."""

    matrix: np.ndarray
    basis: object

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        dim = self.basis.dimension
        if mat.shape != (dim, dim):
            raise ConfigurationError("density matrix shape does not match basis")
        scale = max(1.0, float(np.max(np.abs(mat))))
        if np.max(np.abs(mat - mat.conj().T)) > DENSITY_HERMITICITY_TOL * scale:
            raise ConfigurationError("density matrix is not Hermitian within tolerance")
        if abs(np.trace(mat).real - 1.0) > DENSITY_TRACE_TOL or abs(np.trace(mat).imag) > DENSITY_TRACE_TOL:
            raise ConfigurationError("density matrix trace deviates from 1")
        if np.linalg.eigvalsh(0.5 * (mat + mat.conj().T)).min() < -DENSITY_POSITIVITY_TOL:
            raise ConfigurationError("density matrix has a negative eigenvalue beyond tolerance")
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @staticmethod
    def from_state(state) -> "DensityMatrix":
        amps = state.amplitudes
        return DensityMatrix(np.outer(amps, amps.conj()), state.basis)


def _operator_matrices(ops):
    mats = []
    for op in ops.operators:
        if not op.hermitian:
            raise UnsupportedModelError("the oracle supports Hermitian collapse operators only")
        mats.append(op.matrix)
    return mats


def lindblad_rhs(rho: np.ndarray, hamiltonian, ops) -> np.ndarray:
    """Right-hand side of the master equation for Hermitian L_k.

    ``rho`` may be a DensityMatrix or a raw matrix; the result is traceless.
    """
    mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    out = np.zeros_like(mat)
    if hamiltonian is not None:
        h = hamiltonian.matrix
        out += -1j * (h @ mat - mat @ h)
    for lk in _operator_matrices(ops):
        lk2 = lk @ lk
        out += lk @ mat @ lk - 0.5 * (lk2 @ mat + mat @ lk2)
    return out


@dataclass(frozen=True, eq=False)
class DensityEvolution:
    """Time series of the oracle integration."""

    times: np.ndarray
    matrices: np.ndarray  # (T, dim, dim)
    positivity_flags: np.ndarray  # bool per time: eigenvalue below -1e-6 seen

    def final(self) -> np.ndarray:
        return self.matrices[-1]

    def element(self, i: int, j: int) -> np.ndarray:
        return self.matrices[:, i, j]

    def expectation(self, operator) -> np.ndarray:
        return np.einsum("tij,ji->t", self.matrices, operator.matrix).real


def evolve_density(rho0: DensityMatrix, hamiltonian, ops, dt: float, horizon: float,
                   stride: int = 1) -> DensityEvolution:
    """Fixed-step RK4 integration of the master equation.

    Requires dt * (|H| + sum_k |L_k|^2) <= 0.1 so the explicit scheme stays in
    its convergent regime.  Trace is monitored; positivity violations beyond
    -1e-6 are flagged per recorded time rather than raised.
    """
    if dt <= 0 or horizon < dt:
        raise ConfigurationError("need 0 < dt <= horizon")
    if stride < 1:
        raise ConfigurationError("stride must be >= 1")
    hnorm = float(np.linalg.norm(hamiltonian.matrix, 2)) if hamiltonian is not None else 0.0
    lnorm2 = sum(float(np.linalg.norm(m, 2)) ** 2 for m in _operator_matrices(ops))
    if dt * (hnorm + lnorm2) > 0.1:
        raise ConfigurationError(
            f"dt * (|H| + sum |L|^2) = {dt * (hnorm + lnorm2):.3g} exceeds 0.1; reduce dt"
        )

    n_steps = max(1, int(round(horizon / dt)))
    rho = rho0.matrix.astype(complex)
    record_steps = sorted(set(range(0, n_steps + 1, stride)) | {n_steps})
    times, mats, flags = [], [], []

    def rhs(mat):
        return lindblad_rhs(mat, hamiltonian, ops)

    next_record = 0
    for step in range(n_steps + 1):
        if step == record_steps[next_record]:
            times.append(step * dt)
            mats.append(rho.copy())
            flags.append(bool(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -POSITIVITY_FLAG_LEVEL))
            next_record += 1
        if step == n_steps:
            break
        k1 = rhs(rho)
        k2 = rhs(rho + 0.5 * dt * k1)
        k3 = rhs(rho + 0.5 * dt * k2)
        k4 = rhs(rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    mats = np.array(mats)
    trace_dev = np.max(np.abs(np.einsum("tii->t", mats) - 1.0))
    if trace_dev > DENSITY_TRACE_TOL:
        raise ConfigurationError(f"oracle trace drifted by {trace_dev:g}; dt too large")
    return DensityEvolution(np.array(times), mats, np.array(flags))


def csl_two_point_rate(separation: float, rate: float, correlation_length: float) -> float:
    """Dephasing rate of a two-branch superposition separated by ``separation``.

    Closed form rate * (1 - exp(-separation^2 / (4 rc^2))): zero for coincident
    branches, saturating at the per-constituent collapse rate once the
    branches sit far beyond the correlation length.
    """
    if rate < 0:
        raise ConfigurationError("collapse rate must be >= 0")
    if correlation_length <= 0:
        raise ConfigurationError("correlation length must be positive")
    if separation < 0:
        raise ConfigurationError("separation must be >= 0")
    return rate * (1.0 - np.exp(-(separation**2) / (4.0 * correlation_length**2)))


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Trace distance between two density matrices (half the trace norm)."""
    delta = np.asarray(a) - np.asarray(b)
    delta = 0.5 * (delta + delta.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(delta))))
