import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collapsim import (
    CollapseOperatorSet,
    ConfigurationError,
    DensityMatrix,
    Operator,
    UnsupportedModelError,
    build_lattice,
    csl_operators,
    csl_two_point_rate,
    evolve_density,
    gaussian_kernel,
    kinetic_hamiltonian,
    lindblad_rhs,
    make_superposition,
    site_number_operators,
    trace_distance,
    whiten,
)
from collapsim.fitting import fit_exponential_decay
from collapsim.lattice import SiteBasis


def _basis(sites=2, spacing=1.0):
    grid = build_lattice(sites, spacing)
    return grid, SiteBasis(grid)


def _diag_set(basis, diags, rate=1.0):
    ops = tuple(Operator(np.diag(np.asarray(d, dtype=complex)), basis, hermitian=True) for d in diags)
    return CollapseOperatorSet(ops, rate=rate)


class TestRhs:
    def test_empty_ops_is_von_neumann(self):
        grid, basis = _basis()
        h = Operator(np.array([[0, 1], [1, 0]], dtype=complex), basis, hermitian=True)
        rho = DensityMatrix.from_state(make_superposition(grid, [0.0], 0.0, [1.0]))
        ops = CollapseOperatorSet((), rate=0.0)
        rhs = lindblad_rhs(rho, h, ops)
        expected = -1j * (h.matrix @ rho.matrix - rho.matrix @ h.matrix)
        assert np.allclose(rhs, expected)

    def test_diagonal_state_is_dephasing_fixed_point(self):
        grid, basis = _basis()
        ops = _diag_set(basis, [[1.0, -1.0]])
        rho = DensityMatrix(np.diag([0.3, 0.7]).astype(complex), basis)
        rhs = lindblad_rhs(rho, None, ops)
        assert np.max(np.abs(rhs)) <= 1e-14

    def test_projector_operator_dephasing_rate(self):
        # L = sqrt(rate) diag(1, 0): hand computation gives
        # d rho_01/dt = -rate/2 * rho_01
        grid, basis = _basis()
        rate = 1.8
        ops = _diag_set(basis, [np.sqrt(rate) * np.array([1.0, 0.0])], rate=rate)
        rho = DensityMatrix(np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex), basis)
        rhs = lindblad_rhs(rho, None, ops)
        assert rhs[0, 1] == pytest.approx(-0.5 * rate * 0.5, rel=1e-12)

    def test_result_is_traceless(self):
        grid, basis = _basis(3)
        ops = _diag_set(basis, [[0.3, -1.0, 0.4], [1.0, 0.2, 0.0]])
        h = kinetic_hamiltonian(grid, basis)
        state = make_superposition(grid, [0.0, 2.0], 0.5, [1.0, 1.0j])
        rho = DensityMatrix.from_state(state)
        rhs = lindblad_rhs(rho, h, ops)
        assert abs(np.trace(rhs)) <= 1e-10

    def test_non_hermitian_rejected(self):
        grid, basis = _basis()
        bad = Operator(np.array([[0, 1], [0, 0]], dtype=complex), basis)
        ops = CollapseOperatorSet.__new__(CollapseOperatorSet)
        object.__setattr__(ops, "operators", (bad,))
        rho = DensityMatrix(np.eye(2, dtype=complex) / 2, basis)
        with pytest.raises(UnsupportedModelError):
            lindblad_rhs(rho, None, ops)


class TestDensityMatrix:
    def test_rejects_bad_trace(self):
        grid, basis = _basis()
        with pytest.raises(ConfigurationError):
            DensityMatrix(np.eye(2, dtype=complex), basis)

    def test_rejects_non_hermitian(self):
        grid, basis = _basis()
        with pytest.raises(ConfigurationError):
            DensityMatrix(np.array([[0.5, 0.5], [0.1, 0.5]], dtype=complex), basis)

    def test_rejects_negative_eigenvalue(self):
        grid, basis = _basis()
        with pytest.raises(ConfigurationError):
            DensityMatrix(np.diag([1.5, -0.5]).astype(complex), basis)


class TestEvolve:
    def test_no_dynamics_is_constant(self):
        grid, basis = _basis()
        rho0 = DensityMatrix(np.diag([0.4, 0.6]).astype(complex), basis)
        out = evolve_density(rho0, None, CollapseOperatorSet((), rate=0.0), 0.01, 1.0)
        assert np.allclose(out.final(), rho0.matrix)

    def test_pure_dephasing_closed_form(self):
        rate, rc, d = 1.3, 1.0, 2.0
        grid = build_lattice(2, d)
        basis = SiteBasis(grid)
        ops = csl_operators(grid, site_number_operators(grid, basis), rate,
                            whiten(gaussian_kernel(grid, rc)))
        state = make_superposition(grid, [0.0, d], 0.0, [1.0, 1.0])
        gamma = csl_two_point_rate(d, rate, rc)
        out = evolve_density(DensityMatrix.from_state(state), None, ops, 0.002, 2.0, stride=20)
        expected = 0.5 * np.exp(-gamma * out.times)
        assert np.max(np.abs(out.element(0, 1).real - expected)) <= 1e-6

    def test_rk4_order_at_least_three(self):
        # Richardson: error vs a fine-dt reference must shrink >= 8x per halving
        grid, basis = _basis()
        h = Operator(np.array([[0.0, 0.7], [0.7, 0.3]], dtype=complex), basis, hermitian=True)
        ops = _diag_set(basis, [[0.9, -0.4]])
        state = make_superposition(grid, [0.0, 1.0], 0.0, [1.0, 1.0])
        rho0 = DensityMatrix.from_state(state)

        def final_at(dt):
            return evolve_density(rho0, h, ops, dt, 1.0).final()

        ref = final_at(0.05 / 16)
        err_coarse = np.max(np.abs(final_at(0.05) - ref))
        err_fine = np.max(np.abs(final_at(0.025) - ref))
        assert err_coarse / err_fine >= 8.0

    def test_step_size_precondition(self):
        grid, basis = _basis()
        ops = _diag_set(basis, [[3.0, -3.0]])
        rho0 = DensityMatrix(np.eye(2, dtype=complex) / 2, basis)
        with pytest.raises(ConfigurationError):
            evolve_density(rho0, None, ops, dt=0.5, horizon=1.0)

    @given(seed=st.integers(0, 5000), dim=st.integers(2, 5))
    @settings(max_examples=25, deadline=None)
    def test_trace_and_hermiticity_preserved(self, seed, dim):
        rng = np.random.default_rng(seed)
        grid = build_lattice(dim, 1.0)
        basis = SiteBasis(grid)
        amps = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        from collapsim import StateVector

        rho0 = DensityMatrix.from_state(StateVector.normalized(basis, amps))
        diag = rng.normal(size=dim)
        ops = _diag_set(basis, [diag])
        h = kinetic_hamiltonian(grid, basis)
        dt = 0.05 / (np.linalg.norm(h.matrix, 2) + np.max(np.abs(diag)) ** 2)
        out = evolve_density(rho0, h, ops, dt, 50 * dt)
        for mat in out.matrices:
            assert abs(np.trace(mat).real - 1.0) <= 1e-8
            assert np.max(np.abs(mat - mat.conj().T)) <= 1e-10


class TestTwoPointRate:
    def test_zero_separation(self):
        assert csl_two_point_rate(0.0, 2.0, 1.0) == 0.0

    def test_saturates_at_rate(self):
        rate = 0.8
        assert csl_two_point_rate(100.0, rate, 1.0) == pytest.approx(rate, rel=1e-6)

    def test_at_twice_correlation_length(self):
        rate = 1.0
        assert csl_two_point_rate(2.0, rate, 1.0) == pytest.approx(rate * (1 - math.exp(-1.0)))

    @given(
        d1=st.floats(0.0, 50.0),
        d2=st.floats(0.0, 50.0),
        rate=st.floats(0.0, 10.0),
        rc=st.floats(0.1, 5.0),
    )
    def test_monotone_in_separation(self, d1, d2, rate, rc):
        lo, hi = sorted((d1, d2))
        assert csl_two_point_rate(lo, rate, rc) <= csl_two_point_rate(hi, rate, rc) + 1e-15

    @pytest.mark.parametrize("ratio", [0.1, 0.5, 1.0, 2.0, 5.0, 100.0])
    def test_matches_oracle_fit(self, ratio):
        # the closed form must agree with a rate fitted from the integrated
        # master equation to 0.1%
        rate, rc = 1.0, 1.0
        d = ratio * rc
        grid = build_lattice(2, d)
        basis = SiteBasis(grid)
        ops = csl_operators(grid, site_number_operators(grid, basis), rate,
                            whiten(gaussian_kernel(grid, rc)))
        state = make_superposition(grid, [0.0, d], 0.0, [1.0, 1.0])
        gamma = csl_two_point_rate(d, rate, rc)
        horizon = min(3.0 / max(gamma, 1e-3), 400.0)
        dt = min(0.05 / max(ops.max_operator_norm**2, 1e-6), horizon / 60)
        out = evolve_density(DensityMatrix.from_state(state), None, ops, dt, horizon,
                             stride=max(1, int(round(horizon / dt)) // 200))
        fit = fit_exponential_decay(out.times, np.abs(out.element(0, 1)), enforce_gate=False)
        assert fit.rate == pytest.approx(gamma, rel=1e-3)


def test_trace_distance_basics():
    a = np.diag([1.0, 0.0]).astype(complex)
    b = np.diag([0.0, 1.0]).astype(complex)
    assert trace_distance(a, a) == 0.0
    assert trace_distance(a, b) == pytest.approx(1.0)
