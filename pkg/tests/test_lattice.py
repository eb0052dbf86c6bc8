import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collapsim import (
    ConfigurationError,
    DegenerateInputError,
    ResourceLimitError,
    StateVector,
    bosonic_basis,
    build_lattice,
    compose_distinguishable,
    kinetic_hamiltonian,
    make_superposition,
    site_number_operators,
)
from collapsim.lattice import BosonicBasis, ProductBasis, SiteBasis


def test_build_lattice_two_sites():
    grid = build_lattice(2, 1.0)
    assert np.allclose(grid.positions, [0.0, 1.0])


def test_build_lattice_five_sites():
    grid = build_lattice(5, 0.5)
    assert np.allclose(grid.positions, [0.0, 0.5, 1.0, 1.5, 2.0])


def test_build_lattice_rejects_single_site():
    with pytest.raises(ConfigurationError):
        build_lattice(1, 1.0)


def test_build_lattice_rejects_nonpositive_spacing():
    with pytest.raises(ConfigurationError):
        build_lattice(4, 0.0)
    with pytest.raises(ConfigurationError):
        build_lattice(4, -0.3)


@given(sites=st.integers(2, 40), spacing=st.floats(1e-3, 10.0))
def test_lattice_positions_uniform_increasing(sites, spacing):
    grid = build_lattice(sites, spacing)
    diffs = np.diff(grid.positions)
    assert np.all(diffs > 0)
    assert np.allclose(diffs, spacing)


class TestSuperposition:
    def test_single_center_width_zero_is_basis_vector(self):
        grid = build_lattice(5, 1.0)
        state = make_superposition(grid, [2.0], 0.0, [1.0])
        expected = np.zeros(5)
        expected[2] = 1.0
        assert np.allclose(state.amplitudes, expected)

    def test_nearest_site_snapping(self):
        grid = build_lattice(5, 1.0)
        state = make_superposition(grid, [2.2], 0.0, [1.0])
        assert abs(state.amplitudes[2]) == pytest.approx(1.0)

    def test_two_equal_branches(self):
        grid = build_lattice(4, 5.0)
        state = make_superposition(grid, [0.0, 15.0], 0.0, [1.0, 1.0])
        assert state.amplitudes[0] == pytest.approx(1 / np.sqrt(2))
        assert state.amplitudes[3] == pytest.approx(1 / np.sqrt(2))

    def test_unequal_weights_give_born_probabilities(self):
        grid = build_lattice(2, 3.0)
        state = make_superposition(grid, [0.0, 3.0], 0.0, [np.sqrt(0.3), np.sqrt(0.7)])
        probs = state.probabilities()
        assert probs[0] == pytest.approx(0.3)
        assert probs[1] == pytest.approx(0.7)

    def test_center_outside_grid_rejected(self):
        grid = build_lattice(4, 1.0)
        with pytest.raises(ConfigurationError):
            make_superposition(grid, [5.0], 0.0, [1.0])

    def test_all_zero_weights_rejected(self):
        grid = build_lattice(4, 1.0)
        with pytest.raises(DegenerateInputError):
            make_superposition(grid, [0.0, 1.0], 0.0, [0.0, 0.0])

    def test_cancelling_branches_rejected(self):
        grid = build_lattice(4, 1.0)
        with pytest.raises(DegenerateInputError):
            make_superposition(grid, [1.0, 1.0], 0.0, [1.0, -1.0])

    def test_gaussian_width_sets_probability_variance(self):
        # fine lattice: probability |psi|^2 ~ exp(-(x-c)^2/(2 width^2))
        grid = build_lattice(201, 0.05)
        width = 0.7
        state = make_superposition(grid, [5.0], width, [1.0])
        probs = state.probabilities()
        x = grid.positions
        mean = np.sum(x * probs)
        var = np.sum((x - mean) ** 2 * probs)
        assert mean == pytest.approx(5.0, abs=1e-9)
        assert var == pytest.approx(width**2, rel=1e-3)

    @given(
        n_centers=st.integers(1, 3),
        width=st.floats(0.0, 2.0),
        seed=st.integers(0, 10_000),
    )
    @settings(max_examples=60, deadline=None)
    def test_norm_is_one(self, n_centers, width, seed):
        rng = np.random.default_rng(seed)
        grid = build_lattice(12, 0.8)
        lo, hi = grid.extent
        centers = rng.uniform(lo, hi, size=n_centers)
        weights = rng.normal(size=n_centers) + 1j * rng.normal(size=n_centers)
        if np.all(np.abs(weights) < 1e-12):
            weights[0] = 1.0
        state = make_superposition(grid, centers, width, weights)
        assert abs(np.linalg.norm(state.amplitudes) - 1.0) <= 1e-10


class TestNumberOperators:
    def test_single_particle_projectors(self):
        grid = build_lattice(2, 1.0)
        ops = site_number_operators(grid, SiteBasis(grid))
        assert np.allclose(ops[0].matrix, np.diag([1.0, 0.0]))
        assert np.allclose(ops[1].matrix, np.diag([0.0, 1.0]))

    def test_two_bosons_two_sites(self):
        grid = build_lattice(2, 1.0)
        basis = bosonic_basis(grid, 2)
        # occupation order (2,0), (1,1), (0,2)
        assert np.allclose(basis.occupations, [[2, 0], [1, 1], [0, 2]])
        ops = site_number_operators(grid, basis)
        assert np.allclose(ops[0].matrix, np.diag([2.0, 1.0, 0.0]))

    def test_sum_is_particle_number_times_identity(self):
        grid = build_lattice(3, 1.0)
        basis = bosonic_basis(grid, 2)
        total = sum(op.matrix for op in site_number_operators(grid, basis))
        assert np.allclose(total, 2.0 * np.eye(basis.dimension))

    def test_grid_mismatch_rejected(self):
        grid = build_lattice(3, 1.0)
        other = build_lattice(3, 2.0)
        with pytest.raises(ConfigurationError):
            site_number_operators(other, SiteBasis(grid))

    @given(sites=st.integers(2, 5), particles=st.integers(1, 3))
    @settings(max_examples=30, deadline=None)
    def test_bosonic_invariants(self, sites, particles):
        grid = build_lattice(sites, 1.0)
        basis = bosonic_basis(grid, particles)
        occ = basis.occupations
        # fixed total particle number, non-negative integer occupation
        assert np.all(occ.sum(axis=1) == particles)
        assert np.all(occ >= 0)
        assert np.all(occ == np.round(occ))
        ops = site_number_operators(grid, basis)
        for a in ops:
            for b in ops:
                comm = a.matrix @ b.matrix - b.matrix @ a.matrix
                assert np.max(np.abs(comm)) == 0.0


class TestComposeDistinguishable:
    def test_single_particle_is_site_basis(self):
        grid = build_lattice(4, 1.0)
        assert compose_distinguishable(grid, 1) == SiteBasis(grid)

    def test_two_particles_three_sites_dimension(self):
        grid = build_lattice(3, 1.0)
        assert compose_distinguishable(grid, 2).dimension == 9

    def test_dimension_exactly_at_cap_allowed(self):
        grid = build_lattice(64, 1.0)
        basis = compose_distinguishable(grid, 2)
        assert basis.dimension == 4096

    def test_dimension_above_cap_rejected(self):
        grid = build_lattice(65, 1.0)
        with pytest.raises(ResourceLimitError):
            compose_distinguishable(grid, 2)

    def test_number_operators_sum_over_particles(self):
        grid = build_lattice(2, 1.0)
        basis = compose_distinguishable(grid, 2)
        ops = site_number_operators(grid, basis)
        # configurations (0,0), (0,1), (1,0), (1,1): n_0 counts particles at site 0
        assert np.allclose(np.diag(ops[0].matrix).real, [2, 1, 1, 0])
        total = sum(op.matrix for op in ops)
        assert np.allclose(total, 2.0 * np.eye(4))


class TestStateVector:
    def test_rejects_unnormalized(self):
        grid = build_lattice(2, 1.0)
        with pytest.raises(ConfigurationError):
            StateVector(SiteBasis(grid), np.array([1.0, 1.0]))

    def test_rejects_dimension_mismatch(self):
        grid = build_lattice(3, 1.0)
        with pytest.raises(ConfigurationError):
            StateVector(SiteBasis(grid), np.array([1.0, 0.0]))

    def test_normalized_constructor(self):
        grid = build_lattice(2, 1.0)
        state = StateVector.normalized(SiteBasis(grid), np.array([3.0, 4.0]))
        assert np.allclose(state.probabilities(), [9 / 25, 16 / 25])


class TestKineticHamiltonian:
    def test_single_particle_tridiagonal(self):
        grid = build_lattice(4, 0.5)
        h = kinetic_hamiltonian(grid, SiteBasis(grid), mass=2.0)
        hop = -1.0 / (2.0 * 2.0 * 0.25)
        assert h.matrix[0, 1] == pytest.approx(hop)
        assert h.matrix[1, 1] == pytest.approx(-2 * hop)
        assert np.max(np.abs(h.matrix - h.matrix.conj().T)) == 0.0

    def test_product_basis_matches_kron_sum(self):
        grid = build_lattice(3, 1.0)
        single = kinetic_hamiltonian(grid, SiteBasis(grid)).matrix
        pair = kinetic_hamiltonian(grid, compose_distinguishable(grid, 2)).matrix
        expected = np.kron(single, np.eye(3)) + np.kron(np.eye(3), single)
        assert np.allclose(pair, expected)

    def test_bosonic_hopping_amplitudes(self):
        grid = build_lattice(2, 1.0)
        basis = bosonic_basis(grid, 2)
        h = kinetic_hamiltonian(grid, basis).matrix
        hop = -0.5
        # <(1,1)| a0^dag a1 |(0,2)> = sqrt(1 * 2)
        assert h[1, 2] == pytest.approx(hop * np.sqrt(2))
        assert h[1, 0] == pytest.approx(hop * np.sqrt(2))
        assert np.max(np.abs(h - h.conj().T)) == 0.0
