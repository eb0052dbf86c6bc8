import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collapsim import (
    CollapseOperatorSet,
    ConfigurationError,
    KernelIntegrityError,
    Operator,
    build_lattice,
    csl_operators,
    gaussian_kernel,
    grw_hit_weights,
    grw_localization,
    make_superposition,
    site_number_operators,
    whiten,
)
from collapsim.collapse_ops import KernelMatrix
from collapsim.lattice import SiteBasis


class TestGaussianKernel:
    def test_unit_diagonal(self):
        grid = build_lattice(6, 0.7)
        kern = gaussian_kernel(grid, 1.3)
        assert np.allclose(np.diag(kern.matrix), 1.0)

    def test_value_at_twice_correlation_length(self):
        rc = 0.9
        grid = build_lattice(2, 2.0 * rc)
        kern = gaussian_kernel(grid, rc)
        assert kern.matrix[0, 1] == pytest.approx(math.exp(-1.0))

    def test_symmetry(self):
        grid = build_lattice(9, 0.31)
        kern = gaussian_kernel(grid, 0.77)
        assert np.array_equal(kern.matrix, kern.matrix.T)

    def test_rejects_nonpositive_length(self):
        grid = build_lattice(3, 1.0)
        with pytest.raises(ConfigurationError):
            gaussian_kernel(grid, 0.0)

    @given(
        sites=st.integers(2, 16),
        spacing=st.floats(0.05, 2.0),
        rc=st.floats(0.3, 3.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_entries_bounded_and_psd(self, sites, spacing, rc):
        grid = build_lattice(sites, spacing)
        kern = gaussian_kernel(grid, rc)
        # mathematically (0, 1]; entries at separations far beyond rc underflow
        # to exactly 0 in float64, which downstream code depends on
        assert np.all(kern.matrix >= 0)
        assert np.all(kern.matrix <= 1.0)
        assert np.all(np.diag(kern.matrix) == 1.0)
        evals = np.linalg.eigvalsh(kern.matrix)
        assert evals.min() >= -1e-10 * evals.max()


class TestWhiten:
    def test_identity_kernel_gives_identity_factor(self):
        # sites far apart: off-diagonals underflow to exactly 0
        grid = build_lattice(4, 100.0)
        kern = gaussian_kernel(grid, 1.0)
        assert np.array_equal(kern.matrix, np.eye(4))
        wt = whiten(kern)
        assert wt.rank == 4
        assert np.allclose(wt.factor, np.eye(4))

    def test_two_site_roundtrip(self):
        c = math.exp(-1.0)
        grid = build_lattice(2, 2.0)
        kern = gaussian_kernel(grid, 1.0)
        assert kern.matrix[0, 1] == pytest.approx(c)
        wt = whiten(kern)
        assert np.max(np.abs(wt.factor @ wt.factor.T - kern.matrix)) <= 1e-8

    def test_smooth_kernel_is_numerically_low_rank(self):
        grid = build_lattice(64, 0.1)
        kern = gaussian_kernel(grid, 1.0)
        wt = whiten(kern)
        evals = np.linalg.eigvalsh(kern.matrix)
        expected_rank = int(np.sum(evals > 1e-12 * evals.max()))
        assert wt.rank == expected_rank
        assert wt.rank < 64

    def test_rejects_bad_threshold(self):
        grid = build_lattice(3, 1.0)
        kern = gaussian_kernel(grid, 1.0)
        with pytest.raises(ConfigurationError):
            whiten(kern, threshold=1.0)

    def test_negative_eigenvalue_raises(self):
        grid = build_lattice(2, 1.0)
        bad = KernelMatrix(np.array([[1.0, 2.0], [2.0, 1.0]]), grid, 1.0)
        with pytest.raises(KernelIntegrityError):
            whiten(bad)

    @given(
        sites=st.integers(2, 24),
        spacing=st.floats(0.05, 2.0),
        rc=st.floats(0.3, 3.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_roundtrip_property(self, sites, spacing, rc):
        grid = build_lattice(sites, spacing)
        kern = gaussian_kernel(grid, rc)
        wt = whiten(kern)
        assert wt.roundtrip_error(kern) <= 1e-8

    def test_columns_descend_in_eigenvalue(self):
        grid = build_lattice(16, 0.4)
        wt = whiten(gaussian_kernel(grid, 1.0))
        col_norms = np.linalg.norm(wt.factor, axis=0)
        assert np.all(np.diff(col_norms) <= 1e-12)


def _csl_set(sites, spacing, rate, rc):
    grid = build_lattice(sites, spacing)
    basis = SiteBasis(grid)
    nops = site_number_operators(grid, basis)
    wt = whiten(gaussian_kernel(grid, rc))
    return grid, basis, csl_operators(grid, nops, rate, wt)


class TestCslOperators:
    def test_zero_rate_gives_zero_operators(self):
        _, _, ops = _csl_set(4, 1.0, 0.0, 1.0)
        assert ops.max_operator_norm == 0.0

    def test_all_hermitian_and_commuting(self):
        _, _, ops = _csl_set(5, 0.8, 2.0, 1.0)
        for a in ops.operators:
            assert a.hermitian
            for b in ops.operators:
                comm = a.matrix @ b.matrix - b.matrix @ a.matrix
                assert np.max(np.abs(comm)) == 0.0

    def test_two_site_dephasing_matches_closed_form(self):
        # Lindblad dephasing rate between sites a, b for diagonal operators:
        # 1/2 sum_k (L_k[a] - L_k[b])^2 = rate * (1 - exp(-d^2/(4 rc^2)))
        rate, rc, d = 1.7, 1.2, 2.5
        grid, basis, ops = _csl_set(2, d, rate, rc)
        diags = ops.diagonals
        gamma = 0.5 * np.sum((diags[:, 0] - diags[:, 1]) ** 2)
        assert gamma == pytest.approx(rate * (1 - math.exp(-(d**2) / (4 * rc**2))), rel=1e-10)

    def test_far_sites_decay_at_bare_rate(self):
        rate = 0.6
        grid, basis, ops = _csl_set(2, 100.0, rate, 1.0)
        diags = ops.diagonals
        gamma = 0.5 * np.sum((diags[:, 0] - diags[:, 1]) ** 2)
        assert gamma == pytest.approx(rate, rel=1e-6)

    def test_dimension_mismatch_rejected(self):
        grid = build_lattice(4, 1.0)
        basis = SiteBasis(grid)
        nops = site_number_operators(grid, basis)
        other = whiten(gaussian_kernel(build_lattice(3, 1.0), 1.0))
        with pytest.raises(ConfigurationError):
            csl_operators(grid, nops, 1.0, other)

    def test_negative_rate_rejected(self):
        grid = build_lattice(3, 1.0)
        basis = SiteBasis(grid)
        nops = site_number_operators(grid, basis)
        wt = whiten(gaussian_kernel(grid, 1.0))
        with pytest.raises(ConfigurationError):
            csl_operators(grid, nops, -0.1, wt)


class TestOperatorSet:
    def test_requires_hermitian(self):
        grid = build_lattice(2, 1.0)
        basis = SiteBasis(grid)
        bad = Operator(np.array([[0, 1], [0, 0]], dtype=complex), basis)
        with pytest.raises(ConfigurationError):
            CollapseOperatorSet((bad,), rate=1.0)

    def test_eigenspace_labels_by_first_appearance(self):
        grid = build_lattice(2, 1.0)
        basis = SiteBasis(grid)
        op = Operator(np.diag([1.0, -1.0]).astype(complex), basis, hermitian=True)
        ops = CollapseOperatorSet((op,), rate=1.0)
        assert list(ops.eigenspace_labels) == [0, 1]

    def test_degenerate_diagonals_share_eigenspace(self):
        grid = build_lattice(3, 1.0)
        basis = SiteBasis(grid)
        op = Operator(np.diag([2.0, 2.0, 5.0]).astype(complex), basis, hermitian=True)
        ops = CollapseOperatorSet((op,), rate=1.0)
        assert list(ops.eigenspace_labels) == [0, 0, 1]


class TestGrwLocalization:
    def test_localized_state_is_fixed_point(self):
        grid = build_lattice(4, 5.0)
        state = make_superposition(grid, [10.0], 0.0, [1.0])
        hit, weight = grw_localization(state, 0, 10.0, 1.0)
        assert weight == pytest.approx(1.0)
        assert np.allclose(hit.amplitudes, state.amplitudes)

    def test_symmetric_superposition_collapses_with_half_weight(self):
        grid = build_lattice(2, 50.0)
        state = make_superposition(grid, [0.0, 50.0], 0.0, [1.0, 1.0])
        hit, weight = grw_localization(state, 0, 0.0, 1.0)
        assert weight == pytest.approx(0.5)
        assert abs(hit.amplitudes[0]) == pytest.approx(1.0)

    def test_coincident_branches_unchanged(self):
        # both branches at the same point: the hit cannot tell them apart
        grid = build_lattice(3, 1.0)
        state = make_superposition(grid, [1.0], 0.0, [1.0])
        mixed = state
        hit, weight = grw_localization(mixed, 0, 1.0, 2.0)
        assert weight == pytest.approx(1.0)
        assert np.allclose(hit.amplitudes, mixed.amplitudes)

    def test_weights_normalize_to_one(self):
        grid = build_lattice(7, 0.8)
        state = make_superposition(grid, [1.0, 4.0], 0.5, [1.0, 1.0j])
        probs = grw_hit_weights(state, 0, 1.0)
        assert probs.sum() == pytest.approx(1.0, abs=1e-8)
        assert np.all(probs >= 0)

    def test_center_outside_grid_rejected(self):
        grid = build_lattice(3, 1.0)
        state = make_superposition(grid, [1.0], 0.0, [1.0])
        with pytest.raises(ConfigurationError):
            grw_localization(state, 0, 99.0, 1.0)


    def test_annihilating_hit_raises(self):
        # a hit centered many correlation lengths from all support underflows
        # the post-hit norm to zero
        grid = build_lattice(2, 1000.0)
        state = make_superposition(grid, [0.0], 0.0, [1.0])
        from collapsim import DegenerateHitError

        with pytest.raises(DegenerateHitError):
            grw_localization(state, 0, 1000.0, 1.0)
