import numpy as np
import pytest

from collapsim import (
    CollapseOperatorSet,
    ConfigurationError,
    DensityMatrix,
    IntegratorConfig,
    Operator,
    StateVector,
    born_frequencies,
    build_lattice,
    csl_operators,
    csl_two_point_rate,
    evolve_density,
    fitted_decay_rate,
    gaussian_kernel,
    kinetic_hamiltonian,
    make_superposition,
    oracle_comparison,
    run_ensemble,
    run_trajectory,
    site_number_operators,
    whiten,
)
from collapsim.ensembles import EnsembleProblem, reduce_chunks, _chunk_bounds, _run_chunk
from collapsim.errors import InconclusiveCollapseError
from collapsim.lattice import SiteBasis, bosonic_basis
from collapsim.seeding import trajectory_seed


def _dephasing_problem(rate=1.0, weights=(np.sqrt(0.3), np.sqrt(0.7)), horizon=20.0,
                       dt=0.01, stride=100, observables=()):
    grid = build_lattice(2, 10.0)
    basis = SiteBasis(grid)
    L = Operator(np.sqrt(rate) * np.diag([1.0, -1.0]).astype(complex), basis, hermitian=True)
    ops = CollapseOperatorSet((L,), rate=rate)
    init = StateVector(basis, np.array(weights, dtype=complex))
    cfg = IntegratorConfig(dt=dt, horizon=horizon, max_norm_drift=0.5, stride=stride)
    return EnsembleProblem("sde", init, None, cfg, ops=ops, observables=observables)


def _csl_two_site_problem(d, rate=1.0, rc=1.0, n_points=120, observables=("coherence:0,1",)):
    grid = build_lattice(2, d)
    basis = SiteBasis(grid)
    ops = csl_operators(grid, site_number_operators(grid, basis), rate,
                        whiten(gaussian_kernel(grid, rc)))
    init = make_superposition(grid, [0.0, d], 0.0, [1.0, 1.0])
    gamma = max(csl_two_point_rate(d, rate, rc), 5e-3 * rate)
    horizon = 3.2 / gamma
    dt = min(0.01 / max(ops.max_operator_norm**2, 1e-9), horizon / (2 * n_points))
    stride = max(1, int(round(horizon / dt)) // n_points)
    cfg = IntegratorConfig(dt=dt, horizon=horizon, max_norm_drift=0.5, stride=stride)
    return EnsembleProblem("sde", init, None, cfg, ops=ops, observables=observables)


class TestRunEnsemble:
    def test_single_trajectory_matches_record(self):
        prob = _dephasing_problem(horizon=2.0, stride=10,
                                  observables=("site_probabilities",))
        stats = run_ensemble(prob, 1, master_seed=71)
        rec = run_trajectory(prob.init, None, prob.ops, prob.integrator,
                             seed=trajectory_seed(71, 0),
                             observables=("site_probabilities",))
        assert np.array_equal(stats.times, rec.times)
        assert np.array_equal(stats.observable_means["site_probabilities"],
                              rec.observables["site_probabilities"])
        assert stats.outcome_counts.sum() == 1

    def test_zero_coupling_has_zero_variance(self):
        grid = build_lattice(3, 1.0)
        basis = SiteBasis(grid)
        h = kinetic_hamiltonian(grid, basis)
        init = make_superposition(grid, [0.0, 2.0], 0.0, [1.0, 1.0])
        cfg = IntegratorConfig(dt=0.01, horizon=1.0, stride=10)
        prob = EnsembleProblem("sde", init, h, cfg, ops=CollapseOperatorSet((), rate=0.0),
                               observables=("energy",))
        stats = run_ensemble(prob, 50, master_seed=3)
        # identical trajectories: variance vanishes up to float roundoff
        assert np.max(stats.observable_ses["energy"]) <= 1e-8
        # mean state equals exact unitary evolution
        from scipy.linalg import expm

        exact = expm(-1j * h.matrix * cfg.horizon) @ init.amplitudes
        rho_exact = np.outer(exact, exact.conj())
        assert np.max(np.abs(stats.mean_rho[-1] - rho_exact)) <= 1e-8

    def test_worker_counts_give_identical_stats(self):
        prob = _dephasing_problem(horizon=2.0, dt=0.02, stride=10,
                                  observables=("site_probabilities", "coherence:0,1"))
        runs = {w: run_ensemble(prob, 2500, master_seed=11, workers=w) for w in (1, 2, 8)}
        base = runs[1]
        for w in (2, 8):
            other = runs[w]
            assert np.array_equal(base.mean_rho, other.mean_rho)
            assert np.array_equal(base.outcome_counts, other.outcome_counts)
            for key in base.observable_means:
                assert np.array_equal(base.observable_means[key], other.observable_means[key])
                assert np.array_equal(base.observable_ses[key], other.observable_ses[key])

    def test_reduction_is_order_independent(self):
        prob = _dephasing_problem(horizon=1.0, dt=0.02, stride=10,
                                  observables=("coherence:0,1",))
        n = 2500
        tasks = [(prob, 5, s, e) for s, e in _chunk_bounds(n)]
        chunks = [_run_chunk(t) for t in tasks]
        forward = reduce_chunks(list(chunks), n, 5, prob)
        backward = reduce_chunks(list(reversed(chunks)), n, 5, prob)
        assert np.array_equal(forward.mean_rho, backward.mean_rho)
        assert np.array_equal(forward.outcome_counts, backward.outcome_counts)
        for key in forward.observable_means:
            assert np.array_equal(forward.observable_means[key], backward.observable_means[key])

    def test_unresolved_fraction_small_at_long_horizon(self):
        prob = _dephasing_problem(horizon=20.0)
        stats = run_ensemble(prob, 2000, master_seed=23)
        assert stats.outcome_counts[-1] / stats.n_ok <= 0.01


class TestBornFrequencies:
    def test_eigenstate_input_always_lands_there(self):
        prob = _dephasing_problem(weights=(0.0, 1.0), horizon=5.0)
        stats = run_ensemble(prob, 200, master_seed=1)
        bf = born_frequencies(stats)
        assert bf.frequencies[1] == 1.0
        assert bf.frequencies[0] == 0.0

    def test_equal_superposition(self):
        prob = _dephasing_problem(weights=(1 / np.sqrt(2), 1 / np.sqrt(2)))
        stats = run_ensemble(prob, 4000, master_seed=8)
        bf = born_frequencies(stats)
        assert abs(bf.frequencies[0] - 0.5) <= 3 * bf.standard_errors[0]

    def test_asymmetric_superposition(self):
        prob = _dephasing_problem()
        stats = run_ensemble(prob, 10_000, master_seed=15)
        bf = born_frequencies(stats)
        tol = 3 * np.sqrt(0.3 * 0.7 / bf.n_resolved)
        assert abs(bf.frequencies[0] - 0.3) <= tol

    def test_inconclusive_when_horizon_too_short(self):
        prob = _dephasing_problem(horizon=0.05, dt=0.005, stride=1)
        stats = run_ensemble(prob, 300, master_seed=2)
        with pytest.raises(InconclusiveCollapseError):
            born_frequencies(stats)

    def test_born_rule_for_random_superpositions(self):
        # five random 2- and 3-outcome draws, fixed seeds; frequencies within
        # 3 binomial SE of the squared weights
        rng = np.random.default_rng(2024)
        for case in range(5):
            n_out = 2 if case % 2 == 0 else 3
            amps = rng.normal(size=n_out) + 1j * rng.normal(size=n_out)
            amps /= np.linalg.norm(amps)
            grid = build_lattice(n_out, 10.0)
            basis = SiteBasis(grid)
            diag = np.arange(n_out, dtype=float) - (n_out - 1) / 2.0
            L = Operator(np.diag(diag).astype(complex), basis, hermitian=True)
            ops = CollapseOperatorSet((L,), rate=1.0)
            init = StateVector(basis, amps)
            cfg = IntegratorConfig(dt=0.01, horizon=25.0, max_norm_drift=0.5, stride=250)
            prob = EnsembleProblem("sde", init, None, cfg, ops=ops)
            stats = run_ensemble(prob, 10_000, master_seed=100 + case)
            bf = born_frequencies(stats)
            target = np.abs(amps) ** 2
            for k in range(n_out):
                se = max(bf.standard_errors[k], 1e-4)
                assert abs(bf.frequencies[k] - target[k]) <= 3 * se, (
                    f"case {case}, outcome {k}: {bf.frequencies[k]} vs {target[k]}")


class TestFittedDecayRate:
    def test_far_separation_decays_at_bare_rate(self):
        rate = 1.0
        prob = _csl_two_site_problem(d=100.0, rate=rate)
        stats = run_ensemble(prob, 10_000, master_seed=31)
        fit = fitted_decay_rate(stats, (0, 1))
        assert abs(fit.rate - rate) <= max(0.05 * rate, 3 * fit.rate_se)

    def test_coincident_branches_do_not_decay(self):
        # two packets at the same site: collapse noise cannot tell them apart
        rate = 1.0
        grid = build_lattice(2, 1.0)
        basis = SiteBasis(grid)
        ops = csl_operators(grid, site_number_operators(grid, basis), rate,
                            whiten(gaussian_kernel(grid, 1.0)))
        init = make_superposition(grid, [0.0], 0.0, [1.0])
        cfg = IntegratorConfig(dt=0.01, horizon=2.0, max_norm_drift=0.5, stride=10)
        prob = EnsembleProblem("sde", init, None, cfg, ops=ops,
                               observables=("coherence:0,0",))
        stats = run_ensemble(prob, 500, master_seed=41)
        series = np.abs(stats.coherence_means["coherence_0_0"])
        assert series[-1] >= 0.99 * series[0]

    def test_two_bosons_decay_four_times_faster(self):
        rate, rc, d = 1.0, 1.0, 20.0
        grid = build_lattice(2, d)
        basis = bosonic_basis(grid, 2)
        ops = csl_operators(grid, site_number_operators(grid, basis), rate,
                            whiten(gaussian_kernel(grid, rc)))
        init = make_superposition(grid, [0.0, d], 0.0, [1.0, 1.0], basis=basis)
        target = 4.0 * rate
        horizon = 3.2 / target
        dt = 0.01 / ops.max_operator_norm**2
        stride = max(1, int(round(horizon / dt)) // 120)
        cfg = IntegratorConfig(dt=dt, horizon=horizon, max_norm_drift=0.5, stride=stride)
        prob = EnsembleProblem("sde", init, None, cfg, ops=ops)
        stats = run_ensemble(prob, 10_000, master_seed=51)
        fit = fitted_decay_rate(stats, (0, 2))
        assert abs(fit.rate - target) <= 0.05 * target

    def test_missing_series_rejected(self):
        grid = build_lattice(2, 1.0)
        basis = SiteBasis(grid)
        init = make_superposition(grid, [0.0], 0.0, [1.0])
        cfg = IntegratorConfig(dt=0.01, horizon=0.5, stride=5)
        prob = EnsembleProblem("sde", init, None, cfg, ops=CollapseOperatorSet((), rate=0.0),
                               record_rho=False)
        stats = run_ensemble(prob, 10, master_seed=1)
        with pytest.raises(ConfigurationError):
            fitted_decay_rate(stats, (0, 1))


class TestOracleComparison:
    def test_four_dim_scenario_agrees(self):
        rate, rc = 1.0, 1.0
        grid = build_lattice(4, 1.0)
        basis = SiteBasis(grid)
        ops = csl_operators(grid, site_number_operators(grid, basis), rate,
                            whiten(gaussian_kernel(grid, rc)))
        h = kinetic_hamiltonian(grid, basis)
        init = make_superposition(grid, [0.0, 3.0], 0.5, [1.0, 1.0])
        from collapsim.engine import stability_bound

        dt = 0.01 / stability_bound(h, ops)
        cfg = IntegratorConfig(dt=dt, horizon=3.0, max_norm_drift=0.5,
                               stride=max(1, int(round(3.0 / dt)) // 100))
        prob = EnsembleProblem("sde", init, h, cfg, ops=ops)
        stats = run_ensemble(prob, 10_000, master_seed=21)
        oracle = evolve_density(DensityMatrix.from_state(init), h, ops, cfg.dt,
                                cfg.horizon, cfg.stride)
        cmp = oracle_comparison(stats, oracle)
        assert cmp["passed"], f"max trace distance {cmp['max_trace_distance']}"

    def test_martingale_of_eigenspace_populations(self):
        # H=0, commuting Hermitian operators: mean populations are constant
        prob = _dephasing_problem(horizon=5.0, dt=0.01, stride=100,
                                  observables=("site_probabilities",))
        stats = run_ensemble(prob, 10_000, master_seed=13)
        p0 = stats.observable_means["site_probabilities"][:, 0]
        se = stats.observable_ses["site_probabilities"][:, 0]
        checkpoints = [len(p0) // 2, len(p0) - 1]
        for t in checkpoints:
            assert abs(p0[t] - 0.3) <= 3 * max(se[t], 1e-6)


def test_high_error_rate_fails_ensemble():
    # a drift bound no step can satisfy errors every trajectory
    grid = build_lattice(2, 10.0)
    basis = SiteBasis(grid)
    L = Operator(np.diag([1.0, -1.0]).astype(complex), basis, hermitian=True)
    ops = CollapseOperatorSet((L,), rate=1.0)
    init = StateVector(basis, np.array([np.sqrt(0.3), np.sqrt(0.7)], dtype=complex))
    cfg = IntegratorConfig(dt=0.05, horizon=1.0, max_norm_drift=1e-9, stride=1)
    prob = EnsembleProblem("sde", init, None, cfg, ops=ops)
    from collapsim.errors import EnsembleError

    with pytest.raises(EnsembleError):
        run_ensemble(prob, 100, master_seed=1)
