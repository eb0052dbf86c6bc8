"""Trajectory ensembles: deterministic seeding, parallel execution, reductions.

Trajectories are processed in fixed chunks of ``CHUNK_SIZE``.  Chunk
boundaries and per-trajectory seeds depend only on (master seed, trajectory
index), and the final reduction folds chunk aggregates in index order, so an
ensemble is bit-identical no matter how many workers computed it.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import engine
from .engine import IntegratorConfig, parse_observable
from .errors import (
    ConfigurationError,
    EnsembleError,
    InconclusiveCollapseError,
)
from .fitting import DecayFit, fit_exponential_decay
from .lattice import StateVector
from .lindblad import trace_distance
from .seeding import SEED_DERIVATION_TAG, trajectory_seed

CHUNK_SIZE = 1024
RHO_DIMENSION_CAP = 64
ERROR_RATE_LIMIT = 0.01
RESOLVED_FRACTION_REQUIRED = 0.99


@dataclass(frozen=True)
class EnsembleProblem:
    """Everything needed to launch one trajectory of an ensemble.

    ``kind`` selects the process: "sde" runs the diffusive collapse equation
    with ``ops``; "grw" runs the localization-hit process with (rate,
    correlation_length, particles).
    """

    kind: str
    init: StateVector
    hamiltonian: object
    integrator: IntegratorConfig
    ops: object = None
    rate: float = 0.0
    correlation_length: float = 1.0
    particles: int = 1
    observables: tuple = ()
    record_rho: bool = None

    def __post_init__(self):
        if self.kind not in ("sde", "grw"):
            raise ConfigurationError(f"unknown problem kind {self.kind!r}")
        specs = tuple(parse_observable(o) if isinstance(o, str) else o for o in self.observables)
        object.__setattr__(self, "observables", specs)
        if self.record_rho is None:
            object.__setattr__(self, "record_rho", self.init.dimension <= RHO_DIMENSION_CAP)


@dataclass
class EnsembleStats:
    """Order-independent reductions over an ensemble of trajectories."""

    n_traj: int
    n_ok: int
    times: np.ndarray
    mean_rho: np.ndarray           # (T, d, d) or None when dimension too large
    var_rho: np.ndarray            # per-element complex variance, or None
    outcome_counts: np.ndarray     # per eigenspace, last entry = unresolved
    observable_means: dict
    observable_ses: dict
    coherence_means: dict          # complex series per recorded pair
    master_seed: int
    seed_derivation: str
    errors: list
    max_norm_drift: float
    mean_median_drift: float
    stability: float

    @property
    def n_outcomes(self) -> int:
        return len(self.outcome_counts) - 1

    @property
    def resolved_count(self) -> int:
        return int(self.outcome_counts[:-1].sum())

    def rho_standard_error(self) -> np.ndarray:
        """Per-time Monte Carlo scale of the trace distance of mean_rho.

        Uses 0.5 * sqrt(dim * sum_ij var_ij / N), an upper-bound style
        propagation of the elementwise variances through the trace norm.
        """
        if self.var_rho is None:
            return None
        dim = self.mean_rho.shape[1]
        return 0.5 * np.sqrt(dim * self.var_rho.sum(axis=(1, 2)) / max(1, self.n_ok))


def _chunk_bounds(n_traj):
    return [(s, min(s + CHUNK_SIZE, n_traj)) for s in range(0, n_traj, CHUNK_SIZE)]


def _run_chunk(args):
    problem, master_seed, start, stop = args
    seeds = [trajectory_seed(master_seed, i) for i in range(start, stop)]
    if problem.kind == "sde":
        return engine.integrate_sde_chunk(
            problem.init, problem.hamiltonian, problem.ops, problem.integrator,
            seeds, problem.observables, start=start, record_rho=problem.record_rho)
    return engine.integrate_grw_chunk(
        problem.init, problem.hamiltonian, problem.rate, problem.correlation_length,
        problem.particles, problem.integrator, seeds, problem.observables,
        start=start, record_rho=problem.record_rho)


def run_ensemble(problem: EnsembleProblem, n_traj: int, master_seed: int,
                 workers: int = 1) -> EnsembleStats:
    """Run ``n_traj`` trajectories with seeds derived from (master_seed, index).

    The reduction is a deterministic index-ordered fold; worker count only
    changes wall-clock time.  Raises EnsembleError when more than 1% of
    trajectories fail.
    """
    if n_traj < 1:
        raise ConfigurationError("need at least one trajectory")
    if workers < 1:
        raise ConfigurationError("worker count must be >= 1")
    tasks = [(problem, int(master_seed), s, e) for s, e in _chunk_bounds(n_traj)]
    if workers == 1 or len(tasks) == 1:
        chunks = [_run_chunk(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            chunks = list(pool.map(_run_chunk, tasks))
    return reduce_chunks(chunks, n_traj, master_seed, problem)


def reduce_chunks(chunks, n_traj, master_seed, problem) -> EnsembleStats:
    """Fold chunk aggregates in trajectory-index order (order of arrival is irrelevant)."""
    chunks = sorted(chunks, key=lambda c: c.start)
    first = chunks[0]
    n_ok = sum(c.n_ok for c in chunks)
    errors = sorted((e for c in chunks for e in c.errors), key=lambda e: e[0])
    if n_traj and len(errors) / n_traj > ERROR_RATE_LIMIT:
        raise EnsembleError(
            f"{len(errors)} of {n_traj} trajectories failed: {errors[:3]} ...")

    n_groups = max(len(c.outcome_counts) for c in chunks)
    outcome_counts = np.zeros(n_groups, dtype=int)
    for c in chunks:
        outcome_counts[: len(c.outcome_counts) - 1] += c.outcome_counts[:-1]
        outcome_counts[-1] += c.outcome_counts[-1]

    sum_rho = None
    var_rho = None
    mean_rho = None
    if first.sum_rho is not None:
        sum_rho = np.zeros_like(first.sum_rho)
        sumsq_rho = np.zeros_like(first.sumsq_rho)
        for c in chunks:
            sum_rho += c.sum_rho
            sumsq_rho += c.sumsq_rho
        mean_rho = sum_rho / max(1, n_ok)
        var_rho = np.maximum(sumsq_rho / max(1, n_ok) - np.abs(mean_rho) ** 2, 0.0)

    obs_means, obs_ses, coh_means = {}, {}, {}
    for spec in problem.observables:
        name = spec.name
        total = np.zeros_like(first.obs_sum[name])
        totalsq = np.zeros_like(first.obs_sumsq[name])
        for c in chunks:
            total += c.obs_sum[name]
            totalsq += c.obs_sumsq[name]
        n = max(1, n_ok)
        mean = total / n
        if spec.kind == "coherence":
            coh_means[name] = mean
            var = np.maximum(totalsq[..., 0] / n - mean.real**2, 0.0)
            var += np.maximum(totalsq[..., 1] / n - mean.imag**2, 0.0)
            obs_means[name] = np.abs(mean)
        else:
            var = np.maximum(totalsq / n - mean**2, 0.0)
            obs_means[name] = mean
        bessel = n / max(1, n - 1)
        obs_ses[name] = np.sqrt(var * bessel / n)

    return EnsembleStats(
        n_traj=n_traj,
        n_ok=n_ok,
        times=first.times,
        mean_rho=mean_rho,
        var_rho=var_rho,
        outcome_counts=outcome_counts,
        observable_means=obs_means,
        observable_ses=obs_ses,
        coherence_means=coh_means,
        master_seed=int(master_seed),
        seed_derivation=SEED_DERIVATION_TAG,
        errors=errors,
        max_norm_drift=max(c.max_drift for c in chunks),
        mean_median_drift=sum(c.sum_median_drift for c in chunks) / max(1, n_ok),
        stability=first.stability,
    )


@dataclass(frozen=True)
class BornFrequencies:
    frequencies: np.ndarray
    standard_errors: np.ndarray
    resolved_fraction: float
    n_resolved: int


def born_frequencies(stats: EnsembleStats) -> BornFrequencies:
    """Empirical outcome frequencies over resolved trajectories with binomial SEs."""
    n_res = stats.resolved_count
    n_ok = max(1, stats.n_ok)
    frac = n_res / n_ok
    if frac < RESOLVED_FRACTION_REQUIRED:
        raise InconclusiveCollapseError(
            f"only {100 * frac:.1f}% of trajectories resolved an outcome; "
            "increase the collapse horizon (rate * horizon)")
    freqs = stats.outcome_counts[:-1] / n_res
    ses = np.sqrt(freqs * (1.0 - freqs) / n_res)
    return BornFrequencies(freqs, ses, frac, n_res)


def coherence_series(stats: EnsembleStats, pair) -> np.ndarray:
    """|mean rho_ij| over time, from mean_rho or a recorded coherence observable."""
    i, j = pair
    if stats.mean_rho is not None:
        return np.abs(stats.mean_rho[:, i, j])
    name = f"coherence_{i}_{j}"
    if name in stats.coherence_means:
        return np.abs(stats.coherence_means[name])
    raise ConfigurationError(
        f"coherence pair {pair} was not recorded and the mean density matrix is unavailable")


def fitted_decay_rate(stats: EnsembleStats, pair, enforce_gate: bool = True) -> DecayFit:
    """Exponential decay rate of the ensemble-mean coherence |rho_ij|(t)."""
    series = coherence_series(stats, pair)
    return fit_exponential_decay(stats.times, series, enforce_gate=enforce_gate)


def oracle_comparison(stats: EnsembleStats, oracle_evolution, floor: float = 1e-2):
    """Trace distance between the ensemble mean state and the oracle at each time.

    The per-time tolerance is max(3 * MC standard error, floor).  Returns a
    dict with the distances, tolerances, and overall pass flag.
    """
    if stats.mean_rho is None:
        raise ConfigurationError("ensemble did not record the mean density matrix")
    o_times = oracle_evolution.times
    if len(o_times) != len(stats.times) or np.max(np.abs(o_times - stats.times)) > 1e-9:
        raise ConfigurationError("oracle and ensemble were recorded on different time grids")
    dists = np.array([
        trace_distance(stats.mean_rho[t], oracle_evolution.matrices[t])
        for t in range(len(stats.times))
    ])
    ses = stats.rho_standard_error()
    tol = np.maximum(3.0 * ses, floor)
    return {
        "times": stats.times,
        "trace_distance": dists,
        "tolerance": tol,
        "max_trace_distance": float(dists.max()),
        "passed": bool(np.all(dists <= tol)),
    }
