"""Trajectory integration of the nonlinear collapse dynamics.

Two stochastic processes are implemented:

* the diffusive collapse equation

      d psi = [ -i H dt + sum_k (L_k - l_k) dW_k
                - 1/2 sum_k (L_k^dag L_k - 2 l_k L_k + l_k^2) dt ] psi,
      l_k = Re <psi | L_k | psi>,

  integrated with explicit Euler-Maruyama (l_k from the step's start state)
  and renormalization after every step; the pre-renormalization norm drift is
  kept as a step-size diagnostic;

* the piecewise-deterministic localization-hit process: unitary evolution
  interrupted by per-particle Poisson hits that multiply the state by a
  Gaussian window around a sampled center.

Zero-coupling runs (no operators, or all operators zero) use the exact
one-step unitary propagator instead of Euler-Maruyama so that they reproduce
Schroedinger evolution to machine precision.

All integrators work on batches of trajectories at once; a single trajectory
is a batch of size one, so the public per-trajectory API and ensemble runs
share one code path.  Each trajectory owns a private RNG and draws its whole
noise block up front, which makes results independent of batch composition
and worker count.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .collapse_ops import CollapseOperatorSet, grw_hit_multipliers
from .errors import (
    ConfigurationError,
    DegenerateDynamicsError,
    NumericalOverflowError,
    StepSizeError,
)
from .lattice import StateVector

OUTCOME_DOMINANCE = 0.99
UNRESOLVED = -1
ERRORED = -2

KNOWN_OBSERVABLES = ("site_probabilities", "coherence", "energy", "norm_drift")


@dataclass(frozen=True)
class ObservableSpec:
    kind: str
    pair: tuple = None

    def __post_init__(self):
        if self.kind not in KNOWN_OBSERVABLES:
            raise ConfigurationError(f"unknown observable {self.kind!r}")
        if self.kind == "coherence" and (self.pair is None or len(self.pair) != 2):
            raise ConfigurationError("coherence observable needs an index pair")

    @property
    def name(self) -> str:
        if self.kind == "coherence":
            return f"coherence_{self.pair[0]}_{self.pair[1]}"
        return self.kind


def parse_observable(text: str) -> ObservableSpec:
    """Parse 'coherence:i,j' / 'site_probabilities' / 'energy' / 'norm_drift'."""
    if ":" in text:
        kind, _, arg = text.partition(":")
        if kind.strip() != "coherence":
            raise ConfigurationError(f"unknown observable {text!r}")
        try:
            i, j = (int(p) for p in arg.split(","))
        except ValueError:
            raise ConfigurationError(f"bad coherence pair in {text!r}") from None
        return ObservableSpec("coherence", (i, j))
    return ObservableSpec(text.strip())


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integration window with renormalization every step."""

    dt: float
    horizon: float
    max_norm_drift: float = 1e-6
    stride: int = 1

    def __post_init__(self):
        if not (0 < self.dt <= self.horizon):
            raise ConfigurationError("need 0 < dt <= horizon")
        if self.stride < 1:
            raise ConfigurationError("stride must be >= 1")
        if self.max_norm_drift <= 0:
            raise ConfigurationError("max_norm_drift must be positive")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.horizon / self.dt)))

    def record_steps(self) -> np.ndarray:
        steps = sorted(set(range(0, self.n_steps + 1, self.stride)) | {self.n_steps})
        return np.array(steps, dtype=int)


@dataclass
class NoiseIncrements:
    """K Wiener increments Normal(0, dt) plus a draw counter for reproducibility."""

    values: np.ndarray
    dt: float
    draw_index: int = 0


def sample_noise(count: int, dt: float, rng: np.random.Generator, draw_index: int = 0) -> NoiseIncrements:
    """Draw ``count`` independent Normal(0, dt) increments from ``rng``."""
    if count < 0:
        raise ConfigurationError("noise count must be >= 0")
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    return NoiseIncrements(rng.normal(0.0, math.sqrt(dt), size=count), dt, draw_index)


def stability_bound(hamiltonian, ops) -> float:
    """|H| + max_k |L_k|^2; dt times this should stay <= 1e-2 for comfort."""
    h = 0.0
    if hamiltonian is not None:
        h = float(np.linalg.norm(hamiltonian.matrix, 2))
    l2 = ops.max_operator_norm**2 if ops is not None else 0.0
    return h + l2


def suggest_dt(hamiltonian, ops, budget: float = 1e-2) -> float:
    bound = stability_bound(hamiltonian, ops)
    return budget / bound if bound > 0 else budget


def _em_step_batch(psis, h_mat, diag_ops, dense_ops, dt, dw):
    """One Euler-Maruyama step on a (B, d) batch; returns (normalized, drift).

    ``drift`` is the per-trajectory |norm - 1| before renormalization.
    """
    delta = np.zeros_like(psis)
    if h_mat is not None:
        delta += (-1j * dt) * (psis @ h_mat.T)
    if diag_ops is not None and len(diag_ops):
        p2 = psis.real**2 + psis.imag**2        # (B, d)
        ell = p2 @ diag_ops.T                   # (B, K) expectation of each L_k
        w_amp = dw @ diag_ops                   # (B, d) sum_k dW_k L_k
        w_scal = np.sum(dw * ell, axis=1)       # (B,)
        ell_amp = ell @ diag_ops                # (B, d) sum_k l_k L_k
        sumsq = np.sum(diag_ops**2, axis=0)     # (d,)
        ell2 = np.sum(ell**2, axis=1)           # (B,)
        delta += (w_amp - w_scal[:, None]) * psis
        delta += (-0.5 * dt) * (sumsq[None, :] - 2.0 * ell_amp + ell2[:, None]) * psis
    elif dense_ops:
        for k, lk in enumerate(dense_ops):
            lpsi = psis @ lk.T
            ell = np.einsum("bi,bi->b", psis.conj(), lpsi).real
            ldag_lpsi = lpsi @ lk.conj()
            delta += dw[:, k : k + 1] * (lpsi - ell[:, None] * psis)
            delta += (-0.5 * dt) * (ldag_lpsi - 2.0 * ell[:, None] * lpsi + (ell**2)[:, None] * psis)
    new = psis + delta
    # overflow here is detected by the caller's isfinite check; keep numpy quiet
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        norms = np.sqrt(np.einsum("bi,bi->b", new.conj(), new).real)
        drift = np.abs(norms - 1.0)
        return new / norms[:, None], drift


def em_step(state: StateVector, hamiltonian, ops: CollapseOperatorSet, dt: float,
            noise: NoiseIncrements, max_norm_drift: float = None):
    """Single Euler-Maruyama step; returns (new state, pre-renormalization drift)."""
    n_ops = len(ops) if ops is not None else 0
    if len(np.atleast_1d(noise.values)) != n_ops:
        raise ConfigurationError(f"noise has {len(noise.values)} increments for {n_ops} operators")
    if hamiltonian is not None and hamiltonian.basis != state.basis:
        raise ConfigurationError("Hamiltonian basis does not match the state")
    if n_ops and ops.basis != state.basis:
        raise ConfigurationError("operator basis does not match the state")
    h_mat = hamiltonian.matrix if hamiltonian is not None else None
    diag = ops.diagonals if ops is not None else None
    dense = None if (diag is not None or ops is None) else [op.matrix for op in ops.operators]
    psis = state.amplitudes[None, :]
    dw = np.atleast_1d(noise.values)[None, :]
    new, drift = _em_step_batch(psis, h_mat, diag, dense, dt, dw)
    if not np.all(np.isfinite(new)):
        raise NumericalOverflowError(
            f"non-finite amplitudes after one step (dt={dt}, |noise|={np.max(np.abs(noise.values)):g})"
        )
    if max_norm_drift is not None and drift[0] > max_norm_drift:
        raise StepSizeError(f"norm drift {drift[0]:g} exceeds bound {max_norm_drift:g}")
    return StateVector(state.basis, new[0]), float(drift[0])


@dataclass
class TrajectoryRecord:
    """Observable time series and outcome of one trajectory."""

    times: np.ndarray
    observables: dict
    drift: np.ndarray
    final_state: StateVector
    outcome: int
    seed: int
    stability: float
    error: str = None
    hits: list = field(default_factory=list)
    states: np.ndarray = None

    @property
    def resolved(self) -> bool:
        return self.outcome >= 0

    @property
    def outcome_label(self) -> str:
        if self.error is not None:
            return "error"
        return f"eigenspace-{self.outcome}" if self.outcome >= 0 else "unresolved"


class _Recorder:
    """Inline aggregation of a batch at the configured record steps."""

    def __init__(self, n_records, dim, specs, occ, h_mat, n_particles,
                 record_rho, keep_series, batch):
        self.specs = specs
        self.occ = occ
        self.h_mat = h_mat
        self.n_particles = max(1, n_particles)
        self.record_rho = record_rho
        self.keep_series = keep_series
        self.r = 0
        self.include = np.ones(batch, dtype=bool)
        self.sum_rho = np.zeros((n_records, dim, dim), dtype=complex) if record_rho else None
        self.sumsq_rho = np.zeros((n_records, dim, dim)) if record_rho else None
        self.series = np.zeros((n_records, batch, dim), dtype=complex) if keep_series else None
        self.obs_sum = {}
        self.obs_sumsq = {}
        for spec in specs:
            if spec.kind == "site_probabilities":
                shape = (n_records, occ.shape[1])
            elif spec.kind == "coherence":
                shape = (n_records,)
            else:
                shape = (n_records,)
            if spec.kind == "coherence":
                self.obs_sum[spec.name] = np.zeros(shape, dtype=complex)
                self.obs_sumsq[spec.name] = np.zeros(shape + (2,))
            else:
                self.obs_sum[spec.name] = np.zeros(shape)
                self.obs_sumsq[spec.name] = np.zeros(shape)

    def record(self, psis, drift_step):
        sel = psis if self.include.all() else psis[self.include]
        r = self.r
        if self.keep_series:
            self.series[r] = psis
        p2 = sel.real**2 + sel.imag**2
        if self.record_rho:
            self.sum_rho[r] = np.einsum("bi,bj->ij", sel, sel.conj())
            self.sumsq_rho[r] = np.einsum("bi,bj->ij", p2, p2)
        for spec in self.specs:
            name = spec.name
            if spec.kind == "site_probabilities":
                vals = (p2 @ self.occ) / self.n_particles
                self.obs_sum[name][r] += vals.sum(axis=0)
                self.obs_sumsq[name][r] += (vals**2).sum(axis=0)
            elif spec.kind == "coherence":
                i, j = spec.pair
                c = sel[:, i] * sel[:, j].conj()
                self.obs_sum[name][r] += c.sum()
                self.obs_sumsq[name][r, 0] += (c.real**2).sum()
                self.obs_sumsq[name][r, 1] += (c.imag**2).sum()
            elif spec.kind == "energy":
                if self.h_mat is None:
                    e = np.zeros(sel.shape[0])
                else:
                    e = np.einsum("bi,bi->b", sel.conj(), sel @ self.h_mat.T).real
                self.obs_sum[name][r] += e.sum()
                self.obs_sumsq[name][r] += (e**2).sum()
            elif spec.kind == "norm_drift":
                d = drift_step if drift_step is not None else np.zeros(psis.shape[0])
                dsel = d if self.include.all() else d[self.include]
                self.obs_sum[name][r] += dsel.sum()
                self.obs_sumsq[name][r] += (dsel**2).sum()
        self.r += 1


@dataclass
class ChunkAggregates:
    """Order-independent partial sums for a contiguous block of trajectories."""

    start: int
    n_traj: int
    n_ok: int
    times: np.ndarray
    sum_rho: np.ndarray
    sumsq_rho: np.ndarray
    obs_sum: dict
    obs_sumsq: dict
    outcome_counts: np.ndarray  # per eigenspace, then unresolved
    max_drift: float
    sum_median_drift: float
    errors: list
    stability: float
    # populated only when keep_series / log_hits is requested
    series: np.ndarray = None
    drift_series: np.ndarray = None
    final: np.ndarray = None
    outcome_array: np.ndarray = None
    hit_logs: list = None


def _outcomes(psis, labels, include):
    n_groups = int(labels.max()) + 1
    indicator = np.zeros((psis.shape[1], n_groups))
    indicator[np.arange(psis.shape[1]), labels] = 1.0
    pops = (psis.real**2 + psis.imag**2) @ indicator
    best = np.argmax(pops, axis=1)
    resolved = pops[np.arange(len(best)), best] >= OUTCOME_DOMINANCE
    out = np.where(resolved, best, UNRESOLVED)
    out[~include] = ERRORED
    return out, n_groups


def _tally(outcomes, n_groups, include):
    counts = np.zeros(n_groups + 1, dtype=int)
    for o in outcomes[include]:
        counts[o if o >= 0 else n_groups] += 1
    return counts


def _finalize_chunk(start, seeds, recorder, times, outcomes, n_groups, drift_median,
                    drift_max, errors, stab):
    include = recorder.include
    return ChunkAggregates(
        start=start,
        n_traj=len(seeds),
        n_ok=int(include.sum()),
        times=times,
        sum_rho=recorder.sum_rho,
        sumsq_rho=recorder.sumsq_rho,
        obs_sum=recorder.obs_sum,
        obs_sumsq=recorder.obs_sumsq,
        outcome_counts=_tally(outcomes, n_groups, include),
        max_drift=drift_max,
        sum_median_drift=float(np.sum(drift_median[include])) if len(drift_median) else 0.0,
        errors=errors,
        stability=stab,
    )


def _eigenspace_labels(ops, dim):
    if ops is None or len(ops) == 0:
        return np.zeros(dim, dtype=int)
    return np.asarray(ops.eigenspace_labels)


def integrate_sde_chunk(init: StateVector, hamiltonian, ops: CollapseOperatorSet,
                        cfg: IntegratorConfig, seeds, specs, start: int = 0,
                        record_rho: bool = True, keep_series: bool = False,
                        exclude=None) -> ChunkAggregates:
    """Run a batch of diffusive-collapse trajectories with one seed per row.

    Rows listed in ``exclude`` are integrated (their RNG draws happen either
    way) but left out of every aggregate; the ensemble layer uses this to
    rerun a chunk cleanly after marking errored trajectories.
    """
    dim = init.dimension
    batch = len(seeds)
    h_mat = hamiltonian.matrix if hamiltonian is not None else None
    diag = ops.diagonals if ops is not None else None
    dense = None if (diag is not None or ops is None or len(ops) == 0) else [op.matrix for op in ops.operators]
    n_ops = len(ops) if ops is not None else 0
    labels = _eigenspace_labels(ops, dim)
    stab = cfg.dt * stability_bound(hamiltonian, ops)

    effectively_unitary = n_ops == 0 or (ops is not None and ops.max_operator_norm == 0.0)
    if effectively_unitary:
        return _integrate_unitary_chunk(init, hamiltonian, cfg, seeds, specs, start,
                                        record_rho, keep_series, exclude, labels, stab)

    n_steps = cfg.n_steps
    record_steps = cfg.record_steps()
    rngs = [np.random.Generator(np.random.PCG64(int(s))) for s in seeds]
    noise = np.empty((batch, n_steps, n_ops))
    for b, rng in enumerate(rngs):
        noise[b] = rng.normal(0.0, math.sqrt(cfg.dt), size=(n_steps, n_ops))
    noise = np.ascontiguousarray(noise.transpose(1, 0, 2))  # (steps, B, K)

    occ = init.basis.occupations
    recorder = _Recorder(len(record_steps), dim, specs, occ, h_mat,
                         getattr(init.basis, "particles", 1), record_rho, keep_series, batch)
    if exclude:
        recorder.include[list(exclude)] = False

    psis = np.tile(init.amplitudes, (batch, 1))
    drift_all = np.zeros((n_steps, batch))
    errors = []
    alive = np.ones(batch, dtype=bool)

    rec_set = set(int(s) for s in record_steps)
    drift_step = None
    for s in range(n_steps + 1):
        if s in rec_set:
            recorder.record(psis, drift_step)
        if s == n_steps:
            break
        new, drift = _em_step_batch(psis, h_mat, diag, dense, cfg.dt, noise[s])
        bad = ~np.isfinite(new).all(axis=1)
        too_big = drift > cfg.max_norm_drift
        newly_bad = (bad | too_big) & alive & recorder.include
        if newly_bad.any():
            for b in np.flatnonzero(newly_bad):
                kind = "numerical-overflow" if bad[b] else "step-size"
                errors.append((start + b, f"{kind} at step {s} (drift {drift[b]:g})"))
            alive &= ~newly_bad
            # freeze broken rows at their last good state and retry the chunk
            new[newly_bad] = psis[newly_bad]
            drift[newly_bad] = 0.0
        psis = new
        drift_all[s] = drift
        drift_step = drift

    if errors and exclude is None:
        agg = integrate_sde_chunk(init, hamiltonian, ops, cfg, seeds, specs, start,
                                  record_rho, keep_series, exclude=[e[0] - start for e in errors])
        agg.errors.extend(errors)
        return agg

    outcomes, n_groups = _outcomes(psis, labels, recorder.include)
    times = record_steps * cfg.dt
    included_drift = drift_all[:, recorder.include]
    agg = _finalize_chunk(start, seeds, recorder, times, outcomes, n_groups,
                          np.median(drift_all, axis=0) if n_steps else np.zeros(batch),
                          float(included_drift.max()) if included_drift.size else 0.0, errors, stab)
    if keep_series:
        agg.series = recorder.series
        agg.drift_series = drift_all
        agg.final = psis
        agg.outcome_array = outcomes
    return agg


def _integrate_unitary_chunk(init, hamiltonian, cfg, seeds, specs, start,
                             record_rho, keep_series, exclude, labels, stab):
    """Zero-coupling runs: exact one-step propagator, identical for every seed."""
    dim = init.dimension
    batch = len(seeds)
    n_steps = cfg.n_steps
    record_steps = cfg.record_steps()
    h_mat = hamiltonian.matrix if hamiltonian is not None else None
    u = expm(-1j * h_mat * cfg.dt) if h_mat is not None else None

    # one representative trajectory; every row is identical
    recorder = _Recorder(len(record_steps), dim, specs, init.basis.occupations, h_mat,
                         getattr(init.basis, "particles", 1), record_rho, keep_series, 1)
    psi = init.amplitudes[None, :].copy()
    drift_all = np.zeros((n_steps, 1))
    rec_set = set(int(s) for s in record_steps)
    drift_step = None
    for s in range(n_steps + 1):
        if s in rec_set:
            recorder.record(psi, drift_step)
        if s == n_steps:
            break
        if u is not None:
            psi = psi @ u.T
            norm = np.sqrt(np.einsum("bi,bi->b", psi.conj(), psi).real)
            drift_all[s, 0] = abs(norm[0] - 1.0)
            psi = psi / norm[:, None]
        drift_step = drift_all[s]

    include = np.ones(batch, dtype=bool)
    if exclude:
        include[list(exclude)] = False
    n_ok = int(include.sum())
    outcomes, n_groups = _outcomes(psi, labels, np.ones(1, dtype=bool))
    counts = np.zeros(n_groups + 1, dtype=int)
    counts[outcomes[0] if outcomes[0] >= 0 else n_groups] = n_ok

    scale = float(n_ok)
    agg = ChunkAggregates(
        start=start,
        n_traj=batch,
        n_ok=n_ok,
        times=record_steps * cfg.dt,
        sum_rho=recorder.sum_rho * scale if record_rho else None,
        sumsq_rho=recorder.sumsq_rho * scale if record_rho else None,
        obs_sum={k: v * scale for k, v in recorder.obs_sum.items()},
        obs_sumsq={k: v * scale for k, v in recorder.obs_sumsq.items()},
        outcome_counts=counts,
        max_drift=float(drift_all.max()) if n_steps else 0.0,
        sum_median_drift=float(np.median(drift_all, axis=0)[0]) * scale if n_steps else 0.0,
        errors=[],
        stability=stab,
    )
    if keep_series:
        agg.series = np.repeat(recorder.series, batch, axis=1)
        agg.drift_series = np.repeat(drift_all, batch, axis=1)
        agg.final = np.repeat(psi, batch, axis=0)
        agg.outcome_array = np.repeat(outcomes, batch)
    return agg


def integrate_grw_chunk(init: StateVector, hamiltonian, rate: float, correlation_length: float,
                        particles: int, cfg: IntegratorConfig, seeds, specs, start: int = 0,
                        record_rho: bool = True, keep_series: bool = False,
                        exclude=None, log_hits: bool = False) -> ChunkAggregates:
    """Batch of localization-hit trajectories (distinguishable particles).

    Each particle carries an independent exponential clock with rate ``rate``.
    Hits falling inside one dt window are applied after the unitary substep,
    in ascending particle order; centers are sampled from the lattice sites
    with probabilities proportional to the post-hit squared norm.
    """
    if rate < 0:
        raise ConfigurationError("hit rate must be >= 0")
    if correlation_length <= 0:
        raise ConfigurationError("correlation length must be positive")
    basis = init.basis
    if getattr(basis, "particles", 1) != particles:
        raise ConfigurationError(f"basis holds {getattr(basis, 'particles', 1)} particles, not {particles}")
    dim = init.dimension
    batch = len(seeds)
    n_steps = cfg.n_steps
    record_steps = cfg.record_steps()
    h_mat = hamiltonian.matrix if hamiltonian is not None else None
    u = expm(-1j * h_mat * cfg.dt) if h_mat is not None else None
    stab = cfg.dt * stability_bound(hamiltonian, None)

    mult = np.stack([grw_hit_multipliers(basis, p, correlation_length) for p in range(particles)])
    weight_mats = mult**2  # (particles, centers, dim)
    centers = basis.grid.positions

    rngs = [np.random.Generator(np.random.PCG64(int(s))) for s in seeds]
    scale = 1.0 / rate if rate > 0 else np.inf
    next_hit = np.full((batch, particles), np.inf)
    if rate > 0:
        for b, rng in enumerate(rngs):
            next_hit[b] = rng.exponential(scale, size=particles)

    recorder = _Recorder(len(record_steps), dim, specs, basis.occupations, h_mat,
                         particles, record_rho, keep_series, batch)
    if exclude:
        recorder.include[list(exclude)] = False

    psis = np.tile(init.amplitudes, (batch, 1))
    drift_all = np.zeros((n_steps, batch))
    errors = []
    hit_logs = [[] for _ in range(batch)] if log_hits else None
    rec_set = set(int(s) for s in record_steps)
    drift_step = None

    for s in range(n_steps + 1):
        if s in rec_set:
            recorder.record(psis, drift_step)
        if s == n_steps:
            break
        if u is not None:
            psis = psis @ u.T
            norms = np.sqrt(np.einsum("bi,bi->b", psis.conj(), psis).real)
            drift_all[s] = np.abs(norms - 1.0)
            psis = psis / norms[:, None]
        drift_step = drift_all[s]
        t_end = (s + 1) * cfg.dt
        due_rows = np.flatnonzero(next_hit.min(axis=1) <= t_end)
        for b in due_rows:
            rng = rngs[b]
            psi = psis[b]
            try:
                while True:
                    due = np.flatnonzero(next_hit[b] <= t_end)
                    if len(due) == 0:
                        break
                    for p in due:
                        probs = weight_mats[p] @ (psi.real**2 + psi.imag**2)
                        probs = probs / probs.sum()
                        for _attempt in range(100):
                            c = int(rng.choice(len(centers), p=probs))
                            hit = psi * mult[p, c]
                            w = float(np.einsum("i,i->", hit.conj(), hit).real)
                            if w > 1e-300:
                                break
                        else:
                            raise DegenerateDynamicsError(
                                f"hit resampling failed 100 times (trajectory {start + b})"
                            )
                        psi = hit / math.sqrt(w)
                        if log_hits:
                            hit_logs[b].append((float(next_hit[b, p]), int(p), float(centers[c])))
                        next_hit[b, p] += rng.exponential(scale)
            except DegenerateDynamicsError as exc:
                errors.append((start + b, str(exc)))
                recorder.include[b] = False
            psis[b] = psi

    outcomes, n_groups = _outcomes(psis, np.arange(dim), recorder.include)
    times = record_steps * cfg.dt
    included_drift = drift_all[:, recorder.include]
    agg = _finalize_chunk(start, seeds, recorder, times, outcomes, n_groups,
                          np.median(drift_all, axis=0) if n_steps else np.zeros(batch),
                          float(included_drift.max()) if included_drift.size else 0.0, errors, stab)
    if keep_series:
        agg.series = recorder.series
        agg.drift_series = drift_all
        agg.final = psis
        agg.outcome_array = outcomes
    if log_hits:
        agg.hit_logs = hit_logs
    return agg


def _record_from_chunk(agg, init, cfg, seed, specs, hamiltonian=None, hits=None):
    """Build a per-trajectory record from a batch-of-one chunk result."""
    times = agg.times
    observables = {}
    series = agg.series[:, 0, :]
    drift = agg.drift_series[:, 0].copy()
    p2 = series.real**2 + series.imag**2
    occ = init.basis.occupations
    n_particles = max(1, getattr(init.basis, "particles", 1))
    record_steps = cfg.record_steps()
    for spec in specs:
        if spec.kind == "site_probabilities":
            observables[spec.name] = p2 @ occ / n_particles
        elif spec.kind == "coherence":
            i, j = spec.pair
            observables[spec.name] = series[:, i] * series[:, j].conj()
        elif spec.kind == "energy":
            if hamiltonian is None:
                observables[spec.name] = np.zeros(len(times))
            else:
                observables[spec.name] = np.einsum(
                    "ti,ti->t", series.conj(), series @ hamiltonian.matrix.T
                ).real
        elif spec.kind == "norm_drift":
            observables[spec.name] = np.array(
                [0.0 if s == 0 else drift[s - 1] for s in record_steps]
            )
    outcome = int(agg.outcome_array[0])
    error = agg.errors[0][1] if agg.errors else None
    final = agg.final[0]
    if not np.all(np.isfinite(final)):
        final = init.amplitudes  # partial record: overflow destroyed the state
    return TrajectoryRecord(
        times=times,
        observables=observables,
        drift=drift,
        final_state=StateVector.normalized(init.basis, final),
        outcome=outcome if error is None else ERRORED,
        seed=int(seed),
        stability=agg.stability,
        error=error,
        hits=list(hits[0]) if hits else [],
        states=series,
    )


def run_trajectory(init: StateVector, hamiltonian, ops: CollapseOperatorSet,
                   cfg: IntegratorConfig, seed: int,
                   observables=("site_probabilities",)) -> TrajectoryRecord:
    """Integrate one diffusive-collapse trajectory, deterministically in ``seed``.

    Observables are recorded every ``cfg.stride`` steps; the outcome label is
    the common eigenspace holding at least 99% of the population at the final
    time, or unresolved.  Step errors do not raise: the record comes back with
    its ``error`` field set and data up to the failure.
    """
    specs = tuple(parse_observable(o) if isinstance(o, str) else o for o in observables)
    agg = integrate_sde_chunk(init, hamiltonian, ops, cfg, [seed], specs,
                              record_rho=False, keep_series=True)
    return _record_from_chunk(agg, init, cfg, seed, specs, hamiltonian=hamiltonian)


def run_grw_trajectory(init: StateVector, hamiltonian, rate: float, correlation_length: float,
                       particles: int, cfg: IntegratorConfig, seed: int,
                       observables=("site_probabilities",)) -> TrajectoryRecord:
    """Integrate one localization-hit trajectory, deterministically in ``seed``."""
    specs = tuple(parse_observable(o) if isinstance(o, str) else o for o in observables)
    agg = integrate_grw_chunk(init, hamiltonian, rate, correlation_length, particles,
                              cfg, [seed], specs, record_rho=False, keep_series=True,
                              log_hits=True)
    return _record_from_chunk(agg, init, cfg, seed, specs, hamiltonian=hamiltonian,
                              hits=agg.hit_logs)
