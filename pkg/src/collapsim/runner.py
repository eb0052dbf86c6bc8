"""Scenario execution: run the ensemble, analyze, and emit machine-readable artifacts.

A run directory holds three files:

* ``manifest.json``  -- resolved config, seed derivation, unit conventions,
  version info (the hashable "core"), artifact hashes, and a timestamp kept
  in its own subsection so reruns differ nowhere else;
* ``timeseries.csv`` -- one row per recorded time, 17-significant-digit
  floats, first line a comment carrying the manifest core hash;
* ``summary.json``   -- fitted rates, outcome frequencies, oracle comparison,
  and pass/fail of the built-in invariant checks; cross-references the
  manifest core hash.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 invariant-check failure.
"""

import datetime
import hashlib
import json
import platform
from dataclasses import replace

import numpy as np

from . import __version__
from .ensembles import (
    born_frequencies,
    fitted_decay_rate,
    oracle_comparison,
    run_ensemble,
)
from .errors import (
    ConfigurationError,
    FitQualityError,
    InconclusiveCollapseError,
)
from .lindblad import DensityMatrix, evolve_density, trace_distance
from .physics import (
    VISIBILITY_MODEL_LABEL,
    AmplificationInputs,
    CollapseParams,
    energy_gain_slope,
    visibility_exponent,
)
from .scenario import AssembledScenario, ScenarioConfig, assemble, config_as_dict, units_metadata
from .seeding import SEED_DERIVATION_TAG

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INVARIANT = 4

ORACLE_DIMENSION_CAP = 16
UNITARY_CHECK_TOL = 1e-8


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _canonical_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))


def _pretty_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def csv_columns(cfg: ScenarioConfig, basis) -> list:
    cols = ["time"]
    for spec in cfg.observables:
        if spec.kind == "site_probabilities":
            for j in range(basis.grid.sites):
                cols += [f"site_prob_{j}_mean", f"site_prob_{j}_se"]
        elif spec.kind == "coherence":
            i, j = spec.pair
            cols += [f"coherence_{i}_{j}_abs", f"coherence_{i}_{j}_re",
                     f"coherence_{i}_{j}_im", f"coherence_{i}_{j}_se"]
        else:
            cols += [f"{spec.kind}_mean", f"{spec.kind}_se"]
    return cols


def render_timeseries(cfg, stats, basis, core_hash) -> str:
    cols = csv_columns(cfg, basis)
    lines = [f"# manifest_hash={core_hash}", ",".join(cols)]
    for t_idx, t in enumerate(stats.times):
        row = [_fmt(t)]
        for spec in cfg.observables:
            name = spec.name
            if spec.kind == "site_probabilities":
                means = stats.observable_means[name][t_idx]
                ses = stats.observable_ses[name][t_idx]
                for j in range(basis.grid.sites):
                    row += [_fmt(means[j]), _fmt(ses[j])]
            elif spec.kind == "coherence":
                c = stats.coherence_means[name][t_idx]
                row += [_fmt(abs(c)), _fmt(c.real), _fmt(c.imag),
                        _fmt(stats.observable_ses[name][t_idx])]
            else:
                row += [_fmt(stats.observable_means[name][t_idx]),
                        _fmt(stats.observable_ses[name][t_idx])]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _pair_separations(basis, pair):
    """Per-particle coordinate separation between two basis states."""
    try:
        pos = basis.particle_positions
    except Exception:
        occ = basis.occupations
        x = basis.grid.positions
        i, j = pair
        com_i = float(occ[i] @ x) / max(occ[i].sum(), 1)
        com_j = float(occ[j] @ x) / max(occ[j].sum(), 1)
        return [abs(com_i - com_j)] * int(occ[i].sum())
    i, j = pair
    return list(np.abs(pos[i] - pos[j]))


def predicted_dephasing_rate(assembled: AssembledScenario, pair):
    """Reference dephasing rate for the coherence pair, from the model built.

    Diffusive sets: the exact Lindblad rate 1/2 sum_k (L_k[i]-L_k[j])^2.
    Hit process: total hit rate times the per-hit coherence loss for branches
    whose per-particle separations match the pair (two-site geometry).
    """
    i, j = pair
    cfg = assembled.config
    if cfg.model == "grw":
        rc = cfg.params.correlation_length
        seps = _pair_separations(assembled.basis, pair)
        return cfg.params.rate * sum(1.0 - np.exp(-(d**2) / (4 * rc**2)) for d in seps)
    diags = assembled.ops.diagonals if assembled.ops is not None else None
    if diags is None or diags.size == 0:
        return 0.0
    return float(0.5 * np.sum((diags[:, i] - diags[:, j]) ** 2))


def _born_block(assembled, stats):
    bf = born_frequencies(stats)
    if assembled.config.model == "grw":
        labels = np.arange(assembled.init.dimension)
    else:
        labels = assembled.ops.eigenspace_labels
        if labels is None:
            labels = np.zeros(assembled.init.dimension, dtype=int)
    probs = assembled.init.probabilities()
    expected = np.array([probs[labels == g].sum() for g in range(stats.n_outcomes)])
    dev = np.abs(bf.frequencies - expected)
    tol = 3.0 * np.maximum(bf.standard_errors, 1e-12)
    within = bool(np.all(dev <= np.maximum(tol, 1e-9)))
    return {
        "frequencies": bf.frequencies,
        "standard_errors": bf.standard_errors,
        "expected_weights": expected,
        "resolved_fraction": bf.resolved_fraction,
        "n_resolved": bf.n_resolved,
        "within_3se": within,
    }, within


def _oracle_block(assembled, stats):
    cfg = assembled.config
    if cfg.model == "grw":
        return {"skipped": "hit process is not covered by the diffusive-noise oracle"}, None
    if assembled.init.dimension > ORACLE_DIMENSION_CAP:
        return {"skipped": f"dimension {assembled.init.dimension} exceeds oracle cap "
                           f"{ORACLE_DIMENSION_CAP}"}, None
    ic = assembled.integrator
    try:
        oracle = evolve_density(DensityMatrix.from_state(assembled.init), assembled.hamiltonian,
                                assembled.ops, ic.dt, ic.horizon, ic.stride)
    except ConfigurationError as exc:
        return {"skipped": f"oracle integration unavailable: {exc}"}, None
    cmp = oracle_comparison(stats, oracle)
    block = {
        "max_trace_distance": cmp["max_trace_distance"],
        "tolerance_max": float(np.max(cmp["tolerance"])),
        "tolerance_min": float(np.min(cmp["tolerance"])),
        "passed": cmp["passed"],
    }
    return block, cmp["passed"]


def _unitary_block(assembled, stats):
    from scipy.linalg import expm

    if stats.mean_rho is None:
        return {"skipped": "mean density matrix not recorded"}, None
    h = assembled.hamiltonian
    dim = assembled.init.dimension
    max_dev = 0.0
    for t_idx, t in enumerate(stats.times):
        if h is None:
            exact = assembled.init.amplitudes
        else:
            exact = expm(-1j * h.matrix * t) @ assembled.init.amplitudes
        rho_exact = np.outer(exact, exact.conj())
        max_dev = max(max_dev, trace_distance(stats.mean_rho[t_idx], rho_exact))
    passed = max_dev <= UNITARY_CHECK_TOL
    return {"max_trace_distance_to_exact": max_dev, "tolerance": UNITARY_CHECK_TOL,
            "passed": bool(passed)}, bool(passed)


def _visibility_block(cfg):
    vis = cfg.visibility
    rate_si = vis.rate_si
    if rate_si is None:
        rate_si = cfg.params.rate_si if cfg.params.rate_si is not None else cfg.params.rate
    corr_si = vis.correlation_length_si
    if corr_si is None:
        corr_si = (cfg.params.correlation_length_si
                   if cfg.params.correlation_length_si is not None
                   else cfg.params.correlation_length)
    params = CollapseParams(rate_si, corr_si, cfg.params.preset or "custom")
    inp = AmplificationInputs(vis.constituents_per_volume, vis.volume_count, params.rate)
    exponent = visibility_exponent(params, inp, vis.separation_m, vis.duration_s)
    return {
        "label": VISIBILITY_MODEL_LABEL,
        "rate_si": params.rate,
        "correlation_length_si": params.correlation_length,
        "preset": cfg.params.preset,
        "constituents_per_volume": vis.constituents_per_volume,
        "volume_count": vis.volume_count,
        "separation_m": vis.separation_m,
        "duration_s": vis.duration_s,
        "exponent": exponent,
        "visibility": float(np.exp(-exponent)),
    }


def build_summary(assembled: AssembledScenario, stats, core_hash: str):
    """Assemble the summary document and the invariant-check verdicts."""
    cfg = assembled.config
    checks = []
    summary = {
        "manifest_hash": core_hash,
        "scenario": cfg.name,
        "model": cfg.model,
        "n_trajectories": stats.n_traj,
        "n_ok": stats.n_ok,
        "error_rate": len(stats.errors) / stats.n_traj,
        "outcomes": {
            "counts": stats.outcome_counts[:-1],
            "unresolved": int(stats.outcome_counts[-1]),
        },
        "max_norm_drift": stats.max_norm_drift,
        "stability_budget": stats.stability,
        "params": {
            "rate": cfg.params.rate,
            "correlation_length": cfg.params.correlation_length,
            "preset": cfg.params.preset,
            "rate_si": cfg.params.rate_si,
            "correlation_length_si": cfg.params.correlation_length_si,
        },
    }

    checks.append({
        "name": "trajectory_error_rate",
        "passed": len(stats.errors) / stats.n_traj <= 0.01,
        "detail": f"{len(stats.errors)} of {stats.n_traj} trajectories errored",
    })

    if cfg.analysis.born:
        try:
            block, ok = _born_block(assembled, stats)
            summary["born"] = block
            checks.append({"name": "born_within_3se", "passed": ok,
                           "detail": "outcome frequencies vs squared initial weights"})
        except InconclusiveCollapseError as exc:
            summary["born"] = {"failed": str(exc)}
            checks.append({"name": "born_within_3se", "passed": False, "detail": str(exc)})

    if cfg.analysis.decay_pair is not None:
        pair = cfg.analysis.decay_pair
        predicted = predicted_dephasing_rate(assembled, pair)
        try:
            fit = fitted_decay_rate(stats, pair)
            seps = _pair_separations(assembled.basis, pair)
            summary["decay_fit"] = {
                "pair": list(pair),
                "rate": fit.rate,
                "rate_se": fit.rate_se,
                "r_squared": fit.r_squared,
                "window": list(fit.window),
                "n_points": fit.n_points,
                "no_decay": fit.no_decay,
                "log_intercept": fit.intercept,
                "predicted_rate": predicted,
                "separations": seps,
            }
        except FitQualityError as exc:
            summary["decay_fit"] = {"pair": list(pair), "failed": str(exc),
                                    "predicted_rate": predicted}

    zero_coupling = (cfg.model == "unitary"
                     or (cfg.model in ("csl", "grw") and cfg.params.rate == 0.0))
    oracle_wanted = cfg.analysis.oracle_compare
    if oracle_wanted == "off":
        summary["oracle"] = {"skipped": "disabled in configuration"}
    else:
        block, ok = _oracle_block(assembled, stats)
        summary["oracle"] = block
        if ok is not None:
            checks.append({"name": "oracle_agreement", "passed": ok,
                           "detail": f"max trace distance {block['max_trace_distance']:.3g}"})

    if zero_coupling:
        block, ok = _unitary_block(assembled, stats)
        summary["unitary_check"] = block
        if ok is not None:
            checks.append({"name": "unitary_evolution", "passed": ok,
                           "detail": f"trace distance to exact propagation "
                                     f"{block.get('max_trace_distance_to_exact', 0):.3g}"})

    if cfg.analysis.energy_slope:
        try:
            slope = energy_gain_slope(stats, assembled.hamiltonian)
            summary["energy_slope"] = {
                "slope": slope.slope,
                "slope_se": slope.slope_se,
                "r_squared": slope.r_squared,
            }
        except (FitQualityError, ConfigurationError) as exc:
            summary["energy_slope"] = {"failed": str(exc)}

    if cfg.visibility is not None:
        summary["visibility_model"] = _visibility_block(cfg)

    summary["invariant_checks"] = checks
    all_passed = all(c["passed"] for c in checks)
    return summary, all_passed


def run_scenario(cfg: ScenarioConfig, out_dir, workers: int = 1, seed_override=None):
    """Execute a scenario and write manifest/timeseries/summary into ``out_dir``.

    Returns (exit_code, dict of artifact paths).
    """
    from pathlib import Path

    if seed_override is not None:
        from .scenario import EnsembleSection

        cfg = replace(cfg, ensemble=EnsembleSection(cfg.ensemble.trajectories,
                                                    int(seed_override)))
    assembled = assemble(cfg)
    stats = run_ensemble(assembled.problem, cfg.ensemble.trajectories,
                         cfg.ensemble.master_seed, workers=workers)

    resolved = config_as_dict(cfg)
    resolved["integrator"] = {
        "dt": assembled.integrator.dt,
        "horizon": assembled.integrator.horizon,
        "stride": assembled.integrator.stride,
        "max_norm_drift": assembled.integrator.max_norm_drift,
    }
    core = {
        "config": resolved,
        "observable_columns": csv_columns(cfg, assembled.basis),
        "seed_derivation": SEED_DERIVATION_TAG,
        "units": units_metadata(cfg),
        "model_labels": {
            "geometry": "1d lattice, dimension-reduced",
            "visibility_model": VISIBILITY_MODEL_LABEL,
        },
        "versions": {
            "collapsim": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    core_hash = _sha256(_canonical_json(core).encode())

    summary, checks_passed = build_summary(assembled, stats, core_hash)
    csv_text = render_timeseries(cfg, stats, assembled.basis, core_hash)
    summary_text = _pretty_json(summary)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "timeseries.csv").write_text(csv_text)
    (out / "summary.json").write_text(summary_text)
    manifest = {
        "core": core,
        "core_hash": core_hash,
        "artifacts": {
            "timeseries.csv": _sha256(csv_text.encode()),
            "summary.json": _sha256(summary_text.encode()),
        },
        "run_info": {
            "timestamp_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "workers": workers,
        },
    }
    (out / "manifest.json").write_text(_pretty_json(manifest))

    paths = {name: str(out / name) for name in ("manifest.json", "timeseries.csv", "summary.json")}
    return (EXIT_OK if checks_passed else EXIT_INVARIANT), paths
