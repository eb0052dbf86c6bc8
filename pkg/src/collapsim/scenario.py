"""Scenario configuration: strict schema, validation, and problem assembly.

Configs are YAML documents with a fixed key set; unknown keys are fatal and
every violation is reported, not just the first.  Geometry and rates are given
in internal units (lengths in units of the noise correlation length when a
preset is chosen, rates relative to the per-constituent collapse rate); the
preset block records the SI conversion so that downstream artifacts can quote
laboratory numbers.
"""

from dataclasses import dataclass

import yaml

from .collapse_ops import CollapseOperatorSet, csl_operators, gaussian_kernel, whiten
from .engine import IntegratorConfig, parse_observable, suggest_dt
from .ensembles import EnsembleProblem
from .errors import ConfigurationError
from .lattice import (
    bosonic_basis,
    build_lattice,
    compose_distinguishable,
    kinetic_hamiltonian,
    make_superposition,
    site_number_operators,
)
from .physics import preset

DEFAULT_MAX_NORM_DRIFT = 0.05
DEFAULT_RECORD_POINTS = 200


@dataclass(frozen=True)
class LatticeSection:
    sites: int
    spacing: float


@dataclass(frozen=True)
class ParticleSection:
    count: int = 1
    statistics: str = "distinguishable"


@dataclass(frozen=True)
class InitialStateSection:
    centers: tuple
    weights: tuple
    width: float = 0.0


@dataclass(frozen=True)
class HamiltonianSection:
    type: str = "zero"
    mass: float = 1.0


@dataclass(frozen=True)
class ParamsSection:
    rate: float = 1.0
    correlation_length: float = 1.0
    preset: str = None
    rate_si: float = None
    correlation_length_si: float = None


@dataclass(frozen=True)
class IntegratorSection:
    horizon: float
    dt: float = None
    stride: int = None
    max_norm_drift: float = DEFAULT_MAX_NORM_DRIFT


@dataclass(frozen=True)
class EnsembleSection:
    trajectories: int
    master_seed: int


@dataclass(frozen=True)
class AnalysisSection:
    born: bool = False
    decay_pair: tuple = None
    oracle_compare: str = "auto"  # auto | on | off
    energy_slope: bool = False


@dataclass(frozen=True)
class VisibilitySection:
    constituents_per_volume: int
    volume_count: int
    separation_m: float
    duration_s: float
    # explicit SI parameter point; defaults to the scenario's params/preset
    rate_si: float = None
    correlation_length_si: float = None


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    model: str
    lattice: LatticeSection
    particles: ParticleSection
    initial_state: InitialStateSection
    hamiltonian: HamiltonianSection
    params: ParamsSection
    integrator: IntegratorSection
    ensemble: EnsembleSection
    observables: tuple
    analysis: AnalysisSection
    visibility: VisibilitySection = None
    output_directory: str = None


class _Validator:
    """Collects every violation with its YAML path before failing."""

    def __init__(self):
        self.problems = []

    def fail(self, path, message):
        self.problems.append(f"{path}: {message}")

    def section(self, doc, path, known):
        if doc is None:
            return {}
        if not isinstance(doc, dict):
            self.fail(path, "must be a mapping")
            return {}
        for key in doc:
            if key not in known:
                self.fail(f"{path}.{key}" if path else str(key), "unknown key")
        return doc

    def number(self, doc, path, *, minimum=None, exclusive_minimum=None, default=None,
               required=False, integer=False):
        key = path.split(".")[-1]
        if not isinstance(doc, dict) or key not in doc or doc[key] is None:
            if required:
                self.fail(path, "missing required value")
            return default
        val = doc[key]
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            self.fail(path, "must be a number")
            return default
        if integer and int(val) != val:
            self.fail(path, "must be an integer")
            return default
        if minimum is not None and val < minimum:
            self.fail(path, f"must be >= {minimum}")
            return default
        if exclusive_minimum is not None and val <= exclusive_minimum:
            self.fail(path, f"must be > {exclusive_minimum}")
            return default
        return int(val) if integer else float(val)

    def choice(self, doc, path, options, default=None, required=False):
        key = path.split(".")[-1]
        if not isinstance(doc, dict) or key not in doc or doc[key] is None:
            if required:
                self.fail(path, "missing required value")
            return default
        val = doc[key]
        if val not in options:
            self.fail(path, f"must be one of {sorted(options)}")
            return default
        return val

    def raise_if_failed(self):
        if self.problems:
            raise ConfigurationError(
                "invalid scenario configuration:\n  " + "\n  ".join(self.problems),
                problems=self.problems,
            )


def _parse_weight(raw, path, v):
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return complex(raw)
    if isinstance(raw, (list, tuple)) and len(raw) == 2 and all(
        isinstance(p, (int, float)) and not isinstance(p, bool) for p in raw
    ):
        return complex(raw[0], raw[1])
    v.fail(path, "weights must be numbers or [re, im] pairs")
    return 0j


def parse_config(text: str, name: str = "scenario") -> ScenarioConfig:
    """Parse and validate a YAML scenario document.

    Raises ConfigurationError carrying the full list of problems; YAML syntax
    errors keep the parser's line/column information.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"YAML syntax error: {exc}") from exc
    if doc is None:
        raise ConfigurationError("empty configuration document")
    if not isinstance(doc, dict):
        raise ConfigurationError("top level of the configuration must be a mapping")

    v = _Validator()
    top_keys = {"name", "model", "lattice", "particles", "initial_state", "hamiltonian",
                "params", "integrator", "ensemble", "observables", "analysis",
                "visibility_model", "output"}
    v.section(doc, "", top_keys)

    cfg_name = doc.get("name", name)
    if not isinstance(cfg_name, str) or not cfg_name:
        v.fail("name", "must be a non-empty string")
        cfg_name = name
    model = v.choice(doc, "model", {"csl", "grw", "unitary"}, required=True)

    lat_doc = v.section(doc.get("lattice"), "lattice", {"sites", "spacing"})
    sites = v.number(lat_doc, "lattice.sites", minimum=2, integer=True, required=True)
    spacing = v.number(lat_doc, "lattice.spacing", exclusive_minimum=0.0, required=True)
    lattice = LatticeSection(sites or 2, spacing or 1.0)

    part_doc = v.section(doc.get("particles"), "particles", {"count", "statistics"})
    count = v.number(part_doc, "particles.count", minimum=1, integer=True, default=1)
    statistics = v.choice(part_doc, "particles.statistics",
                          {"distinguishable", "bosonic"}, default="distinguishable")
    particles = ParticleSection(count, statistics)

    init_doc = v.section(doc.get("initial_state"), "initial_state",
                         {"centers", "weights", "width"})
    centers_raw = init_doc.get("centers")
    weights_raw = init_doc.get("weights")
    if not isinstance(centers_raw, (list, tuple)) or not centers_raw:
        v.fail("initial_state.centers", "must be a non-empty list of positions")
        centers_raw = [0.0]
    if not isinstance(weights_raw, (list, tuple)) or not weights_raw:
        v.fail("initial_state.weights", "must be a non-empty list")
        weights_raw = [1.0]
    if len(centers_raw) != len(weights_raw):
        v.fail("initial_state.weights", "need exactly one weight per center")
    centers = tuple(float(c) if isinstance(c, (int, float)) else 0.0 for c in centers_raw)
    weights = tuple(_parse_weight(w, f"initial_state.weights[{i}]", v)
                    for i, w in enumerate(weights_raw))
    width = v.number(init_doc, "initial_state.width", minimum=0.0, default=0.0)
    initial_state = InitialStateSection(centers, weights, width)

    ham_doc = v.section(doc.get("hamiltonian"), "hamiltonian", {"type", "mass"})
    ham = HamiltonianSection(
        v.choice(ham_doc, "hamiltonian.type", {"zero", "kinetic"}, default="zero"),
        v.number(ham_doc, "hamiltonian.mass", exclusive_minimum=0.0, default=1.0),
    )

    par_doc = v.section(doc.get("params"), "params",
                        {"rate", "correlation_length", "preset"})
    preset_tag = v.choice(par_doc, "params.preset", {"GRW", "Adler"})
    if preset_tag is not None:
        if "rate" in par_doc or "correlation_length" in par_doc:
            v.fail("params", "give either a preset or explicit rate/correlation_length, not both")
        si = preset(preset_tag)
        params = ParamsSection(rate=1.0, correlation_length=1.0, preset=preset_tag,
                               rate_si=si.rate, correlation_length_si=si.correlation_length)
    else:
        rate = v.number(par_doc, "params.rate", minimum=0.0,
                        default=0.0 if model == "unitary" else None,
                        required=model != "unitary")
        corr = v.number(par_doc, "params.correlation_length", exclusive_minimum=0.0,
                        default=1.0)
        params = ParamsSection(rate=rate if rate is not None else 0.0,
                               correlation_length=corr)

    int_doc = v.section(doc.get("integrator"), "integrator",
                        {"dt", "horizon", "stride", "max_norm_drift"})
    horizon = v.number(int_doc, "integrator.horizon", exclusive_minimum=0.0, required=True)
    dt = v.number(int_doc, "integrator.dt", exclusive_minimum=0.0)
    stride = v.number(int_doc, "integrator.stride", minimum=1, integer=True)
    drift = v.number(int_doc, "integrator.max_norm_drift", exclusive_minimum=0.0,
                     default=DEFAULT_MAX_NORM_DRIFT)
    integrator = IntegratorSection(horizon or 1.0, dt, stride, drift)

    ens_doc = v.section(doc.get("ensemble"), "ensemble", {"trajectories", "master_seed"})
    ensemble = EnsembleSection(
        v.number(ens_doc, "ensemble.trajectories", minimum=1, integer=True, required=True) or 1,
        v.number(ens_doc, "ensemble.master_seed", minimum=0, integer=True, default=0),
    )

    obs_raw = doc.get("observables", ["site_probabilities"])
    if not isinstance(obs_raw, (list, tuple)):
        v.fail("observables", "must be a list")
        obs_raw = []
    observables = []
    for i, o in enumerate(obs_raw):
        try:
            observables.append(parse_observable(str(o)))
        except ConfigurationError as exc:
            v.fail(f"observables[{i}]", str(exc))

    ana_doc = v.section(doc.get("analysis"), "analysis",
                        {"born", "decay_fit", "oracle_compare", "energy_slope"})
    born = bool(ana_doc.get("born", False))
    decay_pair = None
    if "decay_fit" in ana_doc and ana_doc["decay_fit"] is not None:
        df_doc = v.section(ana_doc["decay_fit"], "analysis.decay_fit", {"pair"})
        pair_raw = df_doc.get("pair")
        if (not isinstance(pair_raw, (list, tuple)) or len(pair_raw) != 2
                or not all(isinstance(p, int) and not isinstance(p, bool) for p in pair_raw)):
            v.fail("analysis.decay_fit.pair", "must be a pair of basis indices")
        else:
            decay_pair = (int(pair_raw[0]), int(pair_raw[1]))
    oracle_mode = v.choice(ana_doc, "analysis.oracle_compare", {"auto", "on", "off"},
                           default="auto")
    energy_slope = bool(ana_doc.get("energy_slope", False))
    analysis = AnalysisSection(born, decay_pair, oracle_mode, energy_slope)

    vis = None
    if doc.get("visibility_model") is not None:
        vis_doc = v.section(doc["visibility_model"], "visibility_model",
                            {"constituents_per_volume", "volume_count",
                             "separation_m", "duration_s",
                             "rate_si", "correlation_length_si"})
        vis = VisibilitySection(
            v.number(vis_doc, "visibility_model.constituents_per_volume", minimum=1,
                     integer=True, default=1),
            v.number(vis_doc, "visibility_model.volume_count", minimum=1, integer=True,
                     default=1),
            v.number(vis_doc, "visibility_model.separation_m", minimum=0.0, required=True)
            or 0.0,
            v.number(vis_doc, "visibility_model.duration_s", minimum=0.0, required=True)
            or 0.0,
            v.number(vis_doc, "visibility_model.rate_si", minimum=0.0),
            v.number(vis_doc, "visibility_model.correlation_length_si",
                     exclusive_minimum=0.0),
        )

    out_doc = v.section(doc.get("output"), "output", {"directory"})
    out_dir = out_doc.get("directory")
    if out_dir is not None and not isinstance(out_dir, str):
        v.fail("output.directory", "must be a string path")
        out_dir = None

    if model == "grw" and statistics == "bosonic":
        v.fail("particles.statistics", "localization hits need distinguishable particles")

    v.raise_if_failed()
    return ScenarioConfig(
        name=cfg_name,
        model=model,
        lattice=lattice,
        particles=particles,
        initial_state=initial_state,
        hamiltonian=ham,
        params=params,
        integrator=integrator,
        ensemble=ensemble,
        observables=tuple(observables),
        analysis=analysis,
        visibility=vis,
        output_directory=out_dir,
    )


@dataclass
class AssembledScenario:
    """Concrete simulation objects built from a validated config."""

    config: ScenarioConfig
    grid: object
    basis: object
    init: object
    hamiltonian: object
    ops: object
    problem: EnsembleProblem
    integrator: IntegratorConfig


def assemble(cfg: ScenarioConfig) -> AssembledScenario:
    """Build grid, basis, operators, initial state, and the ensemble problem."""
    grid = build_lattice(cfg.lattice.sites, cfg.lattice.spacing)
    if cfg.particles.statistics == "bosonic":
        basis = bosonic_basis(grid, cfg.particles.count)
    else:
        basis = compose_distinguishable(grid, cfg.particles.count)
    init = make_superposition(grid, cfg.initial_state.centers, cfg.initial_state.width,
                              cfg.initial_state.weights, basis=basis)
    hamiltonian = None
    if cfg.hamiltonian.type == "kinetic":
        hamiltonian = kinetic_hamiltonian(grid, basis, cfg.hamiltonian.mass)

    ops = None
    if cfg.model == "csl":
        wt = whiten(gaussian_kernel(grid, cfg.params.correlation_length))
        ops = csl_operators(grid, site_number_operators(grid, basis), cfg.params.rate, wt)
    elif cfg.model == "unitary":
        ops = CollapseOperatorSet((), rate=0.0)

    dt = cfg.integrator.dt
    if dt is None:
        dt = min(suggest_dt(hamiltonian, ops), cfg.integrator.horizon)
    n_steps = max(1, int(round(cfg.integrator.horizon / dt)))
    stride = cfg.integrator.stride
    if stride is None:
        stride = max(1, n_steps // DEFAULT_RECORD_POINTS)
    integrator = IntegratorConfig(dt=dt, horizon=cfg.integrator.horizon,
                                  max_norm_drift=cfg.integrator.max_norm_drift,
                                  stride=stride)

    if cfg.model == "grw":
        problem = EnsembleProblem(
            "grw", init, hamiltonian, integrator,
            rate=cfg.params.rate, correlation_length=cfg.params.correlation_length,
            particles=cfg.particles.count, observables=cfg.observables)
    else:
        problem = EnsembleProblem("sde", init, hamiltonian, integrator, ops=ops,
                                  observables=cfg.observables)
    return AssembledScenario(cfg, grid, basis, init, hamiltonian, ops, problem, integrator)


def units_metadata(cfg: ScenarioConfig) -> dict:
    """Conversion between internal units and SI for the chosen parameter point."""
    if cfg.params.preset is not None:
        return {
            "convention": "lengths in units of the correlation length, times in units of "
                          "the inverse per-constituent collapse rate",
            "length_unit_m": cfg.params.correlation_length_si,
            "time_unit_s": 1.0 / cfg.params.rate_si if cfg.params.rate_si else None,
            "preset": cfg.params.preset,
        }
    return {
        "convention": "dimensionless internal units (no SI anchor declared)",
        "length_unit_m": None,
        "time_unit_s": None,
        "preset": None,
    }


def config_as_dict(cfg: ScenarioConfig) -> dict:
    """Resolved configuration with all defaults filled, for the run manifest."""

    def weights_out(ws):
        return [[w.real, w.imag] for w in ws]

    out = {
        "name": cfg.name,
        "model": cfg.model,
        "lattice": {"sites": cfg.lattice.sites, "spacing": cfg.lattice.spacing},
        "particles": {"count": cfg.particles.count, "statistics": cfg.particles.statistics},
        "initial_state": {
            "centers": list(cfg.initial_state.centers),
            "weights": weights_out(cfg.initial_state.weights),
            "width": cfg.initial_state.width,
        },
        "hamiltonian": {"type": cfg.hamiltonian.type, "mass": cfg.hamiltonian.mass},
        "params": {
            "rate": cfg.params.rate,
            "correlation_length": cfg.params.correlation_length,
            "preset": cfg.params.preset,
            "rate_si": cfg.params.rate_si,
            "correlation_length_si": cfg.params.correlation_length_si,
        },
        "integrator": {
            "dt": cfg.integrator.dt,
            "horizon": cfg.integrator.horizon,
            "stride": cfg.integrator.stride,
            "max_norm_drift": cfg.integrator.max_norm_drift,
        },
        "ensemble": {
            "trajectories": cfg.ensemble.trajectories,
            "master_seed": cfg.ensemble.master_seed,
        },
        "observables": [o.name for o in cfg.observables],
        "analysis": {
            "born": cfg.analysis.born,
            "decay_fit": {"pair": list(cfg.analysis.decay_pair)} if cfg.analysis.decay_pair else None,
            "oracle_compare": cfg.analysis.oracle_compare,
            "energy_slope": cfg.analysis.energy_slope,
        },
        "visibility_model": None,
        "output": {"directory": cfg.output_directory},
    }
    if cfg.visibility is not None:
        out["visibility_model"] = {
            "constituents_per_volume": cfg.visibility.constituents_per_volume,
            "volume_count": cfg.visibility.volume_count,
            "separation_m": cfg.visibility.separation_m,
            "duration_s": cfg.visibility.duration_s,
            "rate_si": cfg.visibility.rate_si,
            "correlation_length_si": cfg.visibility.correlation_length_si,
        }
    return out
