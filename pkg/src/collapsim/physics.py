"""Physical-claim layer: parameter presets, amplification law, visibility, heating.

The collapse strength of a composite object follows the amplification law

    total_rate = rate_per_constituent * (constituents per correlation volume)^2
                 * (number of correlation volumes),

quadratic in the local density because identical constituents collapse
together, linear in how many correlation volumes the object spans.  The
interference-visibility predictor combines this with the two-point dephasing
rate; that combination is an approximative center-of-mass model and is
labelled as such in all output metadata.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, FitQualityError
from .fitting import linear_fit
from .lindblad import csl_two_point_rate

GRW_RATE_PER_S = 1e-16
ADLER_RATE_PER_S = 1e-8
CORRELATION_LENGTH_M = 1e-7

VISIBILITY_MODEL_LABEL = "approximative center-of-mass model"

PRESET_NOTES = {
    "GRW": "weakest value that still classicalizes everyday macroscopic objects",
    "Adler": "stronger value calibrated to latent-image formation in photography",
}


@dataclass(frozen=True)
class CollapseParams:
    """Collapse strength (1/s) and noise correlation length (m), SI units."""

    rate: float
    correlation_length: float
    tag: str = "custom"

    def __post_init__(self):
        if self.rate < 0:
            raise ConfigurationError("collapse rate must be >= 0")
        if self.correlation_length <= 0:
            raise ConfigurationError("correlation length must be positive")


def preset(tag: str) -> CollapseParams:
    """Named parameter points: GRW (1e-16 /s) and Adler (1e-8 /s), both at 1e-7 m."""
    if tag == "GRW":
        return CollapseParams(GRW_RATE_PER_S, CORRELATION_LENGTH_M, "GRW")
    if tag == "Adler":
        return CollapseParams(ADLER_RATE_PER_S, CORRELATION_LENGTH_M, "Adler")
    raise ConfigurationError(f"unknown preset {tag!r}; choose GRW or Adler")


@dataclass(frozen=True)
class AmplificationInputs:
    """Composite-object geometry entering the amplification law.

    ``constituents_per_volume``: nucleons inside one correlation-length volume
    (a density measure); ``volume_count``: how many such volumes tile the
    object (a size measure); ``rate``: per-constituent collapse rate.
    """

    constituents_per_volume: int
    volume_count: int
    rate: float

    def __post_init__(self):
        if self.constituents_per_volume < 1 or self.volume_count < 1:
            raise ConfigurationError("constituent and volume counts must be >= 1")
        if self.rate < 0:
            raise ConfigurationError("rate must be >= 0")


def amplification_rate(inp: AmplificationInputs) -> float:
    """Center-of-mass collapse rate: rate * n^2 * N."""
    return inp.rate * inp.constituents_per_volume**2 * inp.volume_count


def visibility_exponent(params: CollapseParams, inp: AmplificationInputs,
                        separation: float, duration: float) -> float:
    """Decay exponent of interference visibility for a superposition of
    extent ``separation`` (m) held for ``duration`` (s)."""
    if separation < 0 or duration < 0:
        raise ConfigurationError("separation and duration must be >= 0")
    amplified = amplification_rate(
        AmplificationInputs(inp.constituents_per_volume, inp.volume_count, params.rate))
    return csl_two_point_rate(separation, amplified, params.correlation_length) * duration


def visibility_prediction(params: CollapseParams, inp: AmplificationInputs,
                          separation: float, duration: float) -> float:
    """Predicted interference visibility, exp(-exponent), in (0, 1]."""
    return float(np.exp(-visibility_exponent(params, inp, separation, duration)))


@dataclass(frozen=True)
class EnergySlope:
    slope: float
    slope_se: float
    r_squared: float
    n_points: int


def fit_energy_slope(times, energies, point_ses=None) -> EnergySlope:
    """Linear fit of a mean-energy time series.

    Constant series (energy conserved to numerical precision) skip the R^2
    shape gate; the reported uncertainty never drops below a numerical floor
    so that "slope consistent with zero" is a meaningful test even when the
    ensemble variance vanishes.
    """
    times = np.asarray(times, dtype=float)
    energies = np.asarray(energies, dtype=float)
    if len(times) < 10:
        raise FitQualityError("need at least 10 recorded energies")
    fit = linear_fit(times, energies)
    scale = max(np.max(np.abs(energies)), 1e-300)
    span = times[-1] - times[0]
    floor = 1e-12 * scale / max(span, 1e-300)
    se = max(fit.slope_se, floor)
    if point_ses is not None:
        # propagate the per-point ensemble error through the OLS slope
        x = times - times.mean()
        sxx = np.sum(x**2)
        se = max(se, float(np.sqrt(np.sum((x * np.asarray(point_ses)) ** 2)) / sxx))
    variation = energies.max() - energies.min()
    meaningful = variation > max(1e-9 * scale, 10.0 * floor * span)
    if meaningful and fit.r_squared < 0.9:
        raise FitQualityError(f"energy growth is not linear (R^2 = {fit.r_squared:.3f})")
    return EnergySlope(fit.slope, se, fit.r_squared, fit.n_points)


def energy_gain_slope(stats, hamiltonian=None) -> EnergySlope:
    """Energy-gain slope of an ensemble that recorded the energy observable.

    Falls back to tr(H rho) from the mean density matrix when the scalar
    energy series was not requested.
    """
    if "energy" in stats.observable_means:
        return fit_energy_slope(stats.times, stats.observable_means["energy"],
                                stats.observable_ses.get("energy"))
    if stats.mean_rho is not None and hamiltonian is not None:
        series = np.einsum("tij,ji->t", stats.mean_rho, hamiltonian.matrix).real
        return fit_energy_slope(stats.times, series)
    raise ConfigurationError("ensemble recorded neither energy nor the mean density matrix")


def preset_table() -> str:
    """Single-space-separated table of presets (machine-friendly columns)."""
    lines = ["preset rate r_C note"]
    for tag in ("GRW", "Adler"):
        p = preset(tag)
        lines.append(
            f"{tag} {format_si(p.rate)} s^-1 r_C {format_si(p.correlation_length)} m "
            f"-- {PRESET_NOTES[tag]}"
        )
    return "\n".join(lines)


def format_si(x: float) -> str:
    """Power-of-ten formatting without zero-padded exponents: 1e-8, 2.5e-7."""
    if x == 0:
        return "0"
    exp = int(np.floor(np.log10(abs(x))))
    mant = x / 10.0**exp
    mant_str = f"{mant:.12g}"
    if mant_str == "1":
        return f"1e{exp}"
    return f"{mant_str}e{exp}"
