"""Least-squares helpers shared by the ensemble statistics and observables layers."""

from dataclasses import dataclass

import numpy as np

from .errors import FitQualityError

DECAY_WINDOW_FRACTION = 0.05
DECAY_MIN_POINTS = 10
R2_GATE = 0.9
# below this fractional drop the series counts as "no measurable decay" and
# the exponential-shape gate is skipped (fitting noise is not a shape failure)
NO_DECAY_DROP = 0.2


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    slope_se: float
    r_squared: float
    n_points: int


def linear_fit(x, y) -> LinearFit:
    """Ordinary least squares with residual-based standard error of the slope."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    if n < 2:
        raise FitQualityError("need at least 2 points for a linear fit")
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0:
        raise FitQualityError("degenerate fit: all x values identical")
    slope = np.sum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    ss_res = np.sum(resid**2)
    ss_tot = np.sum((y - ym) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    se = np.sqrt(ss_res / (n - 2) / sxx) if n > 2 else np.inf
    return LinearFit(float(slope), float(intercept), float(se), float(r2), n)


@dataclass(frozen=True)
class DecayFit:
    """Exponential decay rate fitted from log-magnitude data."""

    rate: float
    rate_se: float
    r_squared: float
    window: tuple
    n_points: int
    no_decay: bool
    intercept: float


def fit_exponential_decay(times, values, *, window_fraction=DECAY_WINDOW_FRACTION,
                          min_points=DECAY_MIN_POINTS, r2_gate=R2_GATE,
                          enforce_gate=True) -> DecayFit:
    """Fit |values| ~ A exp(-rate t) over the window where |values| stays above
    ``window_fraction`` of the initial magnitude.

    Returns the slope magnitude and its standard error.  A series that never
    drops appreciably is flagged ``no_decay`` and exempt from the R^2 shape
    gate; a decaying but visibly non-exponential profile raises
    FitQualityError when the gate is enforced.
    """
    times = np.asarray(times, dtype=float)
    mags = np.abs(np.asarray(values))
    if len(times) != len(mags):
        raise FitQualityError("times and values length mismatch")
    v0 = mags[0]
    if v0 <= 0:
        raise FitQualityError("initial magnitude is zero; nothing to fit")
    inside = mags > window_fraction * v0
    # contiguous window from t=0 (the series may dip below and wiggle back up
    # from noise; only the leading stretch is exponential)
    end = int(np.argmin(inside)) if not inside.all() else len(mags)
    if end == 0:
        raise FitQualityError("series starts below the fit window")
    window = slice(0, end)
    t_win = times[window]
    v_win = mags[window]
    if len(t_win) < min_points:
        raise FitQualityError(f"only {len(t_win)} points inside the fit window, need {min_points}")
    fit = linear_fit(t_win, np.log(v_win))
    no_decay = v_win[-1] > (1.0 - NO_DECAY_DROP) * v0
    if enforce_gate and not no_decay and fit.r_squared < r2_gate:
        raise FitQualityError(f"decay profile is not exponential (R^2 = {fit.r_squared:.3f})")
    return DecayFit(
        rate=float(abs(fit.slope)),
        rate_se=fit.slope_se,
        r_squared=fit.r_squared,
        window=(float(t_win[0]), float(t_win[-1])),
        n_points=len(t_win),
        no_decay=bool(no_decay),
        intercept=fit.intercept,
    )
