"""Scalar and time-series diagnostics of spreading and transport runs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .model import ExcitonState, ModelParams

__all__ = [
    "ObservableSeries",
    "PowerLawFit",
    "DiffusionEstimate",
    "ThresholdEstimate",
    "UndefinedObservableError",
    "FitError",
    "NonDiffusiveError",
    "IncompleteTrajectoryError",
    "participation_ratio",
    "kinetic_temperature",
    "fit_power_law",
    "local_loglog_slopes",
    "find_diffusive_window",
    "diffusion_constant",
    "threshold_time",
    "dimer_contrast",
    "efficiency",
]

# Survival-probability threshold below which open trajectories stop.
SURVIVAL_THRESHOLD = 1e-5


class UndefinedObservableError(ValueError):
    """The observable is not defined on the given input."""


class FitError(RuntimeError):
    """A least-squares fit could not be performed."""


class NonDiffusiveError(FitError):
    """The asymptotic growth is not compatible with sqrt(t) spreading."""

    def __init__(self, message: str, fit: "PowerLawFit | None" = None):
        super().__init__(message)
        self.fit = fit


class IncompleteTrajectoryError(RuntimeError):
    """An open trajectory was not integrated down to the survival threshold."""


@dataclass
class ObservableSeries:
    """A time-stamped scalar series from one trajectory or an ensemble mean."""

    times: np.ndarray
    values: np.ndarray
    label: str = ""
    ensemble_size: int = 1

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")


@dataclass
class PowerLawFit:
    """Least-squares power law ``values = prefactor * t**exponent``."""

    exponent: float
    prefactor: float
    window: tuple[float, float]
    residual: float

    def __call__(self, t):
        return self.prefactor * np.asarray(t) ** self.exponent


@dataclass
class DiffusionEstimate:
    """Diffusion constant extracted from the asymptotic spreading window."""

    D: float
    fit: PowerLawFit
    window: tuple[float, float]
    fixed_exponent: bool = False


@dataclass
class ThresholdEstimate:
    """First-crossing statistics of a participation threshold."""

    mean_time: float
    crossing_times: np.ndarray
    censored: int

    @property
    def n_crossed(self) -> int:
        return len(self.crossing_times)


# ----------------------------------------------------------------------
# Pointwise observables
# ----------------------------------------------------------------------

def participation_ratio(exciton: ExcitonState | np.ndarray) -> float:
    """Effective occupied length of the excitation.

    With ``q_n = |b_n|^2 / N`` (moduli renormalized by the current norm,
    so the measure reflects shape even for decaying states),

        Pi = 1 / sum(q_n^2) - 1,

    ranging from 0 (single site) to L - 1 (perfectly uniform).
    """
    b = exciton.b if isinstance(exciton, ExcitonState) else np.asarray(exciton)
    dens = np.abs(b) ** 2
    norm = dens.sum()
    if norm <= 0:
        raise UndefinedObservableError("participation ratio of a zero-norm state")
    q = dens / norm
    return float(1.0 / np.sum(q**2) - 1.0)


def kinetic_temperature(momenta: np.ndarray, M: float = 1.0) -> float:
    """Ensemble kinetic temperature of the lattice.

    ``momenta`` has shape (n_trajectories, L); the temperature is the
    site average of the across-trajectory momentum variance divided by
    the mass (unbiased variance estimator).
    """
    momenta = np.asarray(momenta, dtype=float)
    if momenta.ndim != 2 or momenta.shape[0] < 2:
        raise UndefinedObservableError(
            "kinetic temperature needs >= 2 trajectories (got "
            f"shape {momenta.shape})")
    var = np.var(momenta, axis=0, ddof=1)
    return float(np.mean(var) / M)


def dimer_contrast(times: np.ndarray, amplitudes: np.ndarray,
                   m: int) -> ObservableSeries:
    """Occupation contrast Q(t) between the initial site and its neighbours.

    ``amplitudes`` has shape (n_times, L) for a trajectory started fully
    localized at site ``m``; Q = |b_m|^2 - (|b_{m+1}|^2 + |b_{m-1}|^2)/2,
    so Q(0) = 1.
    """
    dens = np.abs(np.asarray(amplitudes)) ** 2
    L = dens.shape[1]
    q = dens[:, m % L] - 0.5 * (dens[:, (m + 1) % L] + dens[:, (m - 1) % L])
    return ObservableSeries(times, q, label="dimer_contrast")


# ----------------------------------------------------------------------
# Power-law machinery
# ----------------------------------------------------------------------

def fit_power_law(series: ObservableSeries,
                  window: tuple[float, float]) -> PowerLawFit:
    """Least-squares straight line in log-log coordinates over a window."""
    t_min, t_max = window
    if not t_min < t_max:
        raise ValueError("window must satisfy t_min < t_max")
    sel = (series.times >= t_min) & (series.times <= t_max)
    if np.count_nonzero(sel) < 10:
        raise FitError(f"window [{t_min:g}, {t_max:g}] contains fewer than 10 samples")
    t = series.times[sel]
    v = series.values[sel]
    if np.any(v <= 0) or np.any(t <= 0):
        raise FitError("power-law fit requires positive times and values")
    lt = np.log(t)
    lv = np.log(v)
    exponent, intercept = np.polyfit(lt, lv, 1)
    resid = np.sqrt(np.mean((lv - (exponent * lt + intercept)) ** 2))
    return PowerLawFit(float(exponent), float(np.exp(intercept)),
                       (float(t_min), float(t_max)), float(resid))


def local_loglog_slopes(series: ObservableSeries,
                        span: float = 10.0 ** (1.0 / 3.0)):
    """Forward-windowed log-log slopes s(t) over windows [t, span*t].

    Returns (window start times, slopes); samples with non-positive
    values are excluded.
    """
    ok = (series.times > 0) & (series.values > 0)
    t = series.times[ok]
    v = series.values[ok]
    if t.size < 4:
        raise FitError("too few positive samples for slope estimation")
    lt = np.log(t)
    lv = np.log(v)
    starts = []
    slopes = []
    j0 = 0
    for i in range(t.size):
        hi = t[i] * span
        j1 = np.searchsorted(t, hi, side="right")
        if j1 - i < 3:
            continue
        if t[j1 - 1] < t[i] * span * 0.8:  # window truncated by end of data
            break
        x = lt[i:j1]
        y = lv[i:j1]
        slopes.append(np.polyfit(x, y, 1)[0])
        starts.append(t[i])
        j0 = i
    if not slopes:
        raise FitError("no complete slope windows in series")
    return np.asarray(starts), np.asarray(slopes)


def find_diffusive_window(series: ObservableSeries,
                          saturation_fraction: float = 0.5,
                          pi_max: float | None = None,
                          slope_tolerance: float = 0.1,
                          min_decades: float = 1.0) -> tuple[float, float]:
    """Locate the asymptotic sqrt(t) window of a spreading series.

    The window ends at ``t_sat``, the first time the series exceeds
    ``saturation_fraction * pi_max`` (or the last sample when no cap is
    given or reached), and starts at the earliest time from which the
    local log-log slope stays within ``slope_tolerance`` of 0.5 all the
    way to ``t_sat``.  The window must span at least ``min_decades``.
    """
    t_sat = float(series.times[-1])
    if pi_max is not None:
        cap = saturation_fraction * pi_max
        above = np.nonzero(series.values > cap)[0]
        if above.size:
            if above[0] == 0:
                raise NonDiffusiveError("series starts above the saturation cap")
            t_sat = float(series.times[above[0]])
    starts, slopes = local_loglog_slopes(series)
    in_band = np.abs(slopes - 0.5) <= slope_tolerance
    # earliest start from which every slope window up to t_sat is in band
    valid = None
    usable = starts <= t_sat / 10 ** (1.0 / 3.0)
    for i in range(starts.size):
        if not usable[i]:
            break
        if np.all(in_band[i:np.searchsorted(starts, t_sat, side="right")]):
            valid = float(starts[i])
            break
    if valid is None:
        raise NonDiffusiveError("no sustained sqrt(t) region before saturation")
    if t_sat / valid < 10.0**min_decades:
        raise NonDiffusiveError(
            f"sqrt(t) region spans less than {min_decades:g} decade(s): "
            f"[{valid:g}, {t_sat:g}]")
    return valid, t_sat


def diffusion_constant(series: ObservableSeries,
                       saturation_fraction: float = 0.5,
                       pi_max: float | None = None,
                       fixed_exponent: bool = False,
                       slope_tolerance: float = 0.1,
                       min_decades: float = 1.0) -> DiffusionEstimate:
    """Diffusion constant D of an ensemble-averaged spreading series.

    D is the prefactor of ``Pi(t) = D sqrt(t)`` fitted over the
    automatically selected asymptotic window.  In the default free-fit
    mode the fitted exponent must fall within ``slope_tolerance`` of
    0.5, otherwise :class:`NonDiffusiveError` is raised; with
    ``fixed_exponent`` the exponent is pinned to 0.5.
    """
    window = find_diffusive_window(series, saturation_fraction, pi_max,
                                   slope_tolerance, min_decades)
    fit = fit_power_law(series, window)
    if abs(fit.exponent - 0.5) > slope_tolerance:
        raise NonDiffusiveError(
            f"fitted exponent {fit.exponent:.3f} outside 0.5 +/- "
            f"{slope_tolerance:g}", fit)
    if fixed_exponent:
        sel = (series.times >= window[0]) & (series.times <= window[1])
        logD = np.mean(np.log(series.values[sel]) - 0.5 * np.log(series.times[sel]))
        fit = PowerLawFit(0.5, float(np.exp(logD)), window, fit.residual)
    return DiffusionEstimate(float(fit.prefactor), fit, window, fixed_exponent)


def threshold_time(series_list, pi_threshold: float) -> ThresholdEstimate:
    """Mean first-crossing time of a participation threshold.

    ``series_list`` holds one Pi(t) series per trajectory; the crossing
    time of each is found by linear interpolation between the bracketing
    samples.  Trajectories that never reach ``pi_threshold`` are counted
    as censored, and the mean is taken over the crossing ones only.
    """
    if pi_threshold <= 0:
        raise ValueError("pi_threshold must be positive")
    crossings = []
    censored = 0
    for series in series_list:
        t = series.times
        v = series.values
        idx = np.nonzero(v >= pi_threshold)[0]
        if idx.size == 0:
            censored += 1
            continue
        i = idx[0]
        if i == 0:
            crossings.append(float(t[0]))
        else:
            frac = (pi_threshold - v[i - 1]) / (v[i] - v[i - 1])
            crossings.append(float(t[i - 1] + frac * (t[i] - t[i - 1])))
    if not crossings:
        raise UndefinedObservableError(
            f"no trajectory reached the threshold {pi_threshold:g}")
    arr = np.asarray(crossings)
    return ThresholdEstimate(float(arr.mean()), arr, censored)


# ----------------------------------------------------------------------
# Open-system transport efficiency
# ----------------------------------------------------------------------

def _tail_estimate(times, norm, sink_occ, Gamma, tail_samples=20):
    """Sink share of the residual norm, by exponential extrapolation."""
    k = min(tail_samples, len(times) - 1)
    if k < 2:
        return 0.0
    dt_span = times[-1] - times[-1 - k]
    if dt_span <= 0 or norm[-1] <= 0 or norm[-1 - k] <= norm[-1]:
        return float(norm[-1])  # cannot extrapolate; bound by what is left
    lam = np.log(norm[-1 - k] / norm[-1]) / dt_span
    occ_end = float(np.mean(sink_occ[-k:]))
    tail = 2.0 * Gamma * occ_end / lam
    return float(min(tail, norm[-1]))


def efficiency(times: np.ndarray, sink_occupation: np.ndarray,
               norm: np.ndarray, params: ModelParams,
               survival_threshold: float = SURVIVAL_THRESHOLD) -> float:
    """Probability that the excitation exited through the sink.

        eta = 2 Gamma * integral of |b_sink(t)|^2 dt over [0, inf)

    computed by Simpson quadrature over the recorded samples plus an
    exponential-extrapolation tail for the part beyond the survival
    threshold (bounded by the residual norm, hence < threshold).
    """
    if params.Gamma <= 0:
        raise ValueError("efficiency requires an active sink (Gamma > 0)")
    times = np.asarray(times, dtype=float)
    sink_occupation = np.asarray(sink_occupation, dtype=float)
    norm = np.asarray(norm, dtype=float)
    if norm[-1] > survival_threshold:
        raise IncompleteTrajectoryError(
            f"trajectory stopped at N = {norm[-1]:.3e} > "
            f"{survival_threshold:g}")
    eta = 2.0 * params.Gamma * float(simpson(sink_occupation, x=times))
    eta += _tail_estimate(times, norm, sink_occupation, params.Gamma)
    return float(eta)
