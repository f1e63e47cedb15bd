"""Equilibrium spectral analysis of lattice and excitation fields.

Long microcanonical records of a field ``f_n(t)`` are projected onto
spatial Fourier modes ``a_m(t) = sum_n f_n(t) exp(i k n)`` with
``k = 2 pi m / L``; the power spectral density of each projection is
estimated by the periodogram and averaged over independent thermal
realizations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

__all__ = [
    "SpectrumGrid",
    "LorentzianFit",
    "mode_projection",
    "power_spectrum",
    "lorentzian_fit",
    "log_binned",
]


@dataclass
class SpectrumGrid:
    """Power spectral density over (mode, frequency)."""

    mode_indices: np.ndarray      # integer m of each row
    k_values: np.ndarray          # 2 pi m / L
    omega_values: np.ndarray
    power: np.ndarray             # shape (n_modes, n_omega)
    record_length: float          # time units of the underlying record
    realizations: int
    sample_stride: float          # sampling interval of the time series

    def __post_init__(self):
        self.mode_indices = np.asarray(self.mode_indices, dtype=int)
        self.k_values = np.asarray(self.k_values, dtype=float)
        self.omega_values = np.asarray(self.omega_values, dtype=float)
        self.power = np.asarray(self.power, dtype=float)
        if self.power.shape != (len(self.k_values), len(self.omega_values)):
            raise ValueError("power must have shape (n_modes, n_omega)")
        if np.any(self.power < 0):
            raise ValueError("power must be non-negative")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")

    def slice(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """(omega, power) row of mode index ``m``."""
        rows = np.nonzero(self.mode_indices == m)[0]
        if rows.size == 0:
            raise KeyError(f"mode {m} not present in grid")
        return self.omega_values, self.power[rows[0]]


@dataclass
class LorentzianFit:
    """Least-squares Lorentzian A w^2 / ((omega - center)^2 + w^2)."""

    center: float
    half_width: float
    amplitude: float
    residual: float

    def __call__(self, omega):
        w2 = self.half_width**2
        return self.amplitude * w2 / ((np.asarray(omega) - self.center) ** 2 + w2)


def mode_projection(snapshots: np.ndarray, m: int) -> np.ndarray:
    """Project per-site snapshots onto spatial Fourier mode ``m``.

    ``snapshots`` has shape (n_times, L); returns the complex series
    ``a_m(t) = sum_n f_n(t) exp(i 2 pi m n / L)``.
    """
    snapshots = np.asarray(snapshots)
    if snapshots.ndim != 2:
        raise ValueError("snapshots must have shape (n_times, L)")
    L = snapshots.shape[1]
    if not -L < m < L:
        raise ValueError(f"mode index {m} out of range for L = {L}")
    phases = np.exp(1j * (2.0 * np.pi * m / L) * np.arange(L))
    return snapshots @ phases


def power_spectrum(series: np.ndarray, sample_stride: float,
                   remove_mean: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """One-sided periodogram of a (complex) uniformly sampled series.

    Normalized so that the PSD sums to the series variance (mean power
    when ``remove_mean`` is off): the two-sided periodogram
    |DFT|^2 / N^2 is folded onto non-negative frequencies.  Returns
    (omega, psd) with omega in angular-frequency units.
    """
    series = np.asarray(series)
    if series.size == 0:
        raise ValueError("empty series")
    n = series.size
    if remove_mean:
        series = series - series.mean()
    spec = np.abs(np.fft.fft(series)) ** 2 / n**2
    n_half = n // 2
    omega = 2.0 * np.pi * np.arange(n_half + 1) / (n * sample_stride)
    folded = np.empty(n_half + 1)
    folded[0] = spec[0]
    if n % 2 == 0:
        folded[1:n_half] = spec[1:n_half] + spec[-1:-n_half:-1]
        folded[n_half] = spec[n_half]
    else:
        folded[1:] = spec[1:n_half + 1] + spec[-1:-n_half - 1:-1]
    return omega, folded


def lorentzian_fit(omega: np.ndarray, power: np.ndarray,
                   max_iterations: int = 10000) -> LorentzianFit:
    """Fit a Lorentzian line to a single-peak PSD slice."""
    omega = np.asarray(omega, dtype=float)
    power = np.asarray(power, dtype=float)
    if omega.size < 4:
        raise ValueError("need at least 4 samples to fit a Lorentzian")
    i_pk = int(np.argmax(power))
    amp0 = power[i_pk]
    center0 = omega[i_pk]
    above = power > amp0 / 2
    width0 = max((omega[above][-1] - omega[above][0]) / 2, np.diff(omega).min())

    def model(w, center, hw, amp):
        return amp * hw**2 / ((w - center) ** 2 + hw**2)

    try:
        popt, _ = curve_fit(model, omega, power,
                            p0=(center0, width0, amp0),
                            maxfev=max_iterations)
    except RuntimeError as err:
        raise RuntimeError(f"Lorentzian fit did not converge: {err}") from err
    center, hw, amp = popt
    hw = abs(float(hw))
    resid = float(np.sqrt(np.mean((model(omega, *popt) - power) ** 2))
                  / max(amp, np.finfo(float).tiny))
    if hw <= 0 or amp <= 0:
        raise RuntimeError("Lorentzian fit returned a non-positive width or amplitude")
    return LorentzianFit(float(center), hw, float(amp), resid)


def log_binned(omega: np.ndarray, power: np.ndarray,
               bins_per_decade: int = 24) -> tuple[np.ndarray, np.ndarray]:
    """Average a PSD into logarithmic frequency bins (drops omega <= 0)."""
    pos = omega > 0
    omega = omega[pos]
    power = power[pos]
    edges = np.logspace(np.log10(omega[0]), np.log10(omega[-1]),
                        max(int(np.log10(omega[-1] / omega[0]) * bins_per_decade), 2))
    idx = np.digitize(omega, edges)
    om_out = []
    pw_out = []
    for i in range(1, len(edges)):
        mask = idx == i
        if np.any(mask):
            om_out.append(omega[mask].mean())
            pw_out.append(power[mask].mean())
    return np.asarray(om_out), np.asarray(pw_out)
