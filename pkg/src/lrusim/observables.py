"""Observable extraction and exponential decay-time fitting.

Decay times are extracted from ensemble time series by single-exponential
fits: the array leakage population gives T_star (window opened after the
transport plateau), the coding-site excitation gives T1, and the envelope
of the coding-site coherence gives T2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

#: Below this floor the log-space linear fit gives way to nonlinear least squares.
LOG_FIT_FLOOR = 1e-6

MIN_FIT_POINTS = 10


class FitError(Exception):
    """Exponential fit could not be performed on the given window."""


@dataclass(frozen=True)
class FitResult:
    """Outcome of a single-exponential fit A exp(-t/tau)."""

    decay_time: float
    amplitude: float
    fit_window: tuple[float, float]
    rms_residual: float
    converged: bool

    def __post_init__(self):
        if self.converged and not self.decay_time > 0:
            raise ValueError("converged fit must carry a positive decay time")


def leakage_population(state_or_density, local_dim: int = 3, sites="all") -> float:
    """Expectation of sum_l n_l (n_l - 1)/2, or of the site-1 term only.

    Accepts a state vector (1-D), a density matrix (2-D) or a StateVector.
    """
    amp = getattr(state_or_density, "amplitudes", state_or_density)
    arr = np.asarray(amp)
    dim = arr.shape[0]
    length = round(math.log(dim, local_dim))
    if local_dim**length != dim:
        raise ValueError("dimension is not a power of the local dimension")
    n = np.arange(local_dim, dtype=float)
    local_leak = n * (n - 1.0) / 2.0
    site_list = range(1, length + 1) if sites == "all" else sorted(sites)
    if arr.ndim == 1:
        probs = np.abs(arr) ** 2
    else:
        probs = np.diagonal(arr).real
    shaped = probs.reshape([local_dim] * length)
    total = 0.0
    for site in site_list:
        axes = tuple(ax for ax in range(length) if ax != site - 1)
        marginal = shaped.sum(axis=axes)
        total += float(marginal @ local_leak)
    return total


def site_occupations(state_or_density, local_dim: int = 3) -> np.ndarray:
    """Per-site expectation of the number operator."""
    amp = getattr(state_or_density, "amplitudes", state_or_density)
    arr = np.asarray(amp)
    dim = arr.shape[0]
    length = round(math.log(dim, local_dim))
    n = np.arange(local_dim, dtype=float)
    probs = np.abs(arr) ** 2 if arr.ndim == 1 else np.diagonal(arr).real
    shaped = probs.reshape([local_dim] * length)
    out = np.empty(length)
    for site in range(length):
        axes = tuple(ax for ax in range(length) if ax != site)
        out[site] = shaped.sum(axis=axes) @ n
    return out


def site1_coherence(state_or_density, local_dim: int = 3) -> complex:
    """Matrix element <0|rho_1|1> of the site-1 reduced density matrix.

    Restricted to the qubit block: the n = 2 population never enters.
    """
    amp = getattr(state_or_density, "amplitudes", state_or_density)
    arr = np.asarray(amp)
    dim = arr.shape[0]
    rest = dim // local_dim
    if arr.ndim == 1:
        shaped = arr.reshape(local_dim, rest)
        return complex(shaped[0] @ shaped[1].conj())
    shaped = arr.reshape(local_dim, rest, local_dim, rest)
    return complex(np.trace(shaped[0, :, 1, :]))


def coherence_envelope(series) -> np.ndarray:
    """Envelope of the sigma_x oscillations from the complex coherence.

    <sigma_x> = 2 Re <0|rho_1|1> oscillates at the qubit frequency; its
    envelope is twice the coherence modulus.
    """
    return 2.0 * np.abs(np.asarray(series, dtype=complex))


def propagation_time(hopping: float, anharmonicity: float) -> float:
    """Single-hop transport time of a leakage pair, pi U / (4 J^2)."""
    if hopping <= 0 or anharmonicity <= 0:
        raise ValueError("need positive hopping and anharmonicity")
    return math.pi * anharmonicity / (4.0 * hopping**2)


def fit_exponential(times, values, t_start: float = 0.0,
                    t_end: float | None = None) -> FitResult:
    """Least-squares fit of A exp(-t/tau) on [t_start, t_end].

    Fits in log space (linear least squares) when every sample in the window
    exceeds LOG_FIT_FLOOR, otherwise falls back to nonlinear least squares.
    Non-positive data or a degenerate window yield converged = False.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape:
        raise ValueError("times and values must have the same shape")
    t_end = float(times[-1]) if t_end is None else t_end
    mask = (times >= t_start) & (times <= t_end)
    t_win = times[mask]
    y_win = values[mask]
    window = (float(t_start), float(t_end))
    if t_win.size < MIN_FIT_POINTS:
        return FitResult(math.nan, math.nan, window, math.nan, False)

    if np.all(y_win > LOG_FIT_FLOOR):
        slope, intercept = np.polyfit(t_win, np.log(y_win), 1)
        if slope >= 0:
            return FitResult(math.nan, math.nan, window, _rms(y_win, y_win * 0), False)
        tau = -1.0 / slope
        amp = math.exp(intercept)
        model = amp * np.exp(-t_win / tau)
        return FitResult(tau, amp, window, _rms(y_win, model), True)

    if np.all(y_win <= 0):
        return FitResult(math.nan, math.nan, window, math.nan, False)
    scale = float(np.abs(y_win).max())
    span = max(t_win[-1] - t_win[0], 1e-12)
    try:
        amp0 = max(float(y_win[0]) / scale, 1e-6)
        popt, _ = curve_fit(
            lambda t, a, tau: a * np.exp(-t / tau),
            t_win, y_win / scale, p0=(amp0, span / 2.0),
            bounds=((0.0, 1e-12 * span), (np.inf, np.inf)), maxfev=10000,
        )
    except (RuntimeError, ValueError):
        return FitResult(math.nan, math.nan, window, math.nan, False)
    amp, tau = float(popt[0]) * scale, float(popt[1])
    model = amp * np.exp(-t_win / tau)
    return FitResult(tau, amp, window, _rms(y_win, model), True)


def _rms(data: np.ndarray, model: np.ndarray) -> float:
    return float(np.sqrt(np.mean((data - model) ** 2)))


def leakage_fit_start(length: int, hopping: float, anharmonicity: float) -> float:
    """Default fit-window opening for leakage series: the transport plateau
    (L - 1) times the single-hop time."""
    return (length - 1) * propagation_time(hopping, anharmonicity)
