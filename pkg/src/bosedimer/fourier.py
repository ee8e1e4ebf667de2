"""Spectral peak detection for uniformly sampled time series."""
from dataclasses import dataclass

import numpy as np

from .errors import SeriesTooShortError


@dataclass(frozen=True)
class FourierPeaks:
    """Spectral peaks sorted by descending power.

    Frequencies are angular (rad per unit time); ``resolution`` is the bin
    spacing ``2 pi / window``.
    """

    frequencies: np.ndarray
    powers: np.ndarray
    resolution: float

    def __len__(self):
        return len(self.frequencies)

    @property
    def relative_powers(self):
        if len(self.powers) == 0:
            return self.powers
        return self.powers / self.powers[0]

    @property
    def dominant(self):
        return float(self.frequencies[0]) if len(self) else float("nan")

    def power_near(self, frequency, tol=None):
        """Power of the strongest peak within ``tol`` of ``frequency`` (0 if none)."""
        tol = 2.0 * self.resolution if tol is None else tol
        hit = np.abs(self.frequencies - frequency) <= tol
        return float(self.powers[hit].max()) if hit.any() else 0.0


def power_spectrum(values, dt):
    """Hann-windowed one-sided power spectrum with the mean removed."""
    values = np.asarray(values, dtype=float)
    window = np.hanning(len(values))
    spectrum = np.abs(np.fft.rfft((values - values.mean()) * window)) ** 2
    omega = 2.0 * np.pi * np.fft.rfftfreq(len(values), dt)
    return omega, spectrum


def fourier_peaks(series, dt, transient_fraction=0.5, floor=1e-4, neighborhood=5,
                  lowest_frequency=None, max_peaks=32):
    """Detect peaks of the windowed FFT of ``series`` sampled every ``dt``.

    A bin counts as a peak when it is the maximum over ``neighborhood`` bins on
    either side (this rejects Hann side lobes) and its power exceeds ``floor``
    times the strongest peak.  Peak positions and heights are refined with a
    parabola through the log-power of the three bins around the maximum.
    """
    series = np.asarray(series, dtype=float)
    start = int(len(series) * transient_fraction)
    values = series[start:]
    n = len(values)
    if n < 16:
        raise SeriesTooShortError(f"need at least 16 samples after the transient, got {n}")
    span = n * dt
    if lowest_frequency is not None and lowest_frequency > 0:
        needed = 8 * 2.0 * np.pi / lowest_frequency
        if span < needed:
            raise SeriesTooShortError(
                f"window {span:g} shorter than 8 periods ({needed:g}) of the lowest frequency")
    omega, power = power_spectrum(values, dt)
    d_omega = omega[1] - omega[0]

    candidates = []
    # the lowest bins carry leakage from the removed mean, not oscillations
    for k in range(3, len(power) - 1):
        lo, hi = max(1, k - neighborhood), min(len(power), k + neighborhood + 1)
        if power[k] > 0 and power[k] >= power[lo:hi].max():
            candidates.append(k)
    if not candidates:
        return FourierPeaks(np.empty(0), np.empty(0), d_omega)

    freqs, heights = [], []
    for k in candidates:
        a, b, c = np.log(power[k - 1:k + 2] + 1e-300)
        denom = a - 2.0 * b + c
        delta = 0.5 * (a - c) / denom if denom < 0 else 0.0
        delta = float(np.clip(delta, -0.5, 0.5))
        freqs.append((k + delta) * d_omega)
        heights.append(np.exp(b - 0.25 * (a - c) * delta))
    freqs, heights = np.array(freqs), np.array(heights)
    keep = heights >= floor * heights.max()
    freqs, heights = freqs[keep], heights[keep]
    order = np.argsort(-heights)[:max_peaks]
    return FourierPeaks(freqs[order], heights[order], d_omega)


def harmonically_related(f1, f2, max_denominator=8, tol=1e-3):
    """True when ``f1 / f2`` lies within ``tol`` of some p/q with q <= max_denominator."""
    ratio = f1 / f2
    for q in range(1, max_denominator + 1):
        if abs(ratio - round(ratio * q) / q) <= tol:
            return True
    return False


def harmonic_orders(peaks, fundamental, tol=1e-2):
    """Integer harmonic index of each peak, or ``None`` when a peak is off-harmonic."""
    orders = []
    for f in peaks.frequencies:
        k = f / fundamental
        nearest = int(round(k))
        orders.append(nearest if nearest >= 1 and abs(k - nearest) <= tol else None)
    return orders
