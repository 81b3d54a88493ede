"""Post-processing of recorded traces: intensity spectra, instantaneous
frequency, RF beatnote spectra, modal extraction and relative intensity
noise.

All routines take a :class:`TraceRecord` (uniformly sampled) and return
plain arrays plus the metadata needed for self-describing output files.
Spectral density conventions:

* ``intensity_spectrum`` and ``rf_spectrum`` are one-sided windowed
  periodograms normalized as densities, so for a rectangular window
  sum(|x|^2) dt = integral(psd df) exactly (Parseval).
* ``rin_spectrum`` implements the plain finite-time definition
  |integral (P - <P>) exp(-i 2 pi f t) dt|^2 / (T <P>^2), reported in
  dB/Hz relative to the carrier.  Values follow this definition
  unscaled; the one-sided display convention is recorded in the result.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import hilbert


class TraceError(ValueError):
    """Raised for malformed or incompatible traces."""


@dataclass
class TraceRecord:
    """Uniformly sampled time series with acquisition metadata."""

    data: np.ndarray
    dt: float
    t0: float = 0.0
    quantity: str = ""
    probe: str = ""
    unit: str = ""

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 1 or self.data.size < 2:
            raise TraceError("trace needs a 1D array with at least 2 samples")
        if self.dt <= 0:
            raise TraceError("sample interval must be positive")

    @property
    def duration(self) -> float:
        return self.data.size * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.data.size) * self.dt


@dataclass
class SpectrumResult:
    frequency: np.ndarray
    value: np.ndarray
    resolution_bandwidth: float
    window: str
    sidedness: str
    unit: str = ""


_WINDOWS = {
    "rect": np.ones,
    "hann": np.hanning,
    "hamming": np.hamming,
    "blackman": np.blackman,
}


def _periodogram(x: np.ndarray, dt: float, window: str):
    """One-sided energy-density periodogram.

    Normalized so that for a rectangular window
    integral(psd df) = sum(|x|^2) dt exactly (Parseval)."""
    try:
        w = _WINDOWS[window](x.size)
    except KeyError:
        raise TraceError(f"unknown window {window!r}") from None
    n = x.size
    xw = x * w
    spec = np.fft.rfft(xw)
    u = np.mean(w**2)
    psd = (dt * dt / u) * np.abs(spec) ** 2
    psd[1:] *= 2.0
    if n % 2 == 0:
        psd[-1] *= 0.5
    freqs = np.fft.rfftfreq(n, dt)
    return freqs, psd


def intensity_spectrum(trace: TraceRecord, window: str = "hann") -> SpectrumResult:
    """Windowed periodogram of a field trace (optical intensity spectrum)."""
    freqs, psd = _periodogram(np.asarray(trace.data, dtype=float), trace.dt, window)
    return SpectrumResult(frequency=freqs, value=psd,
                          resolution_bandwidth=1.0 / trace.duration,
                          window=window, sidedness="one-sided",
                          unit=f"({trace.unit})^2/Hz" if trace.unit else "")


def rf_spectrum(power: TraceRecord, window: str = "hann") -> SpectrumResult:
    """Periodogram of the mean-subtracted detected power, in dB.

    The resolution bandwidth is the reciprocal record length."""
    x = np.asarray(power.data, dtype=float)
    freqs, psd = _periodogram(x - x.mean(), power.dt, window)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(psd)
    return SpectrumResult(frequency=freqs, value=db,
                          resolution_bandwidth=1.0 / power.duration,
                          window=window, sidedness="one-sided", unit="dB/Hz")


def instantaneous_frequency(trace: TraceRecord,
                            min_envelope: float = 1e-3):
    """Instantaneous frequency from the analytic-signal phase.

    Returns ``(times, frequency, valid)``; samples whose envelope falls
    below ``min_envelope`` times the peak are flagged invalid, not
    interpolated.  The carrier must be oversampled (>= 4 samples/period).
    """
    x = np.asarray(trace.data, dtype=float)
    analytic = hilbert(x)
    envelope = np.abs(analytic)
    phase = np.unwrap(np.angle(analytic))
    freq = np.gradient(phase, trace.dt) / (2.0 * np.pi)
    valid = envelope >= min_envelope * envelope.max()
    return trace.times, freq, valid


def _band_response(freqs: np.ndarray, f_lo: float, f_hi: float,
                   transition: float) -> np.ndarray:
    """Flat-top amplitude response with quarter-cosine edges.

    The response crosses 1/sqrt(2) (-3.01 dB) exactly at f_lo and f_hi
    and reaches zero half a transition width outside them."""
    amp = np.zeros_like(freqs)
    lo_in, lo_out = f_lo + transition / 2, f_lo - transition / 2
    hi_in, hi_out = f_hi - transition / 2, f_hi + transition / 2
    amp[(freqs >= lo_in) & (freqs <= hi_in)] = 1.0
    rising = (freqs > lo_out) & (freqs < lo_in)
    amp[rising] = np.cos(np.pi / 2 * (lo_in - freqs[rising]) / transition)
    falling = (freqs > hi_in) & (freqs < hi_out)
    amp[falling] = np.cos(np.pi / 2 * (freqs[falling] - hi_in) / transition)
    return amp


def bandpass_extract(trace: TraceRecord, f_center: float, bandwidth_3db: float,
                     transition_frac: float = 0.25) -> TraceRecord:
    """Complex mode envelope: zero-phase band filter plus down-conversion.

    The filter is applied in the frequency domain (linear phase, no group
    delay distortion); the analytic signal is shifted to baseband by
    exp(-i 2 pi f_center t).
    """
    x = np.asarray(trace.data, dtype=float)
    n = x.size
    nyquist = 0.5 / trace.dt
    f_lo = f_center - bandwidth_3db / 2
    f_hi = f_center + bandwidth_3db / 2
    transition = transition_frac * bandwidth_3db
    if f_lo - transition / 2 <= 0 or f_hi + transition / 2 >= nyquist:
        raise TraceError("filter band does not fit below the Nyquist frequency")
    freqs = np.fft.fftfreq(n, trace.dt)
    response = _band_response(freqs, f_lo, f_hi, transition)
    analytic_band = np.fft.ifft(2.0 * response * np.fft.fft(x))
    envelope = analytic_band * np.exp(-2j * np.pi * f_center * trace.times)
    return replace(trace, data=envelope,
                   quantity=f"{trace.quantity}_envelope@{f_center:.6g}Hz")


def rin_spectrum(power: TraceRecord) -> SpectrumResult:
    """Relative intensity noise of a power trace, in dB/Hz (carrier-relative).

    Finite-time definition: (1/T) |integral (P - <P>) e^(-i2pift) dt|^2
    normalized by <P>^2; invariant under P -> a*P exactly.  The DC bin is
    dropped.  One-sided display; no extra factor of 2 is applied on top
    of the printed definition (total relative variance is
    2 * integral_0^inf RIN df).
    """
    x = np.asarray(power.data, dtype=float)
    mean = x.mean()
    if mean <= 0:
        raise TraceError("RIN needs a positive mean power")
    t_total = power.duration
    spec = np.fft.rfft(x - mean) * power.dt
    rin = np.abs(spec) ** 2 / (t_total * mean**2)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(rin)
    freqs = np.fft.rfftfreq(x.size, power.dt)
    return SpectrumResult(frequency=freqs[1:], value=db[1:],
                          resolution_bandwidth=1.0 / t_total,
                          window="rect", sidedness="one-sided", unit="dB/Hz")


def power_trace(field: TraceRecord, cutoff: float,
                decimate: int = 1) -> TraceRecord:
    """Detected power from a facet field trace.

    Squares the field and low-pass filters below the optical carrier
    (flat response with a cosine edge at ``cutoff``); optionally
    decimates afterwards.  Units are field^2 (proportional to intensity).
    """
    x = np.asarray(field.data, dtype=float)
    n = x.size
    p = x * x
    freqs = np.fft.fftfreq(n, field.dt)
    transition = 0.2 * cutoff
    response = _band_response(np.abs(freqs), -cutoff, cutoff, transition)
    p_lp = np.fft.ifft(response * np.fft.fft(p)).real
    out = p_lp[::decimate] if decimate > 1 else p_lp
    return TraceRecord(data=out, dt=field.dt * decimate, t0=field.t0,
                       quantity="power", probe=field.probe,
                       unit=f"({field.unit})^2" if field.unit else "")


def mode_spacing(spectrum: SpectrumResult, f_min: float, f_max: float,
                 prominence_db: float = 25.0):
    """Median spacing of spectral peaks in [f_min, f_max] (Hz).

    Peaks are local maxima within ``prominence_db`` of the band maximum,
    refined by parabolic interpolation.  Returns (spacing, peak_list)."""
    sel = (spectrum.frequency >= f_min) & (spectrum.frequency <= f_max)
    f = spectrum.frequency[sel]
    v = spectrum.value[sel]
    if f.size < 5:
        raise TraceError("band contains too few bins")
    with np.errstate(divide="ignore"):
        db = v if spectrum.unit.startswith("dB") else 10 * np.log10(v)
    floor = db.max() - prominence_db
    peaks = []
    for k in range(1, f.size - 1):
        if db[k] >= floor and db[k] > db[k - 1] and db[k] >= db[k + 1]:
            denom = db[k - 1] - 2 * db[k] + db[k + 1]
            shift = 0.5 * (db[k - 1] - db[k + 1]) / denom if denom != 0 else 0.0
            peaks.append(f[k] + shift * (f[1] - f[0]))
    if len(peaks) < 2:
        raise TraceError("fewer than two peaks found in the band")
    spacings = np.diff(peaks)
    return float(np.median(spacings)), peaks
