"""Sampled waveforms, trapezoidal pulse modulation, and spectral utilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import i0


class SignalError(ValueError):
    """Raised when a signal operation receives invalid input."""


@dataclass(frozen=True)
class SampledSignal:
    """Uniformly sampled real-valued waveform.

    Attributes:
        samples: amplitude values (arbitrary scale), float64.
        sample_rate: sampling rate in Hz, > 0.
        t0: time of the first sample in seconds.
    """

    samples: np.ndarray
    sample_rate: float
    t0: float = 0.0

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise SignalError(f"sample_rate must be > 0, got {self.sample_rate}")
        arr = np.ascontiguousarray(self.samples, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise SignalError("samples must be a non-empty 1-D array")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def times(self) -> np.ndarray:
        """Sample instants in seconds."""
        return self.t0 + np.arange(self.samples.size) / self.sample_rate


@dataclass(frozen=True)
class PulseParams:
    """Trapezoidal pulse timing: per-symbol slot, flat top, and rise/fall ramp."""

    symbol_duration: float
    flat_top: float
    ramp: float
    amplitude_scale: float = 1.0

    def __post_init__(self):
        if min(self.symbol_duration, self.flat_top, self.ramp) <= 0:
            raise SignalError("all pulse durations must be > 0")
        if 2 * self.ramp + self.flat_top > self.symbol_duration:
            raise SignalError(
                f"pulse overlaps next symbol: 2*{self.ramp} + {self.flat_top} "
                f"> {self.symbol_duration}"
            )

    @property
    def pulse_width(self) -> float:
        return 2 * self.ramp + self.flat_top


def pulse_shape(t, params: PulseParams) -> np.ndarray:
    """Evaluate the unit trapezoid: linear ramp up, flat top, linear ramp down."""
    t = np.asarray(t, dtype=np.float64)
    ramp, top = params.ramp, params.flat_top
    out = np.zeros_like(t)
    rising = (t >= 0) & (t < ramp)
    out[rising] = t[rising] / ramp
    out[(t >= ramp) & (t < ramp + top)] = 1.0
    falling = (t >= ramp + top) & (t < 2 * ramp + top)
    out[falling] = 1.0 - (t[falling] - ramp - top) / ramp
    return out


def modulate_pulse_train(u, params: PulseParams, sample_rate: float) -> SampledSignal:
    """Modulate a discrete sequence into consecutive trapezoidal pulses.

    Symbol n (1-based) occupies [n*T0, (n+1)*T0); the pulse shape is evaluated
    analytically at sample instants. Total duration covers (len(u)+1)*T0.
    """
    if sample_rate <= 0:
        raise SignalError("sample_rate must be > 0")
    if sample_rate < 4.0 / params.ramp:
        raise SignalError(
            f"sample_rate {sample_rate:g} too low to resolve ramp "
            f"{params.ramp:g} (need >= {4.0 / params.ramp:g})"
        )
    u = np.asarray(u, dtype=np.float64)
    t0_sym = params.symbol_duration
    n_samples = int(np.ceil((len(u) + 1) * t0_sym * sample_rate))
    out = np.zeros(n_samples)
    t = np.arange(n_samples) / sample_rate
    width = params.pulse_width
    for n, value in enumerate(u, start=1):
        if value == 0.0:
            continue
        lo = int(np.floor(n * t0_sym * sample_rate))
        hi = min(int(np.ceil((n * t0_sym + width) * sample_rate)) + 1, n_samples)
        seg = t[lo:hi] - n * t0_sym
        out[lo:hi] += value * pulse_shape(seg, params)
    out *= params.amplitude_scale
    return SampledSignal(out, sample_rate)


DB_FLOOR = -300.0


def power_spectrum_linear(sig: SampledSignal):
    """One-sided linear power spectrum whose bins sum to the mean square.

    Returns (frequencies, power) with frequencies spanning [0, sample_rate/2].
    """
    if len(sig) < 2:
        raise SignalError("power_spectrum requires at least 2 samples")
    n = len(sig)
    spec = np.fft.rfft(sig.samples)
    power = np.abs(spec) ** 2 / n**2
    # fold negative frequencies into the positive bins (except DC / Nyquist)
    if n % 2 == 0:
        power[1:-1] *= 2.0
    else:
        power[1:] *= 2.0
    freqs = np.fft.rfftfreq(n, d=1.0 / sig.sample_rate)
    return freqs, power


def power_spectrum(sig: SampledSignal, window: str = "rect"):
    """Power spectrum in dB relative to the maximum bin.

    A rectangular window is the default for deterministic bin math; pass
    window="hann" for reduced leakage. Power is floored at -300 dB so a zero
    signal yields a defined, NaN-free result.
    """
    if window not in ("rect", "hann"):
        raise SignalError(f"unknown window {window!r}")
    if window == "hann":
        w = np.hanning(len(sig))
        sig = SampledSignal(sig.samples * w, sig.sample_rate, sig.t0)
    freqs, power = power_spectrum_linear(sig)
    peak = power.max()
    if peak <= 0.0:
        return freqs, np.full_like(power, DB_FLOOR)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(power / peak)
    return freqs, np.maximum(db, DB_FLOOR)


def resample(sig: SampledSignal, new_rate: float, half_width: int = 48) -> SampledSignal:
    """Band-limited resampling by windowed-sinc interpolation.

    The interpolation kernel cuts off at 0.45*min(old, new) rate, so signals
    band-limited below 0.4*min(rate, new_rate) are preserved. Identity rates
    return the input samples bit-for-bit.
    """
    if new_rate <= 0:
        raise SignalError("new_rate must be > 0")
    if new_rate == sig.sample_rate:
        return sig
    fs_in = sig.sample_rate
    n_out = max(int(round(len(sig) * new_rate / fs_in)), 1)
    # output instants expressed in input-sample units
    pos = np.arange(n_out) * (fs_in / new_rate)
    base = np.floor(pos).astype(np.int64)
    x = np.pad(sig.samples, half_width + 1, mode="edge")
    # gather a (n_out, 2*half_width) patch of input samples around each output
    offsets = np.arange(-half_width + 1, half_width + 1)
    idx = base[:, None] + offsets[None, :] + half_width + 1
    frac = (pos - base)[:, None]
    u = offsets[None, :] - frac  # input-sample offsets from the output instant
    cutoff = 0.45 * min(fs_in, new_rate) / fs_in  # cycles per input sample
    kernel = 2 * cutoff * np.sinc(2 * cutoff * u)
    beta = 10.0
    inside = np.abs(u) < half_width
    taper = np.zeros_like(u)
    taper[inside] = i0(beta * np.sqrt(1.0 - (u[inside] / half_width) ** 2))
    kernel *= taper / i0(beta)
    kernel /= kernel.sum(axis=1, keepdims=True)  # exact DC gain of 1
    out = np.einsum("ij,ij->i", x[idx], kernel)
    return SampledSignal(out, new_rate, sig.t0)
