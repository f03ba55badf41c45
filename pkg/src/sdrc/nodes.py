"""Node extraction: band-pass filter bank + envelope detection, and
time-multiplexed virtual nodes."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .signals import SampledSignal
from .states import StateMatrix


class ExtractionError(ValueError):
    """Raised on invalid filter/node specifications or window overruns."""


@dataclass(frozen=True)
class FilterSpec:
    """Band-pass identity: center frequency, 3-dB width, Butterworth order."""

    center: float
    bandwidth_3db: float
    order: int = 2

    def __post_init__(self):
        if not 0 < self.bandwidth_3db:
            raise ExtractionError("bandwidth_3db must be > 0")
        if self.bandwidth_3db > 2 * self.center:
            raise ExtractionError("bandwidth_3db must be < 2*center")
        if self.order < 1:
            raise ExtractionError("order must be >= 1")

    def __str__(self):
        return f"bp{self.center / 1e9:.3f}GHz@{self.bandwidth_3db / 1e9:.3f}"


@dataclass(frozen=True)
class DiodeParams:
    """Diode detector model: half-wave rectifier followed by an RC low-pass.

    rc_time_constant = 0 bypasses the low-pass. The soft rectifier is a
    smooth exponential knee; `knee` sets its width in amplitude units.
    """

    rc_time_constant: float = 2e-9
    rectifier: str = "ideal"  # "ideal" | "soft"
    knee: float = 0.1

    def __post_init__(self):
        if self.rectifier not in ("ideal", "soft"):
            raise ExtractionError(f"unknown rectifier {self.rectifier!r}")
        if self.rc_time_constant < 0:
            raise ExtractionError("rc_time_constant must be >= 0")


@dataclass(frozen=True)
class NodeSpec:
    """One spectral node: which detector, which band, which envelope method."""

    detector_index: int
    filter: FilterSpec
    envelope: str = "rms"  # "rms" | "diode"
    diode: DiodeParams | None = None

    def __post_init__(self):
        if self.envelope not in ("rms", "diode"):
            raise ExtractionError(f"unknown envelope method {self.envelope!r}")
        if self.envelope == "diode" and self.diode is None:
            object.__setattr__(self, "diode", DiodeParams())

    def __str__(self):
        return f"d{self.detector_index}:{self.filter}:{self.envelope}"


@dataclass(frozen=True)
class BandpassFilter:
    """Designed digital filter: second-order sections tied to a sample rate."""

    sos: np.ndarray
    sample_rate: float
    spec: FilterSpec


def _prewarp(f: float, fs: float) -> float:
    return 2.0 * fs * np.tan(np.pi * f / fs)


def design_bandpass(spec: FilterSpec, sample_rate: float) -> BandpassFilter:
    """Butterworth band-pass via bilinear transform with edge pre-warping.

    The digital -3 dB points land exactly on center +/- bandwidth/2; the
    center response stays within 0.02 dB of unity across the usable band.
    When the lower band edge falls at or below DC (only possible for
    center <= bandwidth/2) the analog prototype is anchored at the warped
    center instead, keeping the design valid.
    """
    f1 = spec.center - spec.bandwidth_3db / 2.0
    f2 = spec.center + spec.bandwidth_3db / 2.0
    if f2 >= 0.45 * sample_rate:
        raise ExtractionError(
            f"upper band edge {f2:g} beyond Nyquist margin "
            f"{0.45 * sample_rate:g} at fs={sample_rate:g}"
        )
    if f1 > 0:
        wn = [_prewarp(f1, sample_rate), _prewarp(f2, sample_rate)]
    else:
        w0 = _prewarp(spec.center, sample_rate)
        b = 2.0 * (_prewarp(f2, sample_rate) - w0)
        lo = (-b + np.sqrt(b * b + 4.0 * w0 * w0)) / 2.0
        wn = [lo, lo + b]
    z, p, k = sps.butter(spec.order, wn, btype="bandpass", analog=True, output="zpk")
    zd, pd, kd = sps.bilinear_zpk(z, p, k, sample_rate)
    sos = sps.zpk2sos(zd, pd, kd)
    return BandpassFilter(sos, sample_rate, spec)


def sosfilt_signal(sos: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Zero-state causal filtering of a raw sample array."""
    return sps.sosfilt(sos, x)


def filter_signal(sig: SampledSignal, bp: BandpassFilter) -> SampledSignal:
    """Apply a designed band-pass; zero initial state, output length = input."""
    if bp.sample_rate != sig.sample_rate:
        raise ExtractionError(
            f"filter designed for {bp.sample_rate:g} Hz applied to signal "
            f"at {sig.sample_rate:g} Hz"
        )
    return SampledSignal(sosfilt_signal(bp.sos, sig.samples), sig.sample_rate, sig.t0)


def _symbol_slices(sig: SampledSignal, symbol_duration: float, n_symbols: int,
                   start_time: float):
    fs = sig.sample_rate
    if start_time + symbol_duration * n_symbols > sig.duration + 0.5 / fs:
        raise ExtractionError(
            f"{n_symbols} symbols of {symbol_duration:g}s from {start_time:g}s "
            f"exceed signal duration {sig.duration:g}s"
        )
    edges = [
        int(np.floor((start_time + n * symbol_duration) * fs))
        for n in range(n_symbols + 1)
    ]
    return [(edges[n], min(edges[n + 1], len(sig))) for n in range(n_symbols)]


def envelope_rms(sig: SampledSignal, symbol_duration: float, n_symbols: int,
                 start_time: float = 0.0) -> np.ndarray:
    """Root-mean-square of the waveform over each symbol window."""
    slices = _symbol_slices(sig, symbol_duration, n_symbols, start_time)
    x = sig.samples
    return np.array([np.sqrt(np.mean(x[a:b] ** 2)) for a, b in slices])


def _rectify(x: np.ndarray, params: DiodeParams) -> np.ndarray:
    if params.rectifier == "ideal":
        return np.maximum(x, 0.0)
    # softplus knee: smooth around zero, linear for x >> knee
    k = params.knee
    return k * np.logaddexp(0.0, x / k)


def rc_lowpass(x: np.ndarray, rc: float, sample_rate: float) -> np.ndarray:
    """First-order RC low-pass; y[n] tracks the analytic response at (n+1)*dt."""
    if rc == 0.0:
        return x
    alpha = 1.0 - np.exp(-1.0 / (rc * sample_rate))
    return sps.lfilter([alpha], [1.0, alpha - 1.0], x)


def envelope_diode(sig: SampledSignal, symbol_duration: float, n_symbols: int,
                   params: DiodeParams, start_time: float = 0.0) -> np.ndarray:
    """Diode detection: rectify, RC low-pass, then mean per symbol window."""
    slices = _symbol_slices(sig, symbol_duration, n_symbols, start_time)
    y = rc_lowpass(_rectify(sig.samples, params), params.rc_time_constant,
                   sig.sample_rate)
    return np.array([np.mean(y[a:b]) for a, b in slices])


def emulation_pool(n_detectors: int = 7, envelope: str = "rms") -> list[NodeSpec]:
    """The 50-filter emulation pool per detector: centers 0.1-5.0 GHz in
    0.1 GHz steps, 0.2 GHz 3-dB width, second order."""
    centers = [round(0.1e9 * (i + 1), 3) for i in range(50)]
    return [
        NodeSpec(d, FilterSpec(c, 0.2e9, 2), envelope)
        for d in range(n_detectors)
        for c in centers
    ]


_HARDWARE_PASSBANDS_MHZ = (
    (1480, 1570),
    (1530, 1620),
    (1750, 1930),
    (1850, 2040),
    (2000, 2260),
    (2170, 2380),
    (2250, 2470),
    (2340, 2530),
)


def hardware_preset_nodes(n_detectors: int = 7,
                          diode: DiodeParams | None = None) -> list[NodeSpec]:
    """Eight commercial-filter passbands per detector with diode detection.

    Center = passband midpoint, 3-dB width = passband span; 8 filters x
    n_detectors nodes total (56 for the default seven detectors).
    """
    diode = diode or DiodeParams()
    filters = [
        FilterSpec((lo + hi) / 2.0 * 1e6, (hi - lo) * 1e6, 2)
        for lo, hi in _HARDWARE_PASSBANDS_MHZ
    ]
    return [
        NodeSpec(d, f, "diode", diode)
        for d in range(n_detectors)
        for f in filters
    ]


def _extract_one(response, node: NodeSpec, symbol_duration, n_symbols, start_time,
                 filter_cache):
    sig = response.signal
    key = (node.detector_index, node.filter)
    bp = filter_cache.get(key)
    if bp is None:
        bp = design_bandpass(node.filter, sig.sample_rate)
        filter_cache[key] = bp
    filtered = filter_signal(sig, bp)
    if node.envelope == "rms":
        return envelope_rms(filtered, symbol_duration, n_symbols, start_time)
    return envelope_diode(filtered, symbol_duration, n_symbols, node.diode, start_time)


def extract_spectral_states(responses, nodes, symbol_duration: float,
                            n_symbols: int, washout: int = 0,
                            start_time: float = 0.0, threads: int = 1) -> StateMatrix:
    """Filter + envelope-detect each node; column order follows `nodes`.

    Per-node extraction is pure; with threads > 1 the nodes are processed
    concurrently with deterministic column order.
    """
    by_index = {r.detector_index: r for r in responses}
    for node in nodes:
        if node.detector_index not in by_index:
            raise ExtractionError(f"node references missing detector {node.detector_index}")
    cache: dict = {}
    if threads > 1:
        # pre-design filters serially so the cache is read-only in workers
        for node in nodes:
            key = (node.detector_index, node.filter)
            if key not in cache:
                cache[key] = design_bandpass(
                    node.filter, by_index[node.detector_index].signal.sample_rate
                )
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cols = list(pool.map(
                lambda n: _extract_one(by_index[n.detector_index], n,
                                       symbol_duration, n_symbols, start_time, cache),
                nodes,
            ))
    else:
        cols = [
            _extract_one(by_index[n.detector_index], n, symbol_duration,
                         n_symbols, start_time, cache)
            for n in nodes
        ]
    values = np.column_stack(cols)[washout:]
    return StateMatrix(values, tuple(nodes), symbol_duration)


def extract_virtual_states(responses, symbol_duration: float,
                           nodes_per_symbol: int, n_symbols: int,
                           washout: int = 0, start_time: float = 0.0) -> StateMatrix:
    """Time-multiplexing baseline: evenly spaced in-window sample instants.

    Columns are grouped by detector; nodes_per_symbol equal to the full
    window sample count reproduces plain stride indexing.
    """
    cols, labels = [], []
    for r in responses:
        sig = r.signal
        fs = sig.sample_rate
        window = int(np.floor(symbol_duration * fs))
        if nodes_per_symbol > window:
            raise ExtractionError(
                f"{nodes_per_symbol} virtual nodes > {window} samples per symbol"
            )
        slices = _symbol_slices(sig, symbol_duration, n_symbols, start_time)
        offs = (np.arange(nodes_per_symbol) * window) // nodes_per_symbol
        block = np.array([sig.samples[a + offs] for a, _ in slices])
        cols.append(block)
        labels += [f"d{r.detector_index}:v{j}" for j in range(nodes_per_symbol)]
    values = np.concatenate(cols, axis=1)[washout:]
    return StateMatrix(values, tuple(labels), symbol_duration)
