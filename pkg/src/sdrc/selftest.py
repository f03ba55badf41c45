"""Quick oracle checks runnable from the CLI (`sdrc selftest`).

Each check recomputes an expected value from an independent closed form or
brute-force path and compares against the library implementation.
"""

from __future__ import annotations

import numpy as np

from .nodes import (
    DiodeParams,
    FilterSpec,
    design_bandpass,
    envelope_diode,
    envelope_rms,
    rc_lowpass,
)
from .readout import train_ridge
from .reservoir import delay_line_reference
from .signals import PulseParams, SampledSignal, modulate_pulse_train, power_spectrum_linear
from .tasks import gen_narma2, gen_parity, narma2_fixed_point

_FS = 12.5e9


def check_pulse_flat_top():
    params = PulseParams(5e-9, 0.375e-9, 0.375e-9)
    sig = modulate_pulse_train([0.7], params, 16e9)
    t = 5e-9 + params.ramp + params.flat_top / 2
    value = sig.samples[round(t * 16e9)]
    assert abs(value - 0.7) < 1e-12, f"flat top {value} != 0.7"


def check_parseval():
    rng = np.random.default_rng(7)
    sig = SampledSignal(rng.standard_normal(4096), _FS)
    _, power = power_spectrum_linear(sig)
    ms = np.mean(sig.samples**2)
    assert abs(power.sum() - ms) < 1e-6 * ms, "Parseval identity violated"


def check_bandpass_response():
    from scipy.signal import sosfreqz

    for fc in (0.5e9, 2.0e9, 5.0e9):
        bp = design_bandpass(FilterSpec(fc, 0.2e9, 2), _FS)
        pts = np.array([fc, fc - 0.1e9, fc + 0.1e9])
        _, h = sosfreqz(bp.sos, worN=2 * np.pi * pts / _FS)
        db = 20 * np.log10(np.abs(h))
        assert abs(db[0]) < 0.1, f"center response {db[0]:.3f} dB at {fc:g}"
        assert abs(db[1] + 3.0103) < 0.3 and abs(db[2] + 3.0103) < 0.3, (
            f"band edges {db[1]:.3f}/{db[2]:.3f} dB at {fc:g}"
        )


def check_envelopes():
    fs, f0, amp = _FS, 0.5e9, 0.8  # 25 samples per period
    t = np.arange(int(fs * 100e-9)) / fs
    sine = SampledSignal(amp * np.sin(2 * np.pi * f0 * t), fs)
    rms = envelope_rms(sine, 10e-9, 10)  # 5 periods per symbol
    assert np.all(np.abs(rms - amp / np.sqrt(2)) < 0.01 * amp), "RMS envelope off"
    mean = envelope_diode(sine, 10e-9, 10, DiodeParams(0.0, "ideal"))
    assert np.all(np.abs(mean - amp / np.pi) < 0.01 * amp), "diode mean off"


def check_rc_step():
    fs, rc = _FS, 2e-9
    step = np.ones(int(fs * 20e-9))
    y = rc_lowpass(step, rc, fs)
    t = (np.arange(y.size) + 1) / fs
    assert np.max(np.abs(y - (1 - np.exp(-t / rc)))) < 1e-3, "RC step response off"


def check_ridge_normal_equations():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((20, 5))
    y = rng.standard_normal((20, 1))
    lam = 0.1
    model = train_ridge(x, y, lam, standardize=False, fit_bias=False)
    expected = np.linalg.solve(x.T @ x + lam * np.eye(5), x.T @ y)
    assert np.max(np.abs(model.weights - expected)) < 1e-8, "ridge != normal equations"


def check_parity_targets():
    task = gen_parity(2000, 5, seed=11)
    u = task.inputs.astype(int)
    for k in (1, 3, 5):
        brute = np.array([
            sum(u[max(0, m - k + 1): m + 1]) % 2 for m in range(len(u))
        ])
        assert np.array_equal(task.targets[:, k - 1], brute), f"parity K={k} mismatch"


def check_narma2_fixed_point():
    y_star = narma2_fixed_point()
    y = 0.0, 0.0
    for _ in range(200):
        y = y[1], 0.4 * y[1] + 0.4 * y[1] * y[0] + 0.1
    assert abs(y[1] - y_star) < 1e-6, "zero-input trajectory misses fixed point"
    assert abs(y_star - 0.19098) < 1e-5


def check_delay_line():
    rng = np.random.default_rng(5)
    u = rng.standard_normal(50)
    m = delay_line_reference(u, 4)
    for n in range(50):
        for j in range(4):
            expect = u[n - j] if n - j >= 0 else 0.0
            assert m.values[n, j] == expect, "delay line mismatch"


CHECKS = [
    ("pulse flat top", check_pulse_flat_top),
    ("power spectrum Parseval", check_parseval),
    ("bandpass center/edges", check_bandpass_response),
    ("envelope RMS and diode mean", check_envelopes),
    ("RC step response", check_rc_step),
    ("ridge vs normal equations", check_ridge_normal_equations),
    ("parity popcount targets", check_parity_targets),
    ("NARMA-2 fixed point", check_narma2_fixed_point),
    ("delay-line reference", check_delay_line),
]
