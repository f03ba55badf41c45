"""End-to-end acceptance suite.

One test class per acceptance criterion; each docstring states the assertion
and its tolerance. Runtime budgets are asserted with wall-clock margins well
under the allowed limits so the suite stays honest about cost.
"""

import json
import time
from dataclasses import replace
from math import comb

import numpy as np
import pytest
import scipy.signal as sps
from click.testing import CliRunner

from sdrc.cli import cli
from sdrc.nodes import (
    DiodeParams,
    design_bandpass,
    emulation_pool,
    envelope_diode,
    envelope_rms,
    rc_lowpass,
)
from sdrc.corpus import synthetic_corpus
from sdrc.pipeline import (
    make_evaluator,
    reservoir_states,
    run_speech_protocol,
    spectral_pool_nodes,
    speech_states,
)
from sdrc.nodes import hardware_preset_nodes
from sdrc.readout import SplitSpec, predict, train_ridge
from sdrc.reservoir import ReservoirConfig, delay_line_reference, simulate
from sdrc.search import occurrence_histogram, run_selection
from sdrc.signals import PulseParams, SampledSignal, power_spectrum
from sdrc.tasks import (
    capacity,
    gen_classification_stream,
    gen_parity,
    narma2_fixed_point,
    narma2_trajectory,
)

SAMPLE_RATE = 12.5e9


class TestCriterion1FilterFidelity:
    """Every filter in the 50-node pool: |H| = 0 dB +/- 0.1 dB at center and
    -3 dB +/- 0.3 dB at the +/- 0.1 GHz band edges, checked against both the
    designed digital response and the analytic analog Butterworth magnitude.
    Budget: < 10 s."""

    def test_pool_magnitudes(self):
        start = time.monotonic()
        pool = emulation_pool(n_detectors=1)
        assert len(pool) == 50
        for node in pool:
            spec = node.filter
            bp = design_bandpass(spec, SAMPLE_RATE)
            f1 = spec.center - spec.bandwidth_3db / 2.0
            f2 = spec.center + spec.bandwidth_3db / 2.0
            # the lowest filter's lower band edge sits at DC, where a
            # band-pass cannot place a -3 dB point; its design is anchored at
            # the center instead, so only its center gain is checked
            probe = [spec.center] + ([f1, f2] if f1 > 0 else [])
            _, h = sps.sosfreqz(bp.sos, worN=np.array(probe), fs=SAMPLE_RATE)
            db = 20 * np.log10(np.abs(h))
            assert abs(db[0]) <= 0.1, f"{spec}: center {db[0]:.3f} dB"
            for edge_db in db[1:]:
                assert abs(edge_db + 3.0) <= 0.3, f"{spec}: edge {edge_db:.3f} dB"
        assert time.monotonic() - start < 10.0

    def test_digital_matches_analytic_butterworth(self):
        """Independent oracle: on the bilinear frequency map the digital
        magnitude must equal the analog prototype's magnitude (tol 1e-6 dB)."""
        for center in (0.5e9, 2.0e9, 4.9e9):
            spec = emulation_pool(1)[0].filter
            spec = replace(spec, center=center)
            bp = design_bandpass(spec, SAMPLE_RATE)
            f1 = spec.center - spec.bandwidth_3db / 2.0
            f2 = spec.center + spec.bandwidth_3db / 2.0
            warp = lambda f: 2 * SAMPLE_RATE * np.tan(np.pi * f / SAMPLE_RATE)
            z, p, k = sps.butter(spec.order, [warp(f1), warp(f2)],
                                 btype="bandpass", analog=True, output="zpk")
            probes = np.linspace(f1, f2, 21)
            _, h_dig = sps.sosfreqz(bp.sos, worN=probes, fs=SAMPLE_RATE)
            _, h_ana = sps.freqs_zpk(z, p, k, worN=warp(probes))
            assert np.max(np.abs(20 * np.log10(np.abs(h_dig) / np.abs(h_ana)))) < 1e-6


class TestCriterion2EnvelopeOracles:
    """RMS of a full-symbol sine = A/sqrt(2) +/- 1%; half-wave rectified sine
    mean = A/pi +/- 1%; RC step response within 1e-3 of the analytic
    exponential. Budget: < 5 s."""

    def test_rms_of_sine(self):
        start = time.monotonic()
        amp, f0, fs = 0.7, 0.5e9, SAMPLE_RATE
        t = np.arange(int(fs * 1e-6)) / fs
        sig = SampledSignal(amp * np.sin(2 * np.pi * f0 * t), fs)
        vals = envelope_rms(sig, 50e-9, 19, start_time=0.0)  # whole periods
        assert np.max(np.abs(vals - amp / np.sqrt(2))) < 0.01 * amp / np.sqrt(2)
        assert time.monotonic() - start < 5.0

    def test_halfwave_mean_of_sine(self):
        amp, f0, fs = 1.3, 0.5e9, SAMPLE_RATE
        t = np.arange(int(fs * 1e-6)) / fs
        sig = SampledSignal(amp * np.sin(2 * np.pi * f0 * t), fs)
        params = DiodeParams(rc_time_constant=0.0, rectifier="ideal")
        vals = envelope_diode(sig, 50e-9, 19, params, start_time=0.0)
        assert np.max(np.abs(vals - amp / np.pi)) < 0.01 * amp / np.pi

    def test_rc_step_response(self):
        fs, rc = SAMPLE_RATE, 2e-9
        x = np.ones(2000)
        y = rc_lowpass(x, rc, fs)
        t = (np.arange(2000) + 1) / fs  # y[n] tracks the response at (n+1)dt
        expect = 1.0 - np.exp(-t / rc)
        assert np.max(np.abs(y - expect)) < 1e-3


class TestCriterion3ReadoutOracle:
    """Ridge weights match the explicit normal-equations solve within 1e-8 on
    100 random instances; the large-lambda limit collapses to the target mean.
    Budget: < 10 s."""

    def test_hundred_instances(self):
        start = time.monotonic()
        rng = np.random.default_rng(42)
        for _ in range(100):
            n, p = int(rng.integers(8, 60)), int(rng.integers(2, 10))
            x = rng.standard_normal((n, p))
            y = rng.standard_normal((n, 1))
            lam = float(10.0 ** rng.uniform(-6, 1))
            model = train_ridge(x, y, lam, standardize=False, fit_bias=False)
            expect = np.linalg.solve(x.T @ x + lam * np.eye(p), x.T @ y)
            assert np.max(np.abs(model.weights - expect)) < 1e-8
        assert time.monotonic() - start < 10.0

    def test_lambda_limits(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((50, 4))
        y = rng.standard_normal((50, 2))
        heavy = train_ridge(x, y, 1e12)
        assert np.linalg.norm(heavy.weights) < 1e-6
        assert np.allclose(predict(heavy, x), y.mean(axis=0), atol=1e-5)
        xs = rng.standard_normal((6, 6)) + np.eye(6)
        ys = rng.standard_normal((6, 2))
        exact = train_ridge(xs, ys, 0.0)  # lambda -> 0 interpolates
        assert np.max(np.abs(predict(exact, xs) - ys)) < 1e-8


class TestCriterion4TaskOracles:
    """Parity targets equal brute-force popcount windows on 1e5 symbols;
    zero-input NARMA-2 converges to the analytic fixed point ~0.19098 within
    1e-6. Budget: < 10 s."""

    def test_parity_brute_force_100k(self):
        start = time.monotonic()
        task = gen_parity(100_000, 5, seed=9)
        u = task.inputs.astype(np.int64)
        for k in range(1, 6):
            win = np.convolve(u, np.ones(k, dtype=np.int64))[: u.size]
            assert np.array_equal(task.targets[:, k - 1], win % 2)
        assert time.monotonic() - start < 10.0

    def test_narma2_fixed_point(self):
        y = narma2_trajectory(np.zeros(300))
        # independent oracle: positive root of 0.4 y^2 - 0.6 y + 0.1 = 0
        y_star = (0.6 - np.sqrt(0.36 - 0.16)) / 0.8
        assert abs(y[-1] - y_star) < 1e-6
        assert abs(y_star - 0.19098) < 1e-5
        assert narma2_fixed_point() == pytest.approx(y_star, abs=1e-12)


class TestCriterion5MixingProducts:
    """Two-tone drive at 1.8/2.1 GHz: with chi > 0 the difference/sum products
    at 0.3 and 3.9 GHz rise >= 20 dB over the chi = 0 baseline in those
    spectral bins. Budget: < 60 s."""

    def test_products_require_chi(self):
        start = time.monotonic()
        cfg = ReservoirConfig(
            bias_field=0.1873, n_modes=39, mode_spacing=100e6,
            match_tolerance=30e6, chi=0.0, em_gain=0.0,
            excitation_bandwidth=2e9,
        )
        fs, duration = 16e9, 400e-9
        t = np.arange(int(fs * duration)) / fs
        x = 0.5 * np.sin(2 * np.pi * 1.8e9 * t) + 0.5 * np.sin(2 * np.pi * 2.1e9 * t)
        drive = SampledSignal(x, fs)
        linear = simulate(drive, cfg)[0].signal
        mixed = simulate(drive, replace(cfg, chi=1e5))[0].signal
        f_lin, db_lin = power_spectrum(linear)
        _, db_mix = power_spectrum(mixed)
        for f_target in (0.3e9, 3.9e9):
            i = int(np.argmin(np.abs(f_lin - f_target)))
            assert db_mix[i] - db_lin[i] >= 20.0
        assert time.monotonic() - start < 60.0


class TestCriterion6NonlinearityNecessity:
    """Linear readout on raw K-bit windows: parity r^2 < 0.2 for K >= 2;
    quadratic/cubic product features: r^2 > 0.99 for K <= 3. 1e4 test
    symbols. Budget: < 30 s."""

    def test_linear_fails_products_succeed(self):
        start = time.monotonic()
        task = gen_parity(20_000, 3, seed=3)
        raw = delay_line_reference(task.inputs, 3).values
        cols = [raw]
        n = raw.shape[1]
        cols += [raw[:, [i]] * raw[:, [j]] for i in range(n) for j in range(i + 1, n)]
        cols += [raw[:, [0]] * raw[:, [1]] * raw[:, [2]]]
        products = np.hstack(cols)
        n_train = 10_000

        def r2(features):
            model = train_ridge(features[:n_train], task.targets[:n_train], 1e-8)
            pred = predict(model, features[n_train:])
            vals, _ = capacity(pred, task.targets[n_train:])
            return vals

        r2_linear = r2(raw)
        assert r2_linear[0] > 0.99  # K = 1 is linearly solvable
        assert np.all(r2_linear[1:] < 0.2)
        assert np.all(r2(products) > 0.99)
        assert time.monotonic() - start < 30.0


# shared setup for criteria 7 and 10: parity task on the default simulator
PULSE = PulseParams(5e-9, 0.375e-9, 0.375e-9)
SPLIT = SplitSpec(washout=50, train_fraction=0.7)


@pytest.fixture(scope="module")
def default_field_pools():
    """Spectral (reduced 20-center) and virtual pools at 187.3 mT defaults."""
    task = gen_parity(600, 3, seed=1)
    cfg = ReservoirConfig()  # default bias field = 187.3 mT
    centers = [1.1e9 + 0.1e9 * i for i in range(20)]
    spectral = reservoir_states(task.inputs, cfg, PULSE, 16e9, "spectral",
                                spectral_pool_nodes(cfg.n_detectors, centers),
                                threads=4)
    virtual = reservoir_states(task.inputs, cfg, PULSE, 16e9, "virtual",
                               nodes=None, nodes_per_symbol=62)
    return task, centers, spectral, virtual


class TestCriterion7SpectralBeatsVirtual:
    """At 187.3 mT defaults, exhaustive C(20,5) = 15504 spectral-node search
    beats the best virtual-node (62/detector) selection at 5 nodes/detector by
    a strictly positive margin, and the winning subset has r^2(K=1) > 0.9.
    Budget: < 15 min."""

    def test_trend(self, default_field_pools):
        start = time.monotonic()
        task, centers, spectral, virtual = default_field_pools
        ev_spec = make_evaluator(spectral, task, SPLIT, 1e-6, len(centers))
        n_trials = comb(20, 5)
        assert n_trials == 15504
        spec_trials = run_selection(ev_spec, 5, n_trials, master_seed=1, threads=4)

        ev_virt = make_evaluator(virtual, task, SPLIT, 1e-6, 62)
        virt_trials = run_selection(ev_virt, 5, n_trials, master_seed=1, threads=4)

        best_spec = spec_trials[0]
        best_virt = virt_trials[0]
        assert best_spec.metric_value > best_virt.metric_value

        # K-resolved check on the winning spectral subset
        idx = np.concatenate([
            np.array(best_spec.node_indices) + d * len(centers)
            for d in range(7)
        ])
        x = spectral.values[SPLIT.washout:, idx]
        y = task.targets[SPLIT.washout:]
        n_train = int(round(x.shape[0] * SPLIT.train_fraction))
        model = train_ridge(x[:n_train], y[:n_train], 1e-6)
        r2, _ = capacity(predict(model, x[n_train:]), y[n_train:])
        assert r2[0] > 0.9
        assert time.monotonic() - start < 15 * 60


# criterion 8 sweep configuration: single resonance line, fast damping so the
# ring-down stays within a few symbols, near-field detectors so propagation
# latency stays below one symbol, and a noise floor that buries the
# off-resonant filter skirts. Fields are chosen so the resonance crosses the
# pool while staying clear of the 2.0 +/- 0.3 GHz feedthrough band.
SWEEP_FIELDS = (0.1473, 0.1633, 0.2113, 0.2273, 0.2433)
SWEEP_CFG = ReservoirConfig(
    n_modes=1, damping_rate=1e8, em_gain=0.01, noise_floor=1e-3,
    detector_positions=tuple(1e-5 * (i + 1) for i in range(7)),
)
SWEEP_PULSE = PulseParams(5e-9, 0.0625e-9, 0.0625e-9)  # broadband excitation
POOL_CENTERS = np.array([0.1e9 * (i + 1) for i in range(50)])


def _sweep_occurrences(cfg: ReservoirConfig, pulse: PulseParams):
    task = gen_parity(400, 3, seed=1)
    counts_per_field = []
    for field in SWEEP_FIELDS:
        field_cfg = replace(cfg, bias_field=field)
        pool = reservoir_states(task.inputs, field_cfg, pulse, 64e9, "spectral",
                                spectral_pool_nodes(7, POOL_CENTERS), threads=4)
        ev = make_evaluator(pool, task, SPLIT, 1e-6, 50)
        trials = run_selection(ev, 2, 3000, master_seed=11, threads=4)
        counts_per_field.append(occurrence_histogram(trials, 20, 50).astype(float))
    return counts_per_field


class TestCriterion8TwoBranchStructure:
    """5-field sweep: occurrence-weighted mean frequency of non-EM nodes
    (those further than one em_bandwidth from em_center) regresses on field
    with slope in [17.5, 32.5] GHz/T (25 GHz/T +/- 30%); the EM-only run
    (drive_coupling = 0) has its modal occurrence peak within one pool spacing
    (0.1 GHz) of em_center at every field. Budget: < 30 min."""

    def test_fmr_branch_slope(self):
        start = time.monotonic()
        counts = _sweep_occurrences(SWEEP_CFG, SWEEP_PULSE)
        mask = np.abs(POOL_CENTERS - SWEEP_CFG.em_center) > SWEEP_CFG.em_bandwidth
        means = [
            float(np.sum(c[mask] * POOL_CENTERS[mask]) / np.sum(c[mask]))
            for c in counts
        ]
        slope = np.polyfit(SWEEP_FIELDS, means, 1)[0]
        assert 0.7 * 25e9 <= slope <= 1.3 * 25e9, f"slope {slope / 1e9:.1f} GHz/T"
        assert time.monotonic() - start < 15 * 60

    def test_em_only_peak(self):
        start = time.monotonic()
        em_cfg = replace(SWEEP_CFG, drive_coupling=0.0, em_gain=0.02)
        # the feedthrough path needs drive energy in its own band, so the
        # EM-only characterization uses the standard (wider) pulse
        counts = _sweep_occurrences(em_cfg, PULSE)
        for c in counts:
            peak = POOL_CENTERS[int(np.argmax(c))]
            assert abs(peak - em_cfg.em_center) <= 0.1e9, f"peak {peak / 1e9} GHz"
        assert time.monotonic() - start < 15 * 60


class TestCriterion9SpeechPipeline:
    """Synthetic 5-class corpus, 100 samples/class, 20-shuffle 400/100
    protocol, hardware-preset 56-node extraction: mean accuracy >= 0.9 and the
    no-reservoir baseline (raw symbol means) strictly lower.
    Budget: < 20 min."""

    def test_accuracy_and_ordering(self):
        start = time.monotonic()
        sample_length, n_symbols = 500, 25
        waves, labels, names = synthetic_corpus(100, 5, length=sample_length,
                                                seed=0)
        dataset = gen_classification_stream(waves, labels, n_symbols,
                                            target_length=sample_length,
                                            class_names=names)
        cfg = ReservoirConfig()
        nodes = hardware_preset_nodes(cfg.n_detectors)
        assert len(nodes) == 56
        states = speech_states(dataset, cfg, PULSE, 16e9, "spectral",
                               n_symbols, sample_length, nodes, threads=4)
        acc, confusion, _ = run_speech_protocol(states, dataset, 20, 400, 1e-6)
        assert acc.shape == (20,)
        assert confusion.shape == (5, 5)
        assert acc.mean() >= 0.9

        baseline = speech_states(dataset, cfg, PULSE, 16e9, "baseline",
                                 n_symbols, sample_length)
        acc_base, _, _ = run_speech_protocol(baseline, dataset, 20, 400, 1e-6)
        assert acc_base.mean() < acc.mean()
        assert time.monotonic() - start < 20 * 60


FAST_TOML = """\
threads = 1

[reservoir]
n_modes = 5
mode_spacing = 50e6
chi = 0.0
em_gain = 0.0
noise_floor = 1e-4

[extraction]
mode = "spectral"
centers_ghz = [1.5, 2.0, 2.5]

[readout]
lam = 1e-6
washout = 5
train_fraction = 0.7

[task]
kind = "parity"
length = 150
k_max = 3
seed = 1
"""


class TestCriterion10Determinism:
    """Re-running subcommands with fixed seeds is byte-identical (including a
    nonzero noise floor), and search results are independent of the worker
    count. Budget: < 5 min."""

    def test_cli_reruns_byte_identical(self, tmp_path):
        start = time.monotonic()
        config = tmp_path / "exp.toml"
        config.write_text(FAST_TOML)
        runner = CliRunner()
        outputs = []
        for name in ("a", "b"):
            out = tmp_path / name
            for command in ("simulate", "benchmark"):
                res = runner.invoke(cli, [command, "--config", str(config),
                                          "--output", str(out / command)],
                                    catch_exceptions=False)
                assert res.exit_code == 0
            outputs.append(out)
        a, b = outputs
        for rel in ["simulate/detector_00.bin", "simulate/detector_06.bin",
                    "simulate/manifest.json", "benchmark/metrics.json",
                    "benchmark/r2_vs_k.csv"]:
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel
        assert time.monotonic() - start < 5 * 60

    def test_search_worker_count_independence(self, default_field_pools):
        task, centers, spectral, _ = default_field_pools
        ev = make_evaluator(spectral, task, SPLIT, 1e-6, len(centers))
        serial = run_selection(ev, 5, 500, master_seed=7, threads=1)
        threaded = run_selection(ev, 5, 500, master_seed=7, threads=8)
        assert [(t.node_indices, t.metric_value) for t in serial] == \
               [(t.node_indices, t.metric_value) for t in threaded]

    def test_seed_changes_outputs(self, tmp_path):
        config = tmp_path / "exp.toml"
        config.write_text(FAST_TOML)
        runner = CliRunner()
        for name, seed in (("s1", "1"), ("s2", "2")):
            res = runner.invoke(cli, ["benchmark", "--config", str(config),
                                      "--output", str(tmp_path / name),
                                      "--seed", seed], catch_exceptions=False)
            assert res.exit_code == 0
        m1 = json.loads((tmp_path / "s1" / "metrics.json").read_text())
        m2 = json.loads((tmp_path / "s2" / "metrics.json").read_text())
        assert m1["config_hash"] != m2["config_hash"]
