"""End-to-end experiment plumbing shared by the CLI and the sweep/search
layers: build drives from task inputs, run the reservoir, extract states,
train the readout, and compute task metrics."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from .nodes import (
    FilterSpec,
    NodeSpec,
    emulation_pool,
    extract_spectral_states,
    extract_virtual_states,
)
from .readout import SplitSpec, predict, select_lambda, train_ridge
from .reservoir import ReservoirConfig, simulate
from .search import TrialEvaluator
from .signals import PulseParams, modulate_pulse_train
from .states import StateMatrix
from .tasks import TaskDataset, capacity, classify_stream, nmse


def build_drive(u, pulse: PulseParams, sample_rate: float):
    return modulate_pulse_train(u, pulse, sample_rate)


def spectral_pool_nodes(n_detectors: int, centers=None, bandwidth: float = 0.2e9,
                        order: int = 2) -> list[NodeSpec]:
    """Spectral-node pool; default is the 50-center emulation pool."""
    if centers is None:
        return emulation_pool(n_detectors)
    return [
        NodeSpec(d, FilterSpec(float(c), bandwidth, order), "rms")
        for d in range(n_detectors)
        for c in centers
    ]


def extract_states(responses, mode: str, pulse: PulseParams, n_symbols: int,
                   nodes=None, nodes_per_symbol: int = 62,
                   threads: int = 1) -> StateMatrix:
    """Extract a state matrix from detector responses.

    Symbol n occupies [n*T0, (n+1)*T0) with the first pulse at T0, so
    extraction windows start one symbol in.
    """
    t0 = pulse.symbol_duration
    if mode in ("spectral", "hardware_preset"):
        if nodes is None:
            raise ValueError("spectral extraction requires a node list")
        return extract_spectral_states(
            responses, nodes, t0, n_symbols, start_time=t0, threads=threads
        )
    if mode == "virtual":
        return extract_virtual_states(
            responses, t0, nodes_per_symbol, n_symbols, start_time=t0
        )
    raise ValueError(f"unknown extraction mode {mode!r}")


def reservoir_states(u, cfg: ReservoirConfig, pulse: PulseParams,
                     drive_sample_rate: float, mode: str, nodes=None,
                     nodes_per_symbol: int = 62, threads: int = 1) -> StateMatrix:
    """Full front half of the pipeline: modulate, simulate, extract."""
    drive = build_drive(u, pulse, drive_sample_rate)
    responses = simulate(drive, cfg)
    return extract_states(responses, mode, pulse, len(u), nodes,
                          nodes_per_symbol, threads)


def evaluate_task(states: StateMatrix, task: TaskDataset, split_spec: SplitSpec,
                  lam: float | None):
    """Train the readout on the front partition and score the back partition.

    Returns a dict with the task metric(s), the chosen lambda, and the test
    predictions/targets for trace outputs.
    """
    x = states.values
    y = task.targets
    w = split_spec.washout
    x, y = x[w:], y[w:]
    n_train = int(round(x.shape[0] * split_spec.train_fraction))
    x_train, y_train = x[:n_train], y[:n_train]
    x_test, y_test = x[n_train:], y[n_train:]
    if lam is None:
        lam = select_lambda(x_train, y_train)
    model = train_ridge(x_train, y_train, lam)
    pred = predict(model, x_test)
    out = {"lambda": lam, "predictions": pred, "targets": y_test, "model": model}
    if task.kind == "parity":
        r2, cap = capacity(pred, y_test)
        out["r2_per_k"] = r2
        out["capacity"] = cap
    elif task.kind == "narma2":
        out["nmse"] = nmse(pred[:, 0], y_test[:, 0])
    return out


def make_evaluator(pool: StateMatrix, task: TaskDataset, split_spec: SplitSpec,
                   lam: float, pool_per_detector: int) -> TrialEvaluator:
    return TrialEvaluator(pool, task.targets, task.kind, split_spec, lam,
                          pool_per_detector)


def make_field_evaluator_factory(task: TaskDataset, cfg: ReservoirConfig,
                                 pulse: PulseParams, drive_sample_rate: float,
                                 split_spec: SplitSpec, lam: float,
                                 nodes_factory, pool_per_detector: int,
                                 threads: int = 1):
    """Closure for field sweeps: bias field -> TrialEvaluator.

    nodes_factory(n_detectors) builds the per-field node pool (the pool
    itself is field-independent; the reservoir response is not).
    """
    def factory(bias_field: float) -> TrialEvaluator:
        field_cfg = replace(cfg, bias_field=bias_field)
        nodes = nodes_factory(field_cfg.n_detectors)
        pool = reservoir_states(task.inputs, field_cfg, pulse,
                                drive_sample_rate, "spectral", nodes,
                                threads=threads)
        return make_evaluator(pool, task, split_spec, lam, pool_per_detector)

    return factory


def speech_states(dataset: TaskDataset, cfg: ReservoirConfig,
                  pulse: PulseParams, drive_sample_rate: float, mode: str,
                  n_symbols_per_sample: int, sample_length: int,
                  nodes=None, nodes_per_symbol: int = 62,
                  threads: int = 1) -> StateMatrix:
    """Per-sample reservoir states for the streaming classification task.

    Each audio sample is simulated independently (states do not leak across
    samples); every sample contributes n_symbols_per_sample rows. The symbol
    window spans sample_length / n_symbols_per_sample input points.
    """
    if sample_length % n_symbols_per_sample:
        raise ValueError("sample_length must divide into the symbol count")
    points_per_symbol = sample_length // n_symbols_per_sample
    n_samples = dataset.inputs.size // sample_length
    window = points_per_symbol * pulse.symbol_duration

    def one(i):
        u = dataset.inputs[i * sample_length:(i + 1) * sample_length]
        if mode == "baseline":
            vals = u.reshape(n_symbols_per_sample, points_per_symbol).mean(axis=1)
            return StateMatrix(vals[:, None], ("input-mean",), window)
        drive = build_drive(u, pulse, drive_sample_rate)
        responses = simulate(drive, cfg)
        t0 = pulse.symbol_duration
        if mode in ("spectral", "hardware_preset"):
            return extract_spectral_states(
                responses, nodes, window, n_symbols_per_sample, start_time=t0
            )
        if mode == "virtual":
            return extract_virtual_states(
                responses, window, nodes_per_symbol, n_symbols_per_sample,
                start_time=t0
            )
        raise ValueError(f"unknown extraction mode {mode!r}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(one, range(n_samples)))
    else:
        blocks = [one(i) for i in range(n_samples)]
    values = np.concatenate([b.values for b in blocks], axis=0)
    return StateMatrix(values, blocks[0].node_labels, window)


def run_speech_protocol(states: StateMatrix, dataset: TaskDataset,
                        n_shuffles: int, n_train_samples: int, lam: float,
                        base_seed: int = 0):
    """Shuffle samples n_shuffles times, train on n_train_samples, test on the
    rest; winner-takes-all per symbol and majority vote per sample.

    Returns per-trial accuracies, the summed test confusion matrix, and the
    first trial's per-symbol probability traces.
    """
    n_samples = len(dataset.sample_boundaries)
    if n_train_samples >= n_samples:
        raise ValueError("n_train_samples must leave a non-empty test set")
    rows_per_sample = dataset.sample_boundaries[0][1] - dataset.sample_boundaries[0][0]
    labels = np.asarray(dataset.labels)
    n_classes = dataset.targets.shape[1]
    accuracies = []
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    first_trace = None
    for trial in range(n_shuffles):
        rng = np.random.default_rng(np.random.SeedSequence([base_seed, trial]))
        perm = rng.permutation(n_samples)
        train_samples = perm[:n_train_samples]
        test_samples = perm[n_train_samples:]

        def rows(sample_ids):
            return np.concatenate([
                np.arange(*dataset.sample_boundaries[s]) for s in sample_ids
            ])

        r_train, r_test = rows(train_samples), rows(test_samples)
        model = train_ridge(states.values[r_train], dataset.targets[r_train], lam)
        probs = predict(model, states.values[r_test])
        test_bounds = [
            (i * rows_per_sample, (i + 1) * rows_per_sample)
            for i in range(len(test_samples))
        ]
        acc, conf, _ = classify_stream(probs, test_bounds, labels[test_samples])
        accuracies.append(acc)
        confusion += conf
        if first_trace is None:
            first_trace = (probs, labels[test_samples])
    return np.array(accuracies), confusion, first_trace
