"""Benchmark task generation and performance metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class TaskError(ValueError):
    pass


@dataclass(frozen=True)
class TaskDataset:
    """Symbol-aligned inputs and targets for one benchmark task.

    kind is "parity", "narma2", or "classify"; for classification,
    sample_boundaries gives the [start, stop) row range of each sample and
    labels its ground-truth class indices.
    """

    inputs: np.ndarray
    targets: np.ndarray
    kind: str
    sample_boundaries: tuple = ()
    labels: tuple = ()
    class_names: tuple = ()

    def __post_init__(self):
        u = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.targets, dtype=np.float64)
        if y.ndim == 1:
            y = y[:, None]
        # classification inputs are waveform points, targets per-symbol rows;
        # the other tasks are strictly row-aligned
        if self.kind != "classify" and u.shape[0] != y.shape[0]:
            raise TaskError("inputs and targets must be row-aligned")
        object.__setattr__(self, "inputs", u)
        object.__setattr__(self, "targets", y)

    @property
    def n_symbols(self) -> int:
        return self.inputs.shape[0]


def gen_parity(n: int, k_max: int, seed: int) -> TaskDataset:
    """Random binary input; target column K is the K-bit running parity.

    y_K(m) = (u(m) + u(m-1) + ... + u(m-K+1)) mod 2, zero-padded history.
    """
    if not n > k_max >= 1:
        raise TaskError("need n > K_max >= 1")
    rng = np.random.default_rng(seed)
    u = rng.integers(0, 2, size=n).astype(np.float64)
    targets = np.zeros((n, k_max))
    window_sum = np.zeros(n)
    for k in range(1, k_max + 1):
        shifted = np.zeros(n)
        shifted[k - 1:] = u[: n - k + 1]
        window_sum += shifted
        targets[:, k - 1] = window_sum % 2
    return TaskDataset(u, targets, "parity")


def gen_narma2(n: int, seed: int) -> TaskDataset:
    """Second-order nonlinear autoregressive benchmark.

    u ~ Uniform[0, 0.5]; y(m+1) = 0.4 y(m) + 0.4 y(m) y(m-1) + 0.6 u(m)^3 + 0.1
    with y(1) = y(2) = 0. The target at row m is y(m+1), so the readout
    predicts the next system output from states at symbol m.
    """
    if n < 3:
        raise TaskError("need n >= 3")
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.0, 0.5, size=n)
    # row m (0-based, symbol m+1) targets y(m+2)
    targets = narma2_trajectory(u)[1:]
    return TaskDataset(u, targets, "narma2")


def narma2_trajectory(u) -> np.ndarray:
    """System outputs y(1)..y(n+1) for a given input; y[i] holds y(i+1)."""
    u = np.asarray(u, dtype=np.float64)
    n = u.size
    y = np.zeros(n + 1)  # y(1) = y(2) = 0
    for m in range(2, n + 1):
        y[m] = 0.4 * y[m - 1] + 0.4 * y[m - 1] * y[m - 2] + 0.6 * u[m - 1] ** 3 + 0.1
    return y


def narma2_fixed_point() -> float:
    """Zero-input fixed point: smaller root of 0.4 y^2 - 0.6 y + 0.1 = 0."""
    return (0.6 - np.sqrt(0.36 - 0.16)) / 0.8


def capacity(predictions, targets):
    """Per-depth squared Pearson correlation and its sum.

    predictions/targets: arrays [n_test, K_max]. An r^2 of 0 is reported for
    constant predictions; a constant target is a degenerate split error.
    """
    pred = np.atleast_2d(np.asarray(predictions, dtype=np.float64).T).T
    targ = np.atleast_2d(np.asarray(targets, dtype=np.float64).T).T
    if pred.shape != targ.shape:
        raise TaskError("prediction/target shape mismatch")
    if pred.shape[0] < 30:
        raise TaskError("need at least 30 test rows for capacity")
    r2 = np.zeros(pred.shape[1])
    for k in range(pred.shape[1]):
        t = targ[:, k]
        p = pred[:, k]
        if np.std(t) == 0:
            raise TaskError(f"constant target at depth K={k + 1} (degenerate split)")
        if np.std(p) == 0:
            r2[k] = 0.0
        else:
            r2[k] = np.corrcoef(p, t)[0, 1] ** 2
    return r2, float(r2.sum())


def nmse(pred, target) -> float:
    """Sum of squared errors over the target's centered sum of squares."""
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(target, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise TaskError("prediction/target length mismatch")
    denom = np.sum((t - t.mean()) ** 2)
    if denom == 0:
        raise TaskError("zero-variance target")
    return float(np.sum((p - t) ** 2) / denom)


def trim_silence(wave: np.ndarray, threshold_fraction: float = 0.01,
                 frame: int = 100) -> np.ndarray:
    """Drop leading/trailing frames whose energy is below a fraction of peak."""
    w = np.asarray(wave, dtype=np.float64)
    n_frames = int(np.ceil(w.size / frame))
    padded = np.pad(w, (0, n_frames * frame - w.size))
    energy = np.mean(padded.reshape(n_frames, frame) ** 2, axis=1)
    gate = threshold_fraction * np.max(np.abs(w)) ** 2
    active = np.nonzero(energy > gate)[0]
    if active.size == 0:
        return w
    return w[active[0] * frame: min((active[-1] + 1) * frame, w.size)]


def standardize_length(wave: np.ndarray, target_length: int) -> np.ndarray:
    """Center-crop or zero-pad to exactly target_length points."""
    w = np.asarray(wave, dtype=np.float64)
    if w.size > target_length:
        start = (w.size - target_length) // 2
        return w[start: start + target_length]
    pad = target_length - w.size
    return np.pad(w, (pad // 2, pad - pad // 2))


def gen_classification_stream(waveforms, labels, n_symbols_per_sample: int,
                              n_classes: int | None = None,
                              target_length: int = 10000,
                              class_names=()) -> TaskDataset:
    """Build a streaming classification dataset from labeled waveforms.

    Each waveform is silence-trimmed, standardized to target_length points,
    and assigned n_symbols_per_sample one-hot target rows. Samples are
    concatenated with per-sample boundaries recorded.
    """
    labels = [int(l) for l in labels]
    if len(waveforms) != len(labels):
        raise TaskError("waveform/label count mismatch")
    if n_classes is None:
        n_classes = max(labels) + 1
    inputs, target_rows, boundaries = [], [], []
    row = 0
    for wave, label in zip(waveforms, labels):
        if not 0 <= label < n_classes:
            raise TaskError(f"label {label} out of range for {n_classes} classes")
        std = standardize_length(trim_silence(wave), target_length)
        inputs.append(std)
        onehot = np.zeros(n_classes)
        onehot[label] = 1.0
        target_rows.append(np.tile(onehot, (n_symbols_per_sample, 1)))
        boundaries.append((row, row + n_symbols_per_sample))
        row += n_symbols_per_sample
    return TaskDataset(
        np.concatenate(inputs),
        np.concatenate(target_rows),
        "classify",
        sample_boundaries=tuple(boundaries),
        labels=tuple(labels),
        class_names=tuple(class_names),
    )


def classify_stream(pred_probabilities, sample_boundaries, labels):
    """Winner-takes-all per symbol, majority vote per sample.

    Returns (accuracy, confusion matrix, per-symbol decisions). Ties in the
    majority vote go to the lowest class index.
    """
    probs = np.asarray(pred_probabilities, dtype=np.float64)
    n_classes = probs.shape[1]
    decisions = np.argmax(probs, axis=1)
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    correct = 0
    for (start, stop), truth in zip(sample_boundaries, labels):
        if stop <= start:
            raise TaskError("empty sample segment")
        votes = np.bincount(decisions[start:stop], minlength=n_classes)
        final = int(np.argmax(votes))
        confusion[truth, final] += 1
        correct += int(final == truth)
    accuracy = correct / len(labels)
    return accuracy, confusion, decisions
