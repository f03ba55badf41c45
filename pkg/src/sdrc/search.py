"""Node-selection experiments: random/exhaustive subset search, occurrence
histograms, bias-field sweeps, and extraction-scheme comparisons."""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy import linalg

from .readout import SplitSpec
from .states import StateMatrix
from .tasks import capacity, nmse


class SearchError(ValueError):
    pass


@dataclass(frozen=True)
class SelectionTrial:
    """One evaluated node subset: center-frequency indices shared across
    detectors, the resulting metric, and the seed that produced it."""

    node_indices: tuple
    metric_value: float
    seed: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.node_indices)
        if len(set(idx)) != len(idx):
            raise SearchError("node indices must be unique")
        object.__setattr__(self, "node_indices", idx)


class TrialEvaluator:
    """Fast trial evaluation over a fixed state pool.

    The full-pool state matrix is standardized and split once; trials slice
    the precomputed train Gram matrix and cross-products instead of
    re-filtering or re-splitting, which is what makes 1e4-1e6 trial budgets
    tractable. Instances are immutable after construction and safe to share
    across worker threads.
    """

    def __init__(self, pool: StateMatrix, targets, task_kind: str,
                 split_spec: SplitSpec, lam: float = 1e-6,
                 pool_per_detector: int | None = None):
        x = pool.values
        y = np.asarray(targets, dtype=np.float64)
        if y.ndim == 1:
            y = y[:, None]
        if x.shape[0] != y.shape[0]:
            raise SearchError(
                f"pool has {x.shape[0]} rows but task has {y.shape[0]}"
            )
        if task_kind not in ("parity", "narma2"):
            raise SearchError(f"unsupported task kind {task_kind!r}")
        self.task_kind = task_kind
        self.lam = lam
        self.pool_per_detector = pool_per_detector or x.shape[1]
        if x.shape[1] % self.pool_per_detector:
            raise SearchError("pool width not a multiple of pool_per_detector")
        self.n_detectors = x.shape[1] // self.pool_per_detector

        w = split_spec.washout
        if w >= x.shape[0]:
            raise SearchError("washout consumes all rows")
        x, y = x[w:], y[w:]
        n_train = int(round(x.shape[0] * split_spec.train_fraction))
        if n_train == 0 or n_train == x.shape[0]:
            raise SearchError("empty train or test partition")
        x_train, x_test = x[:n_train], x[n_train:]
        y_train, y_test = y[:n_train], y[n_train:]

        mean = x_train.mean(axis=0)
        scale = x_train.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        xs_train = (x_train - mean) / scale
        xm = xs_train.mean(axis=0)
        xs_train = xs_train - xm
        self._y_mean = y_train.mean(axis=0)
        yc = y_train - self._y_mean

        self._gram = xs_train.T @ xs_train
        self._xty = xs_train.T @ yc
        self._x_test = (x_test - mean) / scale - xm
        self._y_test = y_test

    @property
    def objective(self) -> str:
        """"max" for capacity-style metrics, "min" for error metrics."""
        return "max" if self.task_kind == "parity" else "min"

    def column_indices(self, subset) -> np.ndarray:
        """Expand shared center indices to full pool column indices."""
        sub = np.asarray(subset, dtype=np.int64)
        if np.any(sub < 0) or np.any(sub >= self.pool_per_detector):
            raise SearchError("subset index out of pool range")
        per_det = np.arange(self.n_detectors) * self.pool_per_detector
        return (per_det[:, None] + sub[None, :]).ravel()

    def evaluate(self, subset) -> float:
        idx = self.column_indices(subset)
        g = self._gram[np.ix_(idx, idx)] + self.lam * np.eye(idx.size)
        w = linalg.solve(g, self._xty[idx], assume_a="pos", check_finite=False)
        pred = self._x_test[:, idx] @ w + self._y_mean
        if self.task_kind == "parity":
            _, cap = capacity(pred, self._y_test)
            return cap
        return nmse(pred, self._y_test[:, 0])


def _draw_subset(rng, pool_size: int, n: int) -> tuple:
    return tuple(sorted(rng.choice(pool_size, size=n, replace=False).tolist()))


def plan_trials(pool_size: int, n_per_detector: int, n_trials: int,
                master_seed: int):
    """Decide the subset list up front: exhaustive when it fits the budget,
    otherwise distinct random subsets (rejection on duplicates).

    Returns (subsets, seeds, exhaustive_flag). Deterministic in master_seed
    and independent of any evaluation schedule.
    """
    if n_per_detector > pool_size:
        raise SearchError("n_per_detector exceeds pool size")
    total = comb(pool_size, n_per_detector)
    if total <= n_trials:
        subsets = [tuple(c) for c in
                   itertools.combinations(range(pool_size), n_per_detector)]
        return subsets, [master_seed] * len(subsets), True
    seen = set()
    subsets, seeds = [], []
    for i in range(n_trials):
        seed_seq = np.random.SeedSequence([master_seed, i])
        rng = np.random.default_rng(seed_seq)
        sub = _draw_subset(rng, pool_size, n_per_detector)
        while sub in seen:
            sub = _draw_subset(rng, pool_size, n_per_detector)
        seen.add(sub)
        subsets.append(sub)
        seeds.append(i)
    return subsets, seeds, False


def run_selection(evaluator: TrialEvaluator, n_per_detector: int,
                  n_trials: int, master_seed: int,
                  threads: int = 1) -> list[SelectionTrial]:
    """Evaluate node subsets and return trials sorted best-first.

    Ties are broken by lexicographic node-index order, so results are
    identical whether trials run serially or concurrently.
    """
    subsets, seeds, _ = plan_trials(
        evaluator.pool_per_detector, n_per_detector, n_trials, master_seed
    )
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            metrics = list(pool.map(evaluator.evaluate, subsets))
    else:
        metrics = [evaluator.evaluate(s) for s in subsets]
    trials = [
        SelectionTrial(sub, m, seed)
        for sub, m, seed in zip(subsets, metrics, seeds)
    ]
    sign = -1.0 if evaluator.objective == "max" else 1.0
    trials.sort(key=lambda t: (sign * t.metric_value, t.node_indices))
    return trials


def occurrence_histogram(trials, k: int, pool_size: int) -> np.ndarray:
    """Occurrence counts per node index over the k best trials.

    `trials` must already be sorted best-first (run_selection output).
    """
    if k > len(trials):
        raise SearchError(f"k={k} exceeds {len(trials)} trials")
    counts = np.zeros(pool_size, dtype=np.int64)
    for t in trials[:k]:
        for i in t.node_indices:
            counts[i] += 1
    return counts


@dataclass(frozen=True)
class FieldResult:
    bias_field: float
    best: float
    worst: float
    mean: float
    top_trials: tuple
    occurrence_counts: np.ndarray


@dataclass(frozen=True)
class SweepResult:
    bias_fields: tuple
    results: tuple  # of FieldResult


def field_sweep(fields, make_evaluator, n_per_detector: int, n_trials: int,
                top_k: int, master_seed: int, threads: int = 1) -> SweepResult:
    """Run the selection experiment at each bias field.

    make_evaluator(field) must return a TrialEvaluator for that field's
    simulated and extracted pool (supplied by the pipeline layer).
    """
    fields = tuple(float(f) for f in fields)
    if not fields:
        raise SearchError("empty field list")
    results = []
    for f in fields:
        ev = make_evaluator(f)
        trials = run_selection(ev, n_per_detector, n_trials, master_seed, threads)
        k = min(top_k, len(trials))
        metrics = np.array([t.metric_value for t in trials])
        results.append(FieldResult(
            bias_field=f,
            best=trials[0].metric_value,
            worst=trials[-1].metric_value,
            mean=float(metrics.mean()),
            top_trials=tuple(trials[:k]),
            occurrence_counts=occurrence_histogram(trials, k, ev.pool_per_detector),
        ))
    return SweepResult(fields, tuple(results))


def compare_extraction(spectral_evaluator: TrialEvaluator,
                       virtual_evaluator: TrialEvaluator,
                       node_counts, n_trials: int, master_seed: int,
                       threads: int = 1):
    """Min/max metric per node count for both extraction schemes.

    Returns rows {"n_per_detector", "approach", "min", "max"} from matched
    trial budgets on the same underlying detector responses.
    """
    rows = []
    for approach, ev in (("spectral", spectral_evaluator),
                         ("virtual", virtual_evaluator)):
        for n in node_counts:
            trials = run_selection(ev, n, n_trials, master_seed, threads)
            metrics = [t.metric_value for t in trials]
            rows.append({
                "n_per_detector": int(n),
                "approach": approach,
                "min": min(metrics),
                "max": max(metrics),
            })
    return rows
