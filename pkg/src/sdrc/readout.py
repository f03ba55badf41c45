"""Linear readout: ridge regression with washout and train/test splitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .states import StateMatrix


class ReadoutError(ValueError):
    pass


class SingularStatesError(ReadoutError):
    """Degenerate state columns with lambda = 0; retry with lambda > 0."""


def _values(states) -> np.ndarray:
    if isinstance(states, StateMatrix):
        return states.values
    return np.asarray(states, dtype=np.float64)


@dataclass(frozen=True)
class ReadoutModel:
    """Trained linear map from states to targets.

    Normalization statistics are stored so predict() is self-contained:
    prediction = ((X - mean) / scale) @ weights + bias.
    """

    weights: np.ndarray
    bias: np.ndarray
    lam: float
    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        for name in ("weights", "bias", "mean", "scale"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ReadoutError(f"non-finite entries in {name}")

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class SplitSpec:
    """Washout plus train/test partition.

    shuffle_seed set -> sample-level shuffling (classification); None -> the
    first train_fraction of rows contiguously (time series).
    """

    washout: int = 0
    train_fraction: float = 0.5
    shuffle_seed: int | None = None

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ReadoutError("train_fraction must be in (0, 1)")
        if self.washout < 0:
            raise ReadoutError("washout must be >= 0")


def train_ridge(states, targets, lam: float, standardize: bool = True,
                fit_bias: bool = True) -> ReadoutModel:
    """Solve min ||X W + b - Y||^2 + lam ||W||^2 with unpenalized bias.

    With standardize=True the columns of X are z-scored by training statistics
    before the solve. With fit_bias=False and standardize=False the solution
    is exactly (X'X + lam I)^-1 X'Y.
    """
    x = _values(states)
    y = np.asarray(targets, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if x.shape[0] != y.shape[0]:
        raise ReadoutError(f"{x.shape[0]} state rows vs {y.shape[0]} target rows")
    if lam < 0:
        raise ReadoutError("lambda must be >= 0")

    n, p = x.shape
    if standardize:
        mean = x.mean(axis=0)
        scale = x.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
    else:
        mean = np.zeros(p)
        scale = np.ones(p)
    xs = (x - mean) / scale

    if fit_bias:
        xm = xs.mean(axis=0)
        ym = y.mean(axis=0)
        xc = xs - xm
        yc = y - ym
    else:
        xm = np.zeros(p)
        ym = np.zeros(y.shape[1])
        xc, yc = xs, y

    gram = xc.T @ xc + lam * np.eye(p)
    try:
        cho = linalg.cho_factor(gram, check_finite=False)
        w = linalg.cho_solve(cho, xc.T @ yc, check_finite=False)
    except linalg.LinAlgError as exc:
        raise SingularStatesError(
            "normal equations singular (constant or collinear state columns); "
            "use lambda > 0"
        ) from exc
    bias = ym - xm @ w
    return ReadoutModel(w, bias, lam, mean, scale)


def predict(model: ReadoutModel, states) -> np.ndarray:
    x = _values(states)
    if x.shape[1] != model.n_nodes:
        raise ReadoutError(
            f"model expects {model.n_nodes} nodes, got {x.shape[1]}"
        )
    return ((x - model.mean) / model.scale) @ model.weights + model.bias


def split(states, targets, spec: SplitSpec):
    """Drop washout rows, then partition into (x_train, y_train, x_test, y_test)."""
    x = _values(states)
    y = np.asarray(targets, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if spec.washout >= x.shape[0]:
        raise ReadoutError("washout consumes all rows")
    x = x[spec.washout:]
    y = y[spec.washout:]
    n = x.shape[0]
    n_train = int(round(n * spec.train_fraction))
    if n_train == 0 or n_train == n:
        raise ReadoutError("empty train or test partition")
    if spec.shuffle_seed is not None:
        perm = np.random.default_rng(spec.shuffle_seed).permutation(n)
        x, y = x[perm], y[perm]
    return x[:n_train], y[:n_train], x[n_train:], y[n_train:]


DEFAULT_LAMBDA_GRID = (0.0,) + tuple(10.0 ** e for e in range(-8, 0))


def select_lambda(x_train, y_train, grid=DEFAULT_LAMBDA_GRID,
                  val_fraction: float = 0.2) -> float:
    """Pick lambda by mean-squared error on the last val_fraction of train."""
    x = _values(x_train)
    y = np.asarray(y_train, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    n_fit = int(round(x.shape[0] * (1.0 - val_fraction)))
    if n_fit < 1 or n_fit >= x.shape[0]:
        raise ReadoutError("train set too small for lambda selection")
    best_lam, best_err = None, np.inf
    for lam in grid:
        try:
            model = train_ridge(x[:n_fit], y[:n_fit], lam)
        except SingularStatesError:
            continue
        err = float(np.mean((predict(model, x[n_fit:]) - y[n_fit:]) ** 2))
        if err < best_err:
            best_lam, best_err = lam, err
    if best_lam is None:
        raise SingularStatesError("no lambda in the grid produced a solvable system")
    return best_lam
