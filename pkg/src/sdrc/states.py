"""Reservoir state matrices: rows are symbol time steps, columns are nodes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .container import atomic_write_text


@dataclass(frozen=True)
class StateMatrix:
    """Reservoir states fed to the readout.

    values has shape [n_symbols, n_nodes]; node_labels names each column
    (a NodeSpec for spectral nodes, a plain string otherwise).
    """

    values: np.ndarray
    node_labels: tuple
    symbol_duration: float

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("StateMatrix values must be 2-D")
        if not np.all(np.isfinite(arr)):
            raise ValueError("StateMatrix contains NaN or Inf")
        if len(self.node_labels) != arr.shape[1]:
            raise ValueError(
                f"{len(self.node_labels)} labels for {arr.shape[1]} columns"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "node_labels", tuple(self.node_labels))

    @property
    def n_symbols(self) -> int:
        return self.values.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.values.shape[1]

    def select_columns(self, indices) -> "StateMatrix":
        idx = list(indices)
        return StateMatrix(
            self.values[:, idx],
            tuple(self.node_labels[i] for i in idx),
            self.symbol_duration,
        )

    def to_csv(self, path, header_prefix: str = "") -> None:
        labels = ",".join(str(lbl) for lbl in self.node_labels)
        rows = [",".join(f"{v:.12e}" for v in row) for row in self.values]
        text = (header_prefix + labels + "\n" + "\n".join(rows) + "\n")
        atomic_write_text(path, text)
