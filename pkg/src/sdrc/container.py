"""Serialization of sampled signals: binary container and debug CSV.

Binary layout (little-endian): f64 sample_rate, f64 t0, u64 count,
then `count` f64 samples.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .signals import SampledSignal

_HEADER = struct.Struct("<ddQ")


def write_signal(path, sig: SampledSignal) -> None:
    payload = _HEADER.pack(sig.sample_rate, sig.t0, len(sig))
    atomic_write_bytes(path, payload + sig.samples.astype("<f8").tobytes())


def read_signal(path) -> SampledSignal:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated signal container")
    sample_rate, t0, count = _HEADER.unpack_from(raw)
    samples = np.frombuffer(raw, dtype="<f8", count=count, offset=_HEADER.size)
    if samples.size != count:
        raise ValueError(f"{path}: expected {count} samples, got {samples.size}")
    return SampledSignal(samples.copy(), sample_rate, t0)


def write_signal_csv(path, sig: SampledSignal) -> None:
    t = sig.times()
    lines = ["time_s,value"]
    lines += [f"{ti:.12e},{vi:.12e}" for ti, vi in zip(t, sig.samples)]
    atomic_write_text(path, "\n".join(lines) + "\n")


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temp file + rename so failures leave no partial output."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode())
