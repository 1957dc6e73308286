"""Binary waveform files for the ``nft roundtrip`` debug verb.

Layout (little endian)::

    magic    4 bytes  b"NFDM"
    version  u32      1 = normalized DualPolSignal, 2 = physical FieldState
    n        u32      samples per polarization
    dt       f64      sample spacing (normalized units or seconds)
    t_start  f64      time of sample 0
    data     2n complex128 values, polarization 1 then polarization 2
"""
from __future__ import annotations

import struct
from typing import Union

import numpy as np

from .errors import ConfigurationError
from .fiber import FieldState
from .nft import DualPolSignal, TimeGrid

MAGIC = b"NFDM"
VERSION_NORMALIZED = 1
VERSION_PHYSICAL = 2
_HEADER = struct.Struct("<4sIIdd")


def write_signal(path, sig: Union[DualPolSignal, FieldState]) -> None:
    if isinstance(sig, DualPolSignal):
        version, a = VERSION_NORMALIZED, np.vstack([sig.q1, sig.q2])
    elif isinstance(sig, FieldState):
        version, a = VERSION_PHYSICAL, sig.stacked
    else:
        raise ConfigurationError(f"cannot write {type(sig).__name__}")
    grid = sig.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, version, grid.n_samples, grid.dt, grid.t_start))
        fh.write(np.ascontiguousarray(a, dtype="<c16").tobytes())


def read_signal(path) -> Union[DualPolSignal, FieldState]:
    """Read a waveform file; raises :class:`ConfigurationError` on malformed input."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read signal file {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise ConfigurationError(f"{path}: truncated header")
    magic, version, n, dt, t_start = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ConfigurationError(f"{path}: bad magic {magic!r}")
    if version not in (VERSION_NORMALIZED, VERSION_PHYSICAL):
        raise ConfigurationError(f"{path}: unsupported version {version}")
    body = raw[_HEADER.size :]
    if len(body) != 2 * n * 16:
        raise ConfigurationError(f"{path}: expected {2 * n} complex samples, found {len(body) / 16:g}")
    a = np.frombuffer(body, dtype="<c16").reshape(2, n).astype(complex)
    grid = TimeGrid(t_start, n, dt)
    if version == VERSION_NORMALIZED:
        return DualPolSignal(a[0], a[1], grid)
    return FieldState(a[0], a[1], grid)
