"""Sample, basis and core file formats.

Sample files come in two flavours:

* CSV: one observation per row, ``n`` columns, optional header line.
* Binary: little-endian; two ``uint64`` header words ``(n, p)`` followed by
  the ``n x p`` float64 payload in column-major order (observations are
  contiguous).

Bases are CSV with ``n`` rows and ``r`` columns.  Core tensors are written
as their mode-1 unfolding (``r`` rows, ``r**(d-1)`` columns).  Values are
printed with 17 significant digits so that a write/read round trip is exact.
"""

from __future__ import annotations

import io
import json
import os
from itertools import islice
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .moments import SampleStream, as_samples
from .tensor import SymTensor, matricize

PathLike = Union[str, os.PathLike]

_HEADER = np.dtype("<u8")
_PAYLOAD = np.dtype("<f8")
_FMT = "%.17g"


def detect_format(path: PathLike) -> str:
    suffix = Path(path).suffix.lower()
    return "bin" if suffix in (".bin", ".raw", ".f64") else "csv"


# -- samples ----------------------------------------------------------------


def write_samples(path: PathLike, samples, fmt: Optional[str] = None,
                  header: bool = False) -> None:
    """Write an ``n x p`` sample matrix (observations as columns)."""
    X = as_samples(samples)
    fmt = fmt or detect_format(path)
    if fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(np.array(X.shape, dtype=_HEADER).tobytes())
            fh.write(np.asarray(X, dtype=_PAYLOAD).tobytes(order="F"))
    elif fmt == "csv":
        hdr = ",".join(f"x{i}" for i in range(X.shape[0])) if header else ""
        np.savetxt(path, X.T, delimiter=",", fmt=_FMT, header=hdr, comments="")
    else:
        raise ValueError(f"unknown sample format {fmt!r}")


def _is_header(line: str) -> bool:
    try:
        [float(tok) for tok in line.strip().split(",")]
    except ValueError:
        return True
    return False


def read_samples(path: PathLike, fmt: Optional[str] = None) -> np.ndarray:
    """Read a whole sample file into an ``n x p`` matrix."""
    fmt = fmt or detect_format(path)
    if fmt == "bin":
        with open(path, "rb") as fh:
            n, p = np.frombuffer(fh.read(16), dtype=_HEADER)
            payload = np.frombuffer(fh.read(), dtype=_PAYLOAD)
        if payload.size != n * p:
            raise ValueError(f"{path}: expected {n * p} values, found {payload.size}")
        return payload.reshape((int(n), int(p)), order="F").copy()
    with open(path) as fh:
        first = fh.readline()
        skip = 1 if first and _is_header(first) else 0
    rows = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    return rows.T.copy()


def stream_from_file(path: PathLike, b: int, fmt: Optional[str] = None) -> SampleStream:
    """Stream batches of ``b`` observations from a sample file.

    The file is read incrementally; a trailing partial batch is dropped.
    """
    fmt = fmt or detect_format(path)
    if fmt == "bin":
        with open(path, "rb") as fh:
            n, p = (int(v) for v in np.frombuffer(fh.read(16), dtype=_HEADER))
        payload = np.memmap(path, dtype=_PAYLOAD, mode="r", offset=16, shape=(n * p,))
        cursor = 0

        def source(width: int) -> np.ndarray:
            nonlocal cursor
            stop = min(cursor + width, p)
            block = np.array(payload[cursor * n:stop * n]).reshape((n, stop - cursor), order="F")
            cursor = stop
            return block

        return SampleStream(source, n, b, p // b)

    fh = open(path)
    first = fh.readline()
    if first and _is_header(first):
        first = fh.readline()
    if not first.strip():
        fh.close()
        raise ValueError(f"{path}: no observations")
    n = len(first.split(","))
    pending = [first]

    def source(width: int) -> np.ndarray:
        lines = pending[:width]
        del pending[:len(lines)]
        lines += list(islice(fh, width - len(lines)))
        lines = [ln for ln in lines if ln.strip()]
        if len(lines) < width:
            fh.close()
        if not lines:
            return np.empty((n, 0))
        return np.loadtxt(io.StringIO("".join(lines)), delimiter=",", ndmin=2).T

    # Row count is unknown without a full pass; underrun is detected on read.
    return SampleStream(source, n, b, None)


# -- bases and cores ----------------------------------------------------------


def write_basis(path: PathLike, Q) -> None:
    np.savetxt(path, np.asarray(Q, dtype=np.float64), delimiter=",", fmt=_FMT)


def read_basis(path: PathLike) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def write_core(path: PathLike, core: SymTensor) -> None:
    np.savetxt(path, matricize(core), delimiter=",", fmt=_FMT)


def read_core(path: PathLike, order: Optional[int] = None) -> SymTensor:
    """Read an unfolded core; ``order`` is required when ``r == 1``."""
    unfolded = np.loadtxt(path, delimiter=",", ndmin=2)
    r, cols = unfolded.shape
    if order is None:
        if r == 1:
            raise ValueError("order is ambiguous for a rank-1 core; pass it explicitly")
        order = 1 + int(round(np.log(cols) / np.log(r)))
    return SymTensor(unfolded.reshape((r,) * order, order="F"))


# -- sidecars -----------------------------------------------------------------


def truth_path(sample_path: PathLike) -> Path:
    return Path(str(sample_path) + ".truth.json")


def write_json(path: PathLike, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def read_json(path: PathLike) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_text(path: PathLike, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)
