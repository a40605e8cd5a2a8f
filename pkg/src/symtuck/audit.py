"""Peak-allocation audit built on :mod:`tracemalloc` (numpy reports its buffers there)."""

from __future__ import annotations

import tracemalloc


class AllocationAudit:
    """Context manager recording the peak traced allocation inside the block.

    >>> with AllocationAudit() as audit:
    ...     buf = bytearray(10**6)
    >>> audit.peak_bytes >= 10**6
    True
    """

    def __init__(self):
        self.peak_bytes = 0
        self._started = False

    def __enter__(self) -> "AllocationAudit":
        self._started = not tracemalloc.is_tracing()
        if self._started:
            tracemalloc.start()
        tracemalloc.reset_peak()
        self._base = tracemalloc.get_traced_memory()[0]
        return self

    def __exit__(self, *exc) -> None:
        self.peak_bytes = max(0, tracemalloc.get_traced_memory()[1] - self._base)
        if self._started:
            tracemalloc.stop()

    def allocated_at_least(self, nbytes: int) -> bool:
        return self.peak_bytes >= nbytes


def dense_tensor_bytes(n: int, d: int, itemsize: int = 8) -> int:
    """Size of one dense ``n**d`` float64 buffer."""
    return n**d * itemsize
