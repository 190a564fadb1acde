"""Double-double reference products and error metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

__all__ = ["EPS", "ErrorReport", "multiply_reference", "compare", "effective_gflops",
           "max_norm"]

EPS = 2.0 ** -53
"""Unit roundoff of IEEE double precision."""

_SPLIT = 134217729.0  # 2**27 + 1


@numba.njit(inline="always")
def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@numba.njit(inline="always")
def _fast_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


@numba.njit(inline="always")
def _two_prod(a, b):
    p = a * b
    t = _SPLIT * a
    ah = t - (t - a)
    al = a - ah
    t = _SPLIT * b
    bh = t - (t - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@numba.njit(cache=True)
def _dd_matmul(a, b, hi, lo):
    m, k = a.shape
    n = b.shape[1]
    for i in range(m):
        for p in range(k):
            x = a[i, p]
            for j in range(n):
                ph, pl = _two_prod(x, b[p, j])
                sh, sl = _two_sum(hi[i, j], ph)
                th, tl = _two_sum(lo[i, j], pl)
                sl += th
                sh, sl = _fast_two_sum(sh, sl)
                sl += tl
                hi[i, j], lo[i, j] = _fast_two_sum(sh, sl)


def multiply_reference(a, b):
    """Classical product accumulated in double-double arithmetic.

    Returns ``(hi, lo)`` with ``hi + lo`` approximating ``a @ b`` to about
    106 significant bits (barring overflow in the splitting step).
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    hi = np.zeros((a.shape[0], b.shape[1]))
    lo = np.zeros_like(hi)
    _dd_matmul(a, b, hi, lo)
    return hi, lo


def max_norm(x):
    x = np.asarray(x)
    return float(np.abs(x).max()) if x.size else 0.0


@dataclass
class ErrorReport:
    max_abs_err: float
    max_rel_err: float
    zero_ref_count: int
    bound: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def within_bound(self):
        return self.bound is None or self.max_abs_err <= self.bound


def compare(computed, reference, bound=None, **meta):
    """Error of ``computed`` against a ``(hi, lo)`` reference.

    The difference is formed in double-double and rounded once. Entries whose
    reference is exactly zero are left out of the relative error and counted
    in ``zero_ref_count``.
    """
    hi, lo = reference
    computed = np.asarray(computed, dtype=np.float64)
    if computed.shape != hi.shape:
        raise ValueError(f"shape mismatch: {computed.shape} vs {hi.shape}")
    s = computed - hi
    bb = s - computed
    e = (computed - (s - bb)) + (-hi - bb)
    diff = np.abs(s + (e - lo))
    zero = (hi == 0) & (lo == 0)
    ref = np.abs(hi + lo)
    rel = diff[~zero] / ref[~zero]
    return ErrorReport(
        max_abs_err=float(diff.max()) if diff.size else 0.0,
        max_rel_err=float(rel.max()) if rel.size else 0.0,
        zero_ref_count=int(zero.sum()),
        bound=bound,
        meta=meta,
    )


def effective_gflops(m, k, n, seconds):
    """Classical-equivalent rate (2mkn - mn) / seconds * 1e-9."""
    if seconds <= 0:
        raise ValueError("elapsed time must be positive")
    return (2 * m * k * n - m * n) / seconds * 1e-9
