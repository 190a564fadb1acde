"""Matrix files and the random test distributions."""

from __future__ import annotations

import struct

import numpy as np

__all__ = ["DISTRIBUTIONS", "generate", "write_matrix", "read_matrix",
           "write_text_matrix", "read_text_matrix"]

MAGIC = b"FMM1"
_HEADER = struct.Struct("<4sQQ")

DISTRIBUTIONS = ("u01", "u11", "1", "2", "3")


def _uniform(rng, shape, high):
    # entries ~ Uniform(0, high), high given elementwise
    return rng.random(shape) * high


def generate(dist, m, k, n, seed):
    """Random ``(A, B)`` of shapes m x k and k x n.

    ``u01`` (alias ``1``) is Uniform(0, 1) and ``u11`` is Uniform(-1, 1). The
    adversarial distributions use zero-based indices; each N/2 threshold is
    half the length of the indexed axis and the magnitudes use N = k:

    * ``2``: A_ij ~ U(0, 1/N^2) if j > N/2 else U(0, 1);
      B_ij ~ U(0, 1/N^2) if i < N/2 else U(0, 1).
    * ``3``: A_ij ~ U(0, N^2) if i < N/2 and j > N/2 else U(0, 1);
      B_ij ~ U(0, 1/N^2) if j < N/2 else U(0, 1).

    A and B come from two independent PCG64 streams spawned from ``seed``.
    """
    dist = str(dist)
    if dist not in DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {dist!r}")
    if min(m, k, n) < 1:
        raise ValueError("dimensions must be positive")
    ga, gb = (np.random.Generator(np.random.PCG64(s))
              for s in np.random.SeedSequence(seed).spawn(2))
    if dist == "u11":
        return ga.uniform(-1.0, 1.0, (m, k)), gb.uniform(-1.0, 1.0, (k, n))
    if dist in ("u01", "1"):
        return ga.random((m, k)), gb.random((k, n))

    big, small = float(k) ** 2, 1.0 / float(k) ** 2
    half = k / 2
    ia, ja = np.arange(m)[:, None], np.arange(k)[None, :]
    ib, jb = np.arange(k)[:, None], np.arange(n)[None, :]
    if dist == "2":
        ha = np.where(ja > half, small, 1.0) * np.ones((m, 1))
        hb = np.where(ib < half, small, 1.0) * np.ones((1, n))
    else:
        ha = np.where((ia < m / 2) & (ja > half), big, 1.0)
        hb = np.where(jb < n / 2, small, 1.0) * np.ones((k, 1))
    return _uniform(ga, (m, k), ha), _uniform(gb, (k, n), hb)


def write_matrix(path, x):
    """Binary format: magic, u64 rows, u64 cols, row-major little-endian f64."""
    x = np.ascontiguousarray(x, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, x.shape[0], x.shape[1]))
        fh.write(x.tobytes())


def write_text_matrix(path, x):
    np.savetxt(path, np.asarray(x, dtype=np.float64), fmt="%.17g")


def read_text_matrix(path):
    return np.atleast_2d(np.loadtxt(path, dtype=np.float64, ndmin=2))


def read_matrix(path):
    """Read either format; the binary one is recognized by its magic."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if head[:4] != MAGIC:
            return read_text_matrix(path)
        if len(head) < _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        _, rows, cols = _HEADER.unpack(head)
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} values, found {data.size}")
    return data.reshape(rows, cols).astype(np.float64)
