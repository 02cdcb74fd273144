"""Exact Polya-Gamma PG(1, c) sampling.

Wraps the alternating-series rejection kernel; the caller's Generator is
used to seed the kernel stream, so fixed seeds give fixed draw sequences.
"""

from __future__ import annotations

import numpy as np

from . import _kernels as _k


def sample_polya_gamma(c, rng: np.random.Generator, b: int = 1):
    """Draw PG(b=1, c) exactly for scalar or vector c."""
    if b != 1:
        raise NotImplementedError("only PG(1, c) is supported")
    arr = np.atleast_1d(np.asarray(c, dtype=np.float64))
    if not np.all(np.isfinite(arr)):
        raise ValueError("c must be finite")
    _k.seed_rng(int(rng.integers(0, 2**32)))
    out = np.empty_like(arr)
    _k.pg_draw_vec(arr, out)
    return float(out[0]) if np.ndim(c) == 0 else out


def pg_mean(c):
    """E[PG(1, c)] = tanh(c/2) / (2c), with the c -> 0 limit 1/4."""
    c = np.asarray(c, dtype=np.float64)
    out = np.where(np.abs(c) < 1e-8, 0.25, np.tanh(c / 2.0) / np.where(c == 0, 1.0, 2.0 * c))
    return float(out) if out.ndim == 0 else out
