"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The backend is chosen once at import time. Set ``GROTHCOVER_DISABLE_NUMBA=1``
to force the numpy path (it is also used when numba cannot be imported).
Both backends return identical results for identical inputs up to round-off;
random draws are always produced by numpy generators outside the kernels so
that seeded runs do not depend on the backend.
"""
from __future__ import annotations

import os

import numpy as np

from . import _numpy

_FLAG = "GROTHCOVER_DISABLE_NUMBA"


def _want_numba() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() not in {"1", "true", "yes", "on"}


_impl = _numpy
BACKEND = "numpy"
if _want_numba():
    try:
        from . import _numba as _impl  # noqa: F811
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _impl = _numpy


def backend_module(name: str | None = None):
    """Return the kernel module for ``name`` ('numba', 'numpy') or the active one."""
    if name is None:
        return _impl
    if name == "numpy":
        return _numpy
    if name == "numba":
        from . import _numba
        return _numba
    raise ValueError(f"unknown kernel backend {name!r}")


def svec(M):
    return _impl.svec(np.ascontiguousarray(M, dtype=float))


def smat(v, m):
    return _impl.smat(np.ascontiguousarray(v, dtype=float), int(m))


def project_cone(v, blocks, n_nonneg):
    return _impl.project_cone(np.ascontiguousarray(v, dtype=float),
                              np.asarray(blocks, dtype=np.int64), int(n_nonneg))


def admm_loop(A, b, c, Minv, blocks, n_nonneg, x, y, s, mu, max_iter, tol, check_every=25):
    return _impl.admm_loop(
        np.ascontiguousarray(A, dtype=float), np.ascontiguousarray(b, dtype=float),
        np.ascontiguousarray(c, dtype=float), np.ascontiguousarray(Minv, dtype=float),
        np.asarray(blocks, dtype=np.int64), int(n_nonneg),
        np.ascontiguousarray(x, dtype=float), np.ascontiguousarray(y, dtype=float),
        np.ascontiguousarray(s, dtype=float), float(mu), int(max_iter), float(tol),
        int(check_every),
    )


def hyperplane_masks(G, B):
    return _impl.hyperplane_masks(np.ascontiguousarray(G, dtype=float),
                                  np.ascontiguousarray(B, dtype=float))


def satisfaction_matrix(masks, ci, cj, tables):
    return _impl.satisfaction_matrix(np.asarray(masks, dtype=np.int64),
                                     np.asarray(ci, dtype=np.int64),
                                     np.asarray(cj, dtype=np.int64),
                                     np.asarray(tables, dtype=np.int8))


def coverage_counts(masks, counts, ci, cj, tables):
    return _impl.coverage_counts(np.asarray(masks, dtype=np.int64),
                                 np.asarray(counts, dtype=np.int64),
                                 np.asarray(ci, dtype=np.int64),
                                 np.asarray(cj, dtype=np.int64),
                                 np.asarray(tables, dtype=np.int8))


def max_quadratic_cut(W):
    """(value, canonical mask) maximising s^T W s; the value is recomputed exactly."""
    W = np.ascontiguousarray(W, dtype=float)
    _, mask = _impl.max_quadratic_cut(W)
    mask = int(mask)
    m = W.shape[0]
    s = np.array([1.0 if (mask >> i) & 1 else -1.0 for i in range(m)])
    return float(s @ W @ s), mask
