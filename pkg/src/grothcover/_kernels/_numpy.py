"""Vectorised numpy implementations of the hot loops.

These are the reference path; ``_numba`` mirrors every function here with
explicit loops and must agree to floating-point round-off.
"""
from __future__ import annotations

import numpy as np

SQRT2 = np.sqrt(2.0)


# -- svec / smat ---------------------------------------------------------

def _triu(m):
    return np.triu_indices(m)


def svec(M):
    m = M.shape[0]
    iu, ju = _triu(m)
    out = M[iu, ju].astype(float)
    out[iu != ju] *= SQRT2
    return out


def smat(v, m):
    iu, ju = _triu(m)
    vals = v.copy()
    vals[iu != ju] /= SQRT2
    M = np.zeros((m, m))
    M[iu, ju] = vals
    M[ju, iu] = vals
    return M


def project_cone(v, blocks, n_nonneg):
    """Euclidean projection onto (PSD blocks in svec form) x R_+^n_nonneg."""
    out = np.empty_like(v)
    off = 0
    for m in blocks:
        k = m * (m + 1) // 2
        M = smat(v[off:off + k], m)
        lam, Q = np.linalg.eigh(M)
        lam = np.maximum(lam, 0.0)
        out[off:off + k] = svec((Q * lam) @ Q.T)
        off += k
    out[off:off + n_nonneg] = np.maximum(v[off:off + n_nonneg], 0.0)
    return out


# -- ADMM on the dual (Wen-Goldfarb-Yin) ---------------------------------

def admm_loop(A, b, c, Minv, blocks, n_nonneg, x, y, s, mu,
              max_iter, tol, check_every):
    """Alternating-direction augmented Lagrangian iterations.

    Solves ``min <c,x> : A x = b, x in K`` together with its dual
    ``max <b,y> : A^T y + s = c, s in K``.  Returns the final iterates,
    the penalty, the iteration count and the last residual triple.
    """
    bnorm = 1.0 + np.linalg.norm(b)
    cnorm = 1.0 + np.linalg.norm(c)
    At = A.T
    pinf = dinf = gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        rhs = mu * (b - A @ x) - A @ (s - c)
        y = Minv @ rhs
        Aty = At @ y
        v = c - Aty - mu * x
        s = project_cone(v, blocks, n_nonneg)
        x = (s - v) / mu
        if it % check_every == 0:
            pinf = np.linalg.norm(A @ x - b) / bnorm
            dinf = np.linalg.norm(Aty + s - c) / cnorm
            pobj = c @ x
            dobj = b @ y
            gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
            if pinf <= tol and dinf <= tol and gap <= tol:
                break
            if pinf > 5.0 * dinf:
                mu = min(mu * 1.6, 1e6)
            elif dinf > 5.0 * pinf:
                mu = max(mu / 1.6, 1e-6)
    return x, y, s, mu, it, pinf, dinf, gap


# -- rounding ------------------------------------------------------------

def hyperplane_masks(G, B):
    """Canonical cut bitmasks for Gaussian rows ``G`` against the columns of ``B``.

    Bit ``i`` is set iff <b_i, g> >= 0; masks without bit 0 are complemented.
    """
    m = B.shape[1]
    bits = (G @ B) >= 0.0
    weights = np.left_shift(np.int64(1), np.arange(m, dtype=np.int64))
    masks = bits.astype(np.int64) @ weights
    full = (np.int64(1) << m) - 1
    flip = (masks & 1) == 0
    masks[flip] ^= full
    return masks


def satisfaction_matrix(masks, ci, cj, tables):
    """0/1 matrix ``sat[k, f]``: does cut ``masks[k]`` satisfy constraint ``f``.

    ``tables[f]`` holds the truth table indexed by ``2*x_i + x_j``; x_i is
    true iff bit ``i`` is set (bit 0 is always set for canonical masks).
    """
    xi = (masks[:, None] >> ci[None, :]) & 1
    xj = (masks[:, None] >> cj[None, :]) & 1
    cell = 2 * xi + xj
    return tables[np.arange(len(ci))[None, :], cell].astype(np.int8)


def coverage_counts(masks, counts, ci, cj, tables):
    """Per-constraint satisfied-sample totals, sum_k counts[k] * sat[k, f]."""
    sat = satisfaction_matrix(masks, ci, cj, tables)
    return counts.astype(np.int64) @ sat.astype(np.int64)


# -- brute force ---------------------------------------------------------

def max_quadratic_cut(W, chunk=1 << 15):
    """max over sign vectors with s_0 = +1 of s^T W s; returns (value, mask).

    Ties resolve to the smallest canonical mask.
    """
    m = W.shape[0]
    total = 1 << (m - 1)
    best_val = -np.inf
    best_mask = 1
    shifts = np.arange(1, m, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = (idx[:, None] >> (shifts - 1)[None, :]) & 1
        S = np.ones((idx.size, m))
        S[:, 1:] = 2.0 * bits - 1.0
        vals = np.einsum("ti,ij,tj->t", S, W, S)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val = float(vals[k])
            best_mask = int((idx[k] << 1) | 1)
    return best_val, best_mask
