"""numba-compiled twins of :mod:`grothcover._kernels._numpy`."""
from __future__ import annotations

import numpy as np
from numba import njit

_SQRT2 = np.sqrt(2.0)
_OPTS = dict(cache=True, nogil=True)


@njit(**_OPTS)
def svec(M):
    m = M.shape[0]
    out = np.empty(m * (m + 1) // 2)
    k = 0
    for i in range(m):
        out[k] = M[i, i]
        k += 1
        for j in range(i + 1, m):
            out[k] = M[i, j] * _SQRT2
            k += 1
    return out


@njit(**_OPTS)
def smat(v, m):
    M = np.empty((m, m))
    k = 0
    for i in range(m):
        M[i, i] = v[k]
        k += 1
        for j in range(i + 1, m):
            M[i, j] = v[k] / _SQRT2
            M[j, i] = M[i, j]
            k += 1
    return M


@njit(**_OPTS)
def project_cone(v, blocks, n_nonneg):
    out = np.empty_like(v)
    off = 0
    for bi in range(blocks.shape[0]):
        m = blocks[bi]
        k = m * (m + 1) // 2
        M = smat(v[off:off + k], m)
        lam, Q = np.linalg.eigh(M)
        P = np.zeros((m, m))
        for r in range(m):
            if lam[r] > 0.0:
                for i in range(m):
                    qi = Q[i, r] * lam[r]
                    for j in range(m):
                        P[i, j] += qi * Q[j, r]
        out[off:off + k] = svec(P)
        off += k
    for i in range(n_nonneg):
        val = v[off + i]
        out[off + i] = val if val > 0.0 else 0.0
    return out


@njit(**_OPTS)
def admm_loop(A, b, c, Minv, blocks, n_nonneg, x, y, s, mu,
              max_iter, tol, check_every):
    bnorm = 1.0 + np.linalg.norm(b)
    cnorm = 1.0 + np.linalg.norm(c)
    At = np.ascontiguousarray(A.T)
    pinf = np.inf
    dinf = np.inf
    gap = np.inf
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


@njit(**_OPTS)
def hyperplane_masks(G, B):
    T, m = G.shape
    masks = np.empty(T, dtype=np.int64)
    full = (np.int64(1) << m) - 1
    for t in range(T):
        mask = np.int64(0)
        for i in range(m):
            acc = 0.0
            for k in range(m):
                acc += G[t, k] * B[k, i]
            if acc >= 0.0:
                mask |= np.int64(1) << i
        if (mask & 1) == 0:
            mask ^= full
        masks[t] = mask
    return masks


@njit(**_OPTS)
def satisfaction_matrix(masks, ci, cj, tables):
    K = masks.shape[0]
    d = ci.shape[0]
    sat = np.empty((K, d), dtype=np.int8)
    for k in range(K):
        mk = masks[k]
        for f in range(d):
            xi = (mk >> ci[f]) & 1
            xj = (mk >> cj[f]) & 1
            sat[k, f] = tables[f, 2 * xi + xj]
    return sat


@njit(**_OPTS)
def coverage_counts(masks, counts, ci, cj, tables):
    d = ci.shape[0]
    out = np.zeros(d, dtype=np.int64)
    for k in range(masks.shape[0]):
        mk = masks[k]
        ck = counts[k]
        for f in range(d):
            xi = (mk >> ci[f]) & 1
            xj = (mk >> cj[f]) & 1
            if tables[f, 2 * xi + xj]:
                out[f] += ck
    return out


@njit(**_OPTS)
def max_quadratic_cut(W):
    """Gray-code walk over canonical sign vectors keeping g = W s up to date."""
    m = W.shape[0]
    s = -np.ones(m)
    s[0] = 1.0
    g = W @ s
    val = s @ g
    best_val = val
    best_idx = np.int64(0)
    idx = np.int64(0)
    total = np.int64(1) << (m - 1)
    for step in range(1, total):
        # flip the lowest set bit of step (Gray code), shifted past bit 0
        k = 0
        tmp = step
        while (tmp & 1) == 0:
            tmp >>= 1
            k += 1
        p = k + 1
        sp = s[p]
        # s_p -> -s_p: val changes by -4 s_p (g_p - W_pp s_p)
        val += -4.0 * sp * (g[p] - W[p, p] * sp)
        s[p] = -sp
        for i in range(m):
            g[i] -= 2.0 * sp * W[i, p]
        idx ^= np.int64(1) << k
        if val > best_val or (val == best_val and idx < best_idx):
            best_val = val
            best_idx = idx
    return best_val, (best_idx << 1) | 1
