"""Deterministic support reduction for PSD sign-tensor covers.

The cover matrix ``M = sum y_U S_U`` is whitened to the identity on its range,
and each term is augmented with one extra coordinate carrying its share of
the cost.  Two-sided barrier selection (upper and lower potentials) then picks
a short reweighted subsequence whose sum has condition number at most
``1 + eps_s``.  Rescaling so the whitened block dominates the identity gives
a cover of ``M`` (hence of anything ``M`` covers) at cost at most
``(1 + eps_s)`` times the input cost.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cover import Cover
from .cones import lambda_min, sign_vectors

C_S = 40.0


class SparsifyError(RuntimeError):
    pass


@dataclass(frozen=True)
class SparsifyConfig:
    eps_s: float
    tol: float = 1e-8
    support_constant: float = C_S
    skip_if_sparse: bool = True  # return covers already within the bound unchanged

    def __post_init__(self):
        if not 0 < self.eps_s < 1:
            raise ValueError(f"eps_s must lie in (0, 1), got {self.eps_s}")
        if not self.support_constant > 0:
            raise ValueError("support_constant must be positive")


def support_bound(m: int, eps_s: float, constant: float = C_S) -> int:
    return int(math.floor(constant * m / eps_s ** 2))


def barrier_q(eps_s: float) -> float:
    """q with ((sqrt q + 1) / (sqrt q - 1))^2 = 1 + eps_s."""
    r = math.sqrt(1.0 + eps_s)
    return ((r + 1.0) / (r - 1.0)) ** 2


def barrier_weights(U: np.ndarray, c: np.ndarray, eps_s: float) -> np.ndarray:
    """Sparse t >= 0 with sum t_i diag(u_i u_i^T, c_i) well conditioned.

    Requires sum u_i u_i^T = I_r and sum c_i = 1 (rows of ``U`` are the u_i).
    The returned weights satisfy lambda_max / lambda_min <= 1 + eps_s for the
    augmented sum and have at most ceil(q (r + 1)) nonzeros.
    """
    N, r = U.shape
    D = r + 1
    q = barrier_q(eps_s)
    sq = math.sqrt(q)
    dL, dU = 1.0, (sq + 1.0) / (sq - 1.0)
    eL, eU = 1.0 / sq, (sq - 1.0) / (q + sq)
    lo, up = -D / eL, D / eU
    steps = math.ceil(q * D)
    A = np.zeros((D, D))
    t = np.zeros(N)
    cc = np.asarray(c, dtype=float)
    for _ in range(steps):
        lo2, up2 = lo + dL, up + dU
        Ia = np.eye(D)
        Ru = np.linalg.inv(up2 * Ia - A)
        Rl = np.linalg.inv(A - lo2 * Ia)
        phi_u = np.trace(np.linalg.inv(up * Ia - A)) - np.trace(Ru)
        phi_l = np.trace(Rl) - np.trace(np.linalg.inv(A - lo * Ia))
        Ru2, Rl2 = Ru @ Ru, Rl @ Rl
        # B_i . X = u_i^T X[:r,:r] u_i + c_i X[r, r]
        quad = lambda X: ((U @ X[:r, :r]) * U).sum(axis=1) + cc * X[r, r]
        up_val = quad(Ru2) / phi_u + quad(Ru)
        lo_val = quad(Rl2) / phi_l - quad(Rl)
        gap = lo_val - up_val
        ok = gap >= -1e-12 * np.maximum(1.0, np.abs(lo_val))
        if not ok.any():
            raise SparsifyError("barrier selection stalled: no admissible term")
        i = int(np.flatnonzero(ok)[np.argmax(gap[ok])])
        hi = max(lo_val[i], up_val[i])
        inv_t = 0.5 * (up_val[i] + hi)
        if not inv_t > 0:
            raise SparsifyError("barrier selection produced a nonpositive step")
        step = 1.0 / inv_t
        t[i] += step
        A[:r, :r] += step * np.outer(U[i], U[i])
        A[r, r] += step * cc[i]
        lo, up = lo2, up2
    return t


def sparsify_cover(cover: Cover, Z, cfg: SparsifyConfig) -> Cover:
    """Cover with support <= support_constant * m / eps_s^2 and cost <= (1+eps_s) cost."""
    m = cover.m
    Z = 0.5 * (np.asarray(Z, dtype=float) + np.asarray(Z, dtype=float).T)
    M = cover.matrix() if cover.size else np.zeros((m, m))
    scale = max(1.0, float(np.abs(Z).max()))
    if cover.size == 0 or lambda_min(M - Z) < -cfg.tol * scale:
        raise SparsifyError("input cover is not feasible for Z")
    bound = support_bound(m, cfg.eps_s, cfg.support_constant)
    if cover.size <= bound and cfg.skip_if_sparse:
        return cover
    lam, Q = np.linalg.eigh(M)
    keep = lam > 1e-10 * lam[-1]
    P = Q[:, keep] / np.sqrt(lam[keep])  # M^{+1/2} in range coordinates
    S = sign_vectors(cover.masks, m)
    U = np.sqrt(cover.weights)[:, None] * (S @ P)
    c = cover.weights / cover.cost
    t = barrier_weights(U, c, cfg.eps_s)
    sel = np.flatnonzero(t > 0)
    Ublock = (U[sel].T * t[sel]) @ U[sel]
    low = float(np.linalg.eigvalsh(Ublock)[0])
    if not low > 0:
        raise SparsifyError("barrier selection lost rank")
    w = cover.weights[sel] * t[sel] / low
    out = Cover(cover.masks[sel], w, m, dict(cover.meta, sparsified=True))
    # absorb round-off from the whitening
    for _ in range(100):
        if lambda_min(out.matrix() - M) >= 0:
            break
        out = out.scaled(1 + 1e-9)
    if out.size > bound:
        raise SparsifyError(f"selected {out.size} cuts, above the bound {bound}")
    return out
