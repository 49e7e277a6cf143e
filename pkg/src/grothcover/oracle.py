"""Small-scale ground truth: brute-force maxq and exact fractional covers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .cones import ConeSpec, apply_map
from .cover import Cover
from .instances import CspInstance, CutSet

PIVOT_TOL = 1e-10
MAX_BRUTE_M = 24
MAX_FEVC_N = 14


class Infeasible(ValueError):
    pass


class Unbounded(ValueError):
    pass


class OracleTooLarge(ValueError):
    pass


@dataclass
class OracleResult:
    value: float
    argopt: object
    method: str


@dataclass
class LPResult:
    x: np.ndarray
    dual: np.ndarray
    value: float
    status: str
    iterations: int


def brute_maxq(spec: ConeSpec | None, W) -> OracleResult:
    """max s^T W s over canonical sign vectors (``W`` may be a weight vector)."""
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        if spec is None:
            raise ValueError("a weight vector needs its cone spec")
        W = apply_map(spec, W)
    m = W.shape[0]
    if m > MAX_BRUTE_M:
        raise OracleTooLarge(f"brute force needs m <= {MAX_BRUTE_M}, got {m}")
    val, mask = _kernels.max_quadratic_cut(0.5 * (W + W.T))
    return OracleResult(val, CutSet(mask, m), "brute_force")


# -- simplex -------------------------------------------------------------

def _simplex(A, b, c, basis, max_iter):
    """Revised simplex with Bland's rule on min c^T x, A x = b, x >= 0."""
    m, n = A.shape
    basis = list(basis)
    it = 0
    while True:
        B = A[:, basis]
        xB = np.linalg.solve(B, b)
        yv = np.linalg.solve(B.T, c[basis])
        red = c - A.T @ yv
        red[basis] = 0.0
        scale = 1.0 + np.abs(c).max(initial=0.0)
        cand = np.flatnonzero(red < -PIVOT_TOL * scale)
        if cand.size == 0:
            return basis, xB, yv, it
        if it >= max_iter:
            raise RuntimeError("simplex iteration limit reached")
        j = int(cand[0])
        d = np.linalg.solve(B, A[:, j])
        pos = np.flatnonzero(d > PIVOT_TOL)
        if pos.size == 0:
            raise Unbounded("LP is unbounded")
        ratios = np.maximum(xB[pos], 0.0) / d[pos]
        rmin = ratios.min()
        tie = pos[ratios <= rmin + PIVOT_TOL * max(1.0, rmin)]
        leave = min(tie, key=lambda r: basis[r])
        basis[leave] = j
        it += 1


def lp_solve(A, b, c, sense, max_iter: int = 100_000) -> LPResult:
    """min c^T x s.t. A x (sense) b, x >= 0; ``sense`` holds '<=', '>=' or '='.

    Returns the primal x, duals (one per row, nonnegative for '>=' rows and
    nonpositive for '<=' rows in this min form) and the optimal value.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    c = np.asarray(c, dtype=float).reshape(-1)
    rows, n = A.shape
    if isinstance(sense, str):
        sense = [sense] * rows
    if len(sense) != rows or b.shape[0] != rows or c.shape[0] != n:
        raise ValueError("inconsistent LP dimensions")
    slack = np.zeros((rows, rows))
    for r, s in enumerate(sense):
        if s == "<=":
            slack[r, r] = 1.0
        elif s == ">=":
            slack[r, r] = -1.0
        elif s not in ("=", "=="):
            raise ValueError(f"unknown sense {s!r}")
    has_slack = np.abs(slack).sum(axis=0) > 0
    S = slack[:, has_slack]
    Af = np.hstack([A, S])
    sign = np.where(b < 0, -1.0, 1.0)
    Af = Af * sign[:, None]
    bf = b * sign
    nf = Af.shape[1]
    # phase 1 with one artificial per row
    A1 = np.hstack([Af, np.eye(rows)])
    c1 = np.concatenate([np.zeros(nf), np.ones(rows)])
    basis, xB, _, it1 = _simplex(A1, bf, c1, range(nf, nf + rows), max_iter)
    if c1[basis] @ xB > 1e-9 * max(1.0, np.abs(bf).max(initial=0.0)):
        raise Infeasible("LP is infeasible")
    # drive artificials out of the basis
    keep_rows = list(range(rows))
    for pos in range(rows):
        if basis[pos] < nf:
            continue
        B = A1[:, basis]
        row = np.linalg.solve(B, A1[:, :nf])[pos]
        nb = [j for j in np.flatnonzero(np.abs(row) > PIVOT_TOL) if j not in basis]
        if nb:
            basis[pos] = int(nb[0])
        else:
            keep_rows.remove(basis[pos] - nf)
    if len(keep_rows) < rows:  # redundant rows
        drop = set(range(rows)) - set(keep_rows)
        basis = [j for j in basis if not (j >= nf and j - nf in drop)]
        Ar, br = Af[keep_rows], bf[keep_rows]
    else:
        Ar, br = Af, bf
    c2 = np.concatenate([c, np.zeros(nf - n)])
    basis, xB, yv, it2 = _simplex(Ar, br, c2, basis, max_iter)
    x = np.zeros(nf)
    x[basis] = np.maximum(xB, 0.0)
    dual = np.zeros(rows)
    dual[keep_rows] = yv
    dual *= sign
    return LPResult(x[:n], dual, float(c @ x[:n]), "optimal", it1 + it2)


def exact_fevc(inst: CspInstance, z=None) -> OracleResult:
    """min <1,y> over y >= 0 on assignments with sum_a y_a val(a) >= z."""
    if inst.n > MAX_FEVC_N:
        raise OracleTooLarge(f"exact fevc needs n <= {MAX_FEVC_N}, got {inst.n}")
    z = inst.weights if z is None else np.asarray(z, dtype=float).reshape(-1)
    m = inst.m
    if not np.any(z > 0):
        return OracleResult(0.0, Cover.empty(m), "lp_simplex")
    masks = np.arange(1, 1 << m, 2, dtype=np.int64)
    sat = _kernels.satisfaction_matrix(masks, *inst.arrays()).astype(float)
    pos = z > 0
    res = lp_solve(sat.T[pos], z[pos], np.ones(len(masks)), ">=")
    sel = res.x > 0
    cov = Cover(masks[sel], res.x[sel], m, dict(method="lp_simplex"))
    return OracleResult(res.value, cov, "lp_simplex")
