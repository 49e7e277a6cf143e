"""Cone pairs (Dist, Cov), the constraint map A and its adjoint, order tests."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .instances import CspInstance, CutSet, constraint_matrix

DEFAULT_TOL = 1e-8


class DistKind(str, enum.Enum):
    PSD = "PSD"
    PSD_TRIANGLE = "PSD_TRIANGLE"


class CovKind(str, enum.Enum):
    FULL_PSD = "FULL_PSD"
    POLYHEDRAL = "POLYHEDRAL"


class ConeError(ValueError):
    pass


def sym(M, name: str = "matrix", atol: float = 1e-12) -> np.ndarray:
    """Validate a square symmetric matrix and return its exact symmetrisation."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConeError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ConeError(f"{name} has non-finite entries")
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    if np.abs(M - M.T).max(initial=0.0) > atol * scale:
        raise ConeError(f"{name} is not symmetric")
    return 0.5 * (M + M.T)


# -- triangle family -----------------------------------------------------

@dataclass(frozen=True)
class TriangleFamily:
    """The Delta_{+-i,+-j} family on n variables, as index/sign arrays.

    <Delta_{si,i,sj,j}, Y> = Y_00 + si*Y_0i + sj*Y_0j + si*sj*Y_ij.
    """

    si: np.ndarray
    i: np.ndarray
    sj: np.ndarray
    j: np.ndarray

    @classmethod
    def build(cls, n: int) -> "TriangleFamily":
        rows = []
        for a in range(1, n + 1):
            for b in range(a, n + 1):
                for s, t in ((-1, -1), (-1, 1), (1, -1), (1, 1)):
                    if a == b and (s, t) == (1, -1):
                        continue
                    rows.append((s, a, t, b))
        arr = np.array(rows, dtype=np.int64).reshape(-1, 4)
        return cls(arr[:, 0].astype(float), arr[:, 1], arr[:, 2].astype(float), arr[:, 3])

    def __len__(self):
        return len(self.i)

    def values(self, Y: np.ndarray) -> np.ndarray:
        return (Y[0, 0] + self.si * Y[0, self.i] + self.sj * Y[0, self.j]
                + self.si * self.sj * Y[self.i, self.j])

    def matrix(self, k: int, m: int) -> np.ndarray:
        u = np.zeros(m)
        v = np.zeros(m)
        u[0] += 1.0
        v[0] += 1.0
        u[self.i[k]] += self.si[k]
        v[self.j[k]] += self.sj[k]
        return 0.5 * (np.outer(u, v) + np.outer(v, u))

    def combine(self, lam: np.ndarray, m: int, idx=None) -> np.ndarray:
        """sum_k lam_k Delta_k over ``idx`` (all members by default)."""
        if idx is None:
            idx = np.arange(len(self))
        idx = np.asarray(idx, dtype=np.int64)
        lam = np.asarray(lam, dtype=float)
        out = np.zeros((m, m))
        si, sj, ii, jj = self.si[idx], self.sj[idx], self.i[idx], self.j[idx]
        out[0, 0] = lam.sum()
        # off-diagonal parts, symmetrised: 0.5*(s_i e_0 e_i^T + ...) etc
        np.add.at(out, (np.zeros_like(ii), ii), 0.5 * lam * si)
        np.add.at(out, (ii, np.zeros_like(ii)), 0.5 * lam * si)
        np.add.at(out, (np.zeros_like(jj), jj), 0.5 * lam * sj)
        np.add.at(out, (jj, np.zeros_like(jj)), 0.5 * lam * sj)
        np.add.at(out, (ii, jj), 0.5 * lam * si * sj)
        np.add.at(out, (jj, ii), 0.5 * lam * si * sj)
        return out

    def svec_rows(self, m: int, idx) -> np.ndarray:
        return np.array([_kernels.svec(self.matrix(k, m)) for k in idx]).reshape(len(idx), -1)


# -- cone specification --------------------------------------------------

@dataclass(frozen=True)
class ConeSpec:
    dist_kind: DistKind
    cov_kind: CovKind
    dim: int
    a_flat: sp.csr_matrix | None = None  # d x m*m, row f is vec(A_f)
    kappa: float | None = None
    csp: tuple | None = field(default=None, repr=False)  # (ci, cj, tables) when CSP-encoded

    def __post_init__(self):
        object.__setattr__(self, "dist_kind", DistKind(self.dist_kind))
        object.__setattr__(self, "cov_kind", CovKind(self.cov_kind))
        if self.dim < 2:
            raise ConeError("matrix order must be at least 2")
        if self.cov_kind is CovKind.POLYHEDRAL:
            if self.a_flat is None or self.a_flat.shape[0] == 0:
                raise ConeError("a polyhedral cone needs at least one constraint matrix")
            if self.a_flat.shape[1] != self.dim * self.dim:
                raise ConeError("constraint matrices do not match the matrix order")
            norms = np.sqrt(np.asarray(self.a_flat.multiply(self.a_flat).sum(axis=1))).ravel()
            if np.any(norms == 0):
                raise ConeError(f"constraint matrix {int(np.argmin(norms))} is zero")
            traces = self.adjoint_identity()
            if self.kappa is None:
                object.__setattr__(self, "kappa", float(traces.min()))
            if not self.kappa > 0:
                raise ConeError("A*(I) must be bounded below by a positive kappa")
            if np.any(traces < self.kappa * (1 - 1e-12)):
                raise ConeError(f"A*(I) >= {self.kappa} fails")
        elif self.a_flat is not None:
            raise ConeError("FULL_PSD cones carry no constraint map")

    @property
    def m(self) -> int:
        return self.dim

    @property
    def d(self) -> int:
        self._need_poly()
        return self.a_flat.shape[0]

    @property
    def polyhedral(self) -> bool:
        return self.cov_kind is CovKind.POLYHEDRAL

    @property
    def triangles(self) -> TriangleFamily | None:
        if self.dist_kind is not DistKind.PSD_TRIANGLE:
            return None
        return _triangles(self.dim - 1)

    @property
    def a_matrices(self) -> list[np.ndarray]:
        self._need_poly()
        return [self.a_flat[f].toarray().reshape(self.dim, self.dim) for f in range(self.d)]

    def _need_poly(self):
        if self.cov_kind is not CovKind.POLYHEDRAL:
            raise ConeError("operation needs a polyhedral cone (constraint map A)")

    def adjoint_identity(self) -> np.ndarray:
        return np.asarray(self.a_flat[:, :: self.dim + 1].sum(axis=1)).ravel()

    @classmethod
    def from_matrices(cls, mats: Sequence[np.ndarray], dist_kind=DistKind.PSD_TRIANGLE,
                      kappa: float | None = None) -> "ConeSpec":
        mats = [sym(A, f"A[{f}]") for f, A in enumerate(mats)]
        if not mats:
            raise ConeError("need at least one constraint matrix")
        m = mats[0].shape[0]
        if any(A.shape != (m, m) for A in mats):
            raise ConeError("constraint matrices must share one order")
        flat = sp.csr_matrix(np.array([A.ravel() for A in mats]))
        return cls(dist_kind, CovKind.POLYHEDRAL, m, flat, kappa)

    @classmethod
    def full_psd(cls, m: int, dist_kind=DistKind.PSD) -> "ConeSpec":
        return cls(dist_kind, CovKind.FULL_PSD, m)

    @classmethod
    def from_instance(cls, inst: CspInstance, dist_kind=DistKind.PSD_TRIANGLE) -> "ConeSpec":
        m = inst.m
        rows, cols, vals = [], [], []
        for f, c in enumerate(inst.constraints):
            A = constraint_matrix(c, inst.n)
            nz = np.flatnonzero(A.ravel())
            rows.extend([f] * len(nz))
            cols.extend(nz.tolist())
            vals.extend(A.ravel()[nz].tolist())
        flat = sp.csr_matrix((vals, (rows, cols)), shape=(inst.d, m * m))
        # every cell of a truth table is hit by exactly 1/4 of the assignments
        return cls(dist_kind, CovKind.POLYHEDRAL, m, flat, 0.25, inst.arrays())


_TRI_CACHE: dict[int, TriangleFamily] = {}


def _triangles(n: int) -> TriangleFamily:
    fam = _TRI_CACHE.get(n)
    if fam is None:
        fam = _TRI_CACHE[n] = TriangleFamily.build(n)
    return fam


# -- primitives ----------------------------------------------------------

def sign_tensor(u: CutSet) -> np.ndarray:
    s = u.sign_vector()
    return np.outer(s, s)


def sign_vectors(masks, m: int) -> np.ndarray:
    masks = np.asarray(masks, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(m, dtype=np.int64)[None, :]) & 1
    return 2.0 * bits - 1.0


def apply_adjoint(spec: ConeSpec, Y) -> np.ndarray:
    """(<A_f, Y>)_f."""
    spec._need_poly()
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (spec.dim, spec.dim):
        raise ConeError(f"expected a {spec.dim}x{spec.dim} matrix, got {Y.shape}")
    return np.asarray(spec.a_flat @ Y.ravel()).ravel()


def apply_map(spec: ConeSpec, w) -> np.ndarray:
    """A(w) = sum_f w_f A_f."""
    spec._need_poly()
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape[0] != spec.d:
        raise ConeError(f"expected {spec.d} weights, got {w.shape[0]}")
    M = np.asarray(spec.a_flat.T @ w).reshape(spec.dim, spec.dim)
    return 0.5 * (M + M.T)


def cut_coverage(spec: ConeSpec, masks) -> np.ndarray:
    """K x d matrix of <A_f, S_U> for canonical cut masks."""
    spec._need_poly()
    masks = np.asarray(masks, dtype=np.int64).reshape(-1)
    if spec.csp is not None:
        return _kernels.satisfaction_matrix(masks, *spec.csp).astype(float)
    S = sign_vectors(masks, spec.dim)
    outer = np.einsum("ki,kj->kij", S, S).reshape(len(masks), -1)
    return np.asarray((spec.a_flat @ outer.T).T)


def psd_project(M) -> np.ndarray:
    M = sym(M)
    lam, Q = np.linalg.eigh(M)
    P = (Q * np.maximum(lam, 0.0)) @ Q.T
    return 0.5 * (P + P.T)


def lambda_min(M) -> float:
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


@dataclass(frozen=True)
class DistReport:
    min_eigenvalue: float
    worst_triangle_violation: float | None
    member: bool


def check_dist_membership(spec: ConeSpec, Y, tol: float = DEFAULT_TOL) -> DistReport:
    Y = sym(Y, "Y")
    if Y.shape[0] != spec.dim:
        raise ConeError("dimension mismatch")
    lam = lambda_min(Y)
    tri = None
    member = lam >= -tol
    fam = spec.triangles
    if fam is not None:
        tri = float(fam.values(Y).min())
        member = member and tri >= -tol
    return DistReport(lam, tri, bool(member))


@dataclass(frozen=True)
class OrderReport:
    holds: bool
    residual: float


def check_cover_order(spec: ConeSpec, X, Y, tol: float = DEFAULT_TOL) -> OrderReport:
    """Is X below Y in the order of the lifted dual of Cov."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape != (spec.dim, spec.dim) or Y.shape != X.shape:
        raise ConeError("dimension mismatch")
    if spec.polyhedral:
        res = float(apply_adjoint(spec, Y - X).min())
    else:
        res = lambda_min(Y - X)
    return OrderReport(res >= -tol, res)
