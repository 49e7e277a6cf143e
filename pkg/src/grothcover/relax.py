"""Perturbed SDP relaxations and exactly feasible witnesses.

Two directions are supported:

* max direction, ``solve_nu_eps``: given ``W`` (or ``w`` with ``W = A(w)``)
  solve ``nu(W) = max <W, Yh> : diag(Yh) = 1, Yh in Dist`` and its dual
  ``min <1, x> : Diag(x) - W in Dist*``.  The perturbed value is
  ``(1 - eps) nu(W) + eps tr W``, attained by ``Z = (1 - eps) Yh + eps I``.
* cover direction, ``solve_nu_polar_eps``: given ``z`` (or ``Z``) solve
  ``min mu : Y - eps mu I in Dist, diag(Y) = mu 1, Y covers the target``
  together with the dual ``max <z, w>`` over ``(1 - eps)<1,x> + eps tr A(w) <= 1``.

Both are solved in standard conic form by the ADMM kernel, with the Delta
family of Dist_Delta handled by lazy constraint generation.  Raw iterates
are then repaired into exactly feasible witnesses; the repair cost is
charged to the gap budget sigma.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import _kernels
from .cones import (ConeError, ConeSpec, CovKind, apply_adjoint, apply_map, lambda_min,
                    psd_project, sym)

log = logging.getLogger(__name__)


class NonConvergence(RuntimeError):
    """The solver or the repair step could not meet the requested accuracy."""

    def __init__(self, msg, **diag):
        super().__init__(msg)
        self.diagnostics = diag


class DegenerateInstance(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    eps: float = 0.05
    sigma_budget: float = 0.05
    tol: float = 1e-7
    max_iter: int = 50_000
    margin: float = 1e-9
    lazy_triangles: bool = True

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if not 0 < self.sigma_budget < 1:
            raise ValueError(f"sigma_budget must lie in (0, 1), got {self.sigma_budget}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass
class DualWitness:
    mu: float
    Y: np.ndarray


@dataclass
class PrimalWitness:
    """(rho, x) with Diag(x) - W - sum lam_k Delta_k PSD; ``tri`` indexes the Delta family."""

    rho: float
    x: np.ndarray
    lam: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tri: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


@dataclass
class RelaxResult:
    direction: str  # "max" or "cover"
    primal: PrimalWitness
    dual: DualWitness
    W: np.ndarray
    Z: np.ndarray | None
    w: np.ndarray | None = None
    z: np.ndarray | None = None
    eps: float = 0.0
    gap: float = 0.0  # 1 - <W,Z> / (rho * mu)
    inner: float = 0.0  # <W, Z>
    Y_hat: np.ndarray | None = None  # unperturbed maximiser (max direction)
    nu_bounds: tuple[float, float] | None = None
    iterations: int = 0
    charged: float = 0.0


@dataclass
class RawSolution:
    """Unrepaired solver output.

    ``X`` is the PSD block: Yh (max) or Y - eps mu I (cover).  ``x`` and ``lam``
    are the dual diagonal and triangle multipliers, ``wG`` is ``w`` (polyhedral
    cover) or the matrix multiplier G (full PSD cover).
    """

    kind: str
    X: np.ndarray
    x: np.ndarray
    lam: np.ndarray
    tri: np.ndarray
    wG: np.ndarray | None = None
    primal_value: float = 0.0
    dual_value: float = 0.0


# -- conic standard form -------------------------------------------------

def _svec_unit(m, i, j):
    E = np.zeros((m, m))
    if i == j:
        E[i, i] = 1.0
    else:
        E[i, j] = E[j, i] = 0.5
    return _kernels.svec(E)


@dataclass
class _Problem:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    blocks: list
    n_nonneg: int
    layout: dict


def _build(kind: str, spec: ConeSpec, data, eps: float, active) -> _Problem:
    m = spec.dim
    nm = m * (m + 1) // 2
    fam = spec.triangles
    active = np.asarray(active, dtype=np.int64)
    n_tri = len(active)
    tri_rows = fam.svec_rows(m, active) if n_tri else np.zeros((0, nm))
    e00 = _svec_unit(m, 0, 0)

    if kind == "max":
        W = data
        n_var = nm + n_tri
        rows = [np.concatenate([_svec_unit(m, a, a), np.zeros(n_tri)]) for a in range(m)]
        b = [1.0] * m
        for k in range(n_tri):
            r = np.zeros(n_var)
            r[:nm] = tri_rows[k]
            r[nm + k] = -1.0
            rows.append(r)
            b.append(0.0)
        c = np.concatenate([-_kernels.svec(W), np.zeros(n_tri)])
        layout = dict(diag=slice(0, m), tri=slice(m, m + n_tri), tri_var=slice(nm, nm + n_tri))
        return _Problem(np.array(rows), np.array(b), c, [m], n_tri, layout)

    if kind == "cover_poly":
        z = data
        d = spec.d
        kap = eps * spec.adjoint_identity() / (1.0 - eps)
        A_rows = np.array([_kernels.svec(Af) for Af in spec.a_matrices])
        n_var = nm + d + n_tri
        rows, b = [], []
        for a in range(1, m):
            r = np.zeros(n_var)
            r[:nm] = _svec_unit(m, a, a) - e00
            rows.append(r)
            b.append(0.0)
        for f in range(d):
            r = np.zeros(n_var)
            r[:nm] = A_rows[f] + kap[f] * e00
            r[nm + f] = -1.0
            rows.append(r)
            b.append(z[f])
        for k in range(n_tri):
            r = np.zeros(n_var)
            r[:nm] = tri_rows[k]
            r[nm + d + k] = -1.0
            rows.append(r)
            b.append(0.0)
        c = np.zeros(n_var)
        c[:nm] = e00 / (1.0 - eps)
        layout = dict(diag=slice(0, m - 1), cov=slice(m - 1, m - 1 + d),
                      tri=slice(m - 1 + d, m - 1 + d + n_tri), kap=kap,
                      tri_var=slice(nm + d, nm + d + n_tri))
        return _Problem(np.array(rows), np.array(b), c, [m], d + n_tri, layout)

    if kind == "cover_full":
        Z = data
        kap = eps / (1.0 - eps)
        n_var = 2 * nm + n_tri
        rows, b, pairs = [], [], []
        for a in range(1, m):
            r = np.zeros(n_var)
            r[:nm] = _svec_unit(m, a, a) - e00
            rows.append(r)
            b.append(0.0)
        for i in range(m):
            for j in range(i, m):
                r = np.zeros(n_var)
                u = _svec_unit(m, i, j)
                r[:nm] = u + (kap * e00 if i == j else 0.0)
                r[nm:2 * nm] = -u
                rows.append(r)
                b.append(Z[i, j])
                pairs.append((i, j))
        for k in range(n_tri):
            r = np.zeros(n_var)
            r[:nm] = tri_rows[k]
            r[2 * nm + k] = -1.0
            rows.append(r)
            b.append(0.0)
        c = np.zeros(n_var)
        c[:nm] = e00 / (1.0 - eps)
        n_pairs = len(pairs)
        layout = dict(diag=slice(0, m - 1), cov=slice(m - 1, m - 1 + n_pairs), pairs=pairs,
                      tri=slice(m - 1 + n_pairs, m - 1 + n_pairs + n_tri), kap=kap,
                      tri_var=slice(2 * nm, 2 * nm + n_tri))
        return _Problem(np.array(rows), np.array(b), c, [m, m], n_tri, layout)

    raise ValueError(kind)


@dataclass
class _State:
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    mu: float = 1.0


def _admm(prob: _Problem, state: _State | None, tol: float, max_iter: int):
    A, b, c = prob.A, prob.b, prob.c
    D = 1.0 / np.linalg.norm(A, axis=1)
    As = A * D[:, None]
    bs = max(1.0, float(np.linalg.norm(b * D)))
    cs = max(1e-300, float(np.linalg.norm(c)))
    bsc = b * D / bs
    csc = c / cs
    G = As @ As.T
    Minv = sla.cho_solve(sla.cho_factor(G), np.eye(G.shape[0]))
    if state is None:
        x0 = np.zeros(A.shape[1])
        y0 = np.zeros(A.shape[0])
        s0 = np.zeros(A.shape[1])
        mu = 1.0
    else:
        x0 = state.x / bs
        y0 = state.y / (cs * D)
        s0 = state.s / cs
        mu = state.mu
    x, y, s, mu, it, pinf, dinf, gap = _kernels.admm_loop(
        As, bsc, csc, Minv, prob.blocks, prob.n_nonneg, x0, y0, s0, mu, max_iter, tol)
    return _State(x * bs, y * cs * D, s * cs, mu), int(it), (pinf, dinf, gap)


def _carry(old: _State | None, old_prob: _Problem | None, prob: _Problem, new_vals) -> _State | None:
    """Map a warm start onto a problem with more triangle rows."""
    if old is None:
        return None
    n_old = old_prob.layout["tri"].stop - old_prob.layout["tri"].start
    n_new = prob.layout["tri"].stop - prob.layout["tri"].start
    add = n_new - n_old
    x = np.concatenate([old.x, np.maximum(new_vals, 0.0)])
    s = np.concatenate([old.s, np.zeros(add)])
    y = np.concatenate([old.y, np.zeros(add)])
    assert len(x) == prob.A.shape[1] and len(y) == prob.A.shape[0]
    return _State(x, y, s, old.mu)


def _solve_lazy(kind, spec: ConeSpec, data, eps, cfg: SolverConfig, tol):
    m = spec.dim
    nm = m * (m + 1) // 2
    fam = spec.triangles
    active = np.zeros(0, dtype=np.int64)
    if fam is not None and not cfg.lazy_triangles:
        active = np.arange(len(fam))
    state = prob_old = None
    total = 0
    for _ in range(64):
        prob = _build(kind, spec, data, eps, active)
        state, it, resid = _admm(prob, state, tol, cfg.max_iter)
        total += it
        X = _kernels.smat(state.x[:nm], m)
        if fam is None:
            break
        vals = fam.values(X)
        scale = max(1.0, float(np.abs(np.diag(X)).max()))
        viol = np.flatnonzero(vals < -10.0 * tol * scale)
        viol = np.setdiff1d(viol, active)
        if viol.size == 0:
            break
        prob_old = prob
        active = np.concatenate([active, viol])
        state = _carry(state, prob_old, _build(kind, spec, data, eps, active), vals[viol])
    else:  # pragma: no cover - 64 rounds is far more than the family needs
        raise NonConvergence("lazy triangle generation did not settle")
    if max(resid[:2]) > 1e3 * max(tol, 1e-6):
        raise NonConvergence(
            f"ADMM stopped after {total} iterations with residuals "
            f"pinf={resid[0]:.2e} dinf={resid[1]:.2e} gap={resid[2]:.2e}",
            iterations=total, pinf=resid[0], dinf=resid[1], gap=resid[2])
    return prob, state, active, total


def _raw(kind, spec, prob: _Problem, st: _State, active, eps, data) -> RawSolution:
    m = spec.dim
    nm = m * (m + 1) // 2
    X = _kernels.smat(st.x[:nm], m)
    L = prob.layout
    lam = st.y[L["tri"]].copy()
    if kind == "max":
        x = -st.y[L["diag"]]
        return RawSolution(kind, X, x, lam, active, None, float(np.sum(data * X)), float(x.sum()))
    ya = st.y[L["diag"]]
    x = np.empty(m)
    x[1:] = -ya
    if kind == "cover_poly":
        w = st.y[L["cov"]].copy()
        x[0] = 1.0 / (1.0 - eps) + ya.sum() - float(w @ L["kap"])
        return RawSolution(kind, X, x, lam, active, w, X[0, 0] / (1.0 - eps), float(data @ w))
    g = st.y[L["cov"]]
    G = np.zeros((m, m))
    for (i, j), v in zip(L["pairs"], g):
        if i == j:
            G[i, i] = v
        else:
            G[i, j] = G[j, i] = 0.5 * v
    x[0] = 1.0 / (1.0 - eps) + ya.sum() - L["kap"] * np.trace(G)
    return RawSolution(kind, X, x, lam, active, G, X[0, 0] / (1.0 - eps), float(np.sum(G * data)))


# -- repair --------------------------------------------------------------

def _dist_shift(spec: ConeSpec, X: np.ndarray) -> float:
    """Smallest delta >= 0 with X + delta I in Dist (X has constant diagonal)."""
    delta = max(0.0, -lambda_min(X))
    fam = spec.triangles
    if fam is not None:
        # <Delta, I> = 1 for i != j; unary members are PSD or vanish on a constant diagonal
        off = fam.i != fam.j
        if off.any():
            delta = max(delta, -float(fam.values(X)[off].min()))
    return delta


def _const_diag(X, t):
    X = 0.5 * (X + X.T)
    np.fill_diagonal(X, t)
    return X


def _repair_unit_diag(spec: ConeSpec, X, margin) -> np.ndarray:
    t = float(np.max(np.diag(X)))
    if not t > 0:
        raise NonConvergence("relaxation iterate has a nonpositive diagonal")
    X = _const_diag(X, t)
    delta = _dist_shift(spec, X) + margin * t
    return _const_diag(X / (t + delta), 1.0)


def _shift_primal(spec: ConeSpec, x, W, lam, tri, margin):
    lam = np.maximum(lam, 0.0)
    fam = spec.triangles
    S = np.diag(x) - W
    if fam is not None and len(tri):
        S = S - fam.combine(lam, spec.dim, tri)
    shift = max(0.0, -lambda_min(S)) + margin * max(1.0, float(np.abs(W).max()))
    return x + shift, lam


def _cover_scale(spec: ConeSpec, Y, target) -> float:
    if spec.polyhedral:
        cov = apply_adjoint(spec, Y)
        pos = target > 0
        if not pos.any():
            return 1.0
        if np.any(cov[pos] <= 0):
            raise NonConvergence("repaired relaxation matrix misses a demanded constraint")
        return max(1.0, float(np.max(target[pos] / cov[pos])) * (1 + 1e-12))
    Lc = np.linalg.cholesky(Y)
    Li = sla.solve_triangular(Lc, np.eye(Y.shape[0]), lower=True)
    c = max(1.0, float(np.linalg.eigvalsh(Li @ target @ Li.T)[-1]) * (1 + 1e-10))
    while lambda_min(c * Y - target) < 0:
        c *= 1 + 1e-9
    return c


def repair_witness(spec: ConeSpec, raw: RawSolution, cfg: SolverConfig, target=None, W=None):
    """Turn raw solver output into exactly feasible witnesses.

    Returns ``(dual, primal, info)``.  ``target`` is z (polyhedral) or Z for the
    cover direction; ``W`` is the objective matrix for the max direction.
    Raises NonConvergence when the repair costs more than the sigma budget.
    """
    eps = cfg.eps
    margin = cfg.margin
    if raw.kind == "max":
        if W is None:
            raise ValueError("max-direction repair needs W")
        Yh = _repair_unit_diag(spec, raw.X, margin)
        Z = _const_diag((1.0 - eps) * Yh + eps * np.eye(spec.dim), 1.0)
        x, lam = _shift_primal(spec, raw.x, W, raw.lam, raw.tri, margin)
        tr = float(np.trace(W))
        rho = (1.0 - eps) * float(x.sum()) + eps * tr
        rho_raw = (1.0 - eps) * raw.dual_value + eps * tr
        val = float(np.sum(W * Z))
        val_raw = (1.0 - eps) * raw.primal_value + eps * tr
        charged = max(0.0, rho / rho_raw - 1.0) + max(0.0, 1.0 - val / val_raw)
        info = dict(Y_hat=Yh, W=W, Z=Z, inner=val, charged=charged,
                    nu_bounds=(float(np.sum(W * Yh)), float(x.sum())))
        dual = DualWitness(1.0, Z)
        primal = PrimalWitness(rho, x, lam, np.asarray(raw.tri))
    else:
        if target is None:
            raise ValueError("cover-direction repair needs the target")
        t = float(np.max(np.diag(raw.X)))
        if not t > 0:
            raise NonConvergence("relaxation iterate has a nonpositive diagonal")
        X = _const_diag(raw.X, t)
        delta = _dist_shift(spec, X) + margin * t
        X = _const_diag(X, t + delta)
        mu = (t + delta) / (1.0 - eps)
        Y = _const_diag(X + eps * mu * np.eye(spec.dim), mu)
        c = _cover_scale(spec, Y, target)
        mu, Y = mu * c, Y * c
        if spec.polyhedral:
            w = np.maximum(raw.wG, 0.0)
            Wm = apply_map(spec, w)
        else:
            Wm = psd_project(raw.wG)
            w = None
        x, lam = _shift_primal(spec, raw.x, Wm, raw.lam, raw.tri, margin)
        norm = (1.0 - eps) * float(x.sum()) + eps * float(np.trace(Wm))
        if not norm > 0:
            raise NonConvergence("dual multipliers vanished")
        x, lam, Wm = x / norm, lam / norm, Wm / norm
        if w is not None:
            w = w / norm
            val = float(target @ w)
        else:
            val = float(np.sum(Wm * target))
        charged = max(0.0, mu / raw.primal_value - 1.0) + max(0.0, 1.0 - val / raw.dual_value) \
            if raw.primal_value > 0 and raw.dual_value > 0 else np.inf
        info = dict(W=Wm, w=w, inner=val, charged=charged)
        dual = DualWitness(mu, Y)
        primal = PrimalWitness(1.0, x, lam, np.asarray(raw.tri))
    if charged > cfg.sigma_budget:
        raise NonConvergence(f"witness repair costs {charged:.3g} > sigma budget "
                             f"{cfg.sigma_budget:.3g}", charged=charged)
    return dual, primal, info


# -- public solvers ------------------------------------------------------

def _check_target(spec: ConeSpec, target):
    if spec.polyhedral:
        z = np.asarray(target, dtype=float).reshape(-1)
        if z.shape[0] != spec.d:
            raise ConeError(f"expected {spec.d} demands, got {z.shape[0]}")
        if np.any(~np.isfinite(z)) or np.any(z < 0):
            raise ValueError("demands must be finite and nonnegative")
        if not np.any(z > 0):
            raise DegenerateInstance("the target is zero")
        return z
    Z = sym(target, "Z")
    if Z.shape[0] != spec.dim:
        raise ConeError("dimension mismatch")
    if lambda_min(Z) < -1e-10 * max(1.0, float(np.abs(Z).max())):
        raise ConeError("the target Z must be PSD for a full PSD cover")
    if not np.any(Z != 0):
        raise DegenerateInstance("the target is zero")
    return Z


def _objective(spec: ConeSpec, W):
    if spec.polyhedral:
        w = np.asarray(W, dtype=float).reshape(-1)
        if w.shape[0] != spec.d:
            raise ConeError(f"polyhedral objectives are weight vectors of length {spec.d}")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if not np.any(w > 0):
            raise DegenerateInstance("the weight vector is zero")
        return w, apply_map(spec, w)
    Wm = sym(W, "W")
    if Wm.shape[0] != spec.dim:
        raise ConeError("dimension mismatch")
    if lambda_min(Wm) < -1e-10 * max(1.0, float(np.abs(Wm).max())):
        raise ConeError("W is not in Cov (not PSD)")
    if not np.any(Wm != 0):
        raise DegenerateInstance("W is zero")
    return None, Wm


def _solve(kind, spec, data, cfg, finish):
    tol = cfg.tol
    last = None
    for _ in range(3):
        prob, st, active, iters = _solve_lazy(kind, spec, data, cfg.eps, cfg, tol)
        raw = _raw(kind, spec, prob, st, active, cfg.eps, data)
        try:
            res = finish(raw)
        except NonConvergence as exc:
            last = exc
            tol *= 0.01
            continue
        res.iterations = iters
        if res.gap <= cfg.sigma_budget:
            return res
        last = NonConvergence(f"duality gap {res.gap:.3g} exceeds sigma {cfg.sigma_budget:.3g}")
        tol *= 0.01
    raise last


def solve_nu_eps(spec: ConeSpec, W, cfg: SolverConfig) -> RelaxResult:
    """Max direction: witnesses for (1 - eps) nu(W) + eps tr W and the paired Z."""
    w, Wm = _objective(spec, W)

    def finish(raw):
        dual, primal, info = repair_witness(spec, raw, cfg, W=Wm)
        Z = info["Z"]
        z = apply_adjoint(spec, Z) if spec.polyhedral else None
        inner = float(w @ z) if w is not None else info["inner"]
        gap = 1.0 - inner / (primal.rho * dual.mu)
        return RelaxResult("max", primal, dual, Wm, Z, w, z, cfg.eps, gap, inner,
                           info["Y_hat"], info["nu_bounds"], charged=info["charged"])

    return _solve("max", spec, Wm, cfg, finish)


def solve_nu_polar_eps(spec: ConeSpec, target, cfg: SolverConfig) -> RelaxResult:
    """Cover direction: witnesses for nu°_eps(target) and the paired W = A(w)."""
    tgt = _check_target(spec, target)
    kind = "cover_poly" if spec.polyhedral else "cover_full"

    def finish(raw):
        dual, primal, info = repair_witness(spec, raw, cfg, target=tgt)
        inner = info["inner"]
        gap = 1.0 - inner / (primal.rho * dual.mu)
        if spec.polyhedral:
            return RelaxResult("cover", primal, dual, info["W"], None, info["w"], tgt, cfg.eps,
                               gap, inner, charged=info["charged"])
        return RelaxResult("cover", primal, dual, info["W"], tgt, None, None, cfg.eps, gap,
                           inner, charged=info["charged"])

    return _solve(kind, spec, tgt, cfg, finish)


def dist_star_residual(spec: ConeSpec, x, W, lam=None, tri=None) -> float:
    """lambda_min(Diag(x) - W - sum lam_k Delta_k) for a stored decomposition."""
    S = np.diag(np.asarray(x, dtype=float)) - W
    fam = spec.triangles
    if fam is not None and lam is not None and len(lam):
        S = S - fam.combine(np.maximum(lam, 0.0), spec.dim, tri)
    return lambda_min(S)
