"""The end-to-end pipeline, certificate assembly and independent verification.

A beta-certificate for a pair (W, Z) is a tuple (rho, mu, U, y, x) with

  (i)   rho * mu = <W, Z>
  (ii)  s_U^T W s_U >= beta * rho
  (iii) sum_U y_U S_U covers Z and <1, y> <= mu / beta
  (iv)  rho >= <1, x> and Diag(x) - W lies in Dist*.

The verifier shares only the cone primitives with the construction; Dist*
membership is re-derived with an independent conic solve.
"""
from __future__ import annotations

import enum
import json
import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import cvxpy as cp
import numpy as np

from .cones import ConeSpec, apply_adjoint, apply_map, lambda_min
from .cover import (BudgetExhausted, Cover, Mode, Regime, build_cover, cover_residual,
                    sample_budget)
from .instances import CutSet
from .relax import RelaxResult, SolverConfig, solve_nu_eps, solve_nu_polar_eps
from .rounding import AlphaEstimate, RoundingSpec, default_rounding, estimate_rounding_constant
from .sparsify import SparsifyConfig, sparsify_cover

log = logging.getLogger(__name__)

VERIFY_TOL = 1e-7
CERT_MARGIN = 1e-8
PILOT_EPS = 0.02
PILOT_SAMPLES = 10_000
STAGE_PILOT, STAGE_ALPHA, STAGE_COVER = 0, 1, 2


class Case(str, enum.Enum):
    POLYHEDRAL = "POLYHEDRAL"
    PSD = "PSD"


class BetaInfeasible(ValueError):
    """beta is not below the usable rounding constant."""


# -- schedules -----------------------------------------------------------

@dataclass(frozen=True)
class ParameterSchedule:
    tau: float
    eps: float
    sigma: float
    gamma: float
    bss: float

    def guarantee(self, alpha: float) -> float:
        """alpha (1-gamma)(1-sigma)(1-eps) / (1+bss)."""
        return alpha * (1 - self.gamma) * (1 - self.sigma) * (1 - self.eps) / (1 + self.bss)


def parameter_schedule(beta: float, alpha: float, case) -> ParameterSchedule:
    case = Case(case)
    if not (0 < beta and 0 < alpha <= 1):
        raise ValueError("need 0 < beta and 0 < alpha <= 1")
    if beta >= alpha:
        raise BetaInfeasible(f"beta = {beta:.6g} is not below alpha = {alpha:.6g}")
    tau = 1.0 - beta / alpha
    if tau < 1e-3:
        warnings.warn(f"tau = {tau:.2e}: beta is very close to alpha, sample budgets explode",
                      RuntimeWarning, stacklevel=2)
    if case is Case.POLYHEDRAL:
        e = tau / 3.0
        return ParameterSchedule(tau, e, e, e, 0.0)
    e = tau / 4.0
    return ParameterSchedule(tau, e, e, e, tau / (4.0 - tau))


# -- cut selection -------------------------------------------------------

def select_best_cut(W, support) -> CutSet:
    """argmax of s_U^T W s_U; ties go to the lexicographically smallest member set."""
    support = list(support)
    if not support:
        raise ValueError("empty support")
    W = np.asarray(W, dtype=float)
    vals = np.array([float(u.sign_vector() @ W @ u.sign_vector()) for u in support])
    best = vals.max()
    tied = [u for u, v in zip(support, vals) if v >= best - 1e-12 * max(1.0, abs(best))]
    return min(tied, key=lambda u: u.members)


# -- certificates --------------------------------------------------------

@dataclass
class VerificationReport:
    c1_gap: float
    c2_cut: float
    c3_cover_residual: float
    c3_cost: float
    c4_trace: float
    c4_dist_star: float
    clauses: dict
    passed: bool

    def as_dict(self) -> dict:
        return {"c1_gap": self.c1_gap, "c2_cut": self.c2_cut,
                "c3_cover_residual": self.c3_cover_residual, "c3_cost": self.c3_cost,
                "c4_trace": self.c4_trace, "c4_dist_star": self.c4_dist_star,
                "pass": self.passed}


@dataclass
class BetaCertificate:
    beta: float
    rho: float
    mu: float
    U: CutSet
    y: Cover
    x: np.ndarray
    seed: int
    alpha_used: float
    checks: VerificationReport | None = None
    direction: str | None = None
    paired: np.ndarray | None = None
    oracle: dict | None = None


_DELTA_CACHE: dict[int, np.ndarray] = {}


def _delta_stack(spec: ConeSpec) -> np.ndarray:
    m = spec.dim
    if m not in _DELTA_CACHE:
        fam = spec.triangles
        _DELTA_CACHE[m] = np.array([fam.matrix(k, m).ravel() for k in range(len(fam))])
    return _DELTA_CACHE[m]


def dist_star_margin(spec: ConeSpec, x, W) -> float:
    """Certified lower bound on lambda_min(Diag(x) - W - sum lam Delta) over lam >= 0.

    The multipliers come from a separate conic solve (Clarabel via cvxpy); the
    returned number is recomputed in numpy from the clipped multipliers, so it
    is a valid membership margin whatever the solver accuracy.
    """
    S0 = np.diag(np.asarray(x, dtype=float)) - W
    S0 = 0.5 * (S0 + S0.T)
    base = lambda_min(S0)
    fam = spec.triangles
    if fam is None:
        return base
    m = spec.dim
    D = _delta_stack(spec)
    lam = cp.Variable(D.shape[0], nonneg=True)
    t = cp.Variable()
    X = cp.Variable((m, m), PSD=True)
    cap = max(1.0, float(np.abs(S0).max()))
    cons = [X == S0 - cp.reshape(D.T @ lam, (m, m), order="C") - t * np.eye(m), t <= cap]
    prob = cp.Problem(cp.Maximize(t), cons)
    try:
        prob.solve(solver=cp.CLARABEL)
    except cp.error.SolverError:  # pragma: no cover - fall back to the PSD test
        return base
    if lam.value is None:
        return base
    lv = np.maximum(np.asarray(lam.value, dtype=float), 0.0)
    return max(base, lambda_min(S0 - fam.combine(lv, m)))


def _pair(spec: ConeSpec, W, Z):
    """Objective matrix, cover target and <W, Z> for vector or matrix inputs."""
    W = np.asarray(W, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if spec.polyhedral:
        Wm = apply_map(spec, W) if W.ndim == 1 else 0.5 * (W + W.T)
        z = Z if Z.ndim == 1 else apply_adjoint(spec, Z)
        if W.ndim == 1:
            inner = float(W @ z)
        elif Z.ndim == 2:
            inner = float(np.sum(Wm * Z))
        else:
            raise ValueError("pairing a matrix W with a demand vector needs the weights w")
        return Wm, z, inner
    Wm = 0.5 * (W + W.T)
    Zm = 0.5 * (Z + Z.T)
    return Wm, Zm, float(np.sum(Wm * Zm))


def verify_certificate(spec: ConeSpec, W, Z, cert: BetaCertificate,
                       tol: float = VERIFY_TOL) -> VerificationReport:
    """Recompute all four clauses from (W, Z, cert) alone."""
    Wm, target, inner = _pair(spec, W, Z)
    x = np.asarray(cert.x, dtype=float)
    beta, rho, mu = float(cert.beta), float(cert.rho), float(cert.mu)
    if x.shape != (spec.dim,) or cert.U.m != spec.dim or cert.y.m != spec.dim:
        raise ValueError("certificate dimensions do not match the cone")
    s = cert.U.sign_vector()
    c1 = (rho * mu - inner) / max(1.0, abs(inner))
    c2 = float(s @ Wm @ s) - beta * rho
    c3r = cover_residual(spec, cert.y, target)
    c3c = mu / beta - cert.y.cost if beta > 0 else -math.inf
    c4t = rho - float(x.sum())
    c4d = dist_star_margin(spec, x, Wm)
    tscale = max(1.0, float(np.abs(target).max()))
    clauses = {
        "i": abs(c1) <= tol,
        "ii": c2 >= -tol * max(1.0, abs(beta * rho)),
        "iii": c3r >= -tol * tscale and c3c >= -tol * max(1.0, abs(mu / beta)),
        "iv": c4t >= -tol * max(1.0, abs(rho))
              and c4d >= -tol * max(1.0, float(np.abs(Wm).max())),
    }
    ok = bool(all(clauses.values())) and beta > 0 and rho >= 0 and mu >= 0
    return VerificationReport(c1, c2, c3r, c3c, c4t, c4d, clauses, ok)


# -- JSON ----------------------------------------------------------------

def _num(v) -> str:
    v = float(v)
    if not math.isfinite(v):
        raise ValueError("certificates hold finite numbers only")
    return format(v, ".17g")


def _dump(obj) -> str:
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {_dump(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_dump(v) for v in obj) + "]"
    raise TypeError(type(obj))


def certificate_to_dict(cert: BetaCertificate) -> dict:
    doc = {
        "beta": float(cert.beta), "rho": float(cert.rho), "mu": float(cert.mu),
        "U": list(cert.U.members),
        "x": [float(v) for v in cert.x],
        "cover": [{"U": list(u.members), "weight": float(w)}
                  for u, w in zip(cert.y.support, cert.y.weights)],
        "seed": int(cert.seed),
        "alpha_used": float(cert.alpha_used),
        "checks": cert.checks.as_dict() if cert.checks is not None else None,
    }
    if cert.direction is not None:
        doc["direction"] = cert.direction
    if cert.paired is not None:
        doc["paired_weights"] = np.asarray(cert.paired, dtype=float).tolist()
    if cert.oracle is not None:
        doc["oracle"] = cert.oracle
    return doc


def certificate_to_json(cert: BetaCertificate) -> str:
    doc = certificate_to_dict(cert)
    lines = [f"  {json.dumps(k)}: {_dump(v)}" for k, v in doc.items()]
    return "{\n" + ",\n".join(lines) + "\n}\n"


def certificate_from_json(text: str) -> BetaCertificate:
    doc = json.loads(text)
    x = np.array(doc["x"], dtype=float)
    m = len(x)
    entries = {CutSet.from_members(e["U"], m): float(e["weight"]) for e in doc["cover"]}
    checks = None
    if doc.get("checks") is not None:
        c = doc["checks"]
        checks = VerificationReport(float(c["c1_gap"]), float(c["c2_cut"]),
                                    float(c["c3_cover_residual"]), float(c["c3_cost"]),
                                    float(c["c4_trace"]), float(c["c4_dist_star"]), {},
                                    bool(c["pass"]))
    paired = doc.get("paired_weights")
    return BetaCertificate(float(doc["beta"]), float(doc["rho"]), float(doc["mu"]),
                           CutSet.from_members(doc["U"], m), Cover.from_entries(entries, m), x,
                           int(doc["seed"]), float(doc["alpha_used"]), checks,
                           doc.get("direction"),
                           None if paired is None else np.array(paired, dtype=float),
                           doc.get("oracle"))


# -- pipeline ------------------------------------------------------------

@dataclass
class PipelineResult:
    certificate: BetaCertificate
    report: VerificationReport
    paired: np.ndarray
    W: np.ndarray  # objective side as passed to the verifier (w or W)
    Z: np.ndarray  # cover side as passed to the verifier (z or Z)
    relax: RelaxResult
    schedule: ParameterSchedule
    alpha: AlphaEstimate | None
    witness: dict = field(default_factory=dict)


def _alpha_used(spec, r: RoundingSpec, beta, direction, weights, mode, seed, pilot_eps):
    claim = r.claimed_alpha
    if claim is not None and beta < claim:
        return claim, None
    if claim is not None and mode is Mode.THEORETICAL:
        raise BetaInfeasible(f"beta = {beta:.6g} is not below the claimed alpha = {claim:.6g}")
    cfg = SolverConfig(eps=pilot_eps, sigma_budget=0.05)
    res = _solve(spec, direction, weights, cfg)
    Y = res.dual.Y / res.dual.mu
    est = estimate_rounding_constant(spec, r, Y, PILOT_SAMPLES, seed, STAGE_PILOT)
    a = est.lower if claim is None else max(claim, est.lower)
    return min(a, 1.0), est


def _solve(spec, direction, weights, cfg) -> RelaxResult:
    if direction == "max":
        return solve_nu_eps(spec, weights, cfg)
    if direction == "cover":
        return solve_nu_polar_eps(spec, weights, cfg)
    raise ValueError(f"direction must be 'max' or 'cover', got {direction!r}")


def run_pipeline(spec: ConeSpec, weights, beta: float, *, direction: str = "cover",
                 mode=Mode.ADAPTIVE, seed: int = 0, rounding: RoundingSpec | None = None,
                 eps: float | None = None, sigma: float | None = None,
                 gamma: float | None = None, T_cap: int = 1_000_000,
                 tol: float = VERIFY_TOL) -> PipelineResult:
    """Relax, round, cover, (sparsify), pick a cut and certify.

    ``direction='cover'`` takes demands z (or Z) and returns the paired w (or W);
    ``direction='max'`` takes weights w (or W) and returns z (or Z).
    """
    mode = Mode(mode)
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    r = rounding or default_rounding(spec)
    case = Case.POLYHEDRAL if spec.polyhedral else Case.PSD
    alpha, est = _alpha_used(spec, r, beta, direction, weights, mode, seed,
                             eps if eps is not None else PILOT_EPS)
    sched = parameter_schedule(beta, alpha, case)
    if eps is not None or sigma is not None or gamma is not None:
        warnings.warn("explicit eps/sigma/gamma bypass the parameter schedule",
                      RuntimeWarning, stacklevel=2)
        sched = replace(sched, eps=eps or sched.eps, sigma=sigma or sched.sigma,
                        gamma=gamma or sched.gamma)
    res = _solve(spec, direction, weights, SolverConfig(eps=sched.eps, sigma_budget=sched.sigma))

    W = res.W.copy()
    w = None if res.w is None else res.w.copy()
    x = res.primal.x + CERT_MARGIN * max(1.0, float(np.abs(W).max()))
    if direction == "cover":
        s = float(x.sum())
        x, W = x / s, W / s
        w = None if w is None else w / s
        rho = 1.0
        target = res.z if spec.polyhedral else res.Z
        paired = w if spec.polyhedral else W
    else:
        rho = float(x.sum())
        target = res.z if spec.polyhedral else res.Z
        paired = target
    inner = float(w @ target) if spec.polyhedral else float(np.sum(W * target))
    mu = inner / rho
    cost_cap = mu / beta

    Yw, mu_w = res.dual.Y, res.dual.mu
    if mode is Mode.THEORETICAL:
        if spec.polyhedral:
            budget = sample_budget(Regime.POLYHEDRAL, n=spec.dim, d=spec.d, gamma=sched.gamma,
                                   kappa=spec.kappa, eps=sched.eps, alpha=alpha)
        else:
            budget = sample_budget(Regime.PSD_BERNSTEIN, n=spec.dim, gamma=sched.gamma,
                                   eps=sched.eps, alpha=alpha)
        if budget.T > T_cap:
            raise BudgetExhausted(f"theoretical budget T = {budget.T} exceeds the cap {T_cap}",
                                  samples=budget.T)
        cov = build_cover(spec, r, Yw, mu_w, target, mode=mode, budget=budget,
                          alpha_used=alpha, seed=seed, stage=STAGE_COVER)
    else:
        cap = cost_cap / (1.0 + sched.bss)
        cov = build_cover(spec, r, Yw, mu_w, target, mode=mode, alpha_used=alpha,
                          cost_cap=cap, seed=seed, stage=STAGE_COVER, T_cap=T_cap)
    if not spec.polyhedral and sched.bss > 0:
        cov = sparsify_cover(cov, target, SparsifyConfig(sched.bss))

    U = select_best_cut(W, cov.support)
    cert = BetaCertificate(beta, rho, mu, U, cov, x, seed, alpha, direction=direction,
                           paired=paired)
    Wv = w if spec.polyhedral else W
    report = verify_certificate(spec, Wv, target, cert, tol)
    cert.checks = report
    witness = dict(rho_bar=res.primal.rho, mu_bar=res.dual.mu, inner_bar=res.inner,
                   sigma=sched.sigma, eps=sched.eps, gap=res.gap)
    return PipelineResult(cert, report, paired, Wv, target, res, sched, est, witness)
