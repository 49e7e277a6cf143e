"""Fractional covers by sign tensors built from rounding samples."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .cones import ConeSpec, apply_adjoint, cut_coverage, lambda_min, sign_vectors
from .instances import CutSet
from .rounding import CHUNK, RoundingSpec, gram_factor, sample_masks


class Regime(str, enum.Enum):
    POLYHEDRAL = "POLYHEDRAL"
    PSD_BERNSTEIN = "PSD_BERNSTEIN"
    PSD_NESTEROV = "PSD_NESTEROV"


class Mode(str, enum.Enum):
    THEORETICAL = "THEORETICAL"
    ADAPTIVE = "ADAPTIVE"


class BudgetExhausted(RuntimeError):
    def __init__(self, msg, best_residual=None, samples=None):
        super().__init__(msg)
        self.best_residual = best_residual
        self.samples = samples


@dataclass(frozen=True)
class SampleBudget:
    T: int
    gamma: float
    regime: Regime

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("a sample budget needs T >= 1")


def _pos(**kw):
    for k, v in kw.items():
        if v is None or not v > 0 or not math.isfinite(v):
            raise ValueError(f"{k} must be positive and finite, got {v!r}")


def sample_budget(regime, *, n: int, gamma: float, eps: float | None = None,
                  alpha: float | None = None, d: int | None = None, kappa: float | None = None,
                  sigma2: float | None = None, rho: float | None = None) -> SampleBudget:
    """Sample counts from the concentration arguments.

    POLYHEDRAL:     ceil(2 (log d + log n) / (kappa eps alpha gamma^2))
    PSD_BERNSTEIN:  max(ceil(8 sigma2 log(2n) / (gamma alpha)^2),
                        ceil(16 rho log(2n) / (3 gamma alpha))),
                    with sigma2 = (n/eps)^2 and rho = n/eps unless given
    PSD_NESTEROV:   ceil(2 pi log(2n) / (gamma^2 xi)), xi = eps / n
    ``n`` is the matrix order.
    """
    regime = Regime(regime)
    _pos(n=n, gamma=gamma)
    if gamma >= 1:
        raise ValueError("gamma must lie in (0, 1)")
    if regime is Regime.POLYHEDRAL:
        _pos(d=d, kappa=kappa, eps=eps, alpha=alpha)
        T = math.ceil(2.0 * (math.log(d) + math.log(n)) / (kappa * eps * alpha * gamma ** 2))
    elif regime is Regime.PSD_BERNSTEIN:
        if sigma2 is None or rho is None:
            _pos(eps=eps)
        sigma2 = (n / eps) ** 2 if sigma2 is None else sigma2
        rho = n / eps if rho is None else rho
        _pos(alpha=alpha, sigma2=sigma2, rho=rho)
        ga = gamma * alpha
        T = max(math.ceil(8.0 * sigma2 * math.log(2 * n) / ga ** 2),
                math.ceil(16.0 * rho * math.log(2 * n) / (3.0 * ga)))
    else:
        _pos(eps=eps)
        xi = eps / n
        T = math.ceil(2.0 * math.pi * math.log(2 * n) / (gamma ** 2 * xi))
    return SampleBudget(max(int(T), 1), float(gamma), regime)


@dataclass(frozen=True)
class Cover:
    """Positive weights on canonical cuts; masks sorted ascending."""

    masks: np.ndarray
    weights: np.ndarray
    m: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        masks = np.asarray(self.masks, dtype=np.int64).reshape(-1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if masks.shape != w.shape:
            raise ValueError("one weight per cut is required")
        if np.any(~(w > 0)) or np.any(~np.isfinite(w)):
            raise ValueError("cover weights must be positive and finite")
        full = (1 << self.m) - 1
        masks = np.where(masks & 1, masks, masks ^ full) & full
        order = np.argsort(masks, kind="stable")
        masks, w = masks[order], w[order]
        if np.any(np.diff(masks) == 0):
            raise ValueError("duplicate cut in cover")
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_entries(cls, entries: dict, m: int, meta=None) -> "Cover":
        ms = [u.mask for u in entries]
        return cls(np.array(ms, dtype=np.int64), np.array(list(entries.values()), dtype=float), m,
                   meta or {})

    @classmethod
    def empty(cls, m: int) -> "Cover":
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0), m)

    @property
    def entries(self) -> dict:
        return {CutSet(int(k), self.m): float(v) for k, v in zip(self.masks, self.weights)}

    @property
    def support(self) -> list[CutSet]:
        return [CutSet(int(k), self.m) for k in self.masks]

    @property
    def size(self) -> int:
        return len(self.masks)

    @property
    def cost(self) -> float:
        return float(self.weights.sum())

    def scaled(self, c: float) -> "Cover":
        return Cover(self.masks, self.weights * c, self.m, dict(self.meta))

    def matrix(self) -> np.ndarray:
        S = sign_vectors(self.masks, self.m)
        return (S.T * self.weights) @ S


def _target(spec: ConeSpec, target):
    if spec.polyhedral:
        t = np.asarray(target, dtype=float)
        return apply_adjoint(spec, t) if t.ndim == 2 else t.reshape(-1)
    return 0.5 * (np.asarray(target, dtype=float) + np.asarray(target, dtype=float).T)


@dataclass(frozen=True)
class CoverCheck:
    feasible: bool
    worst_residual: float


def cover_residual(spec: ConeSpec, cover: Cover, target) -> float:
    t = _target(spec, target)
    if spec.polyhedral:
        if cover.size == 0:
            hits = np.zeros_like(t)
        else:
            hits = cover.weights @ cut_coverage(spec, cover.masks)
        return float(np.min(hits - t))
    M = cover.matrix() if cover.size else np.zeros_like(t)
    return lambda_min(M - t)


def check_cover_feasible(spec: ConeSpec, cover: Cover, target, tol: float = 1e-8) -> CoverCheck:
    r = cover_residual(spec, cover, target)
    return CoverCheck(r >= -tol, r)


def _min_scale(spec: ConeSpec, masks, counts, t):
    """Smallest c with c * sum counts_U S_U covering t (inf when impossible)."""
    if spec.polyhedral:
        hits = counts @ cut_coverage(spec, masks)
        pos = t > 0
        if np.any(hits[pos] <= 0):
            return math.inf
        return float(np.max(t[pos] / hits[pos])) if pos.any() else 0.0
    S = sign_vectors(masks, spec.dim)
    C = (S.T * counts) @ S
    try:
        ev = sla.eigh(t, C, eigvals_only=True)
    except np.linalg.LinAlgError:
        return math.inf
    return float(ev[-1])


def build_cover(spec: ConeSpec, r: RoundingSpec, Y, mu: float, target, *, mode=Mode.ADAPTIVE,
                budget: SampleBudget | None = None, alpha_used: float | None = None,
                cost_cap: float | None = None, seed: int = 0, stage: int = 2,
                T_cap: int = 1_000_000, batch: int | None = None) -> Cover:
    """Cover of ``target`` from GW samples of Y / mu.

    THEORETICAL: exactly ``budget.T`` samples, y_U = mu count_U / ((1-gamma) alpha T).
    ADAPTIVE: batches until the smallest feasible rescaling of the counts costs at
    most ``cost_cap``; on polyhedral cones cuts that satisfy no demanded
    constraint are dropped first. the result is exactly feasible (up to a 1e-12 relative
    margin) but carries no concentration guarantee.
    """
    mode = Mode(mode)
    f = gram_factor(Y, mu)
    t = _target(spec, target)
    if mode is Mode.THEORETICAL:
        if budget is None:
            raise ValueError("THEORETICAL mode needs a sample budget")
        if alpha_used is None or not alpha_used > 0:
            raise ValueError("alpha_used must be positive")
        masks = sample_masks(f, budget.T, seed, stage)
        uniq, counts = np.unique(masks, return_counts=True)
        w = mu * counts / ((1.0 - budget.gamma) * alpha_used * budget.T)
        meta = dict(T_used=budget.T, gamma=budget.gamma, alpha_used=alpha_used, mode=mode.value)
        return Cover(uniq, w, spec.dim, meta)
    if cost_cap is None or not cost_cap > 0:
        raise ValueError("ADAPTIVE mode needs a positive cost cap")
    batch = batch or max(spec.dim ** 2, 1024)
    batch = int(math.ceil(batch / CHUNK) * CHUNK) if batch > CHUNK else batch
    counts: dict[int, int] = {}
    T = 0
    chunk = 0
    best = math.inf
    while T < T_cap:
        size = min(batch, T_cap - T)
        new = sample_masks(f, size, seed, stage, first_chunk=chunk)
        chunk += math.ceil(size / CHUNK)
        T += size
        u, c = np.unique(new, return_counts=True)
        for k, v in zip(u.tolist(), c.tolist()):
            counts[k] = counts.get(k, 0) + v
        keys = np.array(sorted(counts), dtype=np.int64)
        cnt = np.array([counts[k] for k in keys], dtype=float)
        if spec.polyhedral:
            # cuts satisfying no demanded constraint only add cost
            useful = cut_coverage(spec, keys)[:, t > 0].any(axis=1)
            keys, cnt = keys[useful], cnt[useful]
        scale = _min_scale(spec, keys, cnt, t) if keys.size else math.inf
        cost = scale * float(cnt.sum())
        best = min(best, cost)
        if cost <= cost_cap:
            w = cnt * scale * (1 + 1e-12)
            meta = dict(T_used=T, gamma=None, alpha_used=alpha_used, mode=mode.value)
            cov = Cover(keys, w, spec.dim, meta)
            if cover_residual(spec, cov, t) < 0:  # round-off in the generalised eigenvalue
                cov = _nudge(spec, cov, t)
            return cov
    raise BudgetExhausted(f"no feasible cover within cost {cost_cap:.6g} after {T} samples "
                          f"(best cost {best:.6g})", best_residual=best, samples=T)


def _nudge(spec, cov: Cover, t) -> Cover:
    c = 1.0
    for _ in range(60):
        c *= 1 + 1e-10
        if cover_residual(spec, cov.scaled(c), t) >= 0:
            return cov.scaled(c)
    return cov.scaled(c)
