"""Randomised rounding R_Y of relaxation matrices into cut sets.

All randomness is derived from ``(seed, stage, chunk)`` through
``numpy.random.SeedSequence``; chunks have a fixed size so the drawn cuts do
not depend on how many worker threads are used.
"""
from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .cones import ConeSpec, CovKind, apply_adjoint, cut_coverage, sign_vectors
from .instances import XOR, CutSet

GW_ALPHA = 0.87856
NESTEROV_ALPHA = 2.0 / math.pi
CHUNK = 4096
Z_95 = 1.959963984540054
MIN_HITS = 20.0  # expected satisfied draws needed to resolve a constraint


class RoundingKind(str, enum.Enum):
    GW_HYPERPLANE = "GW_HYPERPLANE"


@dataclass(frozen=True)
class RoundingSpec:
    kind: RoundingKind = RoundingKind.GW_HYPERPLANE
    claimed_alpha: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", RoundingKind(self.kind))
        a = self.claimed_alpha
        if a is not None and not 0 < a <= 1:
            raise ValueError(f"claimed_alpha must lie in (0, 1], got {a}")


def default_rounding(spec: ConeSpec) -> RoundingSpec:
    """GW rounding with the known constant when one applies to this cone."""
    if spec.cov_kind is CovKind.FULL_PSD:
        return RoundingSpec(claimed_alpha=NESTEROV_ALPHA)
    if spec.csp is not None and np.all(spec.csp[2] == np.array(XOR.truth_table, dtype=np.int8)):
        return RoundingSpec(claimed_alpha=GW_ALPHA)
    return RoundingSpec()


def stream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for a (seed, stage, ...) path."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & (2**64 - 1),
                                                                      *map(int, path)])))


def n_threads() -> int:
    raw = os.environ.get("GROTHCOVER_THREADS", "1")
    try:
        k = int(raw)
    except ValueError:
        raise ValueError(f"GROTHCOVER_THREADS must be an integer >= 1, got {raw!r}") from None
    if k < 1:
        raise ValueError(f"GROTHCOVER_THREADS must be an integer >= 1, got {raw!r}")
    return k


class FactorError(ValueError):
    pass


@dataclass(frozen=True)
class GramFactor:
    """B with B^T B = Y / scale; column i is the vector of coordinate i."""

    B: np.ndarray
    scale: float

    @property
    def m(self) -> int:
        return self.B.shape[1]


def gram_factor(Y, mu: float = 1.0, tol: float = 1e-8) -> GramFactor:
    Y = np.asarray(Y, dtype=float)
    if not mu > 0:
        raise FactorError("scale must be positive")
    C = 0.5 * (Y + Y.T) / mu
    if np.abs(np.diag(C) - 1.0).max() > 1e-6:
        raise FactorError("Y / mu must have unit diagonal")
    lam, Q = np.linalg.eigh(C)
    if lam[0] < -tol:
        raise FactorError(f"Y / mu is not PSD (lambda_min = {lam[0]:.3g})")
    B = np.sqrt(np.maximum(lam, 0.0))[:, None] * Q.T
    return GramFactor(B, float(mu))


def sample_masks(f: GramFactor, T: int, seed: int, stage: int, first_chunk: int = 0,
                 threads: int | None = None) -> np.ndarray:
    """T canonical cut masks; chunk k of size CHUNK uses stream(seed, stage, k)."""
    if T <= 0:
        return np.zeros(0, dtype=np.int64)
    sizes = [CHUNK] * (T // CHUNK) + ([T % CHUNK] if T % CHUNK else [])

    def run(k):
        g = stream(seed, stage, first_chunk + k).standard_normal((sizes[k], f.m))
        return _kernels.hyperplane_masks(g, f.B)

    threads = n_threads() if threads is None else threads
    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(run, range(len(sizes))))
    else:
        parts = [run(k) for k in range(len(sizes))]
    return np.concatenate(parts)


def gw_sample(f: GramFactor, rng: np.random.Generator) -> CutSet:
    g = rng.standard_normal((1, f.m))
    return CutSet(int(_kernels.hyperplane_masks(g, f.B)[0]), f.m)


@dataclass
class AlphaEstimate:
    alpha_hat: float
    confidence_halfwidth: float
    per_constraint_ratios: np.ndarray | None
    excluded: np.ndarray
    samples: int

    @property
    def lower(self) -> float:
        return self.alpha_hat - self.confidence_halfwidth


def estimate_rounding_constant(spec: ConeSpec, r: RoundingSpec, Y, samples: int, seed: int,
                               stage: int = 0, tol: float = 1e-9,
                               min_hits: float = MIN_HITS) -> AlphaEstimate:
    """Empirical max{a : E[R_Y] >= a Y} for one fixed Y (diag 1, in Dist).

    Polyhedral cones: min over constraints of P(f satisfied) / <A_f, Y>, the
    half-width being the largest drop to a per-constraint 95% lower bound.
    Constraints with <A_f, Y> below ``min_hits / samples`` cannot be resolved
    by the sample and are reported in ``excluded``.
    Full PSD: lambda_min of Y^{-1/2} E Y^{-1/2} on the range of Y, with a
    normal half-width for the mean along the minimising direction.
    """
    if samples < 100:
        raise ValueError("at least 100 samples are required")
    if r.kind is not RoundingKind.GW_HYPERPLANE:  # pragma: no cover - single kind today
        raise NotImplementedError(r.kind)
    Y = 0.5 * (np.asarray(Y, dtype=float) + np.asarray(Y, dtype=float).T)
    f = gram_factor(Y)
    masks = sample_masks(f, samples, seed, stage)
    if spec.polyhedral:
        uniq, counts = np.unique(masks, return_counts=True)
        sat = cut_coverage(spec, uniq)
        p = (counts @ sat) / samples
        a = apply_adjoint(spec, Y)
        keep = a > max(tol, min_hits / samples)
        if not keep.any():
            raise ValueError("every constraint is degenerate for this Y")
        ratios = np.full(len(a), np.nan)
        ratios[keep] = p[keep] / a[keep]
        hw = Z_95 * np.sqrt(p[keep] * (1 - p[keep]) / samples) / a[keep]
        alpha = float(np.min(ratios[keep]))
        lower = float(np.min(ratios[keep] - hw))
        return AlphaEstimate(alpha, alpha - lower, ratios, np.flatnonzero(~keep), samples)
    lam, Q = np.linalg.eigh(Y)
    keep = lam > tol * max(1.0, lam[-1])
    P = Q[:, keep] / np.sqrt(lam[keep])  # Y^{-1/2} restricted to range(Y)
    S = sign_vectors(masks, Y.shape[0]) @ P  # rows: P^T s_t
    E = S.T @ S / samples
    ev, V = np.linalg.eigh(E)
    v = (S @ V[:, 0]) ** 2
    hw = Z_95 * float(np.std(v, ddof=1)) / math.sqrt(samples)
    return AlphaEstimate(float(ev[0]), hw, None, np.zeros(0, dtype=np.int64), samples)
