import math

import numpy as np
import pytest

from grothcover import Cover, SparsifyConfig, sparsify_cover
from grothcover.cones import lambda_min
from grothcover.sparsify import SparsifyError, barrier_q, barrier_weights, support_bound


def _all_cuts_cover(m, rng):
    masks = np.arange(1, 1 << m, 2, dtype=np.int64)
    return Cover(masks, 0.1 + rng.random(len(masks)), m)


def test_support_bound_and_q():
    assert support_bound(8, 0.5) == 1280
    assert support_bound(12, 0.3) == 5333
    for e in (0.1, 0.3, 0.5):
        q = barrier_q(e)
        assert ((math.sqrt(q) + 1) / (math.sqrt(q) - 1)) ** 2 == pytest.approx(1 + e)


@pytest.mark.parametrize("eps_s", [0.3, 0.5])
def test_barrier_on_generic_vectors(eps_s, rng):
    N, r = 400, 5
    V = rng.standard_normal((N, r))
    L = np.linalg.cholesky(V.T @ V)
    U = np.linalg.solve(L, V.T).T  # rows now satisfy sum u u^T = I
    c = rng.random(N)
    c /= c.sum()
    t = barrier_weights(U, c, eps_s)
    sel = t > 0
    assert sel.sum() <= math.ceil(barrier_q(eps_s) * (r + 1))
    A = np.zeros((r + 1, r + 1))
    A[:r, :r] = (U[sel].T * t[sel]) @ U[sel]
    A[r, r] = float(t @ c)
    ev = np.linalg.eigvalsh(A)
    assert ev[-1] / ev[0] <= 1 + eps_s + 1e-9


def test_early_return_when_already_sparse(rng):
    cov = _all_cuts_cover(6, rng)
    out = sparsify_cover(cov, cov.matrix(), SparsifyConfig(0.5))
    assert out is cov


@pytest.mark.parametrize("eps_s", [0.3, 0.5])
def test_contract_m12(eps_s, rng):
    cov = _all_cuts_cover(12, rng)  # 2048 cuts, above 40*12/eps^2 for eps = 0.5
    Z = 0.9 * cov.matrix()
    cfg = SparsifyConfig(eps_s)
    out = sparsify_cover(cov, Z, cfg)
    assert out.size <= support_bound(12, eps_s)
    assert out.cost <= (1 + eps_s) * cov.cost
    assert lambda_min(out.matrix() - Z) >= -1e-8
    if cov.size > support_bound(12, eps_s):
        assert out.size < cov.size and out.meta.get("sparsified")


def test_forced_barrier_path_is_deterministic(rng):
    cov = _all_cuts_cover(8, rng)
    Z = cov.matrix()
    cfg = SparsifyConfig(0.5, support_constant=3.9)  # bound 121 < 128 cuts
    a = sparsify_cover(cov, Z, cfg)
    b = sparsify_cover(cov, Z, cfg)
    np.testing.assert_array_equal(a.masks, b.masks)
    np.testing.assert_array_equal(a.weights, b.weights)
    assert a.size <= 121
    assert a.cost <= 1.5 * cov.cost
    assert lambda_min(a.matrix() - Z) >= -1e-8


def test_rank_deficient_target(rng):
    cov = _all_cuts_cover(8, rng)
    g = rng.standard_normal(8)
    Z = np.outer(g, g)
    Z *= 1.0 / max(1.0, float(np.max(np.linalg.eigvalsh(Z) / lambda_min(cov.matrix()))))
    out = sparsify_cover(cov, Z, SparsifyConfig(0.5, support_constant=3.9))
    assert lambda_min(out.matrix() - Z) >= -1e-8


def test_infeasible_input_rejected(rng):
    cov = _all_cuts_cover(5, rng)
    with pytest.raises(SparsifyError):
        sparsify_cover(cov, 2 * cov.matrix(), SparsifyConfig(0.5))
    with pytest.raises(ValueError):
        SparsifyConfig(1.5)
