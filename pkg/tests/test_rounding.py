import math

import numpy as np
import pytest

from grothcover import ConeSpec, CutSet, gram_factor, gw_sample
from grothcover.cones import sign_tensor, sign_vectors
from grothcover.rounding import (GW_ALPHA, NESTEROV_ALPHA, FactorError, RoundingKind,
                                 RoundingSpec, default_rounding, estimate_rounding_constant,
                                 sample_masks, stream)
from grothcover.instances import encode_problem

from conftest import random_psd


def _k3_gram():
    # x0 orthogonal to three vertex vectors at 120 degrees
    Y = np.full((4, 4), -0.5)
    Y[0, :] = Y[:, 0] = 0.0
    np.fill_diagonal(Y, 1.0)
    return Y


def test_stream_is_reproducible():
    a = stream(7, 1, 2).standard_normal(5)
    b = stream(7, 1, 2).standard_normal(5)
    c = stream(7, 1, 3).standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_gram_factor(rng):
    Y = random_psd(5, rng, rank=3)
    d = np.sqrt(np.diag(Y))
    Y = Y / np.outer(d, d)
    f = gram_factor(2.0 * Y, mu=2.0)
    np.testing.assert_allclose(f.B.T @ f.B, Y, atol=1e-10)
    with pytest.raises(FactorError):
        gram_factor(2.0 * Y)
    with pytest.raises(FactorError):
        gram_factor(-np.eye(3))


def test_sampling_independent_of_threads():
    f = gram_factor(_k3_gram())
    a = sample_masks(f, 20_000, 3, 2, threads=1)
    b = sample_masks(f, 20_000, 3, 2, threads=4)
    np.testing.assert_array_equal(a, b)
    assert np.all(a & 1)


def test_gw_sample_returns_cut():
    u = gw_sample(gram_factor(_k3_gram()), np.random.default_rng(0))
    assert isinstance(u, CutSet) and u.m == 4


def test_edge_marginals_follow_arccos_law():
    rng = np.random.default_rng(5)
    Y = random_psd(4, rng)
    d = np.sqrt(np.diag(Y))
    Y = Y / np.outer(d, d)
    T = 100_000
    S = sign_vectors(sample_masks(gram_factor(Y), T, 11, 0), 4)
    for i in range(4):
        for j in range(i + 1, 4):
            p = float(np.mean(S[:, i] != S[:, j]))
            want = math.acos(Y[i, j]) / math.pi
            assert abs(p - want) <= 3 * math.sqrt(want * (1 - want) / T)


def test_alpha_on_a_cut_is_one(k2):
    spec = ConeSpec.from_instance(k2)
    Y = sign_tensor(CutSet.from_members([0, 1], 3))
    est = estimate_rounding_constant(spec, default_rounding(spec), Y, 1000, 0)
    assert est.alpha_hat == pytest.approx(1.0)


def test_alpha_k3_optimum(k3_spec):
    # P(edge cut) = arccos(-1/2)/pi = 2/3 against <A_f, Y> = 3/4, ratio 8/9
    est = estimate_rounding_constant(k3_spec, default_rounding(k3_spec), _k3_gram(), 40_000, 1)
    assert abs(est.alpha_hat - 8 / 9) <= est.confidence_halfwidth + 0.01
    assert est.lower < est.alpha_hat


def test_alpha_full_psd(rng):
    spec = ConeSpec.full_psd(4)
    Y = random_psd(4, rng)
    d = np.sqrt(np.diag(Y))
    est = estimate_rounding_constant(spec, default_rounding(spec), Y / np.outer(d, d), 20_000, 2)
    # the sign-vector second moment dominates (2/pi) Y
    assert est.alpha_hat >= NESTEROV_ALPHA - 3 * est.confidence_halfwidth


def test_default_rounding_claims(k3, arc):
    assert default_rounding(ConeSpec.from_instance(k3)).claimed_alpha == GW_ALPHA
    assert default_rounding(ConeSpec.from_instance(arc)).claimed_alpha is None
    assert default_rounding(ConeSpec.full_psd(3)).claimed_alpha == NESTEROV_ALPHA
    assert RoundingSpec(RoundingKind.GW_HYPERPLANE, None).kind is RoundingKind.GW_HYPERPLANE


def test_too_few_samples(k3_spec):
    with pytest.raises(ValueError):
        estimate_rounding_constant(k3_spec, default_rounding(k3_spec), _k3_gram(), 10, 0)
