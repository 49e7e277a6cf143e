import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grothcover.cones import (ConeError, ConeSpec, CovKind, DistKind, apply_adjoint, apply_map,
                              check_cover_order, check_dist_membership, cut_coverage,
                              lambda_min, psd_project, sign_tensor, sign_vectors, sym)
from grothcover.instances import CutSet, constraint_matrix, random_instance

from conftest import random_psd


def test_from_instance_shapes(k3_spec, k3):
    assert k3_spec.m == 4 and k3_spec.d == 3 and k3_spec.polyhedral
    assert k3_spec.kappa == 0.25
    for A, c in zip(k3_spec.a_matrices, k3.constraints):
        np.testing.assert_array_equal(A, constraint_matrix(c, 3))
    # tr A_f = 1/4 * (number of true cells)
    np.testing.assert_allclose(k3_spec.adjoint_identity(), [0.5, 0.5, 0.5])


def test_adjoint_and_map_are_adjoint(rng):
    inst = random_instance("max2sat", 5, rng)
    spec = ConeSpec.from_instance(inst)
    Y = rng.standard_normal((6, 6))
    Y = Y + Y.T
    w = rng.random(spec.d)
    assert float(w @ apply_adjoint(spec, Y)) == pytest.approx(float(np.sum(apply_map(spec, w) * Y)))


def test_cut_coverage_kernel_matches_generic(rng):
    inst = random_instance("maxdicut", 5, rng)
    spec = ConeSpec.from_instance(inst)
    generic = ConeSpec.from_matrices(spec.a_matrices, kappa=0.25)
    masks = np.arange(1, 64, 2)
    np.testing.assert_allclose(cut_coverage(spec, masks), cut_coverage(generic, masks), atol=1e-12)


def test_validation():
    with pytest.raises(ConeError):
        ConeSpec.full_psd(1)
    with pytest.raises(ConeError):
        ConeSpec.from_matrices([np.zeros((3, 3))])
    with pytest.raises(ConeError):
        ConeSpec.from_matrices([np.eye(3), np.eye(2)])
    with pytest.raises(ConeError):
        sym(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ConeError):
        ConeSpec.full_psd(3).d
    # A*(I) has to stay bounded below by kappa
    with pytest.raises(ConeError):
        ConeSpec.from_matrices([np.diag([1.0, -1.0])])


def test_full_psd_spec():
    spec = ConeSpec.full_psd(4)
    assert spec.cov_kind is CovKind.FULL_PSD and spec.triangles is None
    assert ConeSpec.full_psd(4, DistKind.PSD_TRIANGLE).triangles is not None


def test_sign_tensor_and_vectors():
    u = CutSet.from_members([0, 2], 3)
    np.testing.assert_array_equal(sign_tensor(u), np.outer([1, -1, 1], [1, -1, 1]))
    np.testing.assert_array_equal(sign_vectors([u.mask], 3)[0], [1, -1, 1])


def test_cuts_are_dist_members(k3_spec):
    for mask in range(1, 16, 2):
        rep = check_dist_membership(k3_spec, sign_tensor(CutSet(mask, 4)))
        assert rep.member and rep.worst_triangle_violation >= 0


def test_triangle_violation_detected(k3_spec):
    # v_i = a v_0 + sqrt(1-a^2) u_i with u_i at 120 degrees; a = 0.6 breaks (-,-)
    a = 0.6
    Y = np.full((4, 4), 1.5 * a * a - 0.5)
    Y[0, :] = Y[:, 0] = a
    np.fill_diagonal(Y, 1.0)
    rep = check_dist_membership(k3_spec, Y)
    assert rep.min_eigenvalue >= -1e-12
    assert rep.worst_triangle_violation < 0 and not rep.member


def test_psd_project(rng):
    M = rng.standard_normal((5, 5))
    M = M + M.T
    P = psd_project(M)
    assert lambda_min(P) >= -1e-12
    # projection is idempotent and leaves PSD input alone
    np.testing.assert_allclose(psd_project(P), P, atol=1e-10)


def test_cover_order(k3_spec, rng):
    Y = sign_tensor(CutSet.from_members([0, 1], 4))
    assert check_cover_order(k3_spec, 0.5 * Y, Y).holds
    assert not check_cover_order(k3_spec, 2 * Y, Y).holds
    full = ConeSpec.full_psd(4)
    S = random_psd(4, rng)
    assert check_cover_order(full, S, S + np.eye(4)).holds
    assert not check_cover_order(full, S + np.eye(4), S).holds


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_psd_is_dist_member(seed):
    rng = np.random.default_rng(seed)
    Y = random_psd(5, rng)
    assert check_dist_membership(ConeSpec.full_psd(5), Y).member
