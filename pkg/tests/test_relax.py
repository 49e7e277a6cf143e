import numpy as np
import pytest

from grothcover import ConeSpec, SolverConfig, encode_problem, solve_nu_eps, solve_nu_polar_eps
from grothcover.cones import ConeError, check_dist_membership, lambda_min
from grothcover.instances import random_instance
from grothcover.relax import DegenerateInstance, NonConvergence, dist_star_residual

from conftest import random_psd


def _max(inst, eps=1e-4):
    spec = ConeSpec.from_instance(inst)
    return spec, solve_nu_eps(spec, inst.weights, SolverConfig(eps=eps))


def test_k2_value(k2):
    _, res = _max(k2)
    lo, hi = res.nu_bounds
    assert lo == pytest.approx(1.0, abs=1e-4) and hi == pytest.approx(1.0, abs=1e-4)


def test_k3_value(k3):
    # optimum at Y_ij = -1/2 between the three vertices: 3 * (1 - (-1/2)) / 2
    _, res = _max(k3)
    assert res.nu_bounds[0] <= 9 / 4 + 1e-6 <= res.nu_bounds[1] + 2e-6
    assert res.nu_bounds[1] == pytest.approx(9 / 4, abs=5e-3)


def test_arc_value(arc):
    _, res = _max(arc)
    assert res.nu_bounds[1] == pytest.approx(1.0, abs=1e-4)


def test_k3_polar(k3_spec):
    res = solve_nu_polar_eps(k3_spec, np.ones(3), SolverConfig(eps=1e-3))
    assert res.dual.mu == pytest.approx(4 / 3, abs=5e-3)
    assert res.inner <= res.dual.mu


@pytest.mark.parametrize("kind", ["maxcut", "maxdicut", "max2sat"])
def test_max_witnesses_exactly_feasible(kind, rng):
    inst = random_instance(kind, 6, rng)
    spec, res = _max(inst, eps=0.05)
    Z = res.dual.Y
    np.testing.assert_allclose(np.diag(Z), 1.0, atol=1e-12)
    assert check_dist_membership(spec, Z, tol=1e-12).member
    p = res.primal
    assert dist_star_residual(spec, p.x, res.W, p.lam, p.tri) >= 0
    assert 0 <= res.gap <= 0.05
    # rho is the objective of the perturbed problem at x
    assert p.rho == pytest.approx(0.95 * p.x.sum() + 0.05 * np.trace(res.W))
    assert res.inner == pytest.approx(float(np.sum(res.W * Z)))


@pytest.mark.parametrize("kind", ["maxcut", "maxdicut", "max2sat"])
def test_cover_witnesses_exactly_feasible(kind, rng):
    inst = random_instance(kind, 6, rng)
    spec = ConeSpec.from_instance(inst)
    res = solve_nu_polar_eps(spec, inst.weights, SolverConfig(eps=0.05))
    Y, mu = res.dual.Y, res.dual.mu
    np.testing.assert_allclose(np.diag(Y), mu, rtol=1e-12)
    assert check_dist_membership(spec, Y, tol=1e-12).member
    # Y - eps mu I still lies in Dist after the repair
    assert check_dist_membership(spec, Y - 0.05 * mu * np.eye(spec.dim), tol=1e-12).member
    from grothcover.cones import apply_adjoint
    assert np.all(apply_adjoint(spec, Y) >= inst.weights * (1 - 1e-12))
    p = res.primal
    assert dist_star_residual(spec, p.x, res.W, p.lam, p.tri) >= 0
    assert np.all(res.w >= 0)
    assert 0.95 * p.x.sum() + 0.05 * np.trace(res.W) == pytest.approx(1.0)
    assert 0 <= res.gap <= 0.05


def test_full_psd_both_directions(rng):
    m = 5
    spec = ConeSpec.full_psd(m)
    W = random_psd(m, rng)
    res = solve_nu_eps(spec, W, SolverConfig(eps=0.05))
    assert lambda_min(res.dual.Y) >= 0 and res.gap <= 0.05
    assert dist_star_residual(spec, res.primal.x, res.W) >= 0
    Z = random_psd(m, rng, rank=2)
    cov = solve_nu_polar_eps(spec, Z, SolverConfig(eps=0.05))
    assert lambda_min(cov.dual.Y - Z) >= -1e-9 * np.abs(Z).max()
    assert lambda_min(cov.W) >= -1e-12


def test_input_errors(k3_spec):
    cfg = SolverConfig()
    with pytest.raises(DegenerateInstance):
        solve_nu_eps(k3_spec, np.zeros(3), cfg)
    with pytest.raises(DegenerateInstance):
        solve_nu_polar_eps(k3_spec, np.zeros(3), cfg)
    with pytest.raises(ConeError):
        solve_nu_eps(k3_spec, np.ones(4), cfg)
    with pytest.raises(ValueError):
        solve_nu_eps(k3_spec, -np.ones(3), cfg)
    with pytest.raises(ConeError):
        solve_nu_eps(ConeSpec.full_psd(3), -np.eye(3), cfg)
    with pytest.raises(ValueError):
        SolverConfig(eps=0)
    with pytest.raises(ValueError):
        SolverConfig(sigma_budget=1.5)


def test_iteration_limit_is_reported(k3_spec):
    with pytest.raises(NonConvergence):
        solve_nu_eps(k3_spec, np.ones(3), SolverConfig(eps=0.05, max_iter=3))
