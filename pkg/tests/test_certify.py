import dataclasses
import warnings

import numpy as np
import pytest

from grothcover import (BetaInfeasible, ConeSpec, Cover, CutSet, brute_maxq, certificate_from_json,
                        certificate_to_json, exact_fevc, parameter_schedule, run_pipeline,
                        select_best_cut, verify_certificate)
from grothcover.certify import Case, dist_star_margin
from grothcover.cover import BudgetExhausted, Mode
from grothcover.instances import random_instance

from conftest import random_psd


def test_schedule_polyhedral():
    s = parameter_schedule(0.8, 0.878, Case.POLYHEDRAL)
    tau = 1 - 0.8 / 0.878
    assert s.tau == pytest.approx(tau) and s.tau == pytest.approx(0.0888, abs=1e-4)
    assert s.eps == s.sigma == s.gamma == pytest.approx(tau / 3)
    assert s.bss == 0.0
    assert 0.878 * (1 - tau / 3) ** 3 >= 0.8
    assert s.guarantee(0.878) >= 0.8


def test_schedule_psd_quartic():
    a = 0.9
    s = parameter_schedule(a / 2, a, "PSD")
    assert s.tau == pytest.approx(0.5)
    assert s.eps == pytest.approx(1 / 8) and s.bss == pytest.approx(1 / 7)
    # (1 - tau/4)^3 / (1 + tau/(4 - tau)) = (1 - tau/4)^4
    assert s.guarantee(a) == pytest.approx(a * (1 - 1 / 8) ** 4)
    assert s.guarantee(a) >= a / 2


@pytest.mark.parametrize("beta", np.linspace(0.05, 0.85, 9))
def test_schedule_guarantee_holds(beta):
    for case in (Case.POLYHEDRAL, Case.PSD):
        assert parameter_schedule(beta, 0.87856, case).guarantee(0.87856) >= beta * (1 - 1e-12)


def test_schedule_limits():
    with pytest.raises(BetaInfeasible):
        parameter_schedule(0.9, 0.878, Case.POLYHEDRAL)
    with pytest.warns(RuntimeWarning):
        s = parameter_schedule(0.87855, 0.87856, Case.POLYHEDRAL)
    assert s.eps < 1e-5


def test_select_best_cut_k2():
    W = np.array([[0.5, 0, 0], [0, 0, -0.5], [0, -0.5, 0]])  # 1/2 (E00 - sym E12)
    support = [CutSet(k, 3) for k in (1, 3, 5, 7)]
    best = select_best_cut(W, support)
    s = best.sign_vector()
    assert s[1] * s[2] == -1.0
    assert best.members == (0, 1)  # tie with (0, 2) goes to the smaller member set
    assert select_best_cut(W, [CutSet(7, 3)]) == CutSet(7, 3)
    with pytest.raises(ValueError):
        select_best_cut(W, [])


def test_select_best_cut_matches_brute(rng):
    W = rng.standard_normal((5, 5))
    W = W + W.T
    support = [CutSet(k, 5) for k in range(1, 32, 2)]
    assert select_best_cut(W, support).mask == brute_maxq(None, W).argopt.mask


@pytest.mark.parametrize("direction", ["cover", "max"])
def test_k3_pipeline(direction, k3, k3_spec):
    res = run_pipeline(k3_spec, np.ones(3), 0.8, direction=direction, seed=4)
    cert = res.certificate
    assert res.report.passed
    if direction == "cover":
        assert cert.rho == 1.0
        # closed-form polar value 4/3 below, fevc = 3/2 over beta above
        assert 4 / 3 * (1 - res.schedule.sigma) <= cert.mu <= 1.5 / 0.8
    fevc = exact_fevc(k3, res.Z).value
    assert cert.mu <= fevc + 1e-7 and fevc <= cert.mu / 0.8 + 1e-7
    q = brute_maxq(k3_spec, res.W).value
    assert 0.8 * cert.rho <= q + 1e-7 and q <= cert.rho + 1e-7
    assert cert.y.cost <= cert.mu / 0.8 + 1e-12


def test_tampering_flips_expected_clause(k3_spec):
    res = run_pipeline(k3_spec, np.ones(3), 0.8, seed=1)
    cert = res.certificate

    def clauses(c):
        r = verify_certificate(k3_spec, res.W, res.Z, c)
        return {k for k, v in r.clauses.items() if not v}

    assert clauses(cert) == set()
    assert clauses(dataclasses.replace(cert, rho=cert.rho * (1 + 1e-3))) == {"i"}
    assert clauses(dataclasses.replace(cert, y=cert.y.scaled(0.5))) == {"iii"}
    assert clauses(dataclasses.replace(cert, y=cert.y.scaled(2.0))) == {"iii"}
    assert clauses(dataclasses.replace(cert, x=cert.x - 0.1)) == {"iv"}
    worst = CutSet(1, 4)  # the trivial cut separates nothing
    assert "ii" in clauses(dataclasses.replace(cert, U=worst))


def test_json_roundtrip_and_determinism(k3_spec):
    a = run_pipeline(k3_spec, np.ones(3), 0.8, seed=17)
    b = run_pipeline(k3_spec, np.ones(3), 0.8, seed=17)
    ja, jb = certificate_to_json(a.certificate), certificate_to_json(b.certificate)
    assert ja == jb
    keys = [line.split(":")[0].strip().strip('"') for line in ja.splitlines()[1:-1]]
    assert keys[:9] == ["beta", "rho", "mu", "U", "x", "cover", "seed", "alpha_used", "checks"]
    back = certificate_from_json(ja)
    assert back.rho == a.certificate.rho and back.mu == a.certificate.mu
    np.testing.assert_array_equal(back.y.weights, a.certificate.y.weights)
    assert verify_certificate(k3_spec, a.W, a.Z, back).passed


def test_pipeline_without_claim_uses_pilot(rng):
    inst = random_instance("maxdicut", 6, rng)
    spec = ConeSpec.from_instance(inst)
    res = run_pipeline(spec, inst.weights, 0.6, seed=2)
    assert res.alpha is not None and res.certificate.alpha_used == pytest.approx(res.alpha.lower)
    assert res.report.passed


def test_beta_above_claim(k3_spec):
    with pytest.raises(BetaInfeasible):
        run_pipeline(k3_spec, np.ones(3), 0.95, mode=Mode.THEORETICAL)


def test_psd_pipeline(rng):
    spec = ConeSpec.full_psd(5)
    W = random_psd(5, rng)
    for direction in ("max", "cover"):
        res = run_pipeline(spec, W, 0.5, direction=direction, seed=3)
        assert res.report.passed
        assert res.certificate.y.cost <= res.certificate.mu / 0.5 + 1e-9


def test_psd_theoretical_budget_exceeds_cap(rng):
    spec = ConeSpec.full_psd(4)
    with pytest.raises(BudgetExhausted):
        run_pipeline(spec, random_psd(4, rng), 0.5, mode=Mode.THEORETICAL)


def test_overrides_warn(k3_spec):
    with pytest.warns(RuntimeWarning):
        res = run_pipeline(k3_spec, np.ones(3), 0.7, eps=0.01, sigma=0.01, gamma=0.01)
    assert res.schedule.eps == 0.01 and res.report.passed


def test_dist_star_margin_uses_triangles(k3_spec):
    from grothcover import delta_matrix
    # W = -Delta is cancelled by one triangle multiplier, leaving Diag(x)
    W = -delta_matrix("-", 1, "-", 2, 3)
    x = np.full(4, 0.01)
    assert np.linalg.eigvalsh(np.diag(x) - W)[0] < 0
    assert dist_star_margin(k3_spec, x, W) == pytest.approx(0.01, abs=1e-7)
    assert dist_star_margin(ConeSpec.full_psd(4), x, W) < 0
