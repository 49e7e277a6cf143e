import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grothcover.instances import (DICUT, OPS, XOR, Constraint, CspInstance, CutSet, InstanceError,
                                  PredicateTemplate, constraint_matrix, delta_matrix,
                                  encode_problem, instance_to_json, parse_instance,
                                  random_instance, satisfied, triangle_family)

ALL_TABLES = [t for t in itertools.product((False, True), repeat=4) if any(t)]


def test_templates_follow_cell_order():
    assert XOR.truth_table == (False, True, True, False)
    assert DICUT.truth_table == (False, False, True, False)
    assert PredicateTemplate.from_op("or").truth_table == (False, True, True, True)
    assert PredicateTemplate.from_op("implies").truth_table == (True, True, False, True)
    assert PredicateTemplate.from_op("lit", neg_i=True).truth_table == (True, True, False, False)


def test_false_template_rejected():
    with pytest.raises(InstanceError):
        PredicateTemplate((False,) * 4)
    with pytest.raises(InstanceError):
        PredicateTemplate.from_op("nand")


def test_delta_matrix_entries():
    D = delta_matrix("+", 1, "-", 2, 2)
    # (e0 + e1)(e0 - e2)^T symmetrised
    expected = np.array([[1, 0.5, -0.5], [0.5, 0, -0.5], [-0.5, -0.5, 0]])
    np.testing.assert_array_equal(D, expected)
    assert np.allclose(D, D.T)


def test_delta_inner_product_identity(rng):
    Y = rng.standard_normal((4, 4))
    Y = Y + Y.T
    for si, i, sj, j in triangle_family(3):
        lhs = float(np.sum(delta_matrix(si, i, sj, j, 3) * Y))
        rhs = Y[0, 0] + si * Y[0, i] + sj * Y[0, j] + si * sj * Y[i, j]
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_triangle_family_size():
    # 4 per pair plus 3 per diagonal index
    for n in range(1, 6):
        assert len(triangle_family(n)) == 4 * n * (n - 1) // 2 + 3 * n


def test_triangle_family_nonnegative_on_cuts():
    n = 3
    fam = triangle_family(n)
    for bits in itertools.product((False, True), repeat=n):
        S = CutSet.from_assignment(bits).sign_vector()
        S = np.outer(S, S)
        for si, i, sj, j in fam:
            assert np.sum(delta_matrix(si, i, sj, j, n) * S) >= 0


@pytest.mark.parametrize("table", ALL_TABLES)
def test_constraint_matrix_exact(table):
    t = PredicateTemplate(table)
    for i, j in [(1, 2), (2, 1), (1, 3)]:
        c = Constraint(t, i, j)
        A = constraint_matrix(c, 3)
        for bits in itertools.product((False, True), repeat=3):
            s = CutSet.from_assignment(bits).sign_vector()
            assert float(s @ A @ s) == pytest.approx(float(satisfied(c, bits)), abs=1e-12)


def test_diagonal_constraint_rules():
    Constraint(PredicateTemplate.from_op("or"), 1, 1).check(2)
    with pytest.raises(InstanceError):
        Constraint(XOR, 1, 1).check(2)
    with pytest.raises(InstanceError):
        Constraint(XOR, 0, 1).check(2)


def test_cutset_canonical():
    u = CutSet(0b110, 3)
    assert u.mask == 0b001 and u.members == (0,)
    assert CutSet.from_members([1, 2], 3) == u
    assert CutSet.from_assignment([True, False]).members == (0, 1)
    assert CutSet(0b011, 3).assignment() == (True, False)
    np.testing.assert_array_equal(CutSet(0b101, 3).sign_vector(), [1, -1, 1])
    assert CutSet(0b001, 3) < CutSet(0b011, 3)
    with pytest.raises(InstanceError):
        CutSet(1, 0)


@given(st.integers(1, 12), st.data())
def test_cutset_complement_symmetry(m, data):
    mask = data.draw(st.integers(0, (1 << m) - 1))
    a, b = CutSet(mask, m), CutSet(mask ^ ((1 << m) - 1), m)
    assert a == b
    assert a.mask & 1


def test_encode_maxcut_and_value(k3):
    assert k3.d == 3 and k3.m == 4
    assert k3.value([True, False, False]) == 2.0
    assert k3.value([True, True, True]) == 0.0


def test_encode_dicut_and_2sat():
    inst = encode_problem("maxdicut", [(1, 2, 2.0)], 2)
    assert inst.constraints[0].template == DICUT
    assert inst.value([True, False]) == 2.0 and inst.value([False, True]) == 0.0
    sat = encode_problem("max2sat", [(1, True, 2, False, 1.0)], 2)
    assert sat.value([True, False]) == 0.0
    assert sat.value([False, False]) == 1.0


def test_encode_errors_name_item():
    with pytest.raises(InstanceError, match="item 1"):
        encode_problem("maxcut", [(1, 2), (1, 5)], 3)
    with pytest.raises(InstanceError, match="item 0"):
        encode_problem("maxcut", [(1, 2, -1)], 2)
    with pytest.raises(InstanceError):
        encode_problem("maxcut", [{"i": 1, "j": 2, "op": "or"}], 2)
    with pytest.raises(InstanceError):
        encode_problem("csp", [{"i": 1, "j": 2}], 2)
    with pytest.raises(InstanceError):
        encode_problem("nope", [], 2)


def test_instance_validation():
    with pytest.raises(InstanceError):
        CspInstance(2, [Constraint(XOR, 1, 2)], np.array([1.0, 2.0]))


def test_parse_json_roundtrip(tmp_path, k3):
    p = tmp_path / "k3.json"
    p.write_text(json.dumps(instance_to_json(k3)))
    back = parse_instance(p)
    assert back.n == 3 and back.d == 3
    np.testing.assert_array_equal(back.weights, k3.weights)
    assert [c.template for c in back.constraints] == [c.template for c in k3.constraints]


def test_parse_edgelist(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("# kind: maxdicut\n1 2 0.5\n\n2 3\n")
    inst = parse_instance(p)
    assert inst.n == 3 and inst.kind == "maxdicut"
    np.testing.assert_array_equal(inst.weights, [0.5, 1.0])


def test_parse_errors_carry_location(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("1 2 1\n1 x\n")
    with pytest.raises(InstanceError, match="line 2"):
        parse_instance(p)
    q = tmp_path / "bad.json"
    q.write_text("{")
    with pytest.raises(InstanceError):
        parse_instance(q)
    with pytest.raises(InstanceError):
        parse_instance(tmp_path / "missing.json")


@pytest.mark.parametrize("kind", ["maxcut", "maxdicut", "max2sat"])
def test_random_instance(kind, rng):
    inst = random_instance(kind, 6, rng)
    assert inst.n == 6 and inst.d >= 1
    assert np.all((inst.weights >= 0.1) & (inst.weights <= 1.0))
    ci, cj, tables = inst.arrays()
    assert ci.dtype == np.int64 and tables.shape == (inst.d, 4)


def test_ops_complete():
    assert set(OPS) == {"and", "or", "xor", "implies", "lit"}
