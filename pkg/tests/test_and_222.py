import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import load_fixture_json
from ffnetlab.and_222 import (
    ChannelInstance222,
    Model,
    achievable_sum_rate,
    alignment_residuals,
    batch_plans,
    batch_simulate,
    build_plan,
    check_feasible,
    d_sum,
    diagonalization_holds,
    feasibility_fe,
    feasibility_mimo,
    gamma_stack,
    hop_matrices,
    simulate_222,
)
from ffnetlab.errors import DimMismatch, ModelMismatch, NotFeasible
from ffnetlab.feasibility import landau_max_lcm
from ffnetlab.ff_core import FFMatrix, block, char_poly, make_field, mat_rank, minimal_poly
from ffnetlab.ff_core.matrix import lift


def in_subfield(M, r):
    """Every entry fixed by the r-th power of Frobenius, i.e. lies in F_{p^r}."""
    from ffnetlab.ff_core.field import _k_frobenius

    return np.array_equal(_k_frobenius(M.ctx, M.data, r) % M.ctx.p, M.data)


def fe_instance(p, m, idx):
    F = make_field(p, m)
    return ChannelInstance222.extension_field(F, [F.from_index(i) for i in idx[:4]],
                                              [F.from_index(i) for i in idx[4:]])


@st.composite
def fe_case(draw):
    p, m = draw(st.sampled_from([(2, 2), (2, 3), (2, 4), (3, 2), (5, 2), (2, 5)]))
    q = p**m
    idx = [draw(st.integers(1, q - 1)) for _ in range(8)]
    msgs = [draw(st.integers(0, p - 1)) for _ in range(2 * m - 1)]
    return p, m, idx, msgs


def test_fixture_and_f8_roundtrip_and_decode():
    doc = load_fixture_json("and_f8.json")
    ch = ChannelInstance222.from_json(doc)
    assert ch.to_json() == doc
    F = ch.ctx
    a = F.generator
    out = simulate_222(ch, [a, F.one(), a * a], [a + F.one(), F.zero()])
    assert out["success"]


def test_fixture_and_f4_decodes_every_message():
    ch = ChannelInstance222.from_json(load_fixture_json("and_f4.json"))
    F = ch.ctx
    plan = build_plan(ch)
    for w in F.elements():
        for v in F.elements():
            for u in F.elements():
                assert simulate_222(ch, [w, v], [u], plan=plan)["success"]


def test_symbol_extension_needs_enough_units():
    ch = ChannelInstance222.from_json(load_fixture_json("se_p2m2.json"))
    assert check_feasible(ch) == (False, "P_SE_zero")
    with pytest.raises(NotFeasible) as ei:
        build_plan(ch)
    assert ei.value.predicate == "P_SE_zero"


def test_symbol_extension_decodes():
    ch = ChannelInstance222.symbol_extension(5, [[1, 1], [1, 2], [1, 1], [1, 1]], [[1, 1], [3, 2], [1, 1], [1, 1]])
    assert check_feasible(ch) == (True, None)
    assert simulate_222(ch, [1, 4], [2])["success"]


@given(fe_case())
def test_fe_predicate_is_minimal_polynomial_degree(case):
    p, m, idx, _ = case
    ch = fe_instance(p, m, idx)
    F = ch.ctx
    s1, s2 = ch.scalars()
    g = s1[0].inverse() * s1[1] * s1[3].inverse() * s1[2]
    f = feasibility_fe(ch)
    assert f["gamma"] == g
    assert f["feasible"] == (minimal_poly(g).degree == m and minimal_poly(f["gamma_prime"]).degree == m)
    # Q is Gamma(gamma)
    Q, _ = hop_matrices(ch)
    from ffnetlab.ff_core import gamma
    assert Q == gamma(g)
    assert F.m == m


@given(fe_case())
def test_fe_end_to_end(case):
    p, m, idx, msgs = case
    ch = fe_instance(p, m, idx)
    ok, _ = check_feasible(ch)
    if not ok:
        with pytest.raises(NotFeasible):
            build_plan(ch)
        return
    plan = build_plan(ch)
    assert all(alignment_residuals(plan).values())
    assert diagonalization_holds(plan)
    assert simulate_222(ch, msgs[:m], msgs[m:], plan=plan)["success"]
    # messages from the extension field itself (m slots)
    F = ch.ctx
    w = [F.from_index((i * 7 + 3) % F.order) for i in range(2 * m - 1)]
    assert simulate_222(ch, w[:m], w[m:], plan=plan)["success"]


@given(st.sampled_from([(2, 2), (2, 3), (3, 2), (5, 3)]), st.integers(0, 2**32 - 1))
def test_batch_engine_agrees_with_object_path(pm, seed):
    p, m = pm
    F = make_field(p, m)
    rng = np.random.default_rng(seed)
    idx = rng.integers(1, F.order, size=(8, 8))
    G = gamma_stack(F, idx)
    bp = batch_plans(p, m, Model.ExtensionField, G[:, :4], G[:, 4:])
    w1 = rng.integers(0, p, size=(8, m))
    w2 = rng.integers(0, p, size=(8, m - 1))
    ok = batch_simulate(bp, w1, w2)
    for b in range(8):
        ch = fe_instance(p, m, list(idx[b]))
        feas, _ = check_feasible(ch)
        assert bool(bp["feasible"][b]) == feas
        if feas:
            assert bp["built"][b]
            assert ok[b] == simulate_222(ch, list(w1[b]), list(w2[b]))["success"]


def test_second_hop_singular_iff_one_is_an_eigenvalue():
    rng = np.random.default_rng(4)
    g = make_field(2, 1)
    seen = set()
    for _ in range(60):
        mats = []
        while len(mats) < 8:
            M = rng.integers(0, 2, size=(2, 2))
            if round(np.linalg.det(M)) % 2:
                mats.append(M)
        ch = ChannelInstance222.mimo(2, mats[:4], mats[4:])
        big = block([[ch.hop2[0], ch.hop2[1]], [ch.hop2[2], ch.hop2[3]]])
        _, Qp = hop_matrices(ch)
        one_is_eig = char_poly(Qp)(g.one()).is_zero()
        singular = mat_rank(big) < 4
        assert singular == one_is_eig
        seen.add(singular)
    assert seen == {True, False}


@pytest.mark.parametrize("p,m", [(3, 3), (5, 2), (2, 4), (3, 4)])
def test_mimo_plans(p, m):
    rng = np.random.default_rng(p * 10 + m)
    g = make_field(p, 1)
    built = 0
    for _ in range(25):
        mats = []
        while len(mats) < 8:
            M = FFMatrix.from_ints(g, rng.integers(0, p, size=(m, m)))
            if mat_rank(M) == m:
                mats.append(M)
        ch = ChannelInstance222.mimo(p, mats[:4], mats[4:])
        f = feasibility_mimo(ch)
        if not f["feasible"]:
            continue
        try:
            plan = build_plan(ch)
        except NotFeasible as e:
            assert e.predicate == "second_hop_singular"
            continue
        built += 1
        assert plan.r == f["r"] == math.lcm(*plan.hop_r)
        assert max(plan.hop_r) <= landau_max_lcm(m)
        assert in_subfield(plan.V1, plan.hop_r[0]) and in_subfield(plan.V3, plan.hop_r[1])
        assert mat_rank(plan.V1) == m
        assert all(alignment_residuals(plan).values())
        W = plan.ext_ctx
        w = [W.from_index(int(i)) for i in rng.integers(0, W.order, size=2 * m - 1)]
        assert simulate_222(ch, w[:m], w[m:], plan=plan)["success"]
    assert built > 0


def test_mimo_plan_field_is_splitting_field():
    # Q with irreducible characteristic polynomial x^2 + x + 1 over F_2
    g = make_field(2, 1)
    I = [[1, 0], [0, 1]]
    C = [[0, 1], [1, 1]]
    ch = ChannelInstance222.mimo(2, [I, C, I, I], [I, C, I, I])
    plan = build_plan(ch)
    assert plan.r == 2
    assert plan.ext_ctx is make_field(2, 2)
    assert plan.Q == lift(FFMatrix.from_ints(g, C), plan.ext_ctx)


def test_rates():
    from fractions import Fraction

    assert d_sum(3) == Fraction(5, 3)
    assert d_sum(1) == 1
    assert all(d_sum(m) < d_sum(m + 1) < 2 for m in range(1, 50))
    assert achievable_sum_rate(2, 3) == pytest.approx(5.0)
    assert achievable_sum_rate(3, 2) == pytest.approx(3 * math.log2(3))


def test_message_shape_checks():
    ch = ChannelInstance222.from_json(load_fixture_json("and_f8.json"))
    with pytest.raises(DimMismatch):
        simulate_222(ch, [1, 0], [1, 0])


def test_model_mismatch():
    ch = ChannelInstance222.symbol_extension(5, [[1, 2]] * 4, [[1, 2]] * 4)
    with pytest.raises(ModelMismatch):
        feasibility_fe(ch)
    with pytest.raises(ModelMismatch):
        ChannelInstance222.symbol_extension(5, [[1, 0]] * 4, [[1, 2]] * 4).validate()
