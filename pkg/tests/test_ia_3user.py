import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import load_fixture_json
from ffnetlab.and_222 import Model
from ffnetlab.errors import NotFeasible, NotSymmetric, OddDimension
from ffnetlab.ff_core import FFMatrix, make_field, mat_inv
from ffnetlab.ia_3user import (
    ChannelInstance3U,
    Thm7Case,
    alignment_holds,
    build_ia_plan,
    default_plan,
    infeasibility_reason,
    q_matrices,
    rank_conditions,
    scalar_q_plan,
    simulate_3user,
    symmetric_diag_plan,
    theorem7_classify,
)


def random_mimo(p, m, rng):
    g = make_field(p, 1)
    from ffnetlab.ff_core import mat_rank

    rows = []
    for _ in range(3):
        row = []
        while len(row) < 3:
            M = FFMatrix.from_ints(g, rng.integers(0, p, size=(m, m)))
            if mat_rank(M) == m:
                row.append(M)
        rows.append(row)
    return ChannelInstance3U.mimo(p, rows)


def test_full_degree_beta_fixture_is_infeasible():
    ch = ChannelInstance3U.from_json(load_fixture_json("ia3_f4_corollary3.json"))
    assert infeasibility_reason(ch) == "Corollary3"
    assert theorem7_classify(ch) is Thm7Case.CaseB_infeasible
    with pytest.raises(NotFeasible) as ei:
        simulate_3user(ch, [1], [0], [1])
    assert ei.value.predicate == "Corollary3"


def test_symmetric_fixture_decodes():
    doc = load_fixture_json("ia3_se_symmetric.json")
    ch = ChannelInstance3U.from_json(doc)
    assert ch.to_json() == doc
    plan = symmetric_diag_plan(ch)
    assert rank_conditions(plan, ch)["feasible"]
    for w in ([1], [2], [4]):
        assert simulate_3user(ch, w, [3], [0], plan=plan)["success"]


@given(st.integers(0, 2**32 - 1))
def test_alignment_identities_hold_for_eigen_plans(seed):
    rng = np.random.default_rng(seed)
    ch = random_mimo(5, 2, rng)
    try:
        plan = build_ia_plan(ch)
    except Exception as e:  # repeated eigenvalues are a legitimate outcome
        assert type(e).__name__ == "RepeatedEigenvalues"
        return
    al = alignment_holds(plan, ch)
    assert al["dest2"] and al["dest3"] and al["dest1_span"]
    Q = q_matrices(ch)["Q"]
    from ffnetlab.ff_core.matrix import lift
    QL = lift(Q, plan.ext_ctx)
    for j, lam in enumerate(plan.lambdas):
        v = plan.V1.col(j)
        assert QL @ v == v * lam
    if rank_conditions(plan, ch)["feasible"]:
        W = plan.ext_ctx
        ws = [[W.from_index(int(rng.integers(W.order)))] for _ in range(3)]
        assert simulate_3user(ch, *ws, plan=plan)["success"]


def test_q_matrix_product_order():
    rng = np.random.default_rng(1)
    ch = random_mimo(3, 2, rng)
    B = ch.block
    Q = mat_inv(B(3, 1)) @ B(3, 2) @ mat_inv(B(1, 2)) @ B(1, 3) @ mat_inv(B(2, 3)) @ B(2, 1)
    assert q_matrices(ch)["Q"] == Q


def test_odd_dimension_rejected():
    rng = np.random.default_rng(2)
    with pytest.raises(OddDimension):
        build_ia_plan(random_mimo(3, 3, rng))


def test_scalar_plan_needs_scalar_q():
    rng = np.random.default_rng(3)
    ch = random_mimo(7, 2, rng)
    if q_matrices(ch)["Q"].is_diagonal():
        pytest.skip("drew a diagonal Q")
    with pytest.raises(NotSymmetric):
        scalar_q_plan(ch)


@pytest.mark.parametrize("p,m", [(2, 2), (3, 2), (5, 2)])
def test_symmetric_extension_field_case_a(p, m):
    F = make_field(p, m)
    a = F.generator
    ch = ChannelInstance3U.extension_field(F, [[F.one(), a, a], [a, F.one(), a], [a, a, F.one()]])
    assert theorem7_classify(ch) is Thm7Case.CaseA_feasible
    plan = default_plan(ch)
    assert rank_conditions(plan, ch)["feasible"]
    for w in F.elements():
        assert simulate_3user(ch, [w], [w + F.one()], [F.one()], plan=plan)["success"]


def test_symbol_extension_model_matches_diagonals():
    ch = ChannelInstance3U.symbol_extension(5, [[[1, 2]] * 3] * 3)
    assert ch.model is Model.SymbolExtensionDiagonal
    assert ch.block(2, 3).diagonal()[1] == make_field(5, 1)(2)
