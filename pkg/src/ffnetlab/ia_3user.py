"""Eigenvector-based interference alignment for the 3-user interference channel.

Each source sends m/2 streams.  V1 is spanned by eigenvectors of
Q = Q31^-1 Q32 Q12^-1 Q13 Q23^-1 Q21 (over the splitting field when needed),
and V2, V3 follow from V1 so interference lines up at every destination.
Decoding works iff each S_k = [desired | interference] has full rank.
"""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .and_222 import Model, _as_column, _to_work
from .errors import (
    DimMismatch,
    ModelMismatch,
    NotFeasible,
    NotSymmetric,
    NoValidChoice,
    OddDimension,
    RepeatedEigenvalues,
)
from .ff_core import (
    FFElem,
    FFMatrix,
    FieldCtx,
    eigen_decompose,
    gamma,
    gamma_inv,
    make_field,
    mat_inv,
    mat_rank,
    minimal_poly,
    parse_elem,
    render_elem,
)
from .ff_core.matrix import lift


@dataclass(frozen=True)
class ChannelInstance3U:
    """Q[l][k] is the m x m block from source k+1 to destination l+1, over F_p."""

    model: Model
    p: int
    m: int
    Q: tuple

    @property
    def ctx(self) -> FieldCtx:
        return make_field(self.p, self.m if self.model is Model.ExtensionField else 1)

    @property
    def ground(self) -> FieldCtx:
        return make_field(self.p, 1)

    def block(self, l: int, k: int) -> FFMatrix:
        """1-based access: Q_{lk}."""
        return self.Q[l - 1][k - 1]

    @classmethod
    def extension_field(cls, ctx: FieldCtx, coeffs: Sequence[Sequence]) -> "ChannelInstance3U":
        Q = tuple(tuple(gamma(ctx(c)) for c in row) for row in coeffs)
        return cls(Model.ExtensionField, ctx.p, ctx.m, Q)

    @classmethod
    def symbol_extension(cls, p: int, diags: Sequence[Sequence]) -> "ChannelInstance3U":
        g = make_field(p, 1)
        Q = tuple(tuple(FFMatrix.diag(g, list(d)) for d in row) for row in diags)
        return cls(Model.SymbolExtensionDiagonal, p, Q[0][0].rows, Q)

    @classmethod
    def mimo(cls, p: int, mats: Sequence[Sequence]) -> "ChannelInstance3U":
        g = make_field(p, 1)
        Q = tuple(tuple(M if isinstance(M, FFMatrix) else FFMatrix.from_ints(g, M) for M in row)
                  for row in mats)
        return cls(Model.GeneralMimo, p, Q[0][0].rows, Q)

    def scalars(self) -> tuple:
        if self.model is not Model.ExtensionField:
            raise ModelMismatch("scalar coefficients exist only in the extension-field model")
        return tuple(tuple(gamma_inv(M, self.ctx) for M in row) for row in self.Q)

    def validate(self) -> None:
        for row in self.Q:
            for M in row:
                if M.shape != (self.m, self.m):
                    raise DimMismatch("blocks must be m x m")
                if mat_rank(M) < self.m:
                    raise ModelMismatch("blocks must be invertible")
                if self.model is Model.SymbolExtensionDiagonal and not M.is_diagonal():
                    raise ModelMismatch("blocks must be diagonal")
                if self.model is Model.ExtensionField:
                    gamma_inv(M, self.ctx)

    def to_json(self) -> dict:
        doc = {"users": 3, "model": self.model.value, "p": self.p, "m": self.m}
        if self.model is Model.ExtensionField:
            doc["Q"] = [[render_elem(c) for c in row] for row in self.scalars()]
        else:
            doc["Q"] = [[M.to_ints().tolist() for M in row] for row in self.Q]
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "ChannelInstance3U":
        model = Model.parse(doc["model"])
        p, m = int(doc["p"]), int(doc["m"])
        if model is Model.ExtensionField:
            ctx = make_field(p, m)
            ch = cls.extension_field(ctx, [[parse_elem(ctx, str(c)) for c in row] for row in doc["Q"]])
        else:
            g = make_field(p, 1)
            Q = tuple(tuple(FFMatrix.from_ints(g, M) for M in row) for row in doc["Q"])
            ch = cls(model, p, m, Q)
        if ch.m != m:
            raise DimMismatch(f"declared m={m} but blocks are {ch.m} x {ch.m}")
        ch.validate()
        return ch

    @classmethod
    def load(cls, path) -> "ChannelInstance3U":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def q_matrices(ch: ChannelInstance3U) -> dict[str, FFMatrix]:
    """Q and the per-destination products Q1, Q2, Q3."""
    B = ch.block
    inv = mat_inv
    return {
        "Q": inv(B(3, 1)) @ B(3, 2) @ inv(B(1, 2)) @ B(1, 3) @ inv(B(2, 3)) @ B(2, 1),
        "Q1": inv(B(1, 1)) @ B(1, 3) @ inv(B(2, 3)) @ B(2, 1),
        "Q2": inv(B(2, 1)) @ B(2, 2) @ inv(B(3, 2)) @ B(3, 1),
        "Q3": inv(B(3, 1)) @ B(3, 3) @ inv(B(2, 3)) @ B(2, 1),
    }


@dataclass
class IaPlan:
    model: Model
    p: int
    m: int
    r: int
    ext_ctx: FieldCtx
    V1: FFMatrix
    V2: FFMatrix
    V3: FFMatrix
    S1: FFMatrix
    S2: FFMatrix
    S3: FFMatrix
    lambdas: tuple = ()

    @property
    def S(self) -> tuple:
        return self.S1, self.S2, self.S3

    def summary(self) -> dict:
        return {"model": self.model.value, "p": self.p, "m": self.m, "r": self.r,
                "V1": self.V1.render(), "V2": self.V2.render(), "V3": self.V3.render(),
                "lambdas": [render_elem(x) for x in self.lambdas]}


def _finish_plan(ch: ChannelInstance3U, ext: FieldCtx, V1: FFMatrix, r: int, lambdas=()) -> IaPlan:
    L = {(l, k): lift(ch.block(l, k), ext) for l in (1, 2, 3) for k in (1, 2, 3)}
    V2 = lift(mat_inv(ch.block(3, 2)) @ ch.block(3, 1), ext) @ V1
    V3 = lift(mat_inv(ch.block(2, 3)) @ ch.block(2, 1), ext) @ V1
    S1 = (L[1, 1] @ V1).hstack(L[1, 3] @ V3)
    S2 = (L[2, 2] @ V2).hstack(L[2, 1] @ V1)
    S3 = (L[3, 3] @ V3).hstack(L[3, 1] @ V1)
    return IaPlan(ch.model, ch.p, ch.m, r, ext, V1, V2, V3, S1, S2, S3, tuple(lambdas))


def build_ia_plan(ch: ChannelInstance3U, seed: int = 0, search_subsets: bool = False) -> IaPlan:
    """V1 from the eigenvectors of the first m/2 eigenvalues of Q.

    Eigenvalues are ordered by their canonical digit rendering.  With
    ``search_subsets`` every choice of m/2 eigenvalues is tried and the first
    one passing the rank conditions is kept.
    """
    m = ch.m
    if m % 2:
        raise OddDimension(f"m = {m} is odd")
    Q = q_matrices(ch)["Q"]
    eig = eigen_decompose(Q, seed=seed)
    if not eig.distinct:
        raise RepeatedEigenvalues("Q does not have m distinct eigenvalues")
    order = sorted(range(m), key=lambda i: render_elem(eig.lambdas[i]))
    subsets = itertools.combinations(order, m // 2) if search_subsets else [tuple(order[:m // 2])]
    plan = None
    for idx in subsets:
        V1 = FFMatrix(eig.ext_ctx, eig.eigvecs.data[:, list(idx)])
        plan = _finish_plan(ch, eig.ext_ctx, V1, eig.r, [eig.lambdas[i] for i in idx])
        if not search_subsets or rank_conditions(plan, ch)["feasible"]:
            break
    return plan


def rank_conditions(plan: IaPlan, ch: ChannelInstance3U | None = None) -> dict:
    ranks = [mat_rank(S) for S in plan.S]
    return {"rank_S1": ranks[0], "rank_S2": ranks[1], "rank_S3": ranks[2],
            "feasible": all(r == plan.m for r in ranks)}


def alignment_holds(plan: IaPlan, ch: ChannelInstance3U) -> dict[str, bool]:
    """Exact alignment identities, plus the span condition at destination 1."""
    ext = plan.ext_ctx
    L = lambda l, k: lift(ch.block(l, k), ext)  # noqa: E731
    span1 = mat_rank((L(1, 2) @ plan.V2).hstack(L(1, 3) @ plan.V3)) == plan.m // 2
    return {
        "dest2": L(2, 1) @ plan.V1 == L(2, 3) @ plan.V3,
        "dest3": L(3, 1) @ plan.V1 == L(3, 2) @ plan.V2,
        "dest1_span": bool(span1),
    }


def _is_scalar(M: FFMatrix) -> bool:
    return M.is_diagonal() and len(set(M.diagonal())) <= 1


def _candidate_pool(ctx: FieldCtx, m: int):
    """All-ones first, then the other nonzero vectors in index order."""
    ones = tuple([1] * m)
    yield ones
    for digits in itertools.product(range(ctx.p), repeat=m):
        v = tuple(reversed(digits))
        if any(v) and v != ones:
            yield v


def scalar_q_plan(ch: ChannelInstance3U, budget: int = 200_000) -> IaPlan:
    """Plan for channels whose Q is a scaled identity.

    Every vector is then an eigenvector of Q, so V1 may be any m/2
    independent vectors.  Candidates over F_p are enumerated in a fixed
    order and the first choice satisfying the rank conditions is kept.
    """
    m = ch.m
    if m % 2:
        raise OddDimension(f"m = {m} is odd")
    Q = q_matrices(ch)["Q"]
    if not _is_scalar(Q):
        raise NotSymmetric("Q is not a scaled identity")
    g = ch.ground
    pool = list(itertools.islice(_candidate_pool(g, m), 4096))
    tried = 0
    for combo in itertools.combinations(pool, m // 2):
        tried += 1
        if tried > budget:
            break
        V1 = FFMatrix.from_ints(g, np.array(combo, dtype=np.int64).T)
        if mat_rank(V1) < m // 2:
            continue
        plan = _finish_plan(ch, g, V1, 1, [Q[0, 0]])
        if rank_conditions(plan, ch)["feasible"]:
            return plan
    raise NoValidChoice(f"no valid V1 among {min(tried, budget)} candidates", instance=ch.to_json())


def symmetric_diag_plan(ch: ChannelInstance3U, budget: int = 200_000) -> IaPlan:
    if ch.model is not Model.SymbolExtensionDiagonal:
        raise ModelMismatch("symmetric_diag_plan needs the diagonal symbol-extension model")
    return scalar_q_plan(ch, budget)


class Thm7Case(str, enum.Enum):
    CaseA_feasible = "CaseA_feasible"
    CaseB_infeasible = "CaseB_infeasible"
    Other = "Other"


def theorem7_classify(ch: ChannelInstance3U) -> Thm7Case:
    if ch.model is not Model.ExtensionField or ch.m != 2:
        raise ModelMismatch("classification applies to the extension-field model with m = 2")
    qs = q_matrices(ch)
    F = ch.ctx
    in_ground = {k: minimal_poly(gamma_inv(M, F)).degree == 1 for k, M in qs.items()}
    if not in_ground["Q"]:
        return Thm7Case.CaseB_infeasible
    if not any(in_ground[k] for k in ("Q1", "Q2", "Q3")):
        return Thm7Case.CaseA_feasible
    return Thm7Case.Other


def default_plan(ch: ChannelInstance3U, seed: int = 0) -> IaPlan:
    """Eigenvector plan, or the candidate search when Q is a scaled identity."""
    if ch.m >= 2 and _is_scalar(q_matrices(ch)["Q"]):
        return scalar_q_plan(ch)
    return build_ia_plan(ch, seed=seed)


def infeasibility_reason(ch: ChannelInstance3U) -> str:
    if ch.model is Model.ExtensionField:
        beta = gamma_inv(q_matrices(ch)["Q"], ch.ctx)
        if minimal_poly(beta).degree == ch.m:
            return "Corollary3"
    if ch.model is Model.SymbolExtensionDiagonal:
        return "diagonal_shared_eigenvectors"
    return "rank_conditions"


def _transport(ch: ChannelInstance3U, l: int, xs: Sequence[FFMatrix], W: FieldCtx) -> FFMatrix:
    """Destination l's observation, one Phi^T column per slot."""
    m, p = ch.m, ch.p
    cols = [x.data[:, 0, :] for x in xs]
    Y = np.zeros((m, W.m), dtype=np.int64)
    if ch.model is Model.ExtensionField:
        F = ch.ctx
        coeffs = [gamma_inv(ch.block(l, k), F) for k in (1, 2, 3)]
        for t in range(W.m):
            acc = F.zero()
            for c, X in zip(coeffs, cols):
                acc = acc + c * FFElem(F, X[:, t])
            Y[:, t] = acc.coeffs
    else:
        for k, X in zip((1, 2, 3), cols):
            Y = (Y + ch.block(l, k).to_ints() @ X.astype(np.int64)) % p
    return FFMatrix(W, Y.reshape(m, 1, W.m))


def simulate_3user(ch: ChannelInstance3U, w1, w2, w3, seed: int = 0,
                   plan: IaPlan | None = None) -> dict:
    plan = plan if plan is not None else default_plan(ch, seed)
    rc = rank_conditions(plan, ch)
    if not rc["feasible"]:
        raise NotFeasible(infeasibility_reason(ch), f"ranks {rc['rank_S1']}, {rc['rank_S2']}, {rc['rank_S3']}")
    h = ch.m // 2
    ws = [_as_column(w, plan.ext_ctx) for w in (w1, w2, w3)]
    W = ws[0].ctx
    if any(w.rows != h for w in ws):
        raise DimMismatch(f"each message has m/2 = {h} symbols")
    if plan.r > 1 and W is not plan.ext_ctx:
        raise DimMismatch(f"messages must lie in F_{ch.p}^{plan.r} for this plan")
    Vs = [_to_work(V, W) for V in (plan.V1, plan.V2, plan.V3)]
    xs = [V @ w for V, w in zip(Vs, ws)]
    decoded = []
    for l, S in zip((1, 2, 3), plan.S):
        y = _transport(ch, l, xs, W)
        z = mat_inv(_to_work(S, W)) @ y
        decoded.append(z[:h, :])
    ok = all(d == w for d, w in zip(decoded, ws))
    return {"decoded": tuple(decoded), "success": bool(ok)}
