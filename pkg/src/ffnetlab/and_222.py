"""Aligned network diagonalization for the two-hop 2x2x2 interference channel.

Sources 1 and 2 send m and m-1 streams.  Precoders align interference at the
relays so each relay decodes a fixed combination of the messages, then the
relays precode with the inverse of the second-hop matrix so the end-to-end
map is diagonal.  Three channel structures are supported:

* ``ExtensionField``: scalar coefficients in F_{p^m}, seen over F_p through Gamma.
* ``SymbolExtensionDiagonal``: m-symbol extension of a time-varying F_p channel.
* ``GeneralMimo``: arbitrary invertible m x m matrices over F_p.  The scheme
  then runs over F_{p^r}, r the splitting degree of both hops, for r slots.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DimMismatch, ModelMismatch, NotFeasible, Singular
from .ff_core import (
    FFElem,
    FFMatrix,
    FieldCtx,
    block,
    eigen_decompose,
    gamma,
    gamma_inv,
    lift,
    make_field,
    mat_inv,
    mat_rank,
    minimal_poly,
    parse_elem,
    render_elem,
)
from .ff_core.field import _k_inv, _k_iszero, _k_mul
from .ff_core.matrix import _k_eye, _k_matmul, _k_matvec, batch_inv, batch_rank, batch_rref
from .ff_core.poly import radical, splitting_degree
from .ff_core.matrix import char_poly


class Model(str, enum.Enum):
    ExtensionField = "ExtensionField"
    SymbolExtensionDiagonal = "SymbolExtensionDiagonal"
    GeneralMimo = "GeneralMimo"

    @classmethod
    def parse(cls, text: str) -> "Model":
        aliases = {"fe": cls.ExtensionField, "se": cls.SymbolExtensionDiagonal, "mimo": cls.GeneralMimo}
        t = str(text)
        if t.lower() in aliases:
            return aliases[t.lower()]
        return cls(t)


_HOP1 = ("Q11", "Q12", "Q21", "Q22")
_HOP2 = ("Q33", "Q34", "Q43", "Q44")


@dataclass(frozen=True)
class ChannelInstance222:
    """A 2x2x2 channel realization; every block is an m x m matrix over F_p.

    ``hop1`` is ``(Q11, Q12, Q21, Q22)`` and ``hop2`` is ``(Q33, Q34, Q43, Q44)``.
    """

    model: Model
    p: int
    m: int
    hop1: tuple
    hop2: tuple

    @property
    def ctx(self) -> FieldCtx:
        """F_{p^m} for the extension-field model, F_p otherwise."""
        return make_field(self.p, self.m if self.model is Model.ExtensionField else 1)

    @property
    def ground(self) -> FieldCtx:
        return make_field(self.p, 1)

    # constructors
    @classmethod
    def extension_field(cls, ctx: FieldCtx, hop1: Sequence, hop2: Sequence) -> "ChannelInstance222":
        """From scalar coefficients (FFElem, digit strings or ints) in F_{p^m}."""
        h1 = tuple(gamma(ctx(c)) for c in hop1)
        h2 = tuple(gamma(ctx(c)) for c in hop2)
        return cls(Model.ExtensionField, ctx.p, ctx.m, h1, h2)

    @classmethod
    def symbol_extension(cls, p: int, hop1_diags: Sequence, hop2_diags: Sequence) -> "ChannelInstance222":
        """From four diagonals per hop (sequences of m ints in F_p^*)."""
        g = make_field(p, 1)
        h1 = tuple(FFMatrix.diag(g, list(d)) for d in hop1_diags)
        h2 = tuple(FFMatrix.diag(g, list(d)) for d in hop2_diags)
        return cls(Model.SymbolExtensionDiagonal, p, h1[0].rows, h1, h2)

    @classmethod
    def mimo(cls, p: int, hop1: Sequence, hop2: Sequence) -> "ChannelInstance222":
        """From four integer m x m matrices per hop."""
        g = make_field(p, 1)
        h1 = tuple(M if isinstance(M, FFMatrix) else FFMatrix.from_ints(g, M) for M in hop1)
        h2 = tuple(M if isinstance(M, FFMatrix) else FFMatrix.from_ints(g, M) for M in hop2)
        return cls(Model.GeneralMimo, p, h1[0].rows, h1, h2)

    def scalars(self) -> tuple[tuple[FFElem, ...], tuple[FFElem, ...]]:
        """Gamma^{-1} of each block (extension-field model only)."""
        if self.model is not Model.ExtensionField:
            raise ModelMismatch("scalar coefficients exist only in the extension-field model")
        ctx = self.ctx
        return tuple(gamma_inv(M, ctx) for M in self.hop1), tuple(gamma_inv(M, ctx) for M in self.hop2)

    def validate(self) -> None:
        """Check the structural invariant of the model; raises ModelMismatch."""
        for M in self.hop1 + self.hop2:
            if M.shape != (self.m, self.m) or M.ctx is not self.ground:
                raise DimMismatch("every block must be an m x m matrix over F_p")
            if self.model is Model.ExtensionField:
                a = gamma_inv(M, self.ctx)
                if a.is_zero():
                    raise ModelMismatch("zero coefficient")
            elif self.model is Model.SymbolExtensionDiagonal:
                if not M.is_diagonal() or any(d.is_zero() for d in M.diagonal()):
                    raise ModelMismatch("blocks must be diagonal with nonzero diagonal")
            elif mat_rank(M) < self.m:
                raise ModelMismatch("blocks must be invertible")

    # serialization
    def to_json(self) -> dict:
        doc = {"model": self.model.value, "p": self.p, "m": self.m}
        if self.model is Model.ExtensionField:
            s1, s2 = self.scalars()
            doc["hop1"] = [[render_elem(s1[0]), render_elem(s1[1])], [render_elem(s1[2]), render_elem(s1[3])]]
            doc["hop2"] = [[render_elem(s2[0]), render_elem(s2[1])], [render_elem(s2[2]), render_elem(s2[3])]]
        else:
            def mats(h):
                return [[h[0].to_ints().tolist(), h[1].to_ints().tolist()],
                        [h[2].to_ints().tolist(), h[3].to_ints().tolist()]]
            doc["hop1"] = mats(self.hop1)
            doc["hop2"] = mats(self.hop2)
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "ChannelInstance222":
        model = Model.parse(doc["model"])
        p, m = int(doc["p"]), int(doc["m"])
        flat1 = [x for row in doc["hop1"] for x in row]
        flat2 = [x for row in doc["hop2"] for x in row]
        if model is Model.ExtensionField:
            ctx = make_field(p, m)
            ch = cls.extension_field(ctx, [parse_elem(ctx, str(x)) for x in flat1],
                                     [parse_elem(ctx, str(x)) for x in flat2])
        elif model is Model.SymbolExtensionDiagonal:
            g = make_field(p, 1)
            ch = cls(model, p, m, tuple(FFMatrix.from_ints(g, x) for x in flat1),
                     tuple(FFMatrix.from_ints(g, x) for x in flat2))
        else:
            ch = cls.mimo(p, flat1, flat2)
        if ch.m != m:
            raise DimMismatch(f"declared m={m} but blocks are {ch.m} x {ch.m}")
        ch.validate()
        return ch

    @classmethod
    def load(cls, path) -> "ChannelInstance222":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


# --- feasibility predicates ---------------------------------------------------------

def _hop_product(blocks: Sequence[FFMatrix]) -> FFMatrix:
    """Qa^{-1} Qb Qd^{-1} Qc for blocks (Qa, Qb, Qc, Qd)."""
    a, b, c, d = blocks
    return mat_inv(a) @ b @ mat_inv(d) @ c


def hop_matrices(ch: ChannelInstance222) -> tuple[FFMatrix, FFMatrix]:
    """(Q, Q') with Q = Q11^-1 Q12 Q22^-1 Q21 and Q' = Q33^-1 Q34 Q44^-1 Q43."""
    return _hop_product(ch.hop1), _hop_product(ch.hop2)


def feasibility_fe(ch: ChannelInstance222) -> dict:
    if ch.model is not Model.ExtensionField:
        raise ModelMismatch("feasibility_fe needs the extension-field model")
    (q11, q12, q21, q22), (q33, q34, q43, q44) = ch.scalars()
    g = q11.inverse() * q12 * q22.inverse() * q21
    gp = q33.inverse() * q34 * q44.inverse() * q43
    d1, d2 = minimal_poly(g).degree, minimal_poly(gp).degree
    return {"gamma": g, "gamma_prime": gp, "deg1": d1, "deg2": d2,
            "feasible": d1 == ch.m and d2 == ch.m}


def _distinct(vals: Sequence[FFElem]) -> bool:
    return len(set(vals)) == len(vals)


def feasibility_se(ch: ChannelInstance222) -> bool:
    if ch.model is not Model.SymbolExtensionDiagonal:
        raise ModelMismatch("feasibility_se needs the diagonal symbol-extension model")
    Q, Qp = hop_matrices(ch)
    return _distinct(Q.diagonal()) and _distinct(Qp.diagonal())


def feasibility_mimo(ch: ChannelInstance222) -> dict:
    """Distinct-eigenvalue test per hop plus splitting degrees."""
    if ch.model is not Model.GeneralMimo:
        raise ModelMismatch("feasibility_mimo needs the MIMO model")
    Q, Qp = hop_matrices(ch)
    out = {}
    for name, M in (("hop1", Q), ("hop2", Qp)):
        c = char_poly(M)
        out[f"{name}_distinct"] = radical(c).degree == ch.m
        out[f"{name}_r"] = splitting_degree(c)
    out["r"] = math.lcm(out["hop1_r"], out["hop2_r"])
    out["feasible"] = out["hop1_distinct"] and out["hop2_distinct"]
    return out


def check_feasible(ch: ChannelInstance222) -> tuple[bool, str | None]:
    """Model predicate; returns (ok, name of the failed predicate)."""
    if ch.model is Model.ExtensionField:
        f = feasibility_fe(ch)
        if f["deg1"] < ch.m:
            return False, "deg_pi_gamma_lt_m"
        if f["deg2"] < ch.m:
            return False, "deg_pi_gamma_prime_lt_m"
        return True, None
    if ch.model is Model.SymbolExtensionDiagonal:
        if ch.m > 1 and ch.m >= ch.p:
            return False, "P_SE_zero"
        Q, Qp = hop_matrices(ch)
        if not _distinct(Q.diagonal()):
            return False, "se_repeated_diagonal_hop1"
        if not _distinct(Qp.diagonal()):
            return False, "se_repeated_diagonal_hop2"
        return True, None
    f = feasibility_mimo(ch)
    if not f["hop1_distinct"]:
        return False, "mimo_repeated_eigenvalue_hop1"
    if not f["hop2_distinct"]:
        return False, "mimo_repeated_eigenvalue_hop2"
    return True, None


# --- plan construction ---------------------------------------------------------------------

@dataclass
class AndPlan:
    model: Model
    p: int
    m: int
    r: int
    ext_ctx: FieldCtx
    V1: FFMatrix
    V2: FFMatrix
    V3: FFMatrix
    V4: FFMatrix
    S: FFMatrix
    Q: FFMatrix  # hop-1 product over ext_ctx
    QS: FFMatrix  # S11^-1 S12 S22^-1 S21 over ext_ctx
    hop1: tuple  # lifted hop-1 blocks
    hop2: tuple
    relay_dec: tuple = field(default=())  # ((Q11 V1)^-1, (Q21 V1)^-1)
    # splitting degrees of the two hop products; V1 lies over F_{p^r1}, V3 over F_{p^r2}
    hop_r: tuple = (1, 1)

    def S_block(self, i: int, j: int) -> FFMatrix:
        m = self.m
        return self.S[(i - 1) * m:i * m, (j - 1) * m:j * m]

    @property
    def S11(self) -> FFMatrix:
        return self.S_block(1, 1)

    @property
    def S12(self) -> FFMatrix:
        return self.S_block(1, 2)

    @property
    def S21(self) -> FFMatrix:
        return self.S_block(2, 1)

    @property
    def S22(self) -> FFMatrix:
        return self.S_block(2, 2)

    def summary(self) -> dict:
        return {"model": self.model.value, "p": self.p, "m": self.m, "r": self.r,
                "V1": self.V1.render(), "V2": self.V2.render(),
                "V3": self.V3.render(), "V4": self.V4.render()}


def _krylov(M: FFMatrix, v: FFMatrix, n: int) -> FFMatrix:
    cols = []
    cur = v
    for _ in range(n):
        cols.append(cur)
        cur = M @ cur
    if not cols:
        return FFMatrix.zeros(M.ctx, M.rows, 0)
    return cols[0].hstack(*cols[1:])


def _second_columns(pre: FFMatrix, M: FFMatrix, v: FFMatrix, n: int) -> FFMatrix:
    """Columns pre M^(l-1) v for l = 1..n."""
    if n == 0:
        return FFMatrix.zeros(M.ctx, M.rows, 0)
    return pre @ _krylov(M, v, n)


def _start_vector(model: Model, ext: FieldCtx, m: int, eig=None) -> FFMatrix:
    if model is Model.ExtensionField:
        return FFMatrix.column(ext, [1] + [0] * (m - 1))  # Phi(1)
    if model is Model.SymbolExtensionDiagonal:
        return FFMatrix.column(ext, [1] * m)
    return eig.eigvecs @ FFMatrix.column(ext, [1] * m)  # E 1


def build_plan(ch: ChannelInstance222, seed: int = 0) -> AndPlan:
    ok, pred = check_feasible(ch)
    if not ok:
        raise NotFeasible(pred)
    m, g = ch.m, ch.ground
    Q, Qp = hop_matrices(ch)
    big = block([[ch.hop2[0], ch.hop2[1]], [ch.hop2[2], ch.hop2[3]]])
    try:
        S = mat_inv(big)
    except Singular:
        # happens exactly when 1 is an eigenvalue of Q'
        raise NotFeasible("second_hop_singular") from None
    S11, S12 = S[:m, :m], S[:m, m:]
    S21, S22 = S[m:, :m], S[m:, m:]
    QS = mat_inv(S11) @ S12 @ mat_inv(S22) @ S21

    eig1 = eig2 = None
    hop_r = (1, 1)
    if ch.model is Model.GeneralMimo:
        hop_r = (splitting_degree(char_poly(Q)), splitting_degree(char_poly(QS)))
        r = math.lcm(*hop_r)
        ext = make_field(ch.p, r)
        eig1 = eigen_decompose(Q, field=ext, seed=seed)
        eig2 = eigen_decompose(QS, field=ext, seed=seed)
        if not (eig1.distinct and eig2.distinct):
            raise NotFeasible("mimo_repeated_eigenvalue")
    else:
        r, ext = 1, g

    L = lambda M: lift(M, ext)  # noqa: E731
    QL, QSL = L(Q), L(QS)
    h1 = tuple(L(M) for M in ch.hop1)
    h2 = tuple(L(M) for M in ch.hop2)
    v11 = _start_vector(ch.model, ext, m, eig1)
    v31 = _start_vector(ch.model, ext, m, eig2)
    V1 = _krylov(QL, v11, m)
    V2 = _second_columns(L(mat_inv(ch.hop1[3]) @ ch.hop1[2]), QL, v11, m - 1)
    V3 = _krylov(QSL, v31, m)
    V4 = _second_columns(L(mat_inv(S22) @ S21), QSL, v31, m - 1)
    for name, V in (("V1", V1), ("V3", V3)):
        if mat_rank(V) < m:
            raise Singular(f"{name} is singular although the feasibility predicate holds")
    dec = (mat_inv(h1[0] @ V1), mat_inv(h1[2] @ V1))
    return AndPlan(ch.model, ch.p, m, r, ext, V1, V2, V3, V4, L(S), QL, QSL, h1, h2, dec, hop_r)


def alignment_residuals(plan: AndPlan) -> dict[str, bool]:
    """Exact checks of the alignment identities on both hops."""
    m = plan.m
    q11, q12, q21, q22 = plan.hop1
    out = {}
    ok1 = ok2 = ok3 = ok4 = True
    for l in range(m - 1):
        v1n, v1l, v2l = plan.V1.col(l + 1), plan.V1.col(l), plan.V2.col(l)
        ok1 &= q11 @ v1n == q12 @ v2l
        ok2 &= q21 @ v1l == q22 @ v2l
        v3n, v3l, v4l = plan.V3.col(l + 1), plan.V3.col(l), plan.V4.col(l)
        ok3 &= plan.S11 @ v3n == plan.S12 @ v4l
        ok4 &= plan.S21 @ v3l == plan.S22 @ v4l
    out["hop1_relay1"], out["hop1_relay2"] = bool(ok1), bool(ok2)
    out["hop2_relay1"], out["hop2_relay2"] = bool(ok3), bool(ok4)
    return out


def diagonalization_holds(plan: AndPlan) -> bool:
    """The composite map (w1, w2) -> (y3, y4) equals (V3 w1, V4 w2)."""
    m = plan.m
    ext = plan.ext_ctx
    # u1 = A1 [w1; w2], u2 = A2 [w1; w2] as fixed 0/1 combination matrices
    A1 = np.zeros((m, 2 * m - 1), dtype=np.int64)
    A2 = np.zeros((m, 2 * m - 1), dtype=np.int64)
    for i in range(m):
        A1[i, i] = 1
        A2[i, i] = 1
        if i >= 1:
            A1[i, m + i - 1] = 1
        if i < m - 1:
            A2[i, m + i] = 1
    A1m, A2m = FFMatrix.from_ints(ext, A1), FFMatrix.from_ints(ext, A2)
    x3 = plan.S11 @ plan.V3 @ A1m
    x4 = plan.S21 @ plan.V3 @ A2m
    q33, q34, q43, q44 = plan.hop2
    y3 = q33 @ x3 + q34 @ x4
    y4 = q43 @ x3 + q44 @ x4
    target3 = plan.V3.hstack(FFMatrix.zeros(ext, m, m - 1))
    target4 = FFMatrix.zeros(ext, m, m).hstack(plan.V4)
    return y3 == target3 and y4 == target4


# --- transport and decoding ----------------------------------------------------------------

def _combo_u(w1: FFMatrix, w2: FFMatrix, side: int) -> FFMatrix:
    """The aligned combinations u1 or u2 of the messages."""
    m = w1.rows
    d = w1.data.copy()
    p = w1.ctx.p
    if side == 1:
        d[1:] = (d[1:] + w2.data) % p
    else:
        d[:m - 1] = (d[:m - 1] + w2.data) % p
    return FFMatrix(w1.ctx, d)


def relay_decode(y: FFMatrix, plan: AndPlan, side: int) -> FFMatrix:
    """Recover u_side from relay observation ``y`` (a length-m column)."""
    if side not in (1, 2):
        raise ValueError("side must be 1 or 2")
    D = plan.relay_dec[side - 1]
    if y.ctx is not D.ctx:
        D = lift(_as_ground(D), y.ctx)
    return D @ y


def _as_ground(M: FFMatrix) -> FFMatrix:
    if M.ctx.m != 1:
        raise ValueError("plan matrices live in an extension; messages must use that field")
    return M


def _to_work(M: FFMatrix, W: FieldCtx) -> FFMatrix:
    if M.ctx is W:
        return M
    return lift(_as_ground(M), W)


def _transport(ch: ChannelInstance222, blocks: tuple, xa: FFMatrix, xb: FFMatrix, W: FieldCtx) -> FFMatrix:
    """Send two length-m columns over W through one receiver, slot by slot.

    Column t of Phi^T(x) goes out in slot t.  The extension-field model
    multiplies in F_{p^m}; the ground models multiply by F_p matrices.
    """
    m, p = ch.m, ch.p
    Xa, Xb = xa.data[:, 0, :], xb.data[:, 0, :]  # (m, s): Phi^T
    slots = W.m
    Y = np.zeros((m, slots), dtype=np.int64)
    if ch.model is Model.ExtensionField:
        F = ch.ctx
        ca, cb = gamma_inv(blocks[0], F), gamma_inv(blocks[1], F)
        for t in range(slots):
            ya = ca * FFElem(F, Xa[:, t]) + cb * FFElem(F, Xb[:, t])
            Y[:, t] = ya.coeffs
    else:
        A, B = blocks[0].to_ints(), blocks[1].to_ints()
        Y = (A @ Xa.astype(np.int64) + B @ Xb.astype(np.int64)) % p
    return FFMatrix(W, Y.reshape(m, 1, slots))  # Phi^{-T}, row-wise


def simulate_222(ch: ChannelInstance222, w1, w2, seed: int = 0, trace: bool = False,
                 plan: AndPlan | None = None) -> dict:
    """Encode, relay and decode one message pair; success iff both recovered.

    ``w1`` has m entries and ``w2`` has m-1 entries, all in one message field
    W: the plan field F_{p^r}, or any F_{p^s} when r = 1 (s slots).
    """
    plan = plan if plan is not None else build_plan(ch, seed=seed)
    m = ch.m
    w1 = _as_column(w1, plan.ext_ctx)
    w2 = _as_column(w2, w1.ctx, n=m - 1)
    W = w1.ctx
    if w1.rows != m or w2.rows != m - 1:
        raise DimMismatch(f"expected {m} and {m - 1} message symbols")
    if plan.r > 1 and W is not plan.ext_ctx:
        raise DimMismatch(f"messages must lie in F_{ch.p}^{plan.r} for this plan")
    V1, V2 = _to_work(plan.V1, W), _to_work(plan.V2, W)
    V3, V4 = _to_work(plan.V3, W), _to_work(plan.V4, W)
    S11, S21 = _to_work(plan.S11, W), _to_work(plan.S21, W)

    x1, x2 = V1 @ w1, V2 @ w2
    y1 = _transport(ch, (ch.hop1[0], ch.hop1[1]), x1, x2, W)
    y2 = _transport(ch, (ch.hop1[2], ch.hop1[3]), x1, x2, W)
    u1, u2 = relay_decode(y1, plan, 1), relay_decode(y2, plan, 2)
    x3, x4 = S11 @ V3 @ u1, S21 @ V3 @ u2
    y3 = _transport(ch, (ch.hop2[0], ch.hop2[1]), x3, x4, W)
    y4 = _transport(ch, (ch.hop2[2], ch.hop2[3]), x3, x4, W)
    w1_hat = mat_inv(V3) @ y3
    w2_hat = _solve_columns(V4, y4)
    ok = w1_hat == w1 and w2_hat is not None and w2_hat == w2
    out = {"w1_hat": w1_hat, "w2_hat": w2_hat, "success": bool(ok), "trace": None}
    if trace:
        out["trace"] = {k: v.render() for k, v in
                        (("x1", x1), ("x2", x2), ("y1", y1), ("y2", y2), ("u1", u1), ("u2", u2),
                         ("x3", x3), ("x4", x4), ("y3", y3), ("y4", y4))}
    return out


def _as_column(w, default_ctx: FieldCtx, n: int | None = None) -> FFMatrix:
    if isinstance(w, FFMatrix):
        return w
    items = list(w)
    if not items:
        return FFMatrix.zeros(default_ctx, 0, 1)
    ctx = next((e.ctx for e in items if isinstance(e, FFElem)), default_ctx)
    return FFMatrix.column(ctx, items)


def _solve_columns(A: FFMatrix, b: FFMatrix) -> FFMatrix | None:
    """Unique x with A x = b for full-column-rank A, or None if b is outside span(A)."""
    n = A.cols
    if n == 0:
        return FFMatrix.zeros(A.ctx, 0, 1) if b.is_zero() else None
    R, piv, _ = batch_rref(A.ctx, A.hstack(b).data[None])
    piv = piv[0]
    if piv[n] or piv[:n].sum() < n:
        return None
    return FFMatrix(A.ctx, R[0, :n, n:n + 1])


def achievable_sum_rate(p: int, m: int) -> float:
    """Bits per m ground-field symbols: (2m-1) log2 p."""
    return (2 * m - 1) * math.log2(p)


def d_sum(m: int) -> Fraction:
    """Normalized sum degrees of freedom (2m-1)/m; tends to 2 as m grows."""
    return Fraction(2 * m - 1, m)


D_SUM_LIMIT = 2


# --- batched engine for the ground-field models (r = 1) ----------------------------------

def _bmm(ctx, A, B):
    return _k_matmul(ctx, A, B)


def batch_plans(p: int, m: int, model: Model, hop1, hop2) -> dict:
    """Build AND plans for a stack of instances at once.

    ``hop1`` and ``hop2`` are integer arrays ``(B, 4, m, m)`` holding the
    blocks in the order of :class:`ChannelInstance222`.  Only the scalar
    models (extension-field through Gamma, diagonal symbol extension) are
    supported; they share the F_p arithmetic.  Returns arrays keyed by name,
    with a ``feasible`` mask from the model predicate and a ``built`` mask
    for instances whose plan exists.
    """
    if model is Model.GeneralMimo:
        raise ModelMismatch("the batched engine covers the scalar models")
    g = make_field(p, 1)
    h1 = np.asarray(hop1, dtype=np.int64)[..., None] % p
    h2 = np.asarray(hop2, dtype=np.int64)[..., None] % p
    nb = h1.shape[0]

    def inv(A):
        out, ok = batch_inv(g, A)
        return out, ok

    i11, ok11 = inv(h1[:, 0])
    i22, ok22 = inv(h1[:, 3])
    Q = _bmm(g, _bmm(g, _bmm(g, i11, h1[:, 1]), i22), h1[:, 2])
    bigm = np.concatenate([np.concatenate([h2[:, 0], h2[:, 1]], axis=2),
                           np.concatenate([h2[:, 2], h2[:, 3]], axis=2)], axis=1)
    S, s_ok = inv(bigm)
    S11, S12, S21, S22 = S[:, :m, :m], S[:, :m, m:], S[:, m:, :m], S[:, m:, m:]
    iS11, _ = inv(S11)
    iS22, _ = inv(S22)
    QS = _bmm(g, _bmm(g, _bmm(g, iS11, S12), iS22), S21)
    i33, _ = inv(h2[:, 0])
    i44, _ = inv(h2[:, 3])
    Qp = _bmm(g, _bmm(g, _bmm(g, i33, h2[:, 1]), i44), h2[:, 2])

    v = np.zeros((nb, m, 1, 1), dtype=np.int64)
    if model is Model.ExtensionField:
        v[:, 0] = 1
    else:
        v[:] = 1

    def krylov(M, n):
        cols, cur = [], v
        for _ in range(n):
            cols.append(cur)
            cur = _bmm(g, M, cur)
        return np.concatenate(cols, axis=2) if cols else np.zeros((nb, m, 0, 1), dtype=np.int64)

    V1 = krylov(Q, m)
    V3 = krylov(QS, m)
    pre2 = _bmm(g, i22, h1[:, 2])
    pre4 = _bmm(g, iS22, S21)
    K1 = krylov(Q, m - 1)
    K3 = krylov(QS, m - 1)
    V2 = _bmm(g, pre2, K1) if m > 1 else K1
    V4 = _bmm(g, pre4, K3) if m > 1 else K3

    if model is Model.ExtensionField:
        # deg pi_gamma = dim span{Phi(gamma^k)}: Krylov rank of Gamma(gamma) on Phi(1)
        deg1 = batch_rank(g, V1)
        deg2 = batch_rank(g, krylov(Qp, m))
        feasible = (deg1 == m) & (deg2 == m)
    else:
        def diag_distinct(M):
            d = np.diagonal(M[..., 0], axis1=1, axis2=2)
            s = np.sort(d, axis=1)
            return np.all(s[:, 1:] != s[:, :-1], axis=1)
        feasible = diag_distinct(Q) & diag_distinct(Qp)
    V3inv, v3_ok = inv(V3)
    D1, d1_ok = inv(_bmm(g, h1[:, 0], V1))
    D2, d2_ok = inv(_bmm(g, h1[:, 2], V1))
    built = feasible & s_ok & v3_ok & d1_ok & d2_ok
    return {"g": g, "m": m, "h1": h1, "h2": h2, "V1": V1, "V2": V2, "V3": V3, "V4": V4,
            "S11": S11, "S21": S21, "V3inv": V3inv, "D1": D1, "D2": D2,
            "feasible": feasible, "built": built, "second_hop_singular": ~s_ok,
            "hop1_ok": d1_ok & d2_ok, "hop2_ok": s_ok & v3_ok}


def batch_relays(bp: dict, w1, w2):
    """Hop 1 for stacks of messages: returns decoded (u1, u2), shapes (B, m)."""
    g = bp["g"]
    w1 = np.asarray(w1, dtype=np.int64)[..., None, None] % g.p  # (B, m, 1, 1)
    w2 = np.asarray(w2, dtype=np.int64)[..., None, None] % g.p
    x1 = _bmm(g, bp["V1"], w1)
    x2 = _bmm(g, bp["V2"], w2) if bp["m"] > 1 else np.zeros_like(x1)
    h1 = bp["h1"]
    y1 = (_bmm(g, h1[:, 0], x1) + _bmm(g, h1[:, 1], x2)) % g.p
    y2 = (_bmm(g, h1[:, 2], x1) + _bmm(g, h1[:, 3], x2)) % g.p
    return _bmm(g, bp["D1"], y1)[:, :, 0, 0], _bmm(g, bp["D2"], y2)[:, :, 0, 0]


def batch_destinations(bp: dict, u1, u2):
    """Hop 2 from relay combinations: returns (w1_hat, w2_hat, w2_consistent)."""
    g = bp["g"]
    m = bp["m"]
    u1 = np.asarray(u1, dtype=np.int64)[..., None, None]
    u2 = np.asarray(u2, dtype=np.int64)[..., None, None]
    x3 = _bmm(g, _bmm(g, bp["S11"], bp["V3"]), u1)
    x4 = _bmm(g, _bmm(g, bp["S21"], bp["V3"]), u2)
    h2 = bp["h2"]
    y3 = (_bmm(g, h2[:, 0], x3) + _bmm(g, h2[:, 1], x4)) % g.p
    y4 = (_bmm(g, h2[:, 2], x3) + _bmm(g, h2[:, 3], x4)) % g.p
    w1_hat = _bmm(g, bp["V3inv"], y3)[:, :, 0, 0]
    if m == 1:
        nb = y4.shape[0]
        return w1_hat, np.zeros((nb, 0), dtype=np.int64), ~np.any(y4[:, :, 0, 0] != 0, axis=1)
    aug = np.concatenate([bp["V4"], y4], axis=2)
    R, piv, _ = batch_rref(g, aug)
    consistent = (piv[:, :m - 1].sum(axis=1) == m - 1) & ~piv[:, m - 1]
    return w1_hat, R[:, :m - 1, m - 1, 0], consistent


def batch_simulate(bp: dict, w1, w2) -> np.ndarray:
    """End-to-end success mask for one message pair per instance."""
    u1, u2 = batch_relays(bp, w1, w2)
    w1h, w2h, cons = batch_destinations(bp, u1, u2)
    w1 = np.asarray(w1) % bp["g"].p
    w2 = np.asarray(w2) % bp["g"].p
    return np.all(w1h == w1, axis=1) & np.all(w2h == w2, axis=1) & cons


def gamma_stack(ctx: FieldCtx, idx) -> np.ndarray:
    """Integer Gamma matrices ``(..., m, m)`` of elements given by index."""
    from .ff_core.field import index_to_array

    a = index_to_array(ctx, idx)  # (..., m)
    basis = np.eye(ctx.m, dtype=np.int64)
    cols = _k_mul(ctx, basis, a[..., None, :])  # (..., m, m): row i = Phi(a alpha^i)
    return np.swapaxes(cols, -1, -2).astype(np.int64)
