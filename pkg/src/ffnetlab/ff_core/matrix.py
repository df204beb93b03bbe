"""Dense matrices over a constructed field, with exact elimination.

A matrix is a ``(rows, cols, m)`` coefficient array.  The ``batch_*`` functions
take a stack ``(B, rows, cols, m)`` and process every item at once with
per-item pivoting, which is what the Monte Carlo drivers use.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from ..errors import CharacteristicMismatch, CtxMismatch, DimMismatch, Singular
from .field import (
    FFElem,
    FieldCtx,
    _check_ctx,
    _k_inv,
    _k_iszero,
    _k_mul,
    _k_neg,
    _k_sub,
    parse_elem,
    render_elem,
)


# --- kernels ---------------------------------------------------------------------

def _k_matmul(ctx: FieldCtx, A, B):
    """Batched product; A is (..., n, k, m) and B is (..., k, l, m)."""
    p = ctx.p
    if ctx.m == 1:
        return (A[..., 0] @ B[..., 0] % p)[..., None]
    # accumulate coefficient outer products over k before reducing by T
    prod = np.einsum("...ika,...kjb->...ijab", A, B) % p
    shape = prod.shape[:-2] + (ctx.m * ctx.m,)
    return (prod.reshape(shape) @ ctx._Tflat) % p


def _k_matvec(ctx: FieldCtx, A, v):
    return _k_matmul(ctx, A, v[..., :, None, :])[..., 0, :]


def _one_like(ctx: FieldCtx, shape) -> np.ndarray:
    out = np.zeros(tuple(shape) + (ctx.m,), dtype=ctx.dtype)
    out[..., 0] = 1
    return out


def _k_eye(ctx: FieldCtx, n: int, batch: tuple = ()) -> np.ndarray:
    out = np.zeros(batch + (n, n, ctx.m), dtype=ctx.dtype)
    idx = np.arange(n)
    out[..., idx, idx, 0] = 1
    return out


def batch_rref(ctx: FieldCtx, A, ncols: int | None = None):
    """Gauss-Jordan on a stack of matrices.

    Only the first ``ncols`` columns are used for pivoting (the rest ride
    along, as for an augmented ``[A | I]``).  Returns ``(R, pivots, det)``:
    the reduced stack, a boolean ``(B, ncols)`` pivot-column mask, and the
    determinant of the leading square block when it is square (otherwise
    the product of pivots with swap signs).
    """
    R = np.array(A, dtype=ctx.dtype, copy=True)
    nb, n, c = R.shape[0], R.shape[1], R.shape[2]
    ncols = c if ncols is None else ncols
    pivots = np.zeros((nb, ncols), dtype=bool)
    det = _one_like(ctx, (nb,))
    prow = np.zeros(nb, dtype=np.int64)
    rows = np.arange(n)
    bidx = np.arange(nb)
    for j in range(ncols):
        if n == 0:
            break
        nz = ~_k_iszero(R[:, :, j]) & (rows[None, :] >= prow[:, None])
        has = nz.any(axis=1)
        if not has.any():
            continue
        piv = np.argmax(nz, axis=1)
        act = bidx[has]
        src, dst = piv[has], prow[has]
        swap = src != dst
        if swap.any():
            sa, ss, sd = act[swap], src[swap], dst[swap]
            tmp = R[sa, ss].copy()
            R[sa, ss] = R[sa, sd]
            R[sa, sd] = tmp
            det[sa] = _k_neg(ctx, det[sa])
        pv = R[act, dst, j]
        det[act] = _k_mul(ctx, det[act], pv)
        inv = _k_inv(ctx, pv)
        R[act, dst] = _k_mul(ctx, R[act, dst], inv[:, None, :])
        prow_rows = R[act, dst]  # (k, c, m)
        factors = R[act, :, j].copy()  # (k, n, m)
        factors[np.arange(len(act)), dst] = 0
        R[act] = _k_sub(ctx, R[act], _k_mul(ctx, factors[:, :, None, :], prow_rows[:, None, :, :]))
        pivots[act, j] = True
        prow[act] += 1
    if n == ncols:
        full = pivots.sum(axis=1) == n
        det[~full] = 0
    return R, pivots, det


def batch_rank(ctx: FieldCtx, A) -> np.ndarray:
    A = np.asarray(A)
    if A.shape[1] == 0 or A.shape[2] == 0:
        return np.zeros(A.shape[0], dtype=np.int64)
    _, piv, _ = batch_rref(ctx, A)
    return piv.sum(axis=1)


def batch_det(ctx: FieldCtx, A) -> np.ndarray:
    A = np.asarray(A)
    if A.shape[1] != A.shape[2]:
        raise DimMismatch("determinant needs square matrices")
    if A.shape[1] == 0:
        return _one_like(ctx, (A.shape[0],))
    return batch_rref(ctx, A)[2]


def batch_inv(ctx: FieldCtx, A):
    """Returns ``(inverses, ok)``; singular items have garbage inverses and ok False."""
    A = np.asarray(A)
    nb, n = A.shape[0], A.shape[1]
    if A.shape[1] != A.shape[2]:
        raise DimMismatch("inverse needs square matrices")
    if n == 0:
        return np.zeros_like(A), np.ones(nb, dtype=bool)
    aug = np.concatenate([A, _k_eye(ctx, n, (nb,))], axis=2)
    R, piv, _ = batch_rref(ctx, aug, ncols=n)
    ok = piv.sum(axis=1) == n
    return R[:, :, n:], ok


def _berkowitz_rows(ctx: FieldCtx, A) -> np.ndarray:
    """Characteristic polynomial coefficients, highest degree first, batched.

    Division-free Berkowitz recursion; A is (B, n, n, m), result (B, n+1, m).
    """
    nb, n = A.shape[0], A.shape[1]
    one = _one_like(ctx, (nb,))
    if n == 0:
        return one[:, None, :]
    transforms = []
    M = A
    while M.shape[1] > 1:
        k = M.shape[1]
        a = M[:, 0, 0]
        Rrow = M[:, 0:1, 1:]  # (B, 1, k-1, m)
        C = M[:, 1:, 0:1]  # (B, k-1, 1, m)
        sub = M[:, 1:, 1:]
        diags = [C]
        for i in range(k - 2):
            diags.append(_k_matmul(ctx, sub, diags[i]))
        vals = [_k_neg(ctx, _k_matmul(ctx, Rrow, d)[:, 0, 0]) for d in diags]
        seq = [one, _k_neg(ctx, a)] + vals  # length k+1
        T = np.zeros((nb, k + 1, k, ctx.m), dtype=ctx.dtype)
        for i in range(k + 1):
            for j in range(min(i + 1, k)):
                T[:, i, j] = seq[i - j]
        transforms.append(T)
        M = sub
    poly = np.stack([one, _k_neg(ctx, M[:, 0, 0])], axis=1)  # (B, 2, m)
    for T in reversed(transforms):
        poly = _k_matvec(ctx, T, poly)
    return poly


# --- the matrix type -----------------------------------------------------------------

class FFMatrix:
    """A dense matrix over one :class:`FieldCtx`; a value type."""

    __slots__ = ("ctx", "data")

    def __init__(self, ctx: FieldCtx, data):
        data = np.asarray(data)
        if data.ndim != 3 or data.shape[2] != ctx.m:
            raise ValueError(f"expected a (rows, cols, {ctx.m}) array, got shape {data.shape}")
        self.ctx = ctx
        self.data = (data.astype(ctx.dtype, copy=False) % ctx.p) if data.size else data.astype(ctx.dtype)

    # constructors
    @classmethod
    def from_rows(cls, ctx: FieldCtx, rows: Sequence[Sequence]) -> "FFMatrix":
        """Build from nested rows of FFElem, ints (ground constants) or digit strings."""
        rows = [list(r) for r in rows]
        nr = len(rows)
        nc = len(rows[0]) if nr else 0
        data = np.zeros((nr, nc, ctx.m), dtype=ctx.dtype)
        for i, r in enumerate(rows):
            if len(r) != nc:
                raise DimMismatch("ragged rows")
            for j, v in enumerate(r):
                data[i, j] = _to_elem(ctx, v).coeffs
        return cls(ctx, data)

    @classmethod
    def from_ints(cls, ctx: FieldCtx, rows) -> "FFMatrix":
        """Ground-field constants from an integer array."""
        arr = np.asarray(rows, dtype=np.int64) % ctx.p
        data = np.zeros(arr.shape + (ctx.m,), dtype=ctx.dtype)
        data[..., 0] = arr
        return cls(ctx, data)

    @classmethod
    def identity(cls, ctx: FieldCtx, n: int) -> "FFMatrix":
        return cls(ctx, _k_eye(ctx, n))

    @classmethod
    def zeros(cls, ctx: FieldCtx, rows: int, cols: int) -> "FFMatrix":
        return cls(ctx, np.zeros((rows, cols, ctx.m), dtype=ctx.dtype))

    @classmethod
    def diag(cls, ctx: FieldCtx, entries: Sequence) -> "FFMatrix":
        n = len(entries)
        out = np.zeros((n, n, ctx.m), dtype=ctx.dtype)
        for i, v in enumerate(entries):
            out[i, i] = _to_elem(ctx, v).coeffs
        return cls(ctx, out)

    @classmethod
    def column(cls, ctx: FieldCtx, entries: Sequence) -> "FFMatrix":
        return cls.from_rows(ctx, [[v] for v in entries])

    # shape and access
    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[0], self.data.shape[1]

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def __getitem__(self, key):
        if isinstance(key, tuple) and len(key) == 2 and all(isinstance(k, (int, np.integer)) for k in key):
            return FFElem(self.ctx, self.data[key[0], key[1]])
        if isinstance(key, tuple) and len(key) == 2:
            i, j = key
            i = slice(i, i + 1) if isinstance(i, (int, np.integer)) else i
            j = slice(j, j + 1) if isinstance(j, (int, np.integer)) else j
            return FFMatrix(self.ctx, self.data[i, j])
        raise TypeError("index with M[i, j] or slices")

    def col(self, j: int) -> "FFMatrix":
        return FFMatrix(self.ctx, self.data[:, j:j + 1])

    def entries(self) -> list[list[FFElem]]:
        return [[FFElem(self.ctx, self.data[i, j]) for j in range(self.cols)] for i in range(self.rows)]

    def to_ints(self) -> np.ndarray:
        """Integer array view for ground-field matrices."""
        if self.ctx.m != 1:
            raise ValueError("to_ints is for matrices over the prime field")
        return self.data[..., 0].astype(np.int64)

    @property
    def T(self) -> "FFMatrix":
        return FFMatrix(self.ctx, self.data.transpose(1, 0, 2))

    # arithmetic
    def _same(self, other: "FFMatrix") -> None:
        if not isinstance(other, FFMatrix):
            raise TypeError("expected FFMatrix")
        _check_ctx(self.ctx, other.ctx)

    def __add__(self, other: "FFMatrix") -> "FFMatrix":
        self._same(other)
        if self.shape != other.shape:
            raise DimMismatch(f"{self.shape} + {other.shape}")
        return FFMatrix(self.ctx, (self.data + other.data) % self.ctx.p)

    def __sub__(self, other: "FFMatrix") -> "FFMatrix":
        self._same(other)
        if self.shape != other.shape:
            raise DimMismatch(f"{self.shape} - {other.shape}")
        return FFMatrix(self.ctx, (self.data - other.data) % self.ctx.p)

    def __neg__(self) -> "FFMatrix":
        return FFMatrix(self.ctx, (-self.data) % self.ctx.p)

    def __matmul__(self, other: "FFMatrix") -> "FFMatrix":
        return mat_mul(self, other)

    def __mul__(self, scalar) -> "FFMatrix":
        if isinstance(scalar, FFMatrix):
            return NotImplemented
        s = _to_elem(self.ctx, scalar)
        return FFMatrix(self.ctx, _k_mul(self.ctx, self.data, s.array))

    __rmul__ = __mul__

    def __pow__(self, e: int) -> "FFMatrix":
        if self.rows != self.cols:
            raise DimMismatch("power of a non-square matrix")
        if e < 0:
            return mat_inv(self) ** (-e)
        result = FFMatrix.identity(self.ctx, self.rows)
        base = self
        while e:
            if e & 1:
                result = result @ base
            e >>= 1
            if e:
                base = base @ base
        return result

    def __eq__(self, other):
        if not isinstance(other, FFMatrix):
            return NotImplemented
        return self.ctx is other.ctx and self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    __hash__ = None

    def is_zero(self) -> bool:
        return not np.any(self.data)

    def is_diagonal(self) -> bool:
        if self.rows != self.cols:
            return False
        off = self.data.copy()
        idx = np.arange(self.rows)
        off[idx, idx] = 0
        return not np.any(off)

    def diagonal(self) -> list[FFElem]:
        return [self[i, i] for i in range(min(self.shape))]

    def hstack(self, *others: "FFMatrix") -> "FFMatrix":
        for o in others:
            self._same(o)
        return FFMatrix(self.ctx, np.concatenate([self.data] + [o.data for o in others], axis=1))

    def vstack(self, *others: "FFMatrix") -> "FFMatrix":
        for o in others:
            self._same(o)
        return FFMatrix(self.ctx, np.concatenate([self.data] + [o.data for o in others], axis=0))

    def render(self) -> list[list[str]]:
        return [[render_elem(e) for e in row] for row in self.entries()]

    def __repr__(self) -> str:
        return f"FFMatrix(F_{self.ctx.p}^{self.ctx.m}, {self.render()})"


def _to_elem(ctx: FieldCtx, v) -> FFElem:
    if isinstance(v, FFElem):
        _check_ctx(ctx, v.ctx)
        return v
    if isinstance(v, str):
        return parse_elem(ctx, v)
    return ctx.scalar(int(v))


def block(rows: Sequence[Sequence[FFMatrix]]) -> FFMatrix:
    """Assemble a block matrix from a nested list of FFMatrix blocks."""
    return FFMatrix(rows[0][0].ctx, np.concatenate(
        [np.concatenate([b.data for b in r], axis=1) for r in rows], axis=0))


def stack(mats: Iterable[FFMatrix]) -> np.ndarray:
    return np.stack([M.data for M in mats])


# --- single-matrix API -------------------------------------------------------------------

def mat_mul(A: FFMatrix, B: FFMatrix) -> FFMatrix:
    A._same(B)
    if A.cols != B.rows:
        raise DimMismatch(f"cannot multiply {A.shape} by {B.shape}")
    if A.cols == 0:
        return FFMatrix.zeros(A.ctx, A.rows, B.cols)
    return FFMatrix(A.ctx, _k_matmul(A.ctx, A.data, B.data))


def mat_inv(A: FFMatrix) -> FFMatrix:
    if A.rows != A.cols:
        raise DimMismatch(f"inverse of non-square {A.shape}")
    inv, ok = batch_inv(A.ctx, A.data[None])
    if not ok[0]:
        raise Singular("matrix is singular")
    return FFMatrix(A.ctx, inv[0])


def mat_rank(A: FFMatrix) -> int:
    return int(batch_rank(A.ctx, A.data[None])[0])


def mat_det(A: FFMatrix) -> FFElem:
    if A.rows != A.cols:
        raise DimMismatch(f"determinant of non-square {A.shape}")
    return FFElem(A.ctx, batch_det(A.ctx, A.data[None])[0])


def mat_rref(A: FFMatrix) -> tuple[FFMatrix, list[int]]:
    if A.rows == 0 or A.cols == 0:
        return A, []
    R, piv, _ = batch_rref(A.ctx, A.data[None])
    return FFMatrix(A.ctx, R[0]), [int(j) for j in np.flatnonzero(piv[0])]


def mat_nullspace(A: FFMatrix) -> FFMatrix:
    """Basis of the right nullspace as the columns of a ``cols x nullity`` matrix.

    Basis vectors are in reduced form: each has a 1 at one free column and
    zeros at the other free columns.
    """
    ctx = A.ctx
    R, pivcols = mat_rref(A)
    free = [j for j in range(A.cols) if j not in set(pivcols)]
    out = np.zeros((A.cols, len(free), ctx.m), dtype=ctx.dtype)
    for k, f in enumerate(free):
        out[f, k, 0] = 1
        for i, pc in enumerate(pivcols):
            out[pc, k] = (-R.data[i, f]) % ctx.p
    return FFMatrix(ctx, out)


def char_poly(Q: FFMatrix):
    """Monic characteristic polynomial det(xI - Q) over Q's field."""
    from .poly import PolyGF

    if Q.rows != Q.cols:
        raise DimMismatch("characteristic polynomial needs a square matrix")
    high_first = _berkowitz_rows(Q.ctx, Q.data[None])[0]
    return PolyGF(Q.ctx, high_first[::-1])


def batch_char_poly(ctx: FieldCtx, A) -> np.ndarray:
    """Stacked characteristic polynomials, low degree first: (B, n+1, m)."""
    return _berkowitz_rows(ctx, np.asarray(A))[:, ::-1]


def lift(M: FFMatrix, ext: FieldCtx) -> FFMatrix:
    """Embed a matrix over F_p entrywise as constants of ``ext``."""
    if M.ctx.p != ext.p:
        raise CharacteristicMismatch(f"cannot lift from characteristic {M.ctx.p} to {ext.p}")
    if M.ctx is ext:
        return M
    if M.ctx.m != 1:
        raise CtxMismatch("lift embeds matrices over the prime field only")
    data = np.zeros(M.data.shape[:2] + (ext.m,), dtype=ext.dtype)
    data[..., 0] = M.data[..., 0]
    return FFMatrix(ext, data)


def lift_array(ctx: FieldCtx, A, ext: FieldCtx) -> np.ndarray:
    """Array form of :func:`lift` for stacks of ground-field matrices."""
    A = np.asarray(A)
    out = np.zeros(A.shape[:-1] + (ext.m,), dtype=ext.dtype)
    out[..., 0] = A[..., 0]
    return out
