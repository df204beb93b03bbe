"""Eigenvalues and eigenvectors of a ground-field matrix over its splitting field."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CharacteristicMismatch
from .field import FFElem, FieldCtx, make_field
from .matrix import FFMatrix, char_poly, lift, mat_nullspace
from .poly import PolyGF, distinct_degree, equal_degree, radical, splitting_degree


@dataclass(frozen=True)
class EigenResult:
    r: int
    ext_ctx: FieldCtx
    lambdas: list[FFElem]
    eigvecs: FFMatrix
    distinct: bool
    # eigenvector columns grouped per eigenvalue (a geometric eigenspace basis each)
    eigenspaces: tuple = ()


def roots_in(f: PolyGF, ext: FieldCtx, seed: int = 0) -> list[FFElem]:
    """Distinct roots in ``ext`` of a polynomial over the prime field, sorted."""
    g = radical(f).lift(ext)
    rng = np.random.default_rng(seed)
    roots = []
    for prod, d in distinct_degree(g):
        if d != 1:
            continue
        for lin in equal_degree(prod, 1, rng):
            # monic x - c
            roots.append(-lin.coeff(0))
    return sorted(roots)


def _normalize(v: np.ndarray, ctx: FieldCtx) -> np.ndarray:
    from .field import _k_inv, _k_mul

    nz = np.flatnonzero(np.any(v != 0, axis=-1))
    lead = v[nz[0]]
    return _k_mul(ctx, v, _k_inv(ctx, lead[None])[0])


_CACHE: dict = {}
_CACHE_MAX = 4096


def eigen_decompose(Q: FFMatrix, field: FieldCtx | None = None, seed: int = 0) -> EigenResult:
    """Diagonalize ``Q`` over F_{p^r}, r the splitting degree of its characteristic polynomial.

    ``field`` may name a larger extension F_{p^s} with r | s to work in (used
    when two matrices must share a field).  Eigenvalues are sorted by their
    coefficient tuples; each eigenvector has first nonzero coordinate 1.
    """
    if Q.ctx.m != 1:
        raise ValueError("eigen_decompose expects a matrix over the prime field")
    # results are sorted, so the seed never changes them; repeated matrices are common
    key = (Q.ctx.p, Q.data.shape, Q.data.tobytes(), None if field is None else field.m)
    hit = _CACHE.get(key)
    if hit is not None:
        return hit
    res = _eigen(Q, field, seed)
    if len(_CACHE) >= _CACHE_MAX:
        _CACHE.clear()
    _CACHE[key] = res
    return res


def _eigen(Q: FFMatrix, field: FieldCtx | None, seed: int) -> EigenResult:
    n = Q.rows
    c = char_poly(Q)
    r = splitting_degree(c) if n else 1
    if field is None:
        ext = make_field(Q.ctx.p, r)
    else:
        if field.p != Q.ctx.p:
            raise CharacteristicMismatch("field characteristic differs from the matrix")
        if field.m % r:
            raise ValueError(f"F_{field.p}^{field.m} does not contain the splitting field of degree {r}")
        ext = field
    lambdas = roots_in(c, ext, seed) if n else []
    QL = lift(Q, ext)
    cols = []
    spaces = []
    for lam in lambdas:
        ns = mat_nullspace(QL - FFMatrix.identity(ext, n) * lam)
        vecs = [_normalize(ns.data[:, k], ext) for k in range(ns.cols)]
        spaces.append(FFMatrix(ext, np.stack(vecs, axis=1)))
        cols.extend(vecs)
    E = FFMatrix(ext, np.stack(cols, axis=1)) if cols else FFMatrix.zeros(ext, n, 0)
    distinct = len(lambdas) == n and radical(c).degree == n
    return EigenResult(r=r, ext_ctx=ext, lambdas=lambdas, eigvecs=E, distinct=distinct,
                       eigenspaces=tuple(spaces))
