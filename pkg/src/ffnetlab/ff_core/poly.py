"""Univariate polynomials over a constructed field, and their factorization."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
import sympy

from .field import FFElem, FieldCtx, _check_ctx, _k_inv, _k_mul, _k_pow, make_field


def _trim(c: np.ndarray) -> np.ndarray:
    n = c.shape[0]
    while n and not np.any(c[n - 1]):
        n -= 1
    return c[:n]


class PolyGF:
    """Polynomial with coefficients in ``ctx``; ``coeffs[i]`` is the x^i coefficient.

    ``coeffs`` is an ``(n, m)`` array, trimmed so the last row is nonzero.
    The zero polynomial has no rows and degree -1.
    """

    __slots__ = ("ctx", "coeffs")

    def __init__(self, ctx: FieldCtx, coeffs):
        arr = np.asarray(coeffs)
        if arr.ndim == 1:
            # a flat list of ground constants
            flat = np.zeros((arr.shape[0], ctx.m), dtype=ctx.dtype)
            flat[:, 0] = [int(c) for c in arr]
            arr = flat
        if arr.ndim != 2 or (arr.shape[0] and arr.shape[1] != ctx.m):
            raise ValueError(f"coefficients must have shape (n, {ctx.m})")
        self.ctx = ctx
        self.coeffs = _trim(np.asarray(arr, dtype=ctx.dtype) % ctx.p) if arr.size else np.zeros((0, ctx.m), dtype=ctx.dtype)

    @classmethod
    def from_elems(cls, ctx: FieldCtx, elems: Sequence[FFElem]) -> "PolyGF":
        if not elems:
            return cls.zero(ctx)
        return cls(ctx, np.array([e.coeffs for e in elems], dtype=object))

    @classmethod
    def zero(cls, ctx: FieldCtx) -> "PolyGF":
        return cls(ctx, np.zeros((0, ctx.m), dtype=ctx.dtype))

    @classmethod
    def one(cls, ctx: FieldCtx) -> "PolyGF":
        return cls.monomial(ctx, 0)

    @classmethod
    def monomial(cls, ctx: FieldCtx, k: int, c: FFElem | None = None) -> "PolyGF":
        arr = np.zeros((k + 1, ctx.m), dtype=ctx.dtype)
        arr[k] = c.coeffs if c is not None else ctx.one().coeffs
        return cls(ctx, arr)

    @classmethod
    def x(cls, ctx: FieldCtx) -> "PolyGF":
        return cls.monomial(ctx, 1)

    # basic properties
    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    def is_zero(self) -> bool:
        return self.coeffs.shape[0] == 0

    def is_one(self) -> bool:
        return self.degree == 0 and self.coeffs[0, 0] == 1 and not np.any(self.coeffs[0, 1:])

    @property
    def lc(self) -> FFElem:
        if self.is_zero():
            return self.ctx.zero()
        return FFElem(self.ctx, self.coeffs[-1])

    def coeff(self, i: int) -> FFElem:
        if 0 <= i <= self.degree:
            return FFElem(self.ctx, self.coeffs[i])
        return self.ctx.zero()

    def monic(self) -> "PolyGF":
        if self.is_zero():
            return self
        inv = _k_inv(self.ctx, self.coeffs[-1][None])[0]
        return PolyGF(self.ctx, _k_mul(self.ctx, self.coeffs, inv))

    def key(self) -> tuple:
        """Canonical sort key: degree, then coefficient tuples low degree first."""
        return (self.degree, tuple(tuple(int(v) for v in row) for row in self.coeffs))

    def int_coeffs(self) -> list[int]:
        """Coefficients as ints, for polynomials over the prime field."""
        if self.ctx.m != 1:
            raise ValueError("int_coeffs is for polynomials over the prime field")
        return [int(c) for c in self.coeffs[:, 0]]

    # arithmetic
    def _pad(self, n: int) -> np.ndarray:
        out = np.zeros((n, self.ctx.m), dtype=self.ctx.dtype)
        out[: self.coeffs.shape[0]] = self.coeffs
        return out

    def __add__(self, other: "PolyGF") -> "PolyGF":
        _check_ctx(self.ctx, other.ctx)
        n = max(self.coeffs.shape[0], other.coeffs.shape[0])
        return PolyGF(self.ctx, self._pad(n) + other._pad(n))

    def __sub__(self, other: "PolyGF") -> "PolyGF":
        _check_ctx(self.ctx, other.ctx)
        n = max(self.coeffs.shape[0], other.coeffs.shape[0])
        return PolyGF(self.ctx, self._pad(n) - other._pad(n))

    def __neg__(self) -> "PolyGF":
        return PolyGF(self.ctx, -self.coeffs)

    def __mul__(self, other) -> "PolyGF":
        if isinstance(other, FFElem):
            _check_ctx(self.ctx, other.ctx)
            return PolyGF(self.ctx, _k_mul(self.ctx, self.coeffs, other.array))
        _check_ctx(self.ctx, other.ctx)
        if self.is_zero() or other.is_zero():
            return PolyGF.zero(self.ctx)
        a, b = self.coeffs, other.coeffs
        prod = _k_mul(self.ctx, a[:, None, :], b[None, :, :])  # (na, nb, m)
        out = np.zeros((a.shape[0] + b.shape[0] - 1, self.ctx.m), dtype=self.ctx.dtype)
        for i in range(a.shape[0]):
            out[i:i + b.shape[0]] += prod[i]
        return PolyGF(self.ctx, out)

    __rmul__ = __mul__

    def __pow__(self, e: int) -> "PolyGF":
        result = PolyGF.one(self.ctx)
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def __divmod__(self, other: "PolyGF"):
        _check_ctx(self.ctx, other.ctx)
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        ctx = self.ctx
        r = self.coeffs.copy()
        db = other.degree
        if self.degree < db:
            return PolyGF.zero(ctx), self
        inv_lc = _k_inv(ctx, other.coeffs[-1][None])[0]
        q = np.zeros((self.degree - db + 1, ctx.m), dtype=ctx.dtype)
        b = other.coeffs
        for k in range(self.degree - db, -1, -1):
            c = _k_mul(ctx, r[k + db], inv_lc)
            if np.any(c):
                q[k] = c
                r[k:k + db + 1] = (r[k:k + db + 1] - _k_mul(ctx, b, c)) % ctx.p
        return PolyGF(ctx, q), PolyGF(ctx, r[:db] if db > 0 else r[:0])

    def __floordiv__(self, other: "PolyGF") -> "PolyGF":
        return divmod(self, other)[0]

    def __mod__(self, other: "PolyGF") -> "PolyGF":
        return divmod(self, other)[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolyGF):
            return NotImplemented
        return self.ctx is other.ctx and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash((self.ctx.p, self.ctx.m, self.key()))

    def derivative(self) -> "PolyGF":
        if self.degree < 1:
            return PolyGF.zero(self.ctx)
        k = np.arange(1, self.degree + 1, dtype=np.int64) % self.ctx.p
        return PolyGF(self.ctx, self.coeffs[1:] * k[:, None].astype(self.ctx.dtype))

    def __call__(self, x):
        """Evaluate at a field element or a square matrix (Horner)."""
        from .matrix import FFMatrix

        if isinstance(x, FFMatrix):
            _check_ctx(self.ctx, x.ctx)
            n = x.rows
            acc = FFMatrix.zeros(self.ctx, n, n)
            eye = FFMatrix.identity(self.ctx, n)
            for i in range(self.degree, -1, -1):
                acc = acc @ x + eye * self.coeff(i)
            return acc
        acc = self.ctx.zero()
        for i in range(self.degree, -1, -1):
            acc = acc * x + self.coeff(i)
        return acc

    def lift(self, ext: FieldCtx) -> "PolyGF":
        """Embed a polynomial over the prime field into ``ext``."""
        if self.ctx is ext:
            return self
        if self.ctx.m != 1 or self.ctx.p != ext.p:
            raise ValueError("lift embeds polynomials over the prime field only")
        arr = np.zeros((self.coeffs.shape[0], ext.m), dtype=ext.dtype)
        arr[:, 0] = self.coeffs[:, 0]
        return PolyGF(ext, arr)

    def __str__(self) -> str:
        if self.is_zero():
            return "0"
        terms = []
        for i in range(self.degree, -1, -1):
            c = self.coeff(i)
            if c.is_zero():
                continue
            if self.ctx.m == 1:
                cs = str(c.coeffs[0])
            else:
                cs = "(" + str(c) + ")"
            mono = "" if i == 0 else ("x" if i == 1 else f"x^{i}")
            if not mono:
                terms.append(cs)
            elif c.coeffs == self.ctx.one().coeffs:
                terms.append(mono)
            else:
                terms.append(f"{cs}*{mono}")
        return " + ".join(terms)

    def __repr__(self) -> str:
        return f"PolyGF(F_{self.ctx.p}^{self.ctx.m}, {self})"


# --- Euclidean helpers ------------------------------------------------------------------

def poly_gcd(a: PolyGF, b: PolyGF) -> PolyGF:
    """Monic gcd (zero only when both inputs are zero)."""
    while not b.is_zero():
        a, b = b, a % b
    return a.monic()


def powmod(base: PolyGF, e: int, mod: PolyGF) -> PolyGF:
    result = PolyGF.one(base.ctx) % mod
    base = base % mod
    while e:
        if e & 1:
            result = (result * base) % mod
        e >>= 1
        if e:
            base = (base * base) % mod
    return result


def _pth_root(f: PolyGF) -> PolyGF:
    """g with g^p = f, for f whose exponents are all multiples of p."""
    ctx = f.ctx
    p = ctx.p
    root_exp = ctx.order // p  # c -> c^(q/p) inverts Frobenius
    coeffs = f.coeffs[::p]
    return PolyGF(ctx, _k_pow(ctx, coeffs, root_exp) if ctx.m > 1 else coeffs)


# --- factorization pipeline ---------------------------------------------------------------

def squarefree_decomposition(f: PolyGF) -> list[tuple[PolyGF, int]]:
    """Squarefree factors of monic ``f`` with multiplicities; each part is squarefree."""
    f = f.monic()
    out: list[tuple[PolyGF, int]] = []
    if f.degree < 1:
        return out
    g = poly_gcd(f, f.derivative())
    w = f // g
    i = 1
    while w.degree > 0:
        y = poly_gcd(w, g)
        z = w // y
        if z.degree > 0:
            out.append((z, i))
        i += 1
        w = y
        g = g // y
    if g.degree > 0:
        for h, k in squarefree_decomposition(_pth_root(g)):
            out.append((h, k * f.ctx.p))
    return out


def distinct_degree(f: PolyGF) -> list[tuple[PolyGF, int]]:
    """Split squarefree monic ``f`` into products of same-degree irreducibles."""
    ctx = f.ctx
    q = ctx.order
    out: list[tuple[PolyGF, int]] = []
    x = PolyGF.x(ctx)
    rest = f.monic()
    h = x % rest if rest.degree > 0 else x
    i = 1
    while rest.degree >= 2 * i:
        h = powmod(h, q, rest)
        g = poly_gcd(rest, h - x)
        if g.degree > 0:
            out.append((g, i))
            rest = rest // g
            h = h % rest
        i += 1
    if rest.degree > 0:
        out.append((rest, rest.degree))
    return out


def _random_poly(ctx: FieldCtx, deg_bound: int, rng: np.random.Generator) -> PolyGF:
    return PolyGF(ctx, ctx.random_array(rng, (deg_bound,)))


def equal_degree(f: PolyGF, d: int, rng: np.random.Generator) -> list[PolyGF]:
    """Cantor-Zassenhaus splitting of a product of distinct degree-``d`` irreducibles."""
    ctx = f.ctx
    n = f.degree
    if n <= d:
        return [f.monic()]
    q = ctx.order
    one = PolyGF.one(ctx)
    while True:
        a = _random_poly(ctx, n, rng)
        if a.degree < 1:
            continue
        if q % 2:
            b = powmod(a, (q**d - 1) // 2, f) - one
        else:
            # absolute trace map a + a^2 + ... + a^(2^(k d - 1)), q = 2^k
            b = a % f
            t = b
            for _ in range(ctx.m * d - 1):
                t = (t * t) % f
                b = b + t
        g = poly_gcd(f, b)
        if 0 < g.degree < n:
            return equal_degree(g, d, rng) + equal_degree(f // g, d, rng)


def factor_poly(f: PolyGF, seed: int | np.random.Generator = 0) -> list[tuple[PolyGF, int]]:
    """Monic irreducible factors of ``f`` with multiplicities, canonically sorted.

    ``f`` equals ``f.lc`` times the product of the factors.  Equal-degree
    splitting draws from ``seed``; the sorted output does not depend on it.
    """
    if f.is_zero():
        raise ValueError("cannot factor the zero polynomial")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    out: list[tuple[PolyGF, int]] = []
    for part, mult in squarefree_decomposition(f):
        for prod, d in distinct_degree(part):
            for g in equal_degree(prod, d, rng):
                out.append((g, mult))
    # merge equal factors coming from different squarefree layers
    merged: dict[tuple, list] = {}
    for g, k in out:
        key = g.key()
        if key in merged:
            merged[key][1] += k
        else:
            merged[key] = [g, k]
    return [(g, k) for _, (g, k) in sorted(merged.items())]


def is_irreducible(f: PolyGF) -> bool:
    """Rabin's test over the coefficient field of ``f``."""
    n = f.degree
    if n < 1:
        return False
    if n == 1:
        return True
    f = f.monic()
    q = f.ctx.order
    x = PolyGF.x(f.ctx)
    if powmod(x, q**n, f) != x % f:
        return False
    for r in sympy.primefactors(n):
        h = powmod(x, q ** (n // r), f) - x
        if poly_gcd(f, h).degree > 0:
            return False
    return True


def radical(f: PolyGF) -> PolyGF:
    """Product of the distinct monic irreducible factors of ``f``."""
    out = PolyGF.one(f.ctx)
    for part, _ in squarefree_decomposition(f):
        out = out * part
    return out


def splitting_degree(f: PolyGF) -> int:
    """Degree over the coefficient field of the splitting field of ``f``."""
    r = 1
    for _, d in distinct_degree(radical(f)):
        r = math.lcm(r, d)
    return r


def minimal_poly(a: FFElem) -> PolyGF:
    """Minimal polynomial of ``a`` over F_p, from the first dependency among Phi(a^k)."""
    from .matrix import FFMatrix, mat_nullspace, mat_rank

    ctx = a.ctx
    ground = make_field(ctx.p, 1)
    cols = [ctx.one().coeffs]
    cur = ctx.one()
    for k in range(1, ctx.m + 1):
        cur = cur * a
        cols.append(cur.coeffs)
        M = FFMatrix.from_ints(ground, np.array(cols, dtype=np.int64).T)
        if mat_rank(M) < k + 1:
            ns = mat_nullspace(M)
            v = ns.data[:, 0, 0]
            # the basis vector has a 1 in its free column, which is the last one
            return PolyGF(ground, v.astype(np.int64)).monic()
    raise AssertionError("powers of a field element must become dependent by degree m")


def count_irreducible(p: int, m: int) -> int:
    """Number of monic irreducible degree-``m`` polynomials over F_p (Moebius sum)."""
    total = sum(sympy.mobius(d) * p ** (m // d) for d in sympy.divisors(m))
    q, r = divmod(total, m)
    assert r == 0
    return int(q)
