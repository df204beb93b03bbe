"""Prime fields F_p and extension fields F_{p^m} in the polynomial basis.

An element of F_{p^m} is stored as its coefficient vector ``(b_0, ..., b_{m-1})``
over F_p, index ``i`` holding the coefficient of ``alpha**i`` where ``alpha`` is
a root of the field's primitive polynomial.  The prime field is the ``m = 1``
case, with the primitive polynomial ``x - g`` for the smallest generator ``g``.

Array kernels (the functions prefixed ``_k``) operate on integer numpy arrays
whose last axis has length ``m``; every other axis is a batch axis.  The
object wrappers :class:`FFElem` and the matrix type in :mod:`.matrix` are thin
shells over the same kernels, so single-instance code and vectorised Monte
Carlo code share one arithmetic path.
"""

from __future__ import annotations

import functools
import itertools
from typing import Iterable, Sequence

import numpy as np
import sympy

from ..errors import CtxMismatch, DivisionByZero, FieldTooLarge, NotPrime

_MAX_ORDER = 2**63


# --- ground-field polynomial helpers (int lists, low degree first) -----------

def _gfp_trim(a: list[int]) -> list[int]:
    while a and a[-1] == 0:
        a.pop()
    return a


def _gfp_mulmod(a: list[int], b: list[int], f: list[int], p: int) -> list[int]:
    """(a*b) mod f over F_p; f monic."""
    if not a or not b:
        return []
    prod = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                prod[i + j] = (prod[i + j] + ai * bj) % p
    n = len(f) - 1
    for k in range(len(prod) - 1, n - 1, -1):
        c = prod[k]
        if c:
            for j in range(n + 1):
                prod[k - n + j] = (prod[k - n + j] - c * f[j]) % p
    return _gfp_trim(prod[:n])


def _gfp_powmod(base: list[int], e: int, f: list[int], p: int) -> list[int]:
    result = [1]
    while e:
        if e & 1:
            result = _gfp_mulmod(result, base, f, p)
        base = _gfp_mulmod(base, base, f, p)
        e >>= 1
    return result


def _is_primitive(f: list[int], p: int, m: int, prime_factors: Sequence[int]) -> bool:
    # ord(x mod f) == p^m - 1 forces f irreducible: a reducible modulus has
    # fewer than p^m - 1 units.
    if f[0] == 0:
        return False
    q1 = p**m - 1
    x = [0, 1]
    if _gfp_powmod(x, q1, f, p) != [1]:
        return False
    return all(_gfp_powmod(x, q1 // r, f, p) != [1] for r in prime_factors)


def smallest_generator(p: int) -> int:
    """Smallest generator of the cyclic group F_p^*."""
    if p == 2:
        return 1
    factors = list(sympy.factorint(p - 1))
    for g in range(2, p):
        if all(pow(g, (p - 1) // r, p) != 1 for r in factors):
            return g
    raise AssertionError("unreachable: F_p^* is cyclic")


# --- the field context --------------------------------------------------------

class FieldCtx:
    """A constructed finite field F_{p^m}.  Immutable and shared.

    Use :func:`make_field` rather than instantiating directly; it caches one
    context per ``(p, m)`` so identity comparison of contexts is meaningful.
    """

    __slots__ = ("p", "m", "prim_poly", "order", "_companion", "_T", "_Tflat",
                 "dtype", "_ground", "__weakref__")

    def __init__(self, p: int, m: int, prim_poly: Sequence[int]):
        self.p = int(p)
        self.m = int(m)
        self.prim_poly = tuple(int(c) % p for c in prim_poly)
        self.order = self.p**self.m
        # int64 is safe while every intermediate sum stays below 2**62.
        width = max(self.m * self.m, 4096)
        self.dtype = np.int64 if width * (self.p - 1) ** 2 < 2**62 else object

        m_ = self.m
        comp = np.zeros((m_, m_), dtype=self.dtype)
        for i in range(1, m_):
            comp[i, i - 1] = 1
        for i in range(m_):
            comp[i, m_ - 1] = (-self.prim_poly[i]) % self.p
        self._companion = comp

        # T[i, j] = Phi(x^(i+j) mod prim_poly), the multiplication structure tensor.
        powers = np.zeros((2 * m_ - 1, m_), dtype=self.dtype)
        cur = [0] * m_
        cur[0] = 1
        for k in range(2 * m_ - 1):
            powers[k] = cur
            top = cur[-1]
            cur = [0] + cur[:-1]
            if top:
                cur = [(c - top * self.prim_poly[i]) % self.p for i, c in enumerate(cur)]
        if m_ == 1:
            powers = np.ones((1, 1), dtype=self.dtype)
        T = np.zeros((m_, m_, m_), dtype=self.dtype)
        for i in range(m_):
            for j in range(m_):
                T[i, j] = powers[i + j]
        self._T = T
        self._Tflat = T.reshape(m_ * m_, m_)
        self._ground = None

    # identity semantics: contexts are cached singletons per (p, m)
    def __repr__(self) -> str:
        return f"FieldCtx(p={self.p}, m={self.m}, prim_poly={self.prim_poly})"

    def __reduce__(self):
        return (make_field, (self.p, self.m))

    @property
    def companion(self):
        """The companion matrix C of the primitive polynomial, over F_p."""
        from .matrix import FFMatrix

        return FFMatrix(self.ground, self._companion.reshape(self.m, self.m, 1))

    @property
    def ground(self) -> "FieldCtx":
        if self.m == 1:
            return self
        if self._ground is None:
            self._ground = make_field(self.p, 1)
        return self._ground

    @property
    def generator(self) -> "FFElem":
        """alpha: the class of x (for m = 1, the generator g)."""
        if self.m == 1:
            return FFElem(self, (self._companion[0, 0],))
        c = [0] * self.m
        c[1] = 1
        return FFElem(self, c)

    # --- element constructors ----------------------------------------------
    def zero(self) -> "FFElem":
        return FFElem(self, (0,) * self.m)

    def one(self) -> "FFElem":
        return FFElem(self, (1,) + (0,) * (self.m - 1))

    def scalar(self, c: int) -> "FFElem":
        """Embed the ground-field integer ``c`` as a constant."""
        return FFElem(self, (int(c) % self.p,) + (0,) * (self.m - 1))

    def __call__(self, value) -> "FFElem":
        if isinstance(value, FFElem):
            _check_ctx(self, value.ctx)
            return value
        if isinstance(value, str):
            return parse_elem(self, value)
        if isinstance(value, (int, np.integer)):
            return self.scalar(int(value))
        return FFElem(self, value)

    def from_index(self, idx: int) -> "FFElem":
        """Element whose base-p digits (low first) are those of ``idx``."""
        digits = []
        for _ in range(self.m):
            idx, d = divmod(idx, self.p)
            digits.append(d)
        return FFElem(self, digits)

    def elements(self) -> Iterable["FFElem"]:
        for idx in range(self.order):
            yield self.from_index(idx)

    def nonzero_elements(self) -> Iterable["FFElem"]:
        for idx in range(1, self.order):
            yield self.from_index(idx)

    def random_array(self, rng: np.random.Generator, shape: tuple, nonzero: bool = False) -> np.ndarray:
        """Uniform field elements as a coefficient array of ``shape + (m,)``."""
        if self.dtype is object or self.order >= 2**62:
            flat = [self._random_index(rng, nonzero) for _ in range(int(np.prod(shape, dtype=int)))]
            out = np.array([self.from_index(i).coeffs for i in flat], dtype=self.dtype)
            return out.reshape(tuple(shape) + (self.m,))
        lo = 1 if nonzero else 0
        idx = rng.integers(lo, self.order, size=shape, dtype=np.int64)
        return index_to_array(self, idx)

    def _random_index(self, rng: np.random.Generator, nonzero: bool) -> int:
        lo = 1 if nonzero else 0
        # rng.integers is limited to int64; compose from two draws when needed
        span = self.order - lo
        if span < 2**62:
            return lo + int(rng.integers(0, span))
        hi = int(rng.integers(0, 2**62))
        low = int(rng.integers(0, 2**62))
        return lo + ((hi << 62) | low) % span

    def random_elem(self, rng: np.random.Generator, nonzero: bool = False) -> "FFElem":
        return self.from_index(self._random_index(rng, nonzero))


def _check_ctx(a: FieldCtx, b: FieldCtx) -> None:
    if a is not b:
        raise CtxMismatch(f"elements of {a!r} and {b!r} cannot be combined")


@functools.lru_cache(maxsize=None)
def make_field(p: int, m: int = 1) -> FieldCtx:
    """Construct F_{p^m} with the lexicographically smallest primitive polynomial.

    Candidates ``x^m + a_{m-1} x^{m-1} + ... + a_0`` are scanned in increasing
    order of the integer ``sum(a_i p^i)``, i.e. by their base-p digit string
    written low degree first, and the first primitive one is kept.
    For ``m = 1`` the polynomial is ``x - g`` with ``g`` the smallest generator.

    >>> make_field(2, 3).prim_poly
    (1, 1, 0, 1)
    """
    p, m = int(p), int(m)
    if p < 2 or not sympy.isprime(p):
        raise NotPrime(f"{p} is not prime")
    if m < 1:
        raise ValueError(f"extension degree must be >= 1, got {m}")
    if p**m >= _MAX_ORDER:
        raise FieldTooLarge(f"{p}^{m} exceeds the supported field size 2^63")
    if m == 1:
        g = smallest_generator(p)
        return FieldCtx(p, 1, ((-g) % p, 1))
    factors = list(sympy.factorint(p**m - 1))
    for high_first in itertools.product(range(p), repeat=m):
        f = list(reversed(high_first)) + [1]
        if _is_primitive(f, p, m, factors):
            return FieldCtx(p, m, f)
    raise AssertionError(f"no primitive polynomial of degree {m} over F_{p}")


# --- array kernels --------------------------------------------------------------

def _k_add(ctx: FieldCtx, a, b):
    return (a + b) % ctx.p


def _k_sub(ctx: FieldCtx, a, b):
    return (a - b) % ctx.p


def _k_neg(ctx: FieldCtx, a):
    return (-a) % ctx.p


def _k_mul(ctx: FieldCtx, a, b):
    """Elementwise product of coefficient arrays (broadcasting over batch axes)."""
    p = ctx.p
    if ctx.m == 1:
        return (a * b) % p
    outer = a[..., :, None] * b[..., None, :]
    shape = outer.shape[:-2] + (ctx.m * ctx.m,)
    return (outer.reshape(shape) @ ctx._Tflat) % p


def _k_scale(ctx: FieldCtx, a, c: int):
    return (a * (int(c) % ctx.p)) % ctx.p


def _k_pow(ctx: FieldCtx, a, e: int):
    one = np.zeros_like(a)
    one[..., 0] = 1
    result = one
    base = a
    while e:
        if e & 1:
            result = _k_mul(ctx, result, base)
        e >>= 1
        if e:
            base = _k_mul(ctx, base, base)
    return result


def _k_iszero(a):
    return ~np.any(a != 0, axis=-1)


def _k_inv(ctx: FieldCtx, a):
    """Elementwise inverse; raises DivisionByZero if any entry is zero."""
    if np.any(_k_iszero(a)):
        raise DivisionByZero("zero has no multiplicative inverse")
    if ctx.m == 1 and ctx.dtype is not object and a.ndim <= 2 and a.size <= 64:
        flat = [pow(int(v), -1, ctx.p) for v in a.reshape(-1)]
        return np.array(flat, dtype=ctx.dtype).reshape(a.shape)
    return _k_pow(ctx, a, ctx.order - 2)


def _k_frobenius(ctx: FieldCtx, a, times: int = 1):
    return _k_pow(ctx, a, ctx.p**times)


def index_to_array(ctx: FieldCtx, idx) -> np.ndarray:
    """Base-p digit expansion of integer indices into coefficient arrays."""
    idx = np.asarray(idx, dtype=np.int64)
    out = np.zeros(idx.shape + (ctx.m,), dtype=ctx.dtype)
    cur = idx.copy()
    for i in range(ctx.m):
        out[..., i] = cur % ctx.p
        cur //= ctx.p
    return out


def array_to_index(ctx: FieldCtx, a) -> np.ndarray:
    weights = np.array([ctx.p**i for i in range(ctx.m)], dtype=np.int64)
    return (np.asarray(a, dtype=np.int64) * weights).sum(axis=-1)


# --- elements -----------------------------------------------------------------------

class FFElem:
    """An element of a :class:`FieldCtx`, immutable."""

    __slots__ = ("ctx", "coeffs")

    def __init__(self, ctx: FieldCtx, coeffs):
        coeffs = tuple(int(c) % ctx.p for c in np.asarray(coeffs, dtype=object).reshape(-1))
        if len(coeffs) != ctx.m:
            raise ValueError(f"expected {ctx.m} coefficients, got {len(coeffs)}")
        object.__setattr__(self, "ctx", ctx)
        object.__setattr__(self, "coeffs", coeffs)

    def __setattr__(self, name, value):
        raise AttributeError("FFElem is immutable")

    @classmethod
    def _from_array(cls, ctx: FieldCtx, arr) -> "FFElem":
        return cls(ctx, arr)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=self.ctx.dtype)

    @property
    def index(self) -> int:
        return sum(c * self.ctx.p**i for i, c in enumerate(self.coeffs))

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def __bool__(self) -> bool:
        return not self.is_zero()

    def _coerce(self, other) -> "FFElem | None":
        if isinstance(other, FFElem):
            _check_ctx(self.ctx, other.ctx)
            return other
        if isinstance(other, (int, np.integer)):
            return self.ctx.scalar(int(other))
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return FFElem(self.ctx, [(a + b) % self.ctx.p for a, b in zip(self.coeffs, o.coeffs)])

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return FFElem(self.ctx, [(a - b) % self.ctx.p for a, b in zip(self.coeffs, o.coeffs)])

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __neg__(self):
        return FFElem(self.ctx, [(-a) % self.ctx.p for a in self.coeffs])

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return FFElem(self.ctx, _k_mul(self.ctx, self.array, o.array))

    __rmul__ = __mul__

    def inverse(self) -> "FFElem":
        if self.is_zero():
            raise DivisionByZero("zero has no multiplicative inverse")
        return FFElem(self.ctx, _k_inv(self.ctx, self.array[None, :])[0])

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, e: int):
        e = int(e)
        if e < 0:
            return self.inverse() ** (-e)
        return FFElem(self.ctx, _k_pow(self.ctx, self.array, e))

    def __eq__(self, other):
        if isinstance(other, FFElem):
            return self.ctx is other.ctx and self.coeffs == other.coeffs
        if isinstance(other, (int, np.integer)):
            return self == self.ctx.scalar(int(other))
        return NotImplemented

    def __hash__(self):
        return hash((self.ctx.p, self.ctx.m, self.coeffs))

    def __lt__(self, other: "FFElem") -> bool:
        _check_ctx(self.ctx, other.ctx)
        return self.coeffs < other.coeffs

    def in_ground_field(self) -> bool:
        return not any(self.coeffs[1:])

    def __str__(self) -> str:
        return render_elem(self)

    def __repr__(self) -> str:
        return f"FFElem(F_{self.ctx.p}^{self.ctx.m}, {render_elem(self)!r})"


# free-function API ---------------------------------------------------------------

def ff_add(a: FFElem, b: FFElem) -> FFElem:
    _check_ctx(a.ctx, b.ctx)
    return a + b


def ff_mul(a: FFElem, b: FFElem) -> FFElem:
    _check_ctx(a.ctx, b.ctx)
    return a * b


def ff_inv(a: FFElem) -> FFElem:
    return a.inverse()


def phi(a: FFElem) -> list[int]:
    """Coefficient vector of ``a`` over F_p (low degree first)."""
    return list(a.coeffs)


def phi_inv(ctx: FieldCtx, v: Sequence[int]) -> FFElem:
    return FFElem(ctx, list(v))


def gamma(a: FFElem):
    """Multiplication-by-``a`` matrix over F_p; column i is Phi(a * alpha^i)."""
    from .matrix import FFMatrix

    ctx = a.ctx
    m = ctx.m
    basis = np.eye(m, dtype=ctx.dtype)  # row i = Phi(alpha^i)
    cols = _k_mul(ctx, basis, a.array[None, :])  # (m, m): row i = Phi(a alpha^i)
    return FFMatrix(ctx.ground, cols.T.reshape(m, m, 1).copy())


def gamma_inv(M, ctx: FieldCtx) -> FFElem:
    """Recover ``a`` from ``M = gamma(a)``; the first column of gamma(a) is Phi(a)."""
    from ..errors import NotACompanionPower

    if M.shape != (ctx.m, ctx.m) or M.ctx.p != ctx.p or M.ctx.m != 1:
        raise NotACompanionPower("shape or characteristic does not match the field")
    a = FFElem(ctx, M.data[:, 0, 0])
    if gamma(a) != M:
        raise NotACompanionPower("matrix is not a multiplication matrix of the field")
    return a


def render_elem(a: FFElem) -> str:
    """Canonical text form: comma-separated base-p digits, low degree first."""
    return ",".join(str(c) for c in a.coeffs)


def parse_elem(ctx: FieldCtx, text: str) -> FFElem:
    parts = [s for s in str(text).replace(" ", "").split(",") if s != ""]
    if len(parts) == 1 and ctx.m > 1:
        # a bare integer is a ground-field constant
        return ctx.scalar(int(parts[0]))
    return FFElem(ctx, [int(s) for s in parts])
