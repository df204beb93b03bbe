"""Feasibility probabilities of aligned network diagonalization.

Closed forms for the three channel models, Monte Carlo estimators that run
the actual model predicates, the max-lcm bound on the symbol extension
needed by the MIMO scheme, and the limit table.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .and_222 import Model
from .errors import MTooLarge
from .ff_core import count_irreducible, make_field
from .ff_core.field import _k_mul, index_to_array
from .ff_core.matrix import _k_matmul, batch_char_poly, batch_det, batch_inv, batch_rank
from .rng import run_shards


# --- closed forms -----------------------------------------------------------------------

def p_fe_single_hop(p: int, m: int) -> Fraction:
    """P(deg pi_gamma = m) for gamma uniform on F_{p^m}^*."""
    if m == 1:
        return Fraction(1)
    return Fraction(m * count_irreducible(p, m), p**m - 1)


def p_fe(p: int, m: int) -> Fraction:
    """Both hops feasible in the extension-field model (exact)."""
    return p_fe_single_hop(p, m) ** 2


def p_fe_verbatim(p: int, m: int, form: str = "mobius") -> Fraction:
    """The displayed closed forms, evaluated literally.

    ``form="mobius"``: ((p^m + sum_{d|m, d>1} mu(d) p^(m/d)) / (p^m - 1))^2.
    ``form="prime"``: ((p^m - p) / (p^m - 1))^2.  Both assume m >= 2; at
    m = 1 they give (p/(p-1))^2 and 0 respectively.
    """
    import sympy

    if form == "prime":
        return Fraction(p**m - p, p**m - 1) ** 2
    num = p**m + sum(int(sympy.mobius(d)) * p ** (m // d) for d in sympy.divisors(m) if d > 1)
    return Fraction(num, p**m - 1) ** 2


def p_se_single_hop(p: int, m: int) -> Fraction:
    prod = 1
    for i in range(1, m + 1):
        prod *= p - i
    return Fraction(prod, (p - 1) ** m)


def p_se(p: int, m: int) -> Fraction:
    return p_se_single_hop(p, m) ** 2


def s_gl_limit(p: int) -> Fraction:
    return 1 - Fraction(1, p)


def s_gl_bounds(p: int, m: int) -> tuple[float, float]:
    """Bounds on the separable fraction of GL(p, m)."""
    slack = 8 * (p - 1) / (2 * p - 3) * (2 * p / 3) ** (-m)
    base = 1 - 1 / p
    return base - slack, base + slack


def p_mimo_bounds(p: int, m: int) -> tuple[float, float]:
    lo, hi = s_gl_bounds(p, m)
    return max(0.0, lo) ** 2, min(1.0, hi) ** 2


def p_mimo_estimate(p: int, m: int) -> float:
    lo, hi = s_gl_bounds(p, m)
    return ((lo + hi) / 2) ** 2


def theorem2_bound(p: int, m: int) -> float:
    """Lower bound 1 - m(m+1) / (2 p^(m/2)) on the single-hop probability."""
    return 1 - m * (m + 1) / (2 * p ** (m / 2))


def gl_fraction(p: int, m: int) -> Fraction:
    """Probability that a uniform m x m matrix over F_p is invertible."""
    out = Fraction(1)
    for i in range(1, m + 1):
        out *= 1 - Fraction(1, p**i)
    return out


# --- symbol-extension bound ----------------------------------------------------------

def partitions(n: int, largest: int | None = None):
    """Integer partitions of n as non-increasing tuples."""
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for k in range(min(n, largest), 0, -1):
        for rest in partitions(n - k, k):
            yield (k,) + rest


def landau_max_lcm(m: int) -> int:
    """Largest lcm over the integer partitions of m (exhaustive)."""
    if m < 1:
        raise ValueError("m must be positive")
    if m > 40:
        raise MTooLarge(f"m = {m} exceeds the enumeration bound 40")
    return max(math.lcm(*parts) for parts in partitions(m))


def limit_table() -> dict:
    """Feasibility probabilities as p or m grows; the MIMO m-limit is symbolic."""
    return {
        "FE": {"p_to_inf": "1", "m_to_inf": "1"},
        "SE": {"p_to_inf": "1", "m_to_inf": "0"},
        "MIMO": {"p_to_inf": "1", "m_to_inf": "(1−p⁻¹)²"},
    }


def render_limit_table() -> str:
    t = limit_table()
    lines = ["model,p_to_inf,m_to_inf"]
    for k in ("FE", "SE", "MIMO"):
        lines.append(f"P_{k},{t[k]['p_to_inf']},{t[k]['m_to_inf']}")
    return "\n".join(lines)


# --- batched predicates ------------------------------------------------------------------

def _fe_hop_feasible(ctx, idx: np.ndarray) -> np.ndarray:
    """idx: (B, 4) nonzero element indices (Q11, Q12, Q21, Q22); deg pi_gamma = m."""
    from .ff_core.field import _k_inv

    a = index_to_array(ctx, idx)
    g = _k_mul(ctx, _k_mul(ctx, _k_inv(ctx, a[:, 0]), a[:, 1]), _k_mul(ctx, _k_inv(ctx, a[:, 3]), a[:, 2]))
    return krylov_degree(ctx, g) == ctx.m


def krylov_degree(ctx, g: np.ndarray) -> np.ndarray:
    """dim span{1, g, g^2, ...} over F_p for a stack of elements, = deg pi_g."""
    m = ctx.m
    nb = g.shape[0]
    cols = np.zeros((nb, m, m), dtype=np.int64)
    cur = np.zeros((nb, m), dtype=ctx.dtype)
    cur[:, 0] = 1
    for k in range(m):
        cols[:, :, k] = cur
        cur = _k_mul(ctx, cur, g)
    return batch_rank(make_field(ctx.p, 1), cols[..., None])


def _se_hop(p: int, d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """d: (B, 4, m) diagonals.  Returns (distinct, has_one) for Q's diagonal."""
    inv = np.vectorize(lambda x: pow(int(x), -1, p), otypes=[np.int64])
    q = inv(d[:, 0]) * d[:, 1] % p * inv(d[:, 3]) % p * d[:, 2] % p
    s = np.sort(q, axis=1)
    distinct = np.all(s[:, 1:] != s[:, :-1], axis=1)
    return distinct, np.any(q == 1, axis=1)


def sylvester_stack(ctx, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Sylvester matrices of stacks f (B, n+1, m) and g (B, k+1, m), low degree first."""
    nb = f.shape[0]
    n, k = f.shape[1] - 1, g.shape[1] - 1
    size = n + k
    out = np.zeros((nb, size, size, ctx.m), dtype=ctx.dtype)
    fh, gh = f[:, ::-1], g[:, ::-1]
    for i in range(k):
        out[:, i, i:i + n + 1] = fh
    for i in range(n):
        out[:, k + i, i:i + k + 1] = gh
    return out


def batch_separable(ctx, mats: np.ndarray) -> np.ndarray:
    """Characteristic polynomial squarefree, via det Sylvester(c, c') != 0."""
    nb, n = mats.shape[0], mats.shape[1]
    c = batch_char_poly(ctx, mats)  # (B, n+1, m) low first
    if n == 1:
        return np.ones(nb, dtype=bool)
    k = np.arange(1, n + 1, dtype=np.int64) % ctx.p
    dc = (c[:, 1:] * k[None, :, None]) % ctx.p  # formal degree n-1
    det = batch_det(ctx, sylvester_stack(ctx, c, dc))
    return np.any(det != 0, axis=-1)


def _eig_one(ctx, mats: np.ndarray) -> np.ndarray:
    """1 is an eigenvalue: det(M - I) == 0."""
    n = mats.shape[1]
    eye = np.zeros_like(mats)
    eye[:, np.arange(n), np.arange(n), 0] = 1
    return ~np.any(batch_det(ctx, (mats - eye) % ctx.p) != 0, axis=-1)


def _draw_gl(ctx, rng: np.random.Generator, count: int, m: int, entrywise: bool):
    """count uniform GL(p, m) matrices by rejection, or raw uniform matrices."""
    if entrywise:
        A = rng.integers(0, ctx.p, size=(count, m, m), dtype=np.int64)[..., None]
        return A, batch_rank(ctx, A) == m
    out = np.zeros((0, m, m, 1), dtype=np.int64)
    while out.shape[0] < count:
        need = count - out.shape[0]
        A = rng.integers(0, ctx.p, size=(max(16, int(need * 1.5) + 8), m, m), dtype=np.int64)[..., None]
        ok = batch_rank(ctx, A) == m
        out = np.concatenate([out, A[ok][:need]])
    return out, np.ones(count, dtype=bool)


def _mimo_product(ctx, blocks):
    """Q = B0^-1 B1 B3^-1 B2 with singular inverses zeroed (caller masks them)."""
    i0, ok0 = batch_inv(ctx, blocks[0])
    i3, ok3 = batch_inv(ctx, blocks[3])
    Q = _k_matmul(ctx, _k_matmul(ctx, _k_matmul(ctx, i0, blocks[1]), i3), blocks[2])
    return Q, ok0 & ok3


def _mc_chunk(n: int, rng: np.random.Generator, model: str, p: int, m: int, entrywise: bool = False,
              chunk: int = 20000) -> dict:
    """Counts over n trials: feasible (model predicate), scheme (plan exists)."""
    feas = scheme = 0
    done = 0
    while done < n:
        b = min(chunk, n - done)
        done += b
        if model == Model.ExtensionField.value:
            F = make_field(p, m)
            i1 = rng.integers(1, F.order, size=(b, 4), dtype=np.int64)
            i2 = rng.integers(1, F.order, size=(b, 4), dtype=np.int64)
            ok = _fe_hop_feasible(F, i1) & _fe_hop_feasible(F, i2)
            feas += int(ok.sum())
            # deg = m >= 2 excludes gamma' = 1; at m = 1 a singular hop 2 needs gamma' = 1
            if m == 1:
                from .ff_core.field import _k_inv
                a = index_to_array(F, i2)
                gp = _k_mul(F, _k_mul(F, _k_inv(F, a[:, 0]), a[:, 1]), _k_mul(F, _k_inv(F, a[:, 3]), a[:, 2]))
                ok = ok & ~((gp[:, 0] == 1))
            scheme += int(ok.sum())
        elif model == Model.SymbolExtensionDiagonal.value:
            d1 = rng.integers(1, p, size=(b, 4, m), dtype=np.int64)
            d2 = rng.integers(1, p, size=(b, 4, m), dtype=np.int64)
            a, _ = _se_hop(p, d1)
            c, one = _se_hop(p, d2)
            ok = a & c
            feas += int(ok.sum())
            scheme += int((ok & ~one).sum())
        else:
            g = make_field(p, 1)
            blocks1, blocks2, good = [], [], np.ones(b, dtype=bool)
            for _ in range(4):
                A, okA = _draw_gl(g, rng, b, m, entrywise)
                blocks1.append(A)
                good &= okA
            for _ in range(4):
                A, okA = _draw_gl(g, rng, b, m, entrywise)
                blocks2.append(A)
                good &= okA
            Q, ok1 = _mimo_product(g, blocks1)
            Qp, ok2 = _mimo_product(g, blocks2)
            good &= ok1 & ok2
            ok = good & batch_separable(g, Q) & batch_separable(g, Qp)
            feas += int(ok.sum())
            scheme += int((ok & ~_eig_one(g, Qp)).sum())
    return {"trials": n, "feasible": feas, "scheme": scheme}


@dataclass
class FeasibilityReport:
    model: str
    p: int
    m: int
    closed_form: object
    formula: str
    mc_estimate: float
    mc_trials: int
    mc_seed: int
    ci95: float
    within: bool
    scheme_estimate: float = 0.0
    bounds: tuple | None = None
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(self.closed_form, Fraction):
            d["closed_form"] = str(self.closed_form)
            d["closed_form_float"] = float(self.closed_form)
        return d


def closed_form(model: Model, p: int, m: int, entrywise: bool = False):
    """(value, formula id, bounds or None, flags)."""
    flags = []
    if model is Model.ExtensionField:
        if m == 1:
            flags.append("m1_edge")
        return p_fe(p, m), "P_FE", None, flags
    if model is Model.SymbolExtensionDiagonal:
        return p_se(p, m), "P_SE", None, flags
    lo, hi = p_mimo_bounds(p, m)
    est = p_mimo_estimate(p, m)
    if entrywise:
        f = float(gl_fraction(p, m) ** 8)
        return est * f, "P_MIMO_entrywise", (lo * f, hi * f), flags
    return est, "P_MIMO", (lo, hi), flags


def mc_feasibility(model, p: int, m: int, trials: int, seed: int, shards: int = 1, jobs: int = 1,
                   entrywise: bool = False) -> FeasibilityReport:
    """Estimate the probability that the model's AND predicates hold on random channels.

    FE draws coefficients uniformly from F_{p^m}^*, SE draws diagonals from
    F_p^*, MIMO draws uniform GL(p, m) blocks (or uniform entries with
    ``entrywise``, singular draws counting as infeasible).
    """
    model = Model.parse(model) if not isinstance(model, Model) else model
    if trials < 1:
        raise ValueError("trials must be at least 1")
    parts = run_shards(_mc_chunk, trials, seed, shards, jobs, model=model.value, p=p, m=m,
                       entrywise=entrywise)
    feas = sum(r["feasible"] for r in parts)
    scheme = sum(r["scheme"] for r in parts)
    est = feas / trials
    cf, fid, bounds, flags = closed_form(model, p, m, entrywise)
    cfv = float(cf)
    ci = 1.96 * math.sqrt(max(cfv * (1 - cfv), 0.0) / trials)
    if bounds is not None:
        within = bounds[0] <= est <= bounds[1]
    else:
        within = abs(est - cfv) <= max(ci, 0.0)
    return FeasibilityReport(model.value, p, m, cf, fid, est, trials, seed, ci, within,
                             scheme / trials, bounds, flags)


def feasibility_curve(p: int, ms) -> list[dict]:
    """Closed-form FE and SE curves versus m."""
    return [{"p": p, "m": m, "p_fe": float(p_fe(p, m)), "p_se": float(p_se(p, m))} for m in ms]
