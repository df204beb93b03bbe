"""Rates for the scalar Gaussian 2x2x2 interference channel.

CoF-AND turns each hop into a channel over F_{p^2} through Gaussian-integer
equations and relies on AND for the end-to-end diagonalization; PCoF-CIA
treats C as a degree-2 extension of R and aligns integer channels with real
precoders.  Channel coefficients are unit-modulus phases unless given, and
every transmitter has power ``snr`` against unit noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import SingularV, ZeroVector
from .rng import shard_rng

KEYS = ("h11", "h12", "h21", "h22", "h33", "h34", "h43", "h44")


@dataclass(frozen=True)
class GaussChannel222:
    h: tuple  # h11, h12, h21, h22, h33, h34, h43, h44
    snr: float

    def __post_init__(self):
        if len(self.h) != 8:
            raise ValueError("expected eight channel coefficients")
        if not self.snr > 0:
            raise ValueError("snr must be positive")

    def coef(self, name: str) -> complex:
        return complex(self.h[KEYS.index(name)])

    def hvec(self, l: int) -> np.ndarray:
        """h_l = [h_l1, h_l2] for relays, [h_l3, h_l4] for destinations."""
        a, b = (1, 2) if l in (1, 2) else (3, 4)
        return np.array([self.coef(f"h{l}{a}"), self.coef(f"h{l}{b}")])

    def with_snr(self, snr: float) -> "GaussChannel222":
        return GaussChannel222(self.h, snr)

    @classmethod
    def phase_fading(cls, rng: np.random.Generator, snr: float) -> "GaussChannel222":
        phi = rng.uniform(0.0, 2 * math.pi, size=8)
        return cls(tuple(np.exp(1j * phi)), snr)


def log_plus(x):
    return np.maximum(0.0, np.log2(np.maximum(x, 1e-300)))


def computation_rate(h, b, snr: float) -> float:
    """log+(snr / b^H (snr^-1 I + h h^H)^-1 b)."""
    h = np.asarray(h, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if not np.any(b != 0):
        raise ZeroVector("integer coefficient vector is zero")
    return float(_rate_many(h, b[None, :], snr)[0])


def _rate_many(h: np.ndarray, bs: np.ndarray, snr: float) -> np.ndarray:
    # (s^-1 I + h h^H)^-1 = s (I - s h h^H / (1 + s |h|^2)), so the denominator
    # over s is |b|^2 - s |h^H b|^2 / (1 + s |h|^2).
    nb2 = np.sum(np.abs(bs) ** 2, axis=-1)
    hb = bs @ np.conj(h)
    denom = nb2 - snr * np.abs(hb) ** 2 / (1 + snr * np.sum(np.abs(h) ** 2))
    return log_plus(1.0 / np.maximum(denom, 1e-300))


def tdma_rate(snr) -> float:
    return float(np.log2(1.0 + snr))


# --- CoF-AND ------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _gauss_pairs(bound: int):
    """All [c1, c2] with c1, c2 nonzero Gaussian integers, |Re|,|Im| <= bound.

    Returns the complex pairs and an integer direction label of c2 * conj(c1)
    modulo real scaling, plus the label of its conjugate.
    """
    r = np.arange(-bound, bound + 1)
    re, im = np.meshgrid(r, r, indexing="ij")
    z = (re + 1j * im).ravel()
    z = z[z != 0]
    c1, c2 = np.meshgrid(z, z, indexing="ij")
    c1, c2 = c1.ravel(), c2.ravel()
    w = c2 * np.conj(c1)
    x = np.rint(w.real).astype(np.int64)
    y = np.rint(w.imag).astype(np.int64)
    lab, labc = _line_labels(x, y), _line_labels(x, -y)
    return np.stack([c1, c2], axis=1), lab, labc


def _line_labels(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    g = np.gcd(x, y)
    g[g == 0] = 1
    x, y = x // g, y // g
    flip = (x < 0) | ((x == 0) & (y < 0))
    x = np.where(flip, -x, x)
    y = np.where(flip, -y, y)
    return (x + 10**6) * 10**7 + (y + 10**6)


def _best_hop_cof(ra: np.ndarray, rb: np.ndarray, pairs, lab, labc):
    """Max over admissible (b_a, b_b) of min(ra, rb).

    Receiver a uses [c1, c2] = [b_a1, b_a2] and receiver b uses [b_b1, b_b2]
    stored as pairs (b_b2, b_b1), so that Im(b_a1^-1 b_a2 b_b2^-1 b_b1) != 0
    becomes label(a) != conj-label(b).
    """
    order = np.argsort(-rb, kind="stable")
    top = order[0]
    other = order[lab[order] != lab[top]]
    second = other[0] if other.size else None
    # partner for candidate i must satisfy lab_b != labc[i]
    best_b = np.where(labc == lab[top], rb[second] if second is not None else -np.inf, rb[top])
    val = np.minimum(ra, best_b)
    i = int(np.argmax(val))
    j = int(second if labc[i] == lab[top] else top)
    return float(val[i]), i, j


def cof_and_rate(ch: GaussChannel222, bound: int = 3) -> dict:
    """Symmetric sum rate 3R/2 with R maximized over admissible integer plans."""
    if bound < 1:
        raise ValueError("search bound must be >= 1")
    pairs, lab, labc = _gauss_pairs(bound)
    swapped = pairs[:, ::-1]
    plan = {}
    Rs = []
    for (a, b) in ((1, 2), (3, 4)):
        ra = _rate_many(ch.hvec(a), pairs, ch.snr)
        rb = _rate_many(ch.hvec(b), swapped, ch.snr)
        R, i, j = _best_hop_cof(ra, rb, pairs, lab, labc)
        Rs.append(R)
        plan[f"b{a}"] = pairs[i].tolist()
        plan[f"b{b}"] = swapped[j].tolist()
    R = min(Rs)
    return {"R": R, "sum_rate": 1.5 * R, "plan": plan, "bound": bound}


def cof_condition(b) -> bool:
    """Im(b11^-1 b12 b22^-1 b21) != 0 for a 2x2 Gaussian-integer matrix [[b11, b12], [b21, b22]]."""
    (b11, b12), (b21, b22) = b
    if b11 == 0 or b22 == 0:
        return False
    # same sign as Im(conj(b11) b12 conj(b22) b21), which stays integral
    v = np.conj(complex(b11)) * complex(b12) * np.conj(complex(b22)) * complex(b21)
    return round(v.imag) != 0


# --- PCoF-CIA -------------------------------------------------------------------------

def real_gamma(z: complex) -> np.ndarray:
    return np.array([[z.real, -z.imag], [z.imag, z.real]])


_ONE = np.ones(2) / math.sqrt(2)
C12 = np.array([0.0, 1.0])
C22 = np.array([1.0, 1.0])


def precoders(ch: GaussChannel222) -> tuple[np.ndarray, np.ndarray]:
    c = ch.coef
    for a, b, d, e in (("h11", "h12", "h21", "h22"), ("h33", "h34", "h43", "h44")):
        if (c(b) / c(a) * c(d) / c(e)).imag == 0:
            raise SingularV(f"Im({a}^-1 {b} {d} {e}^-1) = 0")
    V1 = np.column_stack([real_gamma(c("h22") / c("h21")) @ _ONE, real_gamma(c("h12") / c("h11")) @ _ONE])
    V3 = np.column_stack([real_gamma(c("h44") / c("h43")) @ _ONE, real_gamma(c("h34") / c("h33")) @ _ONE])
    return V1, V3


def det_v1_identity(ch: GaussChannel222, form: str = "factored") -> float:
    """det(V1) from the coefficients without building V1.

    ``factored``: det Gamma(h21^-1 h22) * Im(h11^-1 h12 h21 h22^-1), exact for
    every channel.  ``display``: det Gamma(h21 h22^-1) * Im(...), which agrees
    when |h21| = |h22| (e.g. phase fading).
    """
    c = ch.coef
    w = c("h22") / c("h21") if form == "factored" else c("h21") / c("h22")
    return abs(w) ** 2 * (c("h12") / c("h11") * c("h21") / c("h22")).imag


@lru_cache(maxsize=8)
def _int_mats(bound: int):
    r = np.arange(-bound, bound + 1)
    g = np.stack(np.meshgrid(r, r, r, r, indexing="ij"), -1).reshape(-1, 2, 2).astype(float)
    det = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] * g[:, 1, 0]
    A = g[det != 0]
    b = np.stack(np.meshgrid(r, r, indexing="ij"), -1).reshape(-1, 2).astype(float)
    b = b[np.any(b != 0, axis=1)]
    par = np.abs(b[:, None, 0] * b[None, :, 1] - b[:, None, 1] * b[None, :, 0]) < 0.5
    return A, b, par


def _inv2(M: np.ndarray) -> np.ndarray:
    """Batched 2x2 inverse through the adjugate."""
    a, b, c, d = M[..., 0, 0], M[..., 0, 1], M[..., 1, 0], M[..., 1, 1]
    det = a * d - b * c
    out = np.empty_like(M)
    out[..., 0, 0], out[..., 0, 1] = d / det, -b / det
    out[..., 1, 0], out[..., 1, 1] = -c / det, a / det
    return out


def effective_gram(H: np.ndarray, C: np.ndarray, snr: float) -> np.ndarray:
    """C (snr^-1 I + C^T H^T H C)^-1 C^T, computed as snr P (I + snr K P)^-1.

    P = C C^T and K = H^T H; the push-through identity keeps every inverse 2x2.
    """
    P = C @ np.swapaxes(C, -1, -2)
    K = H.T @ H
    return snr * P @ _inv2(np.eye(2) + snr * (K @ P))


def effective_gram_direct(H: np.ndarray, C: np.ndarray, snr: float) -> np.ndarray:
    """The same quantity with the 3x3 inverse formed explicitly."""
    HC = H @ C
    M = np.eye(C.shape[-1]) / snr + np.swapaxes(HC, -1, -2) @ HC
    return C @ np.linalg.inv(M) @ np.swapaxes(C, -1, -2)


def _sigma_pair(H: np.ndarray, A: np.ndarray, ck: np.ndarray, snr: float, bs, par) -> tuple:
    """Per A: the larger sigma^2_eff over the two columns of the best full-rank B_k.

    B_k minimizing the larger of its two column values is found greedily: the
    best b, then the best b not parallel to it.
    """
    n = A.shape[0]
    C = np.concatenate([A, np.broadcast_to(ck[None, :, None], (n, 2, 1))], axis=2)  # (n, 2, 3)
    G = effective_gram(H, C, snr)
    coef = np.stack([G[:, 0, 0], G[:, 0, 1] + G[:, 1, 0], G[:, 1, 1]], axis=1)
    s = coef @ np.stack([bs[:, 0] ** 2, bs[:, 0] * bs[:, 1], bs[:, 1] ** 2])
    i1 = np.argmin(s, axis=1)
    s2 = np.where(par[i1], np.inf, s)
    i2 = np.argmin(s2, axis=1)
    return s2[np.arange(n), i2], i1, i2


def pcof_cia_rate(ch: GaussChannel222, bound: int = 3) -> dict:
    """Symmetric sum rate 3R, R maximized over A1, A2 and the B_k.

    Rates are 1/2 log+(snr / (tr(V A A^T V^T) sigma^2_eff)); A1 only enters
    the relay terms and A2 only the destination terms, so the two hops are
    optimized separately.
    """
    if bound < 1:
        raise ValueError("search bound must be >= 1")
    V1, V3 = precoders(ch)
    A, bs, par = _int_mats(bound)
    out = {}
    hop_R = []
    for V, rx, src in ((V1, (1, 2), 1), (V3, (3, 4), 3), ):
        VA = V[None] @ A
        tr = np.sum(VA**2, axis=(1, 2))
        worst = np.zeros(A.shape[0])
        picks = []
        for idx, k in enumerate(rx):
            H = real_gamma(ch.coef(f"h{k}{src}")) @ V
            ck = C12 if idx == 0 else C22
            s, i1, i2 = _sigma_pair(H, A, ck, ch.snr, bs, par)
            worst = np.maximum(worst, s)
            picks.append((i1, i2))
        rate = 0.5 * log_plus(ch.snr / (tr * worst))
        a = int(np.argmax(rate))
        hop_R.append(float(rate[a]))
        out[f"A{1 if src == 1 else 2}"] = A[a].astype(int).tolist()
        for k, (i1, i2) in zip(rx, picks):
            out[f"B{k}"] = np.column_stack([bs[i1[a]], bs[i2[a]]]).astype(int).tolist()
    R = min(hop_R)
    return {"R": R, "sum_rate": 3 * R, "plan": out, "bound": bound}


# --- ergodic sweep ---------------------------------------------------------------------

DEFAULT_SNR_DB = tuple(range(0, 31)) + (35, 40, 45, 50)
SCHEMES = ("CoF-AND", "PCoF-CIA", "TDMA")


def _sweep_trial(trial: int, seed: int, snrs: np.ndarray, bound: int) -> np.ndarray:
    # one phase draw per trial, shared by every SNR point
    ch = GaussChannel222.phase_fading(shard_rng(seed, trial), 1.0)
    out = np.zeros((len(snrs), 3))
    for i, s in enumerate(snrs):
        c = ch.with_snr(float(s))
        out[i, 0] = cof_and_rate(c, bound)["sum_rate"]
        try:
            out[i, 1] = pcof_cia_rate(c, bound)["sum_rate"]
        except SingularV:
            out[i, 1] = 0.0
        out[i, 2] = tdma_rate(s)
    return out


def _sweep_block(trials, seed, snrs, bound):
    return [_sweep_trial(t, seed, snrs, bound) for t in trials]


def ergodic_sweep(snr_db_list=DEFAULT_SNR_DB, trials: int = 200, seed: int = 0, bound: int = 3,
                  jobs: int = 1) -> dict:
    """Mean sum rates per scheme over independent phase-fading draws."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    snr_db = np.asarray(list(snr_db_list), dtype=float)
    snrs = 10.0 ** (snr_db / 10.0)
    jobs = max(1, min(int(jobs), trials))
    if jobs == 1:
        per_trial = _sweep_block(range(trials), seed, snrs, bound)
    else:
        from concurrent.futures import ProcessPoolExecutor

        blocks = [list(range(j, trials, jobs)) for j in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_sweep_block, blocks, [seed] * jobs, [snrs] * jobs, [bound] * jobs))
        per_trial = [None] * trials
        for blk, res in zip(blocks, parts):
            for t, r in zip(blk, res):
                per_trial[t] = r
    # summing in trial order keeps the result independent of the worker count
    total = np.zeros((len(snrs), 3))
    for r in per_trial:
        total = total + r
    mean = total / trials
    return {"snr_db": snr_db.tolist(), "trials": trials, "seed": seed, "bound": bound,
            "curves": {name: mean[:, i].tolist() for i, name in enumerate(SCHEMES)}}


def crossover(snr_db, a, b) -> float | None:
    """First SNR where curve a overtakes curve b (linear interpolation), or None."""
    d = np.asarray(a) - np.asarray(b)
    x = np.asarray(snr_db, dtype=float)
    for i in range(1, len(d)):
        if d[i - 1] < 0 <= d[i]:
            return float(x[i - 1] + (x[i] - x[i - 1]) * (-d[i - 1]) / (d[i] - d[i - 1]))
    return None


def sweep_rows(result: dict) -> list[dict]:
    rows = []
    for name in SCHEMES:
        for s, v in zip(result["snr_db"], result["curves"][name]):
            rows.append({"snr_db": s, "scheme": name, "mean_sum_rate_bits": v,
                         "trials": result["trials"], "bound_B": result["bound"], "seed": result["seed"]})
    return rows
