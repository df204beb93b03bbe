"""Layered wired networks with scalar or vector random linear network coding.

Every relay except the designated key relays forwards random linear
combinations; forward propagation of the coding blocks condenses the
network into a 2x2x2 or 3-user channel that the AND / IA code then handles.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources

import numpy as np

from .and_222 import ChannelInstance222, Model, check_feasible, simulate_222
from .errors import MissingKeyRelays, NonIntegerLatency, NotFeasible, NotLayered, ZeroBlock
from .ff_core import FFMatrix, gamma, gamma_inv, make_field
from .ia_3user import ChannelInstance3U
from .rng import shard_rng

ROLES = ("source", "relay", "key_relay", "destination")


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    xi: int


@dataclass(frozen=True)
class Topology:
    nodes: dict  # id -> (role, layer)
    edges: tuple
    flows: tuple

    def __post_init__(self):
        for nid, (role, _) in self.nodes.items():
            if role not in ROLES:
                raise ValueError(f"node {nid}: unknown role {role!r}")
        seen = set()
        for e in self.edges:
            if e.src not in self.nodes or e.dst not in self.nodes:
                raise ValueError(f"edge {e.src}->{e.dst} names an unknown node")
            if self.layer(e.dst) <= self.layer(e.src):
                raise NotLayered(f"edge {e.src}->{e.dst} does not go to a higher layer")
            if e.xi in seen:
                raise ValueError(f"coefficient slot {e.xi} used twice")
            seen.add(e.xi)
        for s, d in self.flows:
            if self.nodes[s][0] != "source" or self.nodes[d][0] != "destination":
                raise ValueError(f"flow {s}->{d} must go from a source to a destination")
            if self.layer(d) <= self.layer(s):
                raise NotLayered(f"flow {s}->{d}: destination does not follow the source")

    def layer(self, nid: str) -> int:
        return self.nodes[nid][1]

    def role(self, nid: str) -> str:
        return self.nodes[nid][0]

    @property
    def strictly_layered(self) -> bool:
        return all(self.layer(e.dst) == self.layer(e.src) + 1 for e in self.edges)

    @property
    def slots(self) -> tuple[int, ...]:
        return tuple(sorted(e.xi for e in self.edges))

    @property
    def sources(self) -> list[str]:
        return [s for s, _ in self.flows]

    @property
    def destinations(self) -> list[str]:
        return [d for _, d in self.flows]

    @property
    def key_relays(self) -> list[str]:
        return [n for n, (r, _) in self.nodes.items() if r == "key_relay"]

    def order(self) -> list[str]:
        return sorted(self.nodes, key=lambda n: (self.layer(n), n))

    def reachable(self, start: str, blocked=()) -> set:
        out, stack = set(), [start]
        succ = {}
        for e in self.edges:
            succ.setdefault(e.src, []).append(e.dst)
        while stack:
            u = stack.pop()
            for v in succ.get(u, ()):
                if v not in out:
                    out.add(v)
                    if v not in blocked:
                        stack.append(v)
        return out

    def check_two_flow(self) -> None:
        keys = self.key_relays
        if len(self.flows) != 2 or len(keys) != 2:
            raise MissingKeyRelays("a two-flow condensation needs two flows and exactly two key relays")
        for s in self.sources:
            if set(self.destinations) & self.reachable(s, blocked=keys):
                raise MissingKeyRelays(f"a path from {s} reaches a destination around the key relays")

    @classmethod
    def from_json(cls, doc: dict) -> "Topology":
        nodes = {n["id"]: (n["role"], int(n["layer"])) for n in doc["nodes"]}
        edges = tuple(Edge(e["from"], e["to"], int(e.get("xi", i + 1))) for i, e in enumerate(doc["edges"]))
        flows = tuple((s, d) for s, d in doc["flows"])
        return cls(nodes, edges, flows)

    def to_json(self) -> dict:
        return {
            "nodes": [{"id": n, "role": r, "layer": l} for n, (r, l) in self.nodes.items()],
            "edges": [{"from": e.src, "to": e.dst, "xi": e.xi} for e in self.edges],
            "flows": [list(f) for f in self.flows],
        }

    @classmethod
    def load(cls, path) -> "Topology":
        with open(path) as f:
            return cls.from_json(json.load(f))


def load_fixture(name: str) -> Topology:
    """A bundled topology: ``fig5_2flow`` or ``fig8_3flow``."""
    name = name if name.endswith(".json") else name + ".json"
    text = resources.files("ffnetlab.fixtures").joinpath(name).read_text()
    return Topology.from_json(json.loads(text))


# --- coding assignments ------------------------------------------------------------------

@dataclass
class CodingAssignment:
    """Per time index t and slot xi: a nonzero scalar (scalar mode) or a C exponent (vector mode)."""

    mode: str
    p: int
    m: int
    T: int
    values: dict = field(default_factory=dict)  # xi -> list of T ints
    seed: int | None = None

    @property
    def block_dim(self) -> int:
        return self.m if self.mode == "vector" else 1

    def block(self, xi: int, t: int) -> np.ndarray:
        v = self.values[xi][t]
        if self.mode == "vector":
            return _companion_power(self.p, self.m, int(v))
        return np.array([[int(v) % self.p]], dtype=np.int64)


@lru_cache(maxsize=4096)
def _companion_power_t(p: int, m: int, e: int) -> tuple:
    F = make_field(p, m)
    return tuple(map(tuple, gamma(F.generator ** e).to_ints()))


def _companion_power(p: int, m: int, e: int) -> np.ndarray:
    return np.array(_companion_power_t(p, m, e), dtype=np.int64)


def draw_assignment(topo: Topology, mode: str, p: int, m: int, seed: int, T: int | None = None) -> CodingAssignment:
    """Uniform coefficients: F_p^* values, or C exponents in {0, ..., p^m - 2}."""
    if mode not in ("scalar", "vector"):
        raise ValueError("mode must be 'scalar' or 'vector'")
    if T is None:
        T = m if mode == "scalar" else 1
    rng = np.random.default_rng(seed)
    hi = p if mode == "scalar" else p**m - 1
    lo = 1 if mode == "scalar" else 0
    vals = {xi: [int(v) for v in rng.integers(lo, hi, size=T)] for xi in topo.slots}
    return CodingAssignment(mode, p, m, T, vals, seed)


def constant_assignment(topo: Topology, mode: str, p: int, m: int, T: int | None = None, value: int | None = None) -> CodingAssignment:
    """Every coefficient the identity (or a fixed value/exponent)."""
    if T is None:
        T = m if mode == "scalar" else 1
    v = value if value is not None else (1 if mode == "scalar" else 0)
    return CodingAssignment(mode, p, m, T, {xi: [v] * T for xi in topo.slots})


# --- transfer ----------------------------------------------------------------------------

def propagate(topo: Topology, coeff, d: int, p: int, start: str, blocked=()) -> dict:
    """Blocks G[v] with (signal at v) = G[v] (signal at start); coeff(xi) gives the edge block.

    Nodes in ``blocked`` receive but do not forward.
    """
    incoming = {}
    for e in topo.edges:
        incoming.setdefault(e.dst, []).append(e)
    val = {start: np.eye(d, dtype=np.int64)}
    for v in topo.order():
        if v == start or topo.layer(v) <= topo.layer(start):
            continue
        acc = None
        for e in incoming.get(v, ()):
            if e.src in val and (e.src == start or e.src not in blocked):
                term = coeff(e.xi) @ val[e.src] % p
                acc = term if acc is None else (acc + term) % p
        if acc is not None:
            val[v] = acc
    return val


def transfer_blocks(topo: Topology, assign: CodingAssignment, sources, sinks, t: int, blocked=()) -> list:
    """[[G(sink l <- source k)]] at time index t; zero block when unreachable."""
    d = assign.block_dim
    out = []
    per_src = {s: propagate(topo, lambda xi: assign.block(xi, t), d, assign.p, s, blocked) for s in sources}
    for snk in sinks:
        out.append([per_src[s].get(snk, np.zeros((d, d), dtype=np.int64)) for s in sources])
    return out


def _stack(blocks_t: list) -> list:
    """Block-diagonal stacking over time indices of [[block]] grids."""
    T = len(blocks_t)
    rows, cols = len(blocks_t[0]), len(blocks_t[0][0])
    d = blocks_t[0][0][0].shape[0]
    out = []
    for l in range(rows):
        row = []
        for k in range(cols):
            M = np.zeros((d * T, d * T), dtype=np.int64)
            for t in range(T):
                M[t * d:(t + 1) * d, t * d:(t + 1) * d] = blocks_t[t][l][k]
            row.append(M)
        out.append(row)
    return out


def _hop_grids(topo: Topology, assign: CodingAssignment):
    topo.check_two_flow()
    keys = sorted(topo.key_relays)
    g1 = [transfer_blocks(topo, assign, topo.sources, keys, t, blocked=keys) for t in range(assign.T)]
    g2 = [transfer_blocks(topo, assign, keys, topo.destinations, t) for t in range(assign.T)]
    return _stack(g1), _stack(g2)


def transfer_matrices(topo: Topology, assign: CodingAssignment):
    """Condensed end-to-end channel.

    Two flows: ChannelInstance222 (vector mode -> extension-field model,
    scalar mode -> diagonal symbol-extension model).  Three flows:
    ChannelInstance3U (scalar -> diagonal over the T time indices; vector with
    T = 1 -> extension field; vector with T > 1 -> block-diagonal MIMO
    blocks).  Zero blocks are kept; ``zero_blocks`` reports them.
    """
    p = assign.p
    g = make_field(p, 1)
    to_m = lambda M: FFMatrix.from_ints(g, M.tolist())
    if len(topo.flows) == 2:
        h1, h2 = _hop_grids(topo, assign)
        hop1 = tuple(to_m(h1[l][k]) for l in range(2) for k in range(2))
        hop2 = tuple(to_m(h2[l][k]) for l in range(2) for k in range(2))
        n = hop1[0].rows
        if assign.mode == "vector" and assign.T == 1:
            return ChannelInstance222(Model.ExtensionField, p, assign.m, hop1, hop2)
        if assign.mode == "scalar":
            return ChannelInstance222(Model.SymbolExtensionDiagonal, p, n, hop1, hop2)
        return ChannelInstance222(Model.GeneralMimo, p, n, hop1, hop2)
    if len(topo.flows) == 3:
        grids = [transfer_blocks(topo, assign, topo.sources, topo.destinations, t) for t in range(assign.T)]
        H = _stack(grids)
        Q = tuple(tuple(to_m(H[l][k]) for k in range(3)) for l in range(3))
        n = Q[0][0].rows
        if assign.mode == "vector" and assign.T == 1:
            return ChannelInstance3U(Model.ExtensionField, p, assign.m, Q)
        if assign.mode == "scalar":
            return ChannelInstance3U(Model.SymbolExtensionDiagonal, p, n, Q)
        return ChannelInstance3U(Model.GeneralMimo, p, n, Q)
    raise ValueError("topology must carry two or three flows")


def zero_blocks(ch, mode: str) -> list[str]:
    """Names of blocks that make the condensed channel degenerate.

    Vector mode: the zero matrix.  Scalar mode: any zero diagonal entry.
    """
    if isinstance(ch, ChannelInstance222):
        named = list(zip(("Q11", "Q12", "Q21", "Q22"), ch.hop1)) + list(zip(("Q33", "Q34", "Q43", "Q44"), ch.hop2))
    else:
        named = [(f"H{l + 1}{k + 1}", ch.Q[l][k]) for l in range(3) for k in range(3)]
    bad = []
    for name, M in named:
        if mode == "scalar":
            if any(d.is_zero() for d in M.diagonal()):
                bad.append(name)
        elif M.is_zero():
            bad.append(name)
    return bad


# --- two-flow runs -----------------------------------------------------------------------

def run_two_flow(topo: Topology, assign: CodingAssignment, messages=None, seed: int = 0) -> dict:
    """Condense, check AND feasibility, and push one message pair end to end.

    ``messages`` is ``(w1, w2)`` with m and m - 1 symbols, or None for random
    ones drawn from ``seed``.  Raises ZeroBlock or NotFeasible.
    """
    ch = transfer_matrices(topo, assign)
    bad = zero_blocks(ch, assign.mode)
    if bad:
        raise ZeroBlock(",".join(bad))
    ok, pred = check_feasible(ch)
    if not ok:
        raise NotFeasible(pred)
    m = ch.m
    W = ch.ctx
    if messages is None:
        rng = np.random.default_rng(seed)
        w1 = [W.random_elem(rng) for _ in range(m)]
        w2 = [W.random_elem(rng) for _ in range(m - 1)]
    else:
        w1, w2 = messages
        w1 = [W(x) for x in w1]
        w2 = [W(x) for x in w2]
    res = simulate_222(ch, w1, w2, seed=seed)
    rate = (2 * m - 1) / m * math.log2(assign.p) if res["success"] else 0.0
    return {"success": res["success"], "rate_achieved": rate, "instance": ch,
            "w1": w1, "w2": w2, "w1_hat": res["w1_hat"], "w2_hat": res["w2_hat"]}


def _wired_chunk(trial_ids, topo_doc, mode, p, m, seed):
    topo = Topology.from_json(topo_doc)
    counts = {"trials": 0, "zero_block": 0, "infeasible": 0, "feasible": 0, "success": 0}
    for t in trial_ids:
        rng = shard_rng(seed, t)
        a = draw_assignment(topo, mode, p, m, int(rng.integers(2**63 - 1)))
        counts["trials"] += 1
        try:
            r = run_two_flow(topo, a, seed=int(rng.integers(2**63 - 1)))
        except ZeroBlock:
            counts["zero_block"] += 1
            continue
        except NotFeasible:
            counts["infeasible"] += 1
            continue
        counts["feasible"] += 1
        counts["success"] += int(r["success"])
    return counts


def wired_trials(topo: Topology, mode: str, p: int, m: int, trials: int, seed: int, jobs: int = 1) -> dict:
    """Empirical AND feasibility and decoding success over independent coefficient draws."""
    doc = topo.to_json()
    if jobs <= 1:
        parts = [_wired_chunk(range(trials), doc, mode, p, m, seed)]
    else:
        from concurrent.futures import ProcessPoolExecutor

        blocks = [list(range(j, trials, jobs)) for j in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_wired_chunk, blocks, [doc] * jobs, [mode] * jobs, [p] * jobs, [m] * jobs, [seed] * jobs))
    out = {k: sum(c[k] for c in parts) for k in parts[0]}
    out["feasibility_frequency"] = out["feasible"] / trials
    out["success_frequency"] = out["success"] / trials
    return out


# --- rates -------------------------------------------------------------------------------

def throughput_latency(p: int, m: int, R0) -> dict:
    """Latency T = m log2 p / R0 and throughput (2m-1) log2 p / T = (2m-1) R0 / m.

    The exact parts are returned as ``T_over_log2p_per_R0`` (= m / R0 times
    log2 p) and ``throughput_over_R0`` (= (2m-1)/m).
    """
    lp = math.log2(p)
    R0f = Fraction(R0).limit_denominator(10**9) if not isinstance(R0, Fraction) else R0
    T = m * lp / float(R0f)
    if abs(T - round(T)) > 1e-9:
        warnings.warn(f"latency T = {T:.6g} is not an integer", NonIntegerLatency, stacklevel=2)
    thr_ratio = Fraction(2 * m - 1, m)
    return {"latency_T": T, "throughput": float(thr_ratio * R0f), "throughput_over_R0": thr_ratio,
            "T_over_log2p": Fraction(m) / R0f, "bits_per_vector": (2 * m - 1) * lp,
            "cut_set": 2 * float(R0f)}


def pbna_rate(n: int) -> Fraction:
    """Sum-rate multiplier of log2 p for precoding length 2n+1: (3n+1)/(2n+1)."""
    if n < 0 or int(n) != n:
        raise ValueError("n must be a nonnegative integer")
    return Fraction(3 * n + 1, 2 * n + 1)


PBNA_LIMIT = Fraction(3, 2)


# --- three flows -------------------------------------------------------------------------

@dataclass
class Lift3:
    coeffs: list  # coeffs[t][l][k] in F_{p^m}
    instances: list  # one extension-field ChannelInstance3U per t
    zero_entries: int
    total_entries: int

    @property
    def zero_fraction(self) -> float:
        return self.zero_entries / self.total_entries


def vector_lift_3flow(topo: Topology, assign: CodingAssignment, strict: bool = False) -> Lift3:
    """Per time index, the 3-user channel over F_{p^m} induced by vector RLNC.

    ``strict`` raises ZeroBlock on the first zero condensed coefficient.
    """
    if assign.mode != "vector":
        raise ValueError("vector lifting needs a vector-mode assignment")
    if len(topo.flows) != 3:
        raise ValueError("vector lifting needs three flows")
    F = make_field(assign.p, assign.m)
    g = make_field(assign.p, 1)
    coeffs, insts, zeros = [], [], 0
    for t in range(assign.T):
        grid = transfer_blocks(topo, assign, topo.sources, topo.destinations, t)
        c = [[gamma_inv(FFMatrix.from_ints(g, grid[l][k].tolist()), F) for k in range(3)] for l in range(3)]
        z = sum(x.is_zero() for row in c for x in row)
        if z and strict:
            raise ZeroBlock(f"t={t}")
        zeros += z
        coeffs.append(c)
        Q = tuple(tuple(FFMatrix.from_ints(g, grid[l][k].tolist()) for k in range(3)) for l in range(3))
        insts.append(ChannelInstance3U(Model.ExtensionField, assign.p, assign.m, Q))
    return Lift3(coeffs, insts, zeros, 9 * assign.T)
