"""Random topologies and reference transfer blocks for the wired tests."""

from __future__ import annotations

import numpy as np

import oracles
from ffnetlab.ff_core import make_field
from ffnetlab.wired_rlnc import Edge, Topology, transfer_matrices


def random_topology(rng: np.random.Generator, flows: int, max_nodes: int = 12) -> Topology:
    """A random layered DAG with ``flows`` source/destination pairs.

    With two flows, layer ``k`` holds exactly the two key relays and no edge
    jumps over it, so every source-destination path meets a key relay.
    """
    n_layers = int(rng.integers(3, 6))
    budget = max_nodes - 2 * flows - (2 if flows == 2 else 0)
    nodes = {f"S{i + 1}": ("source", 0) for i in range(flows)}
    nodes.update({f"D{i + 1}": ("destination", n_layers) for i in range(flows)})
    key_layer = int(rng.integers(1, n_layers)) if flows == 2 else None
    if flows == 2:
        nodes["R1"] = ("key_relay", key_layer)
        nodes["R2"] = ("key_relay", key_layer)
    free = [l for l in range(1, n_layers) if l != key_layer]
    for i in range(int(rng.integers(0, budget + 1)) if free else 0):
        nodes[f"N{i}"] = ("relay", int(rng.choice(free)))
    ids = sorted(nodes, key=lambda n: (nodes[n][1], n))
    edges, xi = [], 1
    for u in ids:
        for v in ids:
            lu, lv = nodes[u][1], nodes[v][1]
            if lv <= lu:
                continue
            if key_layer is not None and lu < key_layer < lv:
                continue
            if rng.random() < 0.45:
                edges.append(Edge(u, v, xi))
                xi += 1
    return Topology(nodes, tuple(edges), tuple((f"S{i + 1}", f"D{i + 1}") for i in range(flows)))


def edge_block(assign, xi: int, t: int, field: oracles.Field | None):
    """The coding block of slot xi at time t, built without the package's Gamma."""
    v = assign.values[xi][t]
    if assign.mode == "scalar":
        return [[int(v) % assign.p]]
    m = assign.m
    a = field.pow((0, 1) if m > 1 else (int(field.f[0] * -1) % field.p,), int(v))
    cols = []
    for i in range(m):
        basis = tuple([0] * i + [1])
        c = list(field.mul(a, basis)) + [0] * m
        cols.append(c[:m])
    return [[cols[j][i] for j in range(m)] for i in range(m)]


def reference_blocks(topo: Topology, assign, sources, sinks, t: int, skip=(), prim_poly=None):
    """[[sum over paths]] for each (sink, source), by explicit path enumeration."""
    field = oracles.Field(assign.p, assign.m, modulus=prim_poly) if assign.mode == "vector" else None
    d = assign.m if assign.mode == "vector" else 1
    edges = [(e.src, e.dst, e.xi) for e in topo.edges]
    cache = {}

    def block(xi):
        if xi not in cache:
            cache[xi] = edge_block(assign, xi, t, field)
        return cache[xi]

    return [[oracles.path_sum(edges, s, snk, block, d, assign.p, skip=skip) for s in sources] for snk in sinks]


def blocks_of(M, T, d):
    A = M.to_ints()
    return [A[t * d:(t + 1) * d, t * d:(t + 1) * d].tolist() for t in range(T)]


def assert_matches_paths(topo, assign):
    ch = transfer_matrices(topo, assign)
    d = assign.block_dim
    pp = make_field(assign.p, assign.m).prim_poly
    if len(topo.flows) == 2:
        keys = sorted(topo.key_relays)
        hops = [(ch.hop1, topo.sources, keys, keys), (ch.hop2, keys, topo.destinations, ())]
        for mats, srcs, snks, skip in hops:
            for t in range(assign.T):
                ref = reference_blocks(topo, assign, srcs, snks, t, skip=skip, prim_poly=pp)
                for l in range(2):
                    for k in range(2):
                        assert blocks_of(mats[2 * l + k], assign.T, d)[t] == ref[l][k]
    else:
        for t in range(assign.T):
            ref = reference_blocks(topo, assign, topo.sources, topo.destinations, t, prim_poly=pp)
            for l in range(3):
                for k in range(3):
                    assert blocks_of(ch.Q[l][k], assign.T, d)[t] == ref[l][k]
    return ch


def cli_runs(fixture_dir: str) -> dict:
    """One small invocation of every CLI command, keyed by a short name."""
    fx = lambda n: f"{fixture_dir}/{n}"  # noqa: E731
    return {
        "feasibility_mc": ["feasibility", "--model", "fe", "--p", "2", "--m-range", "2:4", "--trials", "2000",
                           "--shards", "3"],
        "feasibility_mimo": ["feasibility", "--model", "mimo", "--p", "3", "--m-range", "2,3", "--trials", "500",
                             "--shards", "2", "--format", "json"],
        "feasibility_landau": ["feasibility", "--table", "landau"],
        "feasibility_limits": ["feasibility", "--table", "limits"],
        "feasibility_curve": ["feasibility", "--table", "curve", "--p", "3", "--m-range", "1:6"],
        "simulate_222": ["simulate-222", "--instance", fx("and_f8.json"), "--trace", "--format", "json"],
        "simulate_222_se": ["simulate-222", "--instance", fx("se_p2m2.json")],
        "simulate_3user": ["simulate-3user", "--instance", fx("ia3_se_symmetric.json"), "--format", "json"],
        "wired": ["wired", "--topology", "fig5_2flow", "--p", "2", "--m", "4", "--trials", "10"],
        "gaussian": ["gaussian", "--snr-db", "0:10:20", "--trials", "3", "--bound", "2"],
    }
