"""Benchmark instances, diagonal encodings and decoding metrics.

Every encoding is tabulated over all ``2**n`` bitstrings (bit ``q`` of the
index is variable ``q``): the cost to minimise, a feasibility mask and the
objective ``f(x) >= 0`` that the decoded ratios divide by the optimum.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from math import ceil, comb

import numpy as np

from .numcore import SeededRng
from .simvec import DiagonalCost

FAMILIES = ("maxcut", "wmaxcut", "mis", "wmis", "knapsack")
MAX_BRUTE_FORCE_QUBITS = 20
WEIGHT_LAW = "uniform_int_1_10"
PROB_SUM_TOL = 1e-8
FEASIBLE_MASS_TOL = 1e-12


class InfeasibleInstanceError(ValueError):
    pass


@dataclass
class GraphInstance:
    n_vertices: int
    edges: list  # (u, v, weight) with u < v
    seed: int
    family: str = "maxcut"
    vertex_weights: list = None
    edge_prob: float = 0.5

    def __post_init__(self):
        for u, v, w in self.edges:
            if u == v:
                raise ValueError("self-loops are not allowed")
            if not u < v:
                raise ValueError(f"edge ({u}, {v}) must satisfy u < v")
            if w <= 0:
                raise ValueError("edge weights must be positive")
        if self.vertex_weights is None:
            self.vertex_weights = [1] * self.n_vertices

    @property
    def n_qubits(self):
        return self.n_vertices

    def to_dict(self):
        return {
            "family": self.family,
            "n": self.n_vertices,
            "seed": self.seed,
            "edge_prob": self.edge_prob,
            "edges": [[u, v, w] for u, v, w in self.edges],
            "weights": list(self.vertex_weights),
            "weight_law": WEIGHT_LAW,
        }


@dataclass
class KnapsackInstance:
    values: list
    weights: list
    capacity: int
    seed: int = 0
    family: str = "knapsack"

    def __post_init__(self):
        if len(self.values) != len(self.weights):
            raise ValueError("one value per weight required")
        if self.capacity < 0:
            raise ValueError("capacity must be non-negative")
        if any(w <= 0 for w in self.weights) or any(v <= 0 for v in self.values):
            raise ValueError("item values and weights must be positive integers")

    @property
    def n_items(self):
        return len(self.values)

    @property
    def n_slack_bits(self):
        return max(1, int(self.capacity).bit_length())  # ceil(log2(C + 1))

    @property
    def n_qubits(self):
        return self.n_items + self.n_slack_bits

    def to_dict(self):
        return {
            "family": self.family,
            "n": self.n_qubits,
            "seed": self.seed,
            "items": self.n_items,
            "values": list(self.values),
            "weights": list(self.weights),
            "capacity": self.capacity,
            "weight_law": WEIGHT_LAW,
        }


def instance_from_dict(data: dict):
    if data["family"] == "knapsack":
        return KnapsackInstance(data["values"], data["weights"], data["capacity"], data["seed"])
    return GraphInstance(
        data["n"], [tuple(e) for e in data["edges"]], data["seed"], data["family"],
        data.get("weights"), data.get("edge_prob", 0.5))


def instance_to_json(inst) -> str:
    return json.dumps(inst.to_dict(), sort_keys=True)


# --------------------------------------------------------------------------
# generators
# --------------------------------------------------------------------------

def _int_weights(rng, size):
    return [int(w) for w in rng.integers(1, 11, size=size)]


def gen_er_graph(n, edge_prob=0.5, seed=0, weighted=False, family=None) -> GraphInstance:
    """G(n, p) graph; an edgeless draw is replaced by the next sub-stream."""
    if n < 2:
        raise ValueError("graphs need at least two vertices")
    family = family or ("wmaxcut" if weighted else "maxcut")
    base = SeededRng(seed, 0)
    offset = 0
    while True:
        rng = base.derive("er", n, offset)
        pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
        keep = rng.random(len(pairs)) < edge_prob
        chosen = [pr for pr, k in zip(pairs, keep) if k]
        if chosen:
            break
        offset += 1
    ew = _int_weights(rng, len(chosen)) if weighted else [1] * len(chosen)
    vw = [1] * n
    if family == "wmis":
        vw = _int_weights(rng, n)
    edges = [(u, v, w) for (u, v), w in zip(chosen, ew)]
    return GraphInstance(n, edges, seed, family, vw, edge_prob)


def gen_knapsack(n_qubits, seed=0) -> KnapsackInstance:
    """Knapsack whose items plus binary slack use exactly ``n_qubits`` qubits.

    Items take about two thirds of the register.  The capacity is drawn so
    its binary expansion fills the remaining slack bits, and item weights are
    scaled so roughly half the total weight fits.
    """
    if n_qubits < 2:
        raise ValueError("knapsack needs at least two qubits")
    n_items = min(n_qubits - 1, max(1, round(2 * n_qubits / 3)))
    n_slack = n_qubits - n_items
    offset = 0
    while True:
        rng = SeededRng(seed, 0).derive("knapsack", n_qubits, offset)
        capacity = int(rng.integers(1 << (n_slack - 1), 1 << n_slack))
        top = max(2, ceil(4 * capacity / n_items))
        weights = [int(w) for w in rng.integers(1, top + 1, size=n_items)]
        values = _int_weights(rng, n_items)
        if min(weights) <= capacity:
            return KnapsackInstance(values, weights, capacity, seed)
        offset += 1


def gen_instance(family, n, seed, edge_prob=0.5):
    if family == "knapsack":
        return gen_knapsack(n, seed)
    if family not in FAMILIES:
        raise ValueError(f"unknown problem family {family!r}")
    return gen_er_graph(n, edge_prob, seed, weighted=family == "wmaxcut", family=family)


# --------------------------------------------------------------------------
# encodings
# --------------------------------------------------------------------------

def bit_table(n) -> np.ndarray:
    x = np.arange(1 << n)
    return ((x[:, None] >> np.arange(n)[None, :]) & 1).astype(np.int64)


@dataclass
class EncodedProblem:
    family: str
    n_qubits: int
    cost: DiagonalCost
    feasible: np.ndarray
    objective: np.ndarray
    opt_value: float = None
    opt_bitstring: int = None
    instance: object = field(default=None, repr=False)
    penalty: float = 0.0

    def is_feasible(self, x: int) -> bool:
        return bool(self.feasible[x])

    def f(self, x: int) -> float:
        return float(self.objective[x])


def cut_values(n, edges) -> np.ndarray:
    bits = bit_table(n)
    f = np.zeros(1 << n)
    for u, v, w in edges:
        f += w * (bits[:, u] != bits[:, v])
    return f


def _encode_maxcut(inst: GraphInstance):
    f = cut_values(inst.n_vertices, inst.edges)
    feasible = np.ones(f.shape, dtype=bool)
    return -f, feasible, f, 0.0


def _encode_mis(inst: GraphInstance):
    n = inst.n_vertices
    bits = bit_table(n)
    w = np.asarray(inst.vertex_weights, dtype=float)
    value = bits @ w
    clashes = np.zeros(1 << n)
    for u, v, _ in inst.edges:
        clashes += bits[:, u] * bits[:, v]
    lam = 1.0 + float(w.max())
    feasible = clashes == 0
    cost = -value + lam * clashes
    return cost, feasible, np.where(feasible, value, 0.0), lam


def _encode_knapsack(inst: KnapsackInstance):
    k = inst.n_items
    s = inst.n_slack_bits
    bits = bit_table(k + s)
    weight = bits[:, :k] @ np.asarray(inst.weights, dtype=float)
    value = bits[:, :k] @ np.asarray(inst.values, dtype=float)
    slack = bits[:, k:] @ (2.0 ** np.arange(s))
    lam = 1.0 + float(sum(inst.values))
    cost = -value + lam * (weight + slack - inst.capacity) ** 2
    feasible = weight <= inst.capacity
    return cost, feasible, np.where(feasible, value, 0.0), lam


def encode(inst) -> EncodedProblem:
    if isinstance(inst, KnapsackInstance):
        if min(inst.weights) > inst.capacity:
            raise InfeasibleInstanceError("every item exceeds the capacity; optimum is undefined")
        cost, feasible, f, lam = _encode_knapsack(inst)
    elif inst.family in ("maxcut", "wmaxcut"):
        cost, feasible, f, lam = _encode_maxcut(inst)
    elif inst.family in ("mis", "wmis"):
        cost, feasible, f, lam = _encode_mis(inst)
    else:
        raise ValueError(f"unknown problem family {inst.family!r}")
    n = inst.n_qubits
    enc = EncodedProblem(inst.family, n, DiagonalCost(n, cost, {"family": inst.family}),
                         feasible, f, instance=inst, penalty=lam)
    enc.opt_value, enc.opt_bitstring = brute_force(enc)
    if enc.opt_value <= 0:
        raise InfeasibleInstanceError("optimum objective is not positive")
    return enc


def brute_force(encoded: EncodedProblem):
    """Best feasible objective; ties go to the lowest bitstring index."""
    if encoded.n_qubits > MAX_BRUTE_FORCE_QUBITS:
        raise ValueError(f"brute force limited to {MAX_BRUTE_FORCE_QUBITS} qubits")
    if not encoded.feasible.any():
        raise InfeasibleInstanceError("no feasible bitstring")
    scores = np.where(encoded.feasible, encoded.objective, -np.inf)
    best = int(np.argmax(scores))
    return float(scores[best]), best


# --------------------------------------------------------------------------
# decoding
# --------------------------------------------------------------------------

@dataclass
class DecodeMetrics:
    decoded_ratio: float
    postselected_expected_ratio: float
    energy: float
    decoded_bitstring: int

    def to_dict(self):
        return asdict(self)


def decode_metrics(probs, encoded: EncodedProblem) -> DecodeMetrics:
    probs = np.asarray(probs, dtype=float)
    if probs.shape != encoded.feasible.shape:
        raise ValueError("distribution length does not match the encoding")
    total = probs.sum()
    if abs(total - 1.0) > PROB_SUM_TOL:
        raise ValueError(f"probabilities sum to {total!r}, not 1")
    top = int(np.argmax(probs))  # first maximal index on ties
    opt = encoded.opt_value
    decoded = encoded.objective[top] / opt if encoded.feasible[top] else 0.0
    mass = probs[encoded.feasible].sum()
    if mass < FEASIBLE_MASS_TOL:
        post = 0.0
    else:
        post = float(probs[encoded.feasible] @ encoded.objective[encoded.feasible]) / mass / opt
    energy = float(probs @ encoded.cost.values)
    return DecodeMetrics(float(decoded), float(min(max(post, 0.0), 1.0)), energy, top)


def expected_edge_count(n, p=0.5):
    return p * comb(n, 2)
