"""(3,1)-QRAC relaxation of MaxCut and the MUB-family search strategies.

Each vertex is stored on one axis (X, Y or Z) of one qubit.  The relaxed
Hamiltonian ``sum_e w (I - 3 P_u P_v) / 2`` is maximised by a QAOA-style
ansatz; MUB strategies start from ``C_r |b0>`` and differ only in how the
family index ``r`` is chosen.  A "family evaluation" is one full angle
optimisation at a fixed ``r``.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .mub import family_phases, hadamard_matrix
from .numcore import ContractViolation, SeededRng
from .optim import OptimizerSpec, minimize
from .problems import GraphInstance, cut_values
from .qaoa import TIE_TOL, classify
from .simvec import MAX_PAULI_EXP_QUBITS, PauliSum, apply_pauli_word, prepare_plus
from . import kernels

AXES = ("X", "Y", "Z")
ROUND_TOL = 1e-12
IMPROVE_TOL = 1e-9
SOLVED_TOL = 1e-9
HEADLINE = ("x_variational", "mub_r1_b0", "bitflip_2pole")
# two_pole is cheap and lets the gain be split into prescreen, poles and local search
BENCH_STRATEGIES = ("x_variational", "mub_r1_b0", "two_pole", "bitflip_2pole")
MUB_STRATEGIES = ("mub_r1_b0", "two_pole", "bitflip", "bitflip_2pole", "exhaustive_oracle")
STRATEGIES = ("x_variational", "z_variational") + MUB_STRATEGIES
CSV_COLUMNS = ("graph_seed", "n", "p", "strategy", "alpha_r", "alpha_c",
               "family_evals", "chosen_r", "chosen_b0", "runtime_s")


class UnknownStrategyError(ValueError):
    pass


@dataclass
class QraoConfig:
    max_evals: int = 400
    fd_step: float = 1e-3
    restarts: int = 2
    angle_init_high: float = 0.6
    beta_init_sign: float = -1.0
    gamma_low: float = -np.pi
    gamma_high: float = np.pi
    beta_low: float = -np.pi / 2
    beta_high: float = np.pi / 2

    @classmethod
    def from_dict(cls, data):
        return cls(**(data or {}))

    def to_dict(self):
        return asdict(self)

    def spec(self, p) -> OptimizerSpec:
        beta = tuple(sorted((0.0, self.beta_init_sign * self.angle_init_high)))
        bounds = [(self.gamma_low, self.gamma_high)] * p + [(self.beta_low, self.beta_high)] * p
        init = [(0.0, self.angle_init_high)] * p + [beta] * p
        return OptimizerSpec(bounds, self.max_evals, self.fd_step, self.restarts, init)


# --------------------------------------------------------------------------
# encoding and relaxation
# --------------------------------------------------------------------------

@dataclass
class QracEncoding:
    n_vertices: int
    assignment: list  # vertex -> (qubit, axis)
    n_qubits: int

    def validate(self, graph: GraphInstance = None):
        if len(self.assignment) != self.n_vertices:
            raise ContractViolation("every vertex needs an assignment")
        slots = {}
        for v, (q, axis) in enumerate(self.assignment):
            if axis not in AXES or not 0 <= q < self.n_qubits:
                raise ContractViolation(f"vertex {v} has bad slot {(q, axis)!r}")
            if (q, axis) in slots:
                raise ContractViolation(f"vertices {slots[(q, axis)]} and {v} share {(q, axis)!r}")
            slots[(q, axis)] = v
        if graph is not None:
            for u, v, _ in graph.edges:
                if self.assignment[u][0] == self.assignment[v][0]:
                    raise ContractViolation(f"adjacent vertices {u}, {v} share qubit {self.assignment[u][0]}")
        return self

    def pauli_word(self, v) -> str:
        q, axis = self.assignment[v]
        word = ["I"] * self.n_qubits
        word[q] = axis
        return "".join(word)


def encode_31(graph: GraphInstance) -> QracEncoding:
    """Greedy packing: highest degree first, first qubit that fits."""
    n = graph.n_vertices
    adj = [set() for _ in range(n)]
    for u, v, _ in graph.edges:
        adj[u].add(v)
        adj[v].add(u)
    order = sorted(range(n), key=lambda v: (-len(adj[v]), v))
    qubits = []
    assignment = [None] * n
    for v in order:
        for q, members in enumerate(qubits):
            if len(members) < 3 and not adj[v] & set(members):
                break
        else:
            q = len(qubits)
            qubits.append([])
        assignment[v] = (q, AXES[len(qubits[q])])
        qubits[q].append(v)
    return QracEncoding(n, assignment, len(qubits)).validate(graph)


@dataclass
class RelaxedProblem:
    hamiltonian: PauliSum
    graph: GraphInstance
    encoding: QracEncoding
    opt: float
    n_qubits: int

    @property
    def matrix(self) -> np.ndarray:
        if "_matrix" not in self.__dict__:
            self.__dict__["_matrix"] = self.hamiltonian.to_matrix()
        return self.__dict__["_matrix"]

    @property
    def eigh(self):
        return self.hamiltonian.eigh


def maxcut_opt(graph: GraphInstance) -> float:
    return float(cut_values(graph.n_vertices, graph.edges).max())


def relaxed_hamiltonian(graph: GraphInstance, enc: QracEncoding) -> RelaxedProblem:
    """``sum_e w (I - 3 P_u P_v) / 2``, to be maximised."""
    if not graph.edges:
        raise ValueError("the relaxation needs at least one edge")
    enc.validate(graph)
    nq = enc.n_qubits
    if nq > MAX_PAULI_EXP_QUBITS:
        raise ValueError(f"relaxed problems limited to {MAX_PAULI_EXP_QUBITS} qubits, got {nq}")
    terms = [(0.5 * sum(w for _, _, w in graph.edges), "I" * nq)]
    for u, v, w in graph.edges:
        word = ["I"] * nq
        (qu, au), (qv, av) = enc.assignment[u], enc.assignment[v]
        word[qu], word[qv] = au, av
        terms.append((-1.5 * w, "".join(word)))
    return RelaxedProblem(PauliSum(nq, terms), graph, enc, maxcut_opt(graph), nq)


# --------------------------------------------------------------------------
# prescreen, ansatz, rounding
# --------------------------------------------------------------------------

def _family_columns(n, r):
    return family_phases(n, r)[:, None] * hadamard_matrix(n)


def rotated_diagonal(relaxed: RelaxedProblem, r) -> np.ndarray:
    """``<b| C_r^dag H C_r |b>`` for every computational label ``b``."""
    c = _family_columns(relaxed.n_qubits, r)
    return np.real(np.einsum("ib,ib->b", c.conj(), relaxed.matrix @ c))


def prescreen_b0(relaxed: RelaxedProblem, r):
    diag = rotated_diagonal(relaxed, r)
    b0 = int(np.argmax(diag))
    return b0, float(diag[b0])


def family_start(n, r, b0) -> np.ndarray:
    return _family_columns(n, r)[:, b0].copy()


def _z_mixer_phases(n, beta):
    z = np.arange(1 << n)
    ones = np.array([bin(x).count("1") for x in z])
    return np.exp(-1j * beta * (n - 2 * ones))  # exp(-i beta sum Z)


def ansatz_state(relaxed: RelaxedProblem, start, params, p, mixer="x") -> np.ndarray:
    """Alternate ``exp(-i gamma (-H))`` and the mixer, ``p`` times."""
    evals, evecs = relaxed.eigh
    params = np.asarray(params, dtype=float)
    psi = np.array(start, dtype=complex)
    n = relaxed.n_qubits
    for layer in range(p):
        gamma, beta = params[layer], params[p + layer]
        psi = evecs @ (np.exp(1j * gamma * evals) * (evecs.conj().T @ psi))
        if mixer == "x":
            psi = kernels.rx_layer(np.ascontiguousarray(psi), np.full(n, 2.0 * beta))
        else:
            psi = psi * _z_mixer_phases(n, beta)
    return psi


def relaxed_energy(relaxed: RelaxedProblem, psi) -> float:
    return float(np.real(np.vdot(psi, relaxed.matrix @ psi)))


def pauli_round(state, enc: QracEncoding, graph: GraphInstance):
    """Sign rounding of each vertex's Pauli expectation; returns (bits, alpha_c)."""
    psi = np.asarray(state, dtype=complex)
    if psi.shape != (1 << enc.n_qubits,):
        raise ValueError("state does not match the encoding")
    bits = 0
    for v in range(enc.n_vertices):
        val = np.real(np.vdot(psi, apply_pauli_word(psi, enc.pauli_word(v))))
        if val < -ROUND_TOL:
            bits |= 1 << v
    cut = sum(w for u, v, w in graph.edges if (bits >> u & 1) != (bits >> v & 1))
    return bits, float(cut / maxcut_opt(graph))


# --------------------------------------------------------------------------
# strategies
# --------------------------------------------------------------------------

@dataclass
class FamilyResult:
    r: int
    b0: int
    alpha_r: float
    alpha_c: float
    params: np.ndarray
    n_evals: int


@dataclass
class SearchTrace:
    visited: dict = field(default_factory=dict)  # r -> alpha_r
    poles: list = field(default_factory=list)
    moves: list = field(default_factory=list)  # (from, to)


@dataclass
class StrategyRecord:
    graph_seed: int
    n: int
    p: int
    strategy: str
    alpha_r: float
    alpha_c: float
    family_evals: int
    chosen_r: int
    chosen_b0: int
    runtime_s: float
    n_qubits: int = 0
    trace: SearchTrace = None

    def row(self) -> dict:
        return {k: getattr(self, k) for k in CSV_COLUMNS}


class FamilyEvaluator:
    """Memoised family evaluations; the rng for ``r`` depends only on (seed, r)."""

    def __init__(self, relaxed: RelaxedProblem, p, seed, config: QraoConfig = None):
        self.relaxed = relaxed
        self.p = p
        self.seed = seed
        self.config = config or QraoConfig()
        self.memo = {}

    @property
    def n_evals(self):
        return len(self.memo)

    def __call__(self, r) -> FamilyResult:
        if r not in self.memo:
            self.memo[r] = self._run(r)
        return self.memo[r]

    def _run(self, r):
        rel, p = self.relaxed, self.p
        if not 1 <= r < (1 << rel.n_qubits):
            raise ValueError(f"family {r} outside [1, {(1 << rel.n_qubits) - 1}]")
        b0, _ = prescreen_b0(rel, r)
        start = family_start(rel.n_qubits, r, b0)
        rng = SeededRng(self.seed).derive("qrao-family", p, r)
        res = _optimize(rel, start, p, rng, self.config)
        psi = ansatz_state(rel, start, res.x, p)
        _, ac = pauli_round(psi, rel.encoding, rel.graph)
        return FamilyResult(r, b0, -res.fun / rel.opt, ac, res.x, res.n_evals)


def _optimize(rel, start, p, rng, cfg, mixer="x"):
    def objective(x):
        return -relaxed_energy(rel, ansatz_state(rel, start, x, p, mixer))
    return minimize(objective, cfg.spec(p), rng)


def _best(results):
    return min(results, key=lambda fr: (-fr.alpha_r, fr.r))


def hill_climb(evaluate: FamilyEvaluator, pole, trace: SearchTrace) -> FamilyResult:
    """Steepest-ascent bit-flip search from ``pole``; stops at a local max."""
    n = evaluate.relaxed.n_qubits
    top = (1 << n) - 1
    cur = evaluate(pole)
    trace.poles.append(pole)
    trace.visited[pole] = cur.alpha_r
    while True:
        nbrs = [cur.r ^ (1 << k) for k in range(n) if 1 <= cur.r ^ (1 << k) <= top]
        scored = [evaluate(r) for r in nbrs]
        for fr in scored:
            trace.visited[fr.r] = fr.alpha_r
        if not scored:
            return cur
        best = _best(scored)
        if best.alpha_r <= cur.alpha_r + IMPROVE_TOL:
            return cur
        trace.moves.append((cur.r, best.r))
        cur = best


def _variational(relaxed, p, seed, cfg, mixer):
    n = relaxed.n_qubits
    if mixer == "x":
        start, b0 = prepare_plus(n), None
    else:
        diag = np.real(np.diag(relaxed.matrix))
        b0 = int(np.argmax(diag))
        start = np.zeros(1 << n, dtype=complex)
        start[b0] = 1.0
    rng = SeededRng(seed).derive("qrao-" + mixer, p)
    res = _optimize(relaxed, start, p, rng, cfg, mixer)
    psi = ansatz_state(relaxed, start, res.x, p, mixer)
    _, ac = pauli_round(psi, relaxed.encoding, relaxed.graph)
    return -res.fun / relaxed.opt, ac, b0


def run_strategy(relaxed: RelaxedProblem, strategy, p, seed, config: QraoConfig = None,
                 evaluator: FamilyEvaluator = None) -> StrategyRecord:
    if strategy not in STRATEGIES:
        raise UnknownStrategyError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if p not in (1, 2, 3):
        raise ValueError("depth p must be 1, 2 or 3")
    cfg = config or QraoConfig()
    t0 = time.perf_counter()
    g = relaxed.graph
    meta = (g.seed, g.n_vertices, p, strategy)
    if strategy in ("x_variational", "z_variational"):
        ar, ac, b0 = _variational(relaxed, p, seed, cfg, strategy[0])
        return StrategyRecord(*meta, ar, ac, 0, None, b0, time.perf_counter() - t0,
                              relaxed.n_qubits)

    # a fresh memo per strategy keeps the family_evals counts independent
    ev = evaluator or FamilyEvaluator(relaxed, p, seed, cfg)
    before = set(ev.memo)
    top = (1 << relaxed.n_qubits) - 1
    trace = SearchTrace()
    if strategy == "mub_r1_b0":
        best = ev(1)
    elif strategy == "two_pole":
        best = _best([ev(1), ev(top)])
        trace.poles = sorted({1, top})
    elif strategy == "bitflip":
        best = hill_climb(ev, 1, trace)
    elif strategy == "bitflip_2pole":
        runs = [hill_climb(ev, 1, trace)]
        if top != 1:
            runs.append(hill_climb(ev, top, trace))
        best = _best(runs)
    else:
        best = _best([ev(r) for r in range(1, top + 1)])
    used = set(ev.memo) - before if evaluator is not None else set(ev.memo)
    for r in used:
        trace.visited[r] = ev.memo[r].alpha_r
    return StrategyRecord(*meta, best.alpha_r, best.alpha_c, len(used), best.r, best.b0,
                          time.perf_counter() - t0, relaxed.n_qubits, trace)


def build_relaxed(graph: GraphInstance) -> RelaxedProblem:
    return relaxed_hamiltonian(graph, encode_31(graph))


# --------------------------------------------------------------------------
# paired summaries
# --------------------------------------------------------------------------

@dataclass
class PairedRow:
    graph_seed: int
    n: int
    p: int
    strategy: str
    delta_alpha_r: float
    outcome: str


def strategy_suite(graph: GraphInstance, p, seed, exhaustive=False, config: QraoConfig = None):
    """Headline strategies (plus the oracle) and paired rows against x_variational."""
    relaxed = build_relaxed(graph)
    names = HEADLINE + (("exhaustive_oracle",) if exhaustive else ())
    records = [run_strategy(relaxed, s, p, seed, config) for s in names]
    return records, paired_rows(records)


def paired_rows(records, baseline="x_variational"):
    base = {(r.graph_seed, r.n, r.p): r.alpha_r for r in _recs(records) if r.strategy == baseline}
    rows = []
    for r in _recs(records):
        key = (r.graph_seed, r.n, r.p)
        if r.strategy == baseline or key not in base:
            continue
        d = r.alpha_r - base[key]
        rows.append(PairedRow(*key, r.strategy, d, classify(d, TIE_TOL)))
    return rows


def _recs(records):
    out = []
    for r in records:
        if isinstance(r, dict):
            r = StrategyRecord(**{k: r[k] for k in CSV_COLUMNS})
        out.append(r)
    return out


def summarize(records, baseline="x_variational") -> dict:
    """Headline aggregates per strategy, computed from records alone."""
    recs = _recs(records)
    rows = paired_rows(recs, baseline)
    out = {}
    for name in sorted({r.strategy for r in recs}):
        mine = [r for r in recs if r.strategy == name]
        entry = {
            "cells": len(mine),
            "mean_alpha_r": float(np.mean([r.alpha_r for r in mine])),
            "mean_alpha_c": float(np.mean([r.alpha_c for r in mine])),
            "solved_rate": float(np.mean([r.alpha_c >= 1 - SOLVED_TOL for r in mine])),
        }
        evals = [r.family_evals for r in mine if name in MUB_STRATEGIES]
        if evals:
            entry["mean_family_evals"] = float(np.mean(evals))
        paired = [pr for pr in rows if pr.strategy == name]
        if paired:
            labels = [pr.outcome for pr in paired]
            entry.update({
                "mean_delta_alpha_r_vs_x": float(np.mean([pr.delta_alpha_r for pr in paired])),
                "wins": labels.count("win"),
                "ties": labels.count("tie"),
                "losses": labels.count("loss"),
            })
        out[name] = entry
    return out


def gain_decomposition(records) -> dict:
    """Mean alpha_r gain over X split along x -> r=1 -> two poles -> bit-flip search."""
    chain = ("x_variational", "mub_r1_b0", "two_pole", "bitflip_2pole")
    cells = {}
    for r in _recs(records):
        cells.setdefault((r.graph_seed, r.n, r.p), {})[r.strategy] = r.alpha_r
    full = [c for c in cells.values() if all(k in c for k in chain)]
    if not full:
        return None
    steps = {name: float(np.mean([c[b] - c[a] for c in full]))
             for name, a, b in zip(("prescreen", "poles", "local_search"), chain, chain[1:])}
    steps["total"] = float(np.mean([c[chain[-1]] - c[chain[0]] for c in full]))
    steps["cells"] = len(full)
    return steps
