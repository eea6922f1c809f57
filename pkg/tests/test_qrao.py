from types import SimpleNamespace

import numpy as np
import pytest

from mublab.numcore import ContractViolation
from mublab.problems import GraphInstance, gen_er_graph
from mublab.qrao import (
    QraoConfig, QracEncoding, RelaxedProblem, SearchTrace, StrategyRecord, UnknownStrategyError,
    ansatz_state, build_relaxed, encode_31, family_start, hill_climb, paired_rows, pauli_round,
    prescreen_b0, relaxed_energy, relaxed_hamiltonian, rotated_diagonal, run_strategy,
    gain_decomposition, strategy_suite, summarize,
)
from mublab.simvec import PauliSum, prepare_plus

TRIANGLE = GraphInstance(3, [(0, 1, 1), (0, 2, 1), (1, 2, 1)], 0)
PATH3 = GraphInstance(3, [(0, 1, 1), (1, 2, 1)], 0)
FAST = QraoConfig(max_evals=80, restarts=1)


def _path(n):
    return GraphInstance(n, [(i, i + 1, 1) for i in range(n - 1)], 0)


class TestEncoding:
    def test_triangle_needs_three_qubits(self):
        assert encode_31(TRIANGLE).n_qubits == 3

    def test_isolated_vertices_share_a_qubit(self):
        enc = encode_31(GraphInstance(3, [], 0))
        assert enc.n_qubits == 1
        assert [a for _, a in enc.assignment] == ["X", "Y", "Z"]

    def test_path(self):
        assert encode_31(_path(6)).n_qubits <= 3

    @pytest.mark.parametrize("seed", range(6))
    def test_invariants_random(self, seed):
        g = gen_er_graph(9, 0.4, seed)
        enc = encode_31(g)
        enc.validate(g)
        load = np.bincount([q for q, _ in enc.assignment])
        assert load.max() <= 3 and len(load) == enc.n_qubits
        assert enc.n_qubits >= int(np.ceil(9 / 3))

    def test_validation_errors(self):
        with pytest.raises(ContractViolation):
            QracEncoding(2, [(0, "X"), (0, "X")], 1).validate()
        with pytest.raises(ContractViolation):
            QracEncoding(2, [(0, "X"), (0, "Y")], 1).validate(GraphInstance(2, [(0, 1, 1)], 0))
        with pytest.raises(ContractViolation):
            QracEncoding(1, [(0, "W")], 1).validate()

    def test_pauli_word(self):
        assert QracEncoding(2, [(1, "Y"), (0, "Z")], 2).pauli_word(0) == "IY"


class TestRelaxation:
    def test_single_edge_zz(self):
        g = GraphInstance(2, [(0, 1, 1)], 0)
        rel = relaxed_hamiltonian(g, QracEncoding(2, [(0, "Z"), (1, "Z")], 2))
        assert np.linalg.eigvalsh(rel.matrix).max() == pytest.approx(2.0)

    def test_triangle_trace(self):
        rel = build_relaxed(TRIANGLE)
        assert np.trace(rel.matrix).real / 8 == pytest.approx(1.5)
        assert rel.opt == 2

    def test_needs_edges(self):
        with pytest.raises(ValueError):
            build_relaxed(GraphInstance(3, [], 0))

    def test_expectation_of_basis_states(self):
        # any cut state with exact +-1 Pauli values reproduces the cut weight
        rel = build_relaxed(TRIANGLE)
        enc = rel.encoding
        for bits in range(8):
            psi = np.ones(1, dtype=complex)
            for q in reversed(range(3)):
                v = next(v for v, (qq, _) in enumerate(enc.assignment) if qq == q)
                assert enc.assignment[v][1] == "X"
                s = -1 if bits >> v & 1 else 1
                psi = np.kron(psi, np.array([1, s]) / np.sqrt(2))
            cut = sum(1 for u, v, _ in TRIANGLE.edges if (bits >> u & 1) != (bits >> v & 1))
            assert relaxed_energy(rel, psi) == pytest.approx(cut * 2 - 1.0 * (3 - cut))


class TestPrescreen:
    def _single(self, terms, n=1):
        return RelaxedProblem(PauliSum(n, terms), TRIANGLE, None, 1.0, n)

    def test_pure_z_ties_to_first(self):
        rel = self._single([(3.0, "Z")])
        assert np.allclose(rotated_diagonal(rel, 1), 0.0)
        assert prescreen_b0(rel, 1) == (0, pytest.approx(0.0))

    def test_diagonal_gives_normalized_trace(self):
        rel = self._single([(0.7, "ZI"), (1.3, "ZZ"), (2.0, "II")], n=2)
        for r in (1, 2, 3):
            assert np.allclose(rotated_diagonal(rel, r), 2.0)

    def test_prescreen_is_argmax(self):
        rel = build_relaxed(TRIANGLE)
        for r in range(1, 8):
            start = family_start(3, r, prescreen_b0(rel, r)[0])
            diag = rotated_diagonal(rel, r)
            assert relaxed_energy(rel, start) == pytest.approx(diag.max())


class TestAnsatz:
    def test_zero_angles_identity(self):
        rel = build_relaxed(TRIANGLE)
        psi = family_start(3, 5, 2)
        assert np.allclose(ansatz_state(rel, psi, [0.0, 0.0], 1), psi)

    def test_norm_preserved(self):
        rel = build_relaxed(_path(5))
        psi = ansatz_state(rel, prepare_plus(rel.n_qubits), [0.3, -1.1, 0.4, 0.9], 2, "z")
        assert np.linalg.norm(psi) == pytest.approx(1.0)


class TestRounding:
    def test_cases(self):
        enc = encode_31(TRIANGLE)
        zero = np.zeros(8, dtype=complex)
        zero[0] = 1
        assert pauli_round(zero, enc, TRIANGLE) == (0, 0.0)  # <X> = 0 rounds to bit 0
        minus = np.array([1, -1]) / np.sqrt(2)
        plus = np.array([1, 1]) / np.sqrt(2)
        q_of = {q: v for v, (q, _) in enumerate(enc.assignment)}
        psi = np.kron(np.kron(plus, plus), minus)  # qubit 0 is the last factor
        bits, ac = pauli_round(psi, enc, TRIANGLE)
        assert bits == 1 << q_of[0] and ac == 1.0

    def test_shape(self):
        with pytest.raises(ValueError):
            pauli_round(np.ones(4), encode_31(TRIANGLE), TRIANGLE)


class _FakeEval:
    def __init__(self, n, values):
        self.relaxed = SimpleNamespace(n_qubits=n)
        self.values = values
        self.calls = []

    def __call__(self, r):
        self.calls.append(r)
        return SimpleNamespace(r=r, alpha_r=self.values(r))


class TestSearch:
    def test_flat_landscape_stops_after_neighbors(self):
        ev = _FakeEval(3, lambda r: 0.5)
        res = hill_climb(ev, 1, SearchTrace())
        assert res.r == 1 and len(set(ev.calls)) == 1 + 2  # neighbors 3 and 5

    def test_steepest_ascent(self):
        vals = {1: 0.1, 3: 0.4, 5: 0.3, 7: 0.9, 2: 0.0, 4: 0.0, 6: 0.0}
        trace = SearchTrace()
        res = hill_climb(_FakeEval(3, vals.get), 1, trace)
        assert res.r == 7 and trace.moves == [(1, 3), (3, 7)]

    def test_exhaustive_counts(self):
        rel = build_relaxed(PATH3)
        assert rel.n_qubits == 2
        rec = run_strategy(rel, "exhaustive_oracle", 1, 0, FAST)
        assert rec.family_evals == 3

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_oracle_dominates(self, seed):
        g = gen_er_graph(6, 0.5, seed)
        rel = build_relaxed(g)
        recs = {s: run_strategy(rel, s, 1, seed, FAST) for s in
                ("mub_r1_b0", "two_pole", "bitflip", "bitflip_2pole", "exhaustive_oracle")}
        ex = recs["exhaustive_oracle"]
        for r in recs.values():
            assert r.alpha_r <= ex.alpha_r + 1e-12
        assert recs["two_pole"].alpha_r >= recs["mub_r1_b0"].alpha_r
        assert recs["bitflip_2pole"].alpha_r >= recs["bitflip"].alpha_r
        assert recs["bitflip_2pole"].family_evals <= ex.family_evals == (1 << rel.n_qubits) - 1

    def test_single_edge_trap(self):
        # both endpoints get X, so H holds only X words and commutes with the X mixer:
        # the ansatz conserves <H> and every strategy keeps its starting energy
        g = GraphInstance(2, [(0, 1, 1)], 0)
        rel = build_relaxed(g)
        assert [a for _, a in rel.encoding.assignment] == ["X", "X"]
        x = run_strategy(rel, "x_variational", 1, 0, FAST)
        assert x.alpha_r == pytest.approx(-1.0) and x.alpha_c == 0.0
        for s in ("mub_r1_b0", "exhaustive_oracle"):
            rec = run_strategy(rel, s, 1, 0, FAST)
            assert rec.alpha_r == pytest.approx(0.5) and rec.alpha_c == 0.0

    def test_all_x_energy_conserved(self):
        rel = build_relaxed(TRIANGLE)
        start = family_start(3, 6, 1)
        e0 = relaxed_energy(rel, start)
        for params in ([0.4, -0.9], [2.0, 1.3]):
            assert relaxed_energy(rel, ansatz_state(rel, start, params, 1)) == pytest.approx(e0)

    def test_unknown_strategy(self):
        rel = build_relaxed(TRIANGLE)
        with pytest.raises(UnknownStrategyError):
            run_strategy(rel, "greedy", 1, 0)
        with pytest.raises(ValueError):
            run_strategy(rel, "mub_r1_b0", 4, 0)

    def test_deterministic_suite(self):
        g = gen_er_graph(6, 0.5, 3)
        a, _ = strategy_suite(g, 1, 5, True, FAST)
        b, _ = strategy_suite(g, 1, 5, True, FAST)
        strip = lambda rs: [{**r.row(), "runtime_s": 0} for r in rs]
        assert strip(a) == strip(b)


def _row(seed, strategy, ar, ac=0.5, evals=0):
    return StrategyRecord(seed, 6, 1, strategy, ar, ac, evals, None, None, 0.0)


class TestSummary:
    def test_mean_delta(self):
        deltas = [0.1, 0.0824, -0.02, 0.08]
        recs = []
        for s, d in enumerate(deltas):
            recs += [_row(s, "x_variational", 0.8), _row(s, "bitflip_2pole", 0.8 + d, evals=4)]
        out = summarize([r.row() for r in recs])
        e = out["bitflip_2pole"]
        assert e["mean_delta_alpha_r_vs_x"] == pytest.approx(0.0606)
        assert (e["wins"], e["ties"], e["losses"]) == (3, 0, 1)
        assert e["mean_family_evals"] == 4
        assert "mean_family_evals" not in out["x_variational"]

    def test_solved_uses_rounded_value(self):
        out = summarize([_row(0, "mub_r1_b0", 1.2, ac=0.5), _row(1, "mub_r1_b0", 0.7, ac=1.0)])
        assert out["mub_r1_b0"]["solved_rate"] == 0.5

    def test_paired_rows_skip_unmatched(self):
        rows = paired_rows([_row(0, "x_variational", 0.5), _row(1, "mub_r1_b0", 0.9)])
        assert rows == []

    def test_gain_decomposition(self):
        recs = []
        for seed, vals in enumerate([(0.8, 0.9, 0.95, 1.0), (0.9, 0.9, 0.9, 1.1)]):
            for name, v in zip(("x_variational", "mub_r1_b0", "two_pole", "bitflip_2pole"), vals):
                recs.append(_row(seed, name, v))
        recs.append(_row(7, "x_variational", 0.1))  # incomplete cell is skipped
        gd = gain_decomposition(recs)
        assert gd["cells"] == 2
        assert gd["prescreen"] == pytest.approx(0.05) and gd["poles"] == pytest.approx(0.025)
        assert gd["local_search"] == pytest.approx(0.125) and gd["total"] == pytest.approx(0.2)
        assert gain_decomposition([_row(0, "x_variational", 1.0)]) is None
