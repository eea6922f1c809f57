import io
import csv

import numpy as np
import pytest
from scipy import integrate, stats

from mublab.mub import BasisUnion, build_prime_mub, build_qubit_mub, random_basis_union
from mublab.numcore import MC_SIGMAS, EstimateWithError, SeededRng, haar_state
from mublab.width import (
    CdfCurve, EmptyEnsembleError, Ensemble, RadialSpec, asymptotic_gap, block_vs_dense,
    compare_widths, complete_mub, dominance_check, estimate_min_expectation, estimate_width,
    expected_max_iid_normal, max_cdf, octahedron_trial, parse_radial, qubit_mub_width_exact,
    radial_width, sample_iid_max, sample_maxima, sample_maxima_dense, simplex_blocks,
    simplex_vertices, two_sided_agree, union_sweep,
)

N = 40_000
W2 = qubit_mub_width_exact()


def _within(est, target, sigmas=MC_SIGMAS):
    return abs(est.mean - target) <= sigmas * est.stderr


class TestExactValues:
    def test_qubit_width_value(self):
        # independent oracle: E max(|g1|,|g2|,|g3|) from the density of the max of half-normals
        t = np.linspace(0, 12, 200_001)
        f = 3 * (2 * stats.norm.cdf(t) - 1) ** 2 * 2 * stats.norm.pdf(t)
        oracle = np.sqrt(0.5) * integrate.trapezoid(t * f, t)
        assert W2 == pytest.approx(oracle, abs=1e-8)
        assert W2 == pytest.approx(0.9379, abs=1e-4)

    def test_iid_max_reference(self):
        assert expected_max_iid_normal(1) == pytest.approx(0.0, abs=1e-10)
        assert expected_max_iid_normal(2) == pytest.approx(1 / np.sqrt(np.pi), abs=1e-10)


class TestEnsemble:
    def test_empty(self):
        with pytest.raises(EmptyEnsembleError):
            Ensemble(2, np.zeros((0, 2)))

    def test_bad_label_group(self):
        with pytest.raises(ValueError):
            Ensemble(2, np.eye(2), [0, 1])

    def test_non_orthonormal_block(self):
        s = 1 / np.sqrt(2)
        with pytest.raises(ValueError):
            Ensemble(2, [[1, 0], [s, s]], [0, 0])

    def test_descriptor(self):
        e = Ensemble.from_union(build_prime_mub(3))
        assert e.descriptor() == {"name": "mub[prime]", "dim": 3, "n_states": 12, "n_bases": 4}


class TestWidth:
    def test_single_state_zero(self, rng):
        rep = estimate_width(Ensemble.from_states([haar_state(3, rng)]), N, rng)
        assert _within(rep.estimate, 0.0)

    def test_duplicates(self):
        psi = haar_state(3, SeededRng(1))
        a = estimate_width(Ensemble.from_states([psi]), 2000, SeededRng(5))
        b = estimate_width(Ensemble.from_states([psi] * 4), 2000, SeededRng(5))
        assert a.estimate.mean == pytest.approx(b.estimate.mean, abs=1e-12)

    def test_qubit_mub(self, rng):
        assert _within(estimate_width(build_prime_mub(2), N, rng).estimate, W2)

    def test_min_is_negated_width(self, rng):
        mn = estimate_min_expectation(build_prime_mub(2), N, rng)
        assert _within(mn.estimate, -W2)
        assert mn.kind == "min"

    def test_symmetry_random_ensemble(self, rng):
        ens = random_basis_union(3, rng)
        w = estimate_width(ens, N, rng.derive("a")).estimate
        m = estimate_min_expectation(ens, N, rng.derive("b")).estimate
        assert abs(w.mean + m.mean) <= MC_SIGMAS * w.joint_stderr(m)

    def test_feature_route_matches_dense_matrices(self):
        ens = Ensemble.from_union(random_basis_union(3, SeededRng(2)))
        fast = sample_maxima(ens, 500, SeededRng(9))
        slow = sample_maxima_dense(ens, 500, SeededRng(9))
        assert np.allclose(fast, slow, atol=1e-12)

    def test_too_few_samples(self, rng):
        with pytest.raises(ValueError):
            estimate_width(build_prime_mub(2), 10, rng)

    def test_report_json_fields(self, rng):
        d = estimate_width(build_prime_mub(2), 200, SeededRng(3, 4)).to_dict()
        assert d["seed"] == 3 and d["stream_id"] == 4 and d["n_samples"] == 200


class TestCdf:
    def test_negative_t_is_zero_for_unions(self):
        c = max_cdf(build_prime_mub(3), np.array([-0.5, -0.1]), N, SeededRng(1))
        assert np.all(c.probs == 0)

    def test_tail_one(self):
        c = max_cdf(build_prime_mub(2), np.array([20.0]), 1000, SeededRng(1))
        assert c.probs[0] == 1

    def test_qubit_closed_form(self, rng):
        c = max_cdf(build_prime_mub(2), np.array([1.0]), N, rng)
        exact = (2 * stats.norm.cdf(np.sqrt(2)) - 1) ** 3
        assert abs(c.probs[0] - exact) <= MC_SIGMAS * c.stderr[0]

    def test_monotone(self, rng):
        c = max_cdf(random_basis_union(2, rng), None, 5000, rng)
        assert np.all(np.diff(c.probs) >= 0) and c.probs.min() >= 0 and c.probs.max() <= 1

    def test_unsorted_grid(self, rng):
        with pytest.raises(ValueError):
            max_cdf(build_prime_mub(2), np.array([1.0, 0.5]), 1000, rng)

    def test_csv(self):
        c = CdfCurve.from_maxima(np.array([0.1, 0.2, 0.3, 0.4]), np.array([0.0, 0.25]))
        rows = list(csv.reader(io.StringIO(c.to_csv())))
        assert rows[0] == ["t", "prob", "stderr"] and rows[2][:2] == ["0.25", "0.5"]


class TestDominance:
    def test_self(self, rng):
        c = max_cdf(build_prime_mub(2), None, 5000, rng)
        assert dominance_check(c, c).passed

    def test_union_dominates(self, rng):
        d = 3
        mub = max_cdf(complete_mub(d), None, N, rng.derive("crn"))
        union = max_cdf(random_basis_union(d, rng), None, N, rng.derive("crn"))
        assert dominance_check(union, mub).passed

    def test_reversed_roles_violate(self, rng):
        # a union with two identical bases has strictly smaller maxima
        mub = complete_mub(2)
        degenerate = BasisUnion(2, [mub.bases[0], mub.bases[0], mub.bases[1]])
        c_mub = max_cdf(mub, None, N, rng.derive("crn"))
        c_deg = max_cdf(degenerate, None, N, rng.derive("crn"))
        assert dominance_check(c_deg, c_mub).passed
        assert not dominance_check(c_mub, c_deg).passed

    def test_grid_mismatch(self):
        a = CdfCurve.from_maxima(np.zeros(4), np.array([0.0, 1.0]))
        b = CdfCurve.from_maxima(np.zeros(4), np.array([0.0, 2.0]))
        with pytest.raises(ValueError):
            dominance_check(a, b)


class TestCompare:
    def test_crn_and_direction(self, rng):
        c = compare_widths(random_basis_union(2, rng), complete_mub(2), N, rng)
        assert not c.violation
        assert c.paired_stderr <= c.joint_stderr

    def test_small_sweep(self, rng):
        rep = union_sweep(2, 5, 20_000, rng)
        assert rep.passed and rep.to_dict()["n_candidates"] == 5


class TestSimplex:
    @pytest.mark.parametrize("d", [2, 3, 5])
    def test_vertices(self, d):
        v = simplex_vertices(d)
        assert v.shape == (d, d - 1)
        assert np.allclose(v @ v.T, np.eye(d) - 1 / d, atol=1e-12)
        assert np.allclose(v.sum(axis=0), 0, atol=1e-12)

    def test_mub_blocks_independent(self, rng):
        rep = simplex_blocks(complete_mub(3), N, rng)
        assert rep.cross_independent and rep.within_passed
        assert rep.block_sum_max_abs < 1e-10

    def test_repeated_basis_correlated(self, rng):
        mub = complete_mub(3)
        union = BasisUnion(3, [mub.bases[0], mub.bases[0], mub.bases[1], mub.bases[2]])
        rep = simplex_blocks(union, 20_000, rng)
        assert rep.cross_block_cov_norms[(0, 1)] == pytest.approx(1 - 1 / 3, abs=0.05)
        assert not rep.cross_independent

    def test_needs_labels(self, rng):
        with pytest.raises(ValueError):
            simplex_blocks(Ensemble.from_states(np.eye(2)), 1000, rng)


class TestRadial:
    def test_constant_one_is_width(self):
        rep = radial_width(build_prime_mub(2), 1.0, 5000, SeededRng(2))
        w = estimate_width(build_prime_mub(2), 5000, SeededRng(2))
        assert rep.lhs.mean == pytest.approx(w.estimate.mean, abs=1e-12)

    def test_constant_two(self, rng):
        rep = radial_width(build_prime_mub(2), 2.0, N, rng)
        assert _within(rep.lhs, 2 * W2) and rep.passed

    def test_half_normal(self, rng):
        rep = radial_width(build_prime_mub(2), "half_normal", N, rng)
        assert abs(rep.lhs.mean - np.sqrt(2 / np.pi) * W2) <= MC_SIGMAS * rep.lhs.stderr
        assert rep.passed

    def test_negative_constant(self):
        with pytest.raises(ValueError):
            RadialSpec("constant", -1.0)

    def test_parse(self):
        assert parse_radial("uniform").mean == 0.5
        with pytest.raises(ValueError):
            parse_radial("cauchy")


class TestOctahedron:
    def test_mub_itself(self, rng):
        mub = Ensemble.from_union(build_prime_mub(2))
        rep = octahedron_trial(1, N, rng, ensembles=[mub])
        assert rep.passed
        assert rep.estimates[0].mean == pytest.approx(rep.mub_width.mean, abs=1e-12)

    def test_copies_of_one_state(self, rng):
        psi = haar_state(2, rng)
        rep = octahedron_trial(1, 5000, rng, ensembles=[Ensemble.from_states([psi] * 6)])
        assert rep.passed and abs(rep.estimates[0].mean) < 0.05

    def test_small_random_sweep(self, rng):
        assert octahedron_trial(10, 20_000, rng).passed


class TestGap:
    def test_range(self, rng):
        for n in (0, 5):
            with pytest.raises(ValueError):
                asymptotic_gap(n, 1000, rng)

    def test_n1_positive(self, rng):
        rep = asymptotic_gap(1, 100_000, rng)
        assert rep.gap > 5 * rep.gap_stderr
        assert rep.reference == pytest.approx(np.sqrt(np.log(2)) / 2)

    def test_iid_sampler_matches_quadrature(self, rng):
        est = EstimateWithError.from_samples(sample_iid_max(6, N, rng))
        assert _within(est, expected_max_iid_normal(6))

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_block_sampler_matches_dense(self, n, rng):
        assert two_sided_agree(block_vs_dense(n, 20_000, rng))

    def test_sudakov_fernique(self, rng):
        # any 6-state qubit ensemble stays below the iid maximum of 6 normals
        ens = Ensemble.from_states([haar_state(2, rng) for _ in range(6)])
        w = estimate_width(ens, N, rng).estimate
        assert w.mean <= expected_max_iid_normal(6) + MC_SIGMAS * w.stderr
