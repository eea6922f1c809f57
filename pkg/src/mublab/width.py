"""Monte Carlo Gaussian width of pure-state ensembles.

The width of an ensemble S is ``E max_{psi in S} Tr(H Q_psi)`` for an
isotropic Gaussian traceless Hamiltonian ``H``.  Each ``Q_psi`` is reduced
once to its coordinates against the GUE normals (:func:`numcore.q_features`),
so a batch of samples costs one matrix product.  The draws consumed are
exactly those of :func:`numcore.sample_gue`, one sample after another, which
lets :func:`sample_maxima_dense` replay the same Hamiltonians densely.

Comparisons between ensembles use common random numbers: pass two rngs with
the same ``(seed, stream_id)`` (``rng.derive(key)`` is a pure function of the
parent identity, so deriving the same key twice gives identical streams).
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from . import kernels
from .mub import BasisUnion, build_prime_mub, build_qubit_mub, random_basis_union
from .numcore import (
    MC_SIGMAS,
    EstimateWithError,
    as_rng,
    as_state,
    haar_state,
    q_features,
    sample_isotropic_traceless,
)

CHUNK = 8192
DEFAULT_GRID = np.round(np.arange(0.0, 4.0 + 1e-9, 0.1), 10)


class EmptyEnsembleError(ValueError):
    pass


@dataclass
class Ensemble:
    """Pure states (rows) with optional basis labels."""

    dim: int
    states: np.ndarray
    basis_label: np.ndarray = None
    name: str = "ensemble"

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=complex))
        if self.states.shape[0] == 0:
            raise EmptyEnsembleError("ensemble has no states")
        if self.states.shape[1] != self.dim:
            raise ValueError(f"states of length {self.states.shape[1]} in a d={self.dim} ensemble")
        for psi in self.states:
            as_state(psi)
        if self.basis_label is not None:
            self.basis_label = np.asarray(self.basis_label, dtype=int)
            if self.basis_label.shape != (len(self.states),):
                raise ValueError("one basis label per state required")
            for a in np.unique(self.basis_label):
                block = self.states[self.basis_label == a]
                if len(block) != self.dim:
                    raise ValueError(f"basis {a} has {len(block)} states, expected {self.dim}")
                gram = block.conj() @ block.T
                if np.abs(gram - np.eye(self.dim)).max() > 1e-9:
                    raise ValueError(f"basis {a} is not orthonormal")

    @classmethod
    def from_union(cls, union: BasisUnion, name=None):
        tag = getattr(union, "construction_tag", None)
        name = name or (f"mub[{tag}]" if tag else "basis_union")
        return cls(union.dim, union.states(), union.state_labels(), name)

    @classmethod
    def from_states(cls, states, name="states"):
        states = np.atleast_2d(np.asarray(states, dtype=complex))
        return cls(states.shape[1], states, None, name)

    def __len__(self):
        return len(self.states)

    @property
    def features(self):
        return q_features(self.states)

    def descriptor(self):
        out = {"name": self.name, "dim": self.dim, "n_states": len(self)}
        if self.basis_label is not None:
            out["n_bases"] = int(len(np.unique(self.basis_label)))
        return out


def complete_mub(d: int):
    """The complete MUB system used as the reference for dimension ``d``."""
    if d & (d - 1) == 0 and d > 2:
        return build_qubit_mub(d.bit_length() - 1)
    return build_prime_mub(d)


def _as_ensemble(ens):
    if isinstance(ens, Ensemble):
        return ens
    if isinstance(ens, BasisUnion):
        return Ensemble.from_union(ens)
    return Ensemble.from_states(ens)


def _check_samples(n_samples, minimum=100):
    if n_samples < minimum:
        raise ValueError(f"n_samples must be >= {minimum}, got {n_samples}")


# --------------------------------------------------------------------------
# samplers
# --------------------------------------------------------------------------

def sample_process(ens, n_samples, rng) -> np.ndarray:
    """Joint draws of ``X_psi = Tr(H Q_psi)``, shape ``(n_samples, n_states)``."""
    ens = _as_ensemble(ens)
    rng = as_rng(rng)
    feats = ens.features
    out = np.empty((n_samples, len(ens)))
    for start in range(0, n_samples, CHUNK):
        m = min(CHUNK, n_samples - start)
        z = rng.standard_normal((m, feats.shape[0]))
        out[start:start + m] = z @ feats
    return out


def sample_maxima(ens, n_samples, rng, sign=1.0) -> np.ndarray:
    """Per-sample ``max_psi sign * Tr(H Q_psi)``."""
    ens = _as_ensemble(ens)
    rng = as_rng(rng)
    feats = sign * ens.features
    out = np.empty(n_samples)
    for start in range(0, n_samples, CHUNK):
        m = min(CHUNK, n_samples - start)
        z = rng.standard_normal((m, feats.shape[0]))
        out[start:start + m] = kernels.rowmax_matmul(z, feats)
    return out


def sample_maxima_dense(ens, n_samples, rng) -> np.ndarray:
    """Reference sampler: dense traceless GUE matrices, one at a time."""
    ens = _as_ensemble(ens)
    rng = as_rng(rng)
    d = ens.dim
    out = np.empty(n_samples)
    for s in range(n_samples):
        h = sample_isotropic_traceless(d, rng)
        vals = np.einsum("ki,ij,kj->k", ens.states.conj(), h, ens.states).real
        out[s] = vals.max()  # Tr(H Q) = <psi|H|psi> for traceless H
    return out


# --------------------------------------------------------------------------
# width estimates
# --------------------------------------------------------------------------

@dataclass
class WidthReport:
    estimate: EstimateWithError
    ensemble: dict
    n_samples: int
    seed: int
    stream_id: int
    kind: str = "max"

    def to_dict(self):
        return {
            "kind": self.kind,
            "estimate": self.estimate.to_dict(),
            "ensemble": self.ensemble,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "stream_id": self.stream_id,
        }


def estimate_width(ens, n_samples, rng) -> WidthReport:
    _check_samples(n_samples)
    ens = _as_ensemble(ens)
    rng = as_rng(rng)
    seed, stream = rng.seed, rng.stream_id
    est = EstimateWithError.from_samples(sample_maxima(ens, n_samples, rng))
    return WidthReport(est, ens.descriptor(), n_samples, seed, stream)


def estimate_min_expectation(ens, n_samples, rng) -> WidthReport:
    _check_samples(n_samples)
    ens = _as_ensemble(ens)
    rng = as_rng(rng)
    seed, stream = rng.seed, rng.stream_id
    mins = -sample_maxima(ens, n_samples, rng, sign=-1.0)
    est = EstimateWithError.from_samples(mins)
    return WidthReport(est, ens.descriptor(), n_samples, seed, stream, kind="min")


def qubit_mub_width_exact() -> float:
    """``sqrt(1/2) E max(|g1|, |g2|, |g3|)`` by quadrature."""
    val, _ = integrate.quad(lambda t: 1.0 - (2.0 * stats.norm.cdf(t) - 1.0) ** 3, 0.0, np.inf)
    return float(np.sqrt(0.5) * val)


def expected_max_iid_normal(n: int) -> float:
    """``E max`` of ``n`` iid standard normals by quadrature."""
    upper, _ = integrate.quad(lambda t: 1.0 - stats.norm.cdf(t) ** n, 0.0, np.inf)
    lower, _ = integrate.quad(lambda t: stats.norm.cdf(t) ** n, -np.inf, 0.0)
    return float(upper - lower)


@dataclass
class Comparison:
    """``W(candidate) - W(reference)`` under common random numbers."""

    candidate: EstimateWithError
    reference: EstimateWithError
    diff: float
    joint_stderr: float
    paired_stderr: float
    sigmas: float = MC_SIGMAS

    @property
    def violation(self) -> bool:
        return self.diff > self.sigmas * self.joint_stderr

    def to_dict(self):
        return {
            "candidate": self.candidate.to_dict(),
            "reference": self.reference.to_dict(),
            "diff": self.diff,
            "joint_stderr": self.joint_stderr,
            "paired_stderr": self.paired_stderr,
            "violation": self.violation,
        }


def compare_widths(candidate, reference, n_samples, rng, sigmas=MC_SIGMAS) -> Comparison:
    """Check ``W(candidate) <= W(reference) + sigmas * joint stderr``.

    Both ensembles see the same Hamiltonian draws.  The joint stderr is the
    quadrature sum of the two marginal stderrs, which over-covers the paired
    difference when the maxima are positively correlated.
    """
    rng = as_rng(rng)
    a = sample_maxima(candidate, n_samples, rng.derive("crn"))
    b = sample_maxima(reference, n_samples, rng.derive("crn"))
    ea = EstimateWithError.from_samples(a)
    eb = EstimateWithError.from_samples(b)
    paired = EstimateWithError.from_samples(a - b)
    return Comparison(ea, eb, ea.mean - eb.mean, ea.joint_stderr(eb), paired.stderr, sigmas)


@dataclass
class SweepReport:
    dim: int
    comparisons: list
    reference: dict

    @property
    def violations(self):
        return [k for k, c in enumerate(self.comparisons) if c.violation]

    @property
    def passed(self):
        return not self.violations

    def to_dict(self):
        return {
            "dim": self.dim,
            "reference": self.reference,
            "n_candidates": len(self.comparisons),
            "violations": self.violations,
            "max_diff_in_sigmas": max(
                (c.diff / c.joint_stderr for c in self.comparisons if c.joint_stderr > 0),
                default=0.0),
            "passed": self.passed,
            "comparisons": [c.to_dict() for c in self.comparisons],
        }


def union_sweep(d, n_unions, n_samples, rng) -> SweepReport:
    """Random basis unions against the complete MUB in dimension ``d``."""
    rng = as_rng(rng)
    mub = Ensemble.from_union(complete_mub(d))
    comps = []
    for k in range(n_unions):
        union = random_basis_union(d, rng.derive("union", d, k))
        comps.append(compare_widths(union, mub, n_samples, rng.derive("compare", d)))
    return SweepReport(d, comps, mub.descriptor())


# --------------------------------------------------------------------------
# CDFs and stochastic dominance
# --------------------------------------------------------------------------

@dataclass
class CdfCurve:
    grid: np.ndarray
    probs: np.ndarray
    stderr: np.ndarray
    n_samples: int

    @classmethod
    def from_maxima(cls, maxima, grid):
        grid = np.asarray(grid, dtype=float)
        srt = np.sort(maxima)
        n = srt.size
        probs = np.searchsorted(srt, grid, side="right") / n
        return cls(grid, probs, np.sqrt(probs * (1 - probs) / n), n)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "prob", "stderr"])
        for t, p, s in zip(self.grid, self.probs, self.stderr):
            w.writerow([f"{t:.6g}", f"{p:.10g}", f"{s:.10g}"])
        return buf.getvalue()


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) < 0):
        raise ValueError("grid must be a non-empty sorted 1-D array")
    return grid


def max_cdf(ens, grid=None, n_samples=100_000, rng=0) -> CdfCurve:
    grid = _check_grid(DEFAULT_GRID if grid is None else grid)
    _check_samples(n_samples)
    return CdfCurve.from_maxima(sample_maxima(ens, n_samples, rng), grid)


@dataclass
class DominanceReport:
    violations: list
    max_shortfall_in_sigmas: float

    @property
    def passed(self):
        return not self.violations

    def to_dict(self):
        return {
            "passed": self.passed,
            "violations": self.violations,
            "max_shortfall_in_sigmas": self.max_shortfall_in_sigmas,
        }


def dominance_check(curve_s: CdfCurve, curve_m: CdfCurve, slack=None,
                    sigmas=MC_SIGMAS) -> DominanceReport:
    """Grid points where ``P_S(t) < P_M(t) - slack``.

    ``slack`` defaults to ``sigmas`` joint standard errors per point.
    """
    if curve_s.grid.shape != curve_m.grid.shape or np.any(curve_s.grid != curve_m.grid):
        raise ValueError("curves are on different grids")
    joint = np.hypot(curve_s.stderr, curve_m.stderr)
    allowed = sigmas * joint if slack is None else np.broadcast_to(slack, joint.shape)
    shortfall = curve_m.probs - curve_s.probs
    bad = np.nonzero(shortfall > allowed)[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(joint > 0, shortfall / joint, np.where(shortfall > 0, np.inf, 0.0))
    violations = [
        {"t": float(curve_s.grid[i]), "p_s": float(curve_s.probs[i]),
         "p_m": float(curve_m.probs[i]), "slack": float(allowed[i])}
        for i in bad
    ]
    return DominanceReport(violations, float(np.max(z)))


def dominance_sweep(d, n_unions, n_samples, rng, grid=None):
    """Dominance of every random union's CDF over the MUB CDF."""
    rng = as_rng(rng)
    grid = DEFAULT_GRID if grid is None else grid
    mub_curve = max_cdf(complete_mub(d), grid, n_samples, rng.derive("crn"))
    reports = []
    for k in range(n_unions):
        union = random_basis_union(d, rng.derive("union", d, k))
        curve = max_cdf(union, grid, n_samples, rng.derive("crn"))
        reports.append(dominance_check(curve, mub_curve))
    return mub_curve, reports


# --------------------------------------------------------------------------
# simplex block structure
# --------------------------------------------------------------------------

def simplex_vertices(d: int) -> np.ndarray:
    """Rows ``v_i`` in R^(d-1) with ``v_i . v_j = delta_ij - 1/d``."""
    centered = np.eye(d) - 1.0 / d
    # orthonormal basis of the sum-zero hyperplane from the centring projector
    w, vecs = np.linalg.eigh(centered)
    basis = vecs[:, w > 0.5]
    return centered @ basis


@dataclass
class SimplexBlockReport:
    dim: int
    n_bases: int
    within_block_cov_error: float
    within_block_max_sigmas: float
    cross_block_cov_norms: dict
    cross_block_max_sigmas: float
    block_sum_max_abs: float
    sigmas: float = MC_SIGMAS

    @property
    def within_passed(self):
        return self.within_block_max_sigmas <= self.sigmas

    @property
    def cross_independent(self):
        return self.cross_block_max_sigmas <= self.sigmas

    def to_dict(self):
        return {
            "dim": self.dim,
            "n_bases": self.n_bases,
            "within_block_cov_error": self.within_block_cov_error,
            "within_block_max_sigmas": self.within_block_max_sigmas,
            "cross_block_cov_norms": {f"{a}-{b}": v for (a, b), v in self.cross_block_cov_norms.items()},
            "cross_block_max_sigmas": self.cross_block_max_sigmas,
            "block_sum_max_abs": self.block_sum_max_abs,
            "within_passed": self.within_passed,
            "cross_independent": self.cross_independent,
        }


def simplex_blocks(union, n_samples, rng) -> SimplexBlockReport:
    ens = _as_ensemble(union)
    if ens.basis_label is None:
        raise ValueError("simplex_blocks needs a basis-labelled ensemble")
    _check_samples(n_samples)
    d = ens.dim
    x = sample_process(ens, n_samples, rng)
    labels = ens.basis_label
    n = x.shape[0]
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / (n - 1)
    # stderr of each covariance entry from the spread of the products
    second = (xc ** 2).T @ (xc ** 2) / n
    se = np.sqrt(np.maximum(second - cov ** 2, 0.0) / n)
    blocks = np.unique(labels)
    within_err = 0.0
    within_z = 0.0
    cross = {}
    cross_z = 0.0
    target = np.eye(d) - 1.0 / d
    for ia, a in enumerate(blocks):
        ka = np.nonzero(labels == a)[0]
        dev = np.abs(cov[np.ix_(ka, ka)] - target)
        within_err = max(within_err, float(dev.max()))
        within_z = max(within_z, float((dev / se[np.ix_(ka, ka)]).max()))
        for b in blocks[ia + 1:]:
            kb = np.nonzero(labels == b)[0]
            c = np.abs(cov[np.ix_(ka, kb)])
            cross[(int(a), int(b))] = float(c.max())
            cross_z = max(cross_z, float((c / se[np.ix_(ka, kb)]).max()))
    sums = max(float(np.abs(x[:, labels == a].sum(axis=1)).max()) for a in blocks)
    return SimplexBlockReport(d, len(blocks), within_err, within_z, cross, cross_z, sums)


# --------------------------------------------------------------------------
# radial mixtures H = R G
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialSpec:
    kind: str  # "constant", "half_normal" or "uniform"
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "half_normal", "uniform"):
            raise ValueError(f"unknown radial law {self.kind!r}")
        if self.kind == "constant" and self.value < 0:
            raise ValueError("radial factor must be non-negative")

    @property
    def mean(self) -> float:
        if self.kind == "constant":
            return float(self.value)
        if self.kind == "half_normal":
            return float(np.sqrt(2.0 / np.pi))
        return 0.5

    def sample(self, n, rng):
        if self.kind == "constant":
            return np.full(n, float(self.value))
        if self.kind == "half_normal":
            return np.abs(rng.standard_normal(n))
        return rng.uniform(0.0, 1.0, n)

    def label(self):
        return f"constant({self.value:g})" if self.kind == "constant" else self.kind


def parse_radial(spec) -> RadialSpec:
    if isinstance(spec, RadialSpec):
        return spec
    if isinstance(spec, (int, float)):
        return RadialSpec("constant", float(spec))
    return RadialSpec(str(spec))


@dataclass
class RadialReport:
    radial: str
    lhs: EstimateWithError
    rhs: EstimateWithError
    sigmas: float = MC_SIGMAS

    @property
    def joint_stderr(self):
        return self.lhs.joint_stderr(self.rhs)

    @property
    def passed(self):
        return abs(self.lhs.mean - self.rhs.mean) <= self.sigmas * self.joint_stderr

    def to_dict(self):
        return {"radial": self.radial, "lhs": self.lhs.to_dict(), "rhs": self.rhs.to_dict(),
                "joint_stderr": self.joint_stderr, "passed": self.passed}


def radial_width(ens, radial_spec, n_samples, rng) -> RadialReport:
    """``E max Tr(R G Q)`` against ``E R * W`` on the same ``G`` draws."""
    spec = parse_radial(radial_spec)
    _check_samples(n_samples)
    rng = as_rng(rng)
    radii = spec.sample(n_samples, rng.derive("radial"))
    maxima = sample_maxima(ens, n_samples, rng)
    lhs = EstimateWithError.from_samples(radii * maxima)
    w = EstimateWithError.from_samples(maxima)
    rhs = EstimateWithError(spec.mean * w.mean, spec.mean * w.stderr, n_samples)
    return RadialReport(spec.label(), lhs, rhs)


# --------------------------------------------------------------------------
# unrestricted qubit case
# --------------------------------------------------------------------------

@dataclass
class OctahedronReport:
    mub_width: EstimateWithError
    estimates: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.violations

    def to_dict(self):
        return {
            "mub_width": self.mub_width.to_dict(),
            "n_ensembles": len(self.estimates),
            "max_estimate": max((e.mean for e in self.estimates), default=None),
            "violations": self.violations,
            "passed": self.passed,
        }


def octahedron_trial(n_ensembles, n_samples, rng, ensembles=None) -> OctahedronReport:
    """Random six-state qubit ensembles against the qubit MUB (octahedron)."""
    rng = as_rng(rng)
    mub = Ensemble.from_union(build_prime_mub(2))
    if ensembles is None:
        ensembles = []
        for k in range(n_ensembles):
            r = rng.derive("ensemble", k)
            ensembles.append(Ensemble.from_states([haar_state(2, r) for _ in range(6)], f"haar6[{k}]"))
    w_mub = EstimateWithError.from_samples(sample_maxima(mub, n_samples, rng.derive("crn")))
    report = OctahedronReport(w_mub)
    for k, ens in enumerate(ensembles):
        est = EstimateWithError.from_samples(sample_maxima(ens, n_samples, rng.derive("crn")))
        report.estimates.append(est)
        if est.mean - w_mub.mean > MC_SIGMAS * est.joint_stderr(w_mub):
            report.violations.append(k)
    return report


# --------------------------------------------------------------------------
# asymptotic comparison with iid maxima
# --------------------------------------------------------------------------

def sample_iid_max(n_points, n_samples, rng) -> np.ndarray:
    rng = as_rng(rng)
    out = np.empty(n_samples)
    step = max(1, (1 << 20) // n_points)
    for start in range(0, n_samples, step):
        m = min(step, n_samples - start)
        out[start:start + m] = rng.standard_normal((m, n_points)).max(axis=1)
    return out


def sample_mub_blocks(d, n_samples, rng) -> np.ndarray:
    """Complete-MUB maxima from ``d + 1`` independent centred blocks."""
    rng = as_rng(rng)
    out = np.empty(n_samples)
    per = (d + 1) * d
    step = max(1, (1 << 20) // per)
    for start in range(0, n_samples, step):
        m = min(step, n_samples - start)
        z = rng.standard_normal((m, d + 1, d))
        out[start:start + m] = kernels.centered_block_max(z)
    return out


@dataclass
class GapReport:
    n_qubits: int
    dim: int
    n_points: int
    m_n_hat: EstimateWithError
    w_m_hat: EstimateWithError
    reference: float
    sigmas: float = MC_SIGMAS

    @property
    def gap(self):
        return self.m_n_hat.mean - self.w_m_hat.mean

    @property
    def gap_stderr(self):
        return self.m_n_hat.joint_stderr(self.w_m_hat)

    @property
    def passed(self):
        return self.gap >= -self.sigmas * self.gap_stderr

    def to_dict(self):
        return {
            "n_qubits": self.n_qubits,
            "d": self.dim,
            "N": self.n_points,
            "m_N_hat": self.m_n_hat.to_dict(),
            "W_M_hat": self.w_m_hat.to_dict(),
            "gap": self.gap,
            "gap_stderr": self.gap_stderr,
            "reference": self.reference,
            "passed": self.passed,
        }


def asymptotic_gap(n_qubits, n_samples, rng) -> GapReport:
    if not 1 <= n_qubits <= 4:
        raise ValueError(f"n_qubits must lie in [1, 4], got {n_qubits}")
    _check_samples(n_samples)
    rng = as_rng(rng)
    d = 1 << n_qubits
    n_points = d * (d + 1)
    m_n = EstimateWithError.from_samples(sample_iid_max(n_points, n_samples, rng.derive("iid", n_qubits)))
    w_m = EstimateWithError.from_samples(sample_mub_blocks(d, n_samples, rng.derive("blocks", n_qubits)))
    return GapReport(n_qubits, d, n_points, m_n, w_m, float(np.sqrt(np.log(d)) / d))


@dataclass
class GapSweep:
    reports: list

    @property
    def gaps(self):
        return [r.gap for r in self.reports]

    @property
    def all_positive(self):
        return all(r.gap > 0 and r.passed for r in self.reports)

    @property
    def strictly_decreasing(self):
        g = self.gaps
        return all(b < a for a, b in zip(g, g[1:]))

    @property
    def passed(self):
        return self.all_positive and self.strictly_decreasing

    def to_dict(self):
        return {
            "reports": [r.to_dict() for r in self.reports],
            "all_positive": self.all_positive,
            "strictly_decreasing": self.strictly_decreasing,
            "passed": self.passed,
        }


def gap_sweep(n_values, n_samples, rng) -> GapSweep:
    rng = as_rng(rng)
    return GapSweep([asymptotic_gap(n, n_samples, rng) for n in n_values])


def block_vs_dense(n_qubits, n_samples, rng) -> Comparison:
    """Block-sampler MUB width against the GUE route on ``build_qubit_mub``."""
    rng = as_rng(rng)
    d = 1 << n_qubits
    block = EstimateWithError.from_samples(sample_mub_blocks(d, n_samples, rng.derive("blocks")))
    dense = EstimateWithError.from_samples(
        sample_maxima(build_qubit_mub(n_qubits), n_samples, rng.derive("gue")))
    diff = block.mean - dense.mean
    joint = block.joint_stderr(dense)
    return Comparison(block, dense, diff, joint, joint)


def two_sided_agree(comp: Comparison, sigmas=MC_SIGMAS) -> bool:
    return abs(comp.diff) <= sigmas * comp.joint_stderr
