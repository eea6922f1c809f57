"""Standard QAOA and the adaptive MUB-XRot warm start.

Adaptive MUB-XRot prepares ``F_j prod_q RX(mu_q) |0...0>`` with
``F_j = D_j H^{(x)n}``, then applies the same cost/X-mixer layers as the
standard method, which starts from ``|+>^n``.  The rotation angles ``mu`` are
optimised jointly with the layer angles while the family index ``j`` moves
between bit-flip neighbours ``j ^ 2**b`` in ``[1, 2**n - 1]``.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .mub import family_phases
from .numcore import SeededRng
from .optim import OptimizerSpec, minimize
from .problems import EncodedProblem, decode_metrics
from . import kernels
from .simvec import prepare_plus, qaoa_evolve, rx_product_state

TIE_TOL = 1e-9
SOLVED_TOL = 1e-9


@dataclass
class QaoaConfig:
    max_evals: int = 400
    fd_step: float = 1e-3
    restarts: int = 2
    angle_init_high: float = 0.6
    # E - E(0, 0) ~ a * gamma * beta with a > 0 for cost = -f and the
    # exp(-i beta sum X) mixer, so betas start on the descending side
    beta_init_sign: float = -1.0
    mu_init_high: float = np.pi
    # boxes are centred on zero: with cost = -f the useful region has
    # gamma * beta < 0, and a box starting at zero stalls on the gamma = 0 face
    gamma_low: float = -np.pi
    gamma_high: float = np.pi
    beta_low: float = -np.pi / 2
    beta_high: float = np.pi / 2
    mu_high: float = 2 * np.pi
    start_family: int = 1
    screen_top: int = 2
    screen_budget: int = 30
    max_rounds: int = 5
    switch_threshold: float = 1e-4

    @classmethod
    def from_dict(cls, data):
        return cls(**(data or {}))

    def to_dict(self):
        return asdict(self)


@dataclass
class FamilyStep:
    round: int
    family: int
    scores: dict  # r -> (postselected, decoded, energy) at the screening point
    reoptimized: dict  # r -> postselected after the screening budget
    chosen: int
    accepted: bool


@dataclass
class MethodRecord:
    method: str
    family: str
    instance_seed: int
    n: int
    p: int
    seed: int
    decoded_ratio: float
    postselected_ratio: float
    energy: float
    runtime_s: float
    n_cost_evals: int
    final_family_r: int = None
    decoded_bitstring: int = None
    family_trace: list = field(default_factory=list)
    params: list = None

    @property
    def key(self):
        return (self.family, self.instance_seed, self.n, self.p, self.seed)


def _angle_bounds(p, cfg: QaoaConfig):
    return [(cfg.gamma_low, cfg.gamma_high)] * p + [(cfg.beta_low, cfg.beta_high)] * p


def _angle_init(p, cfg: QaoaConfig):
    beta = sorted((0.0, cfg.beta_init_sign * cfg.angle_init_high))
    return [(0.0, cfg.angle_init_high)] * p + [tuple(beta)] * p


# --------------------------------------------------------------------------
# standard QAOA
# --------------------------------------------------------------------------

def standard_state(encoded: EncodedProblem, params, p):
    params = np.asarray(params, dtype=float)
    return qaoa_evolve(prepare_plus(encoded.n_qubits), encoded.cost, params[:p], params[p:2 * p])


def run_standard(encoded: EncodedProblem, p, seed, config: QaoaConfig = None) -> MethodRecord:
    cfg = config or QaoaConfig()
    t0 = time.perf_counter()
    rng = SeededRng(seed).derive("standard", encoded.family, encoded.n_qubits, p)
    cost = encoded.cost.values
    plus = prepare_plus(encoded.n_qubits)

    def energy(x):
        psi = qaoa_evolve(plus, cost, x[:p], x[p:])
        return float(np.dot(np.abs(psi) ** 2, cost))

    spec = OptimizerSpec(_angle_bounds(p, cfg), cfg.max_evals, cfg.fd_step, cfg.restarts,
                         _angle_init(p, cfg))
    res = minimize(energy, spec, rng)
    psi = standard_state(encoded, res.x, p)
    m = decode_metrics(np.abs(psi) ** 2, encoded)
    inst_seed = getattr(encoded.instance, "seed", seed)
    return MethodRecord("standard", encoded.family, inst_seed, encoded.n_qubits, p, seed,
                        m.decoded_ratio, m.postselected_expected_ratio, m.energy,
                        time.perf_counter() - t0, res.n_evals, None, m.decoded_bitstring,
                        params=res.x.tolist())


# --------------------------------------------------------------------------
# adaptive MUB-XRot
# --------------------------------------------------------------------------

def adaptive_state(encoded: EncodedProblem, params, p, family):
    """``U_p(theta) F_family prod RX(mu) |0>`` for flat ``params = (mu, gamma, beta)``."""
    n = encoded.n_qubits
    params = np.asarray(params, dtype=float)
    psi = rx_product_state(params[:n])
    kernels.walsh_hadamard(psi)
    psi *= family_phases(n, family)
    return qaoa_evolve(psi, encoded.cost, params[n:n + p], params[n + p:n + 2 * p])


def bitflip_neighbors(j, n):
    top = (1 << n) - 1
    return [j ^ (1 << b) for b in range(n) if 1 <= (j ^ (1 << b)) <= top]


def _rank_key(r, m):
    return (-m.postselected_expected_ratio, -m.decoded_ratio, m.energy, r)


def run_adaptive_mub_xrot(encoded: EncodedProblem, p, seed, config: QaoaConfig = None) -> MethodRecord:
    cfg = config or QaoaConfig()
    t0 = time.perf_counter()
    n = encoded.n_qubits
    rng = SeededRng(seed).derive("adaptive", encoded.family, n, p)
    cost = encoded.cost.values
    evals = 0

    def objective_for(family):
        def energy(x):
            psi = adaptive_state(encoded, x, p, family)
            return float(np.dot(np.abs(psi) ** 2, cost))
        return energy

    def metrics(x, family):
        nonlocal evals
        evals += 1
        return decode_metrics(np.abs(adaptive_state(encoded, x, p, family)) ** 2, encoded)

    bounds = [(0.0, cfg.mu_high)] * n + _angle_bounds(p, cfg)
    init = [(0.0, cfg.mu_init_high)] * n + _angle_init(p, cfg)
    screen_spec = OptimizerSpec(bounds, cfg.screen_budget, cfg.fd_step, 1, init)
    polish_spec = OptimizerSpec(bounds, cfg.max_evals, cfg.fd_step, cfg.restarts, init)

    j = cfg.start_family
    if not 1 <= j < (1 << n):
        raise ValueError(f"start family {j} outside [1, {(1 << n) - 1}]")
    x = polish_spec.draw_start(rng.derive("init"))
    trace = []
    for rnd in range(cfg.max_rounds):
        neighbors = bitflip_neighbors(j, n)
        scores = {r: metrics(x, r) for r in [j] + neighbors}
        ranked = sorted(neighbors, key=lambda r: _rank_key(r, scores[r]))
        top = ranked[:cfg.screen_top]
        reopt = {}
        after = {}
        for r in [j] + top:
            res = minimize(objective_for(r), screen_spec, rng.derive("screen", rnd, r), x0=x)
            evals += res.n_evals
            reopt[r] = res.x
            after[r] = metrics(res.x, r).postselected_expected_ratio
        best = min(top, key=lambda r: (-after[r], r)) if top else j
        accepted = bool(top) and after[best] >= after[j] + cfg.switch_threshold
        trace.append(FamilyStep(
            rnd, j,
            {r: (s.postselected_expected_ratio, s.decoded_ratio, s.energy) for r, s in scores.items()},
            after, best if accepted else j, accepted))
        if accepted:
            j, x = best, reopt[best]
        else:
            x = reopt[j]
            break

    res = minimize(objective_for(j), polish_spec, rng.derive("polish"), x0=x)
    evals += res.n_evals
    m = metrics(res.x, j)
    inst_seed = getattr(encoded.instance, "seed", seed)
    return MethodRecord("adaptive_mub_xrot", encoded.family, inst_seed, n, p, seed,
                        m.decoded_ratio, m.postselected_expected_ratio, m.energy,
                        time.perf_counter() - t0, evals, j, m.decoded_bitstring, trace,
                        params=res.x.tolist())


# --------------------------------------------------------------------------
# paired statistics
# --------------------------------------------------------------------------

def classify(delta, tol=TIE_TOL):
    if delta > tol:
        return "win"
    if delta < -tol:
        return "loss"
    return "tie"


@dataclass
class PairedComparison:
    deltas: np.ndarray
    keys: list
    wins: int
    ties: int
    losses: int
    mean_delta: float
    non_worse_rate: float
    win_rate_non_ties: float
    solved_rate_standard: float
    solved_rate_adaptive: float
    median_runtime_ratio: float

    @property
    def n_cases(self):
        return len(self.deltas)

    def to_dict(self):
        return {
            "paired_cases": self.n_cases,
            "wins": self.wins,
            "ties": self.ties,
            "losses": self.losses,
            "win_tie_loss": f"{self.wins}/{self.ties}/{self.losses}",
            "non_worse_rate": self.non_worse_rate,
            "win_rate_non_ties": self.win_rate_non_ties,
            "mean_delta": self.mean_delta,
            "solved_rate_standard": self.solved_rate_standard,
            "solved_rate_adaptive": self.solved_rate_adaptive,
            "median_runtime_ratio": self.median_runtime_ratio,
        }


def _field(rec, name):
    return rec[name] if isinstance(rec, dict) else getattr(rec, name)


def _case_key(rec):
    return tuple(_field(rec, k) for k in ("family", "instance_seed", "n", "p", "seed"))


def paired_from_values(keys, base, other, runtime_base=None, runtime_other=None,
                       solved_base=None, solved_other=None) -> PairedComparison:
    """Paired statistics from aligned metric arrays (``other - base``)."""
    base = np.asarray(base, dtype=float)
    other = np.asarray(other, dtype=float)
    deltas = other - base
    labels = [classify(d) for d in deltas]
    wins, ties, losses = (labels.count(k) for k in ("win", "tie", "loss"))
    n = len(deltas)
    sb = base if solved_base is None else np.asarray(solved_base, dtype=float)
    so = other if solved_other is None else np.asarray(solved_other, dtype=float)
    if runtime_base is not None and len(runtime_base):
        ratios = np.asarray(runtime_other, dtype=float) / np.maximum(np.asarray(runtime_base, dtype=float), 1e-12)
        med = float(np.median(ratios))
    else:
        med = float("nan")
    decided = wins + losses
    return PairedComparison(
        deltas, list(keys), wins, ties, losses,
        float(deltas.mean()) if n else float("nan"),
        (wins + ties) / n if n else float("nan"),
        wins / decided if decided else float("nan"),
        float(np.mean(sb >= 1 - SOLVED_TOL)) if n else float("nan"),
        float(np.mean(so >= 1 - SOLVED_TOL)) if n else float("nan"),
        med,
    )


def paired_stats(records_std, records_adp, metric="decoded_ratio") -> PairedComparison:
    std = {_case_key(r): r for r in records_std}
    adp = {_case_key(r): r for r in records_adp}
    missing = sorted(set(std) ^ set(adp))
    if missing:
        raise KeyError(f"unpaired cases: {missing}")
    keys = sorted(std)
    return paired_from_values(
        keys,
        [_field(std[k], metric) for k in keys],
        [_field(adp[k], metric) for k in keys],
        [_field(std[k], "runtime_s") for k in keys],
        [_field(adp[k], "runtime_s") for k in keys],
    )


def bootstrap_mean_ci(values, rng, n_boot=10_000, level=0.90):
    """Percentile bootstrap interval for the mean."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return float("nan"), float("nan")
    idx = rng.integers(0, values.size, size=(n_boot, values.size))
    means = values[idx].mean(axis=1)
    alpha = (1 - level) / 2
    lo, hi = np.quantile(means, [alpha, 1 - alpha])
    return float(lo), float(hi)
