"""Dense statevector simulator.

Conventions (fixed for every module that decodes bitstrings):

* qubit ``q`` is bit ``q`` of the amplitude index;
* ``RX(theta) = exp(-i theta X / 2)``;
* the transverse mixer is ``exp(-i beta sum_q X_q)``, i.e. ``RX(2 beta)`` on
  every qubit;
* the cost evolution multiplies amplitude ``x`` by ``exp(-i gamma c(x))``.

Public functions never mutate their input state; they return a new vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .mub import FamilyIndex, family_phases

MAX_DENSE_QUBITS = 14
MAX_PAULI_EXP_QUBITS = 8
NORM_TOL = 1e-10


class UnsupportedSizeError(ValueError):
    pass


def n_qubits_of(state) -> int:
    dim = np.asarray(state).shape[0]
    n = dim.bit_length() - 1
    if dim != 1 << n:
        raise ValueError(f"state length {dim} is not a power of two")
    return n


@dataclass
class DiagonalCost:
    """Real cost ``c(x)`` on computational basis states; lower is better."""

    n_qubits: int
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=float)
        if self.values.shape != (1 << self.n_qubits,):
            raise ValueError(f"cost needs {1 << self.n_qubits} values, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("cost values must be finite")

    @property
    def trace(self) -> float:
        return float(self.values.sum())


_LETTERS = set("IXYZ")


@dataclass
class PauliSum:
    """Real-weighted sum of Pauli words; ``word[q]`` acts on qubit ``q``."""

    n_qubits: int
    terms: list

    def __post_init__(self):
        clean = []
        for coef, word in self.terms:
            if len(word) != self.n_qubits or not set(word) <= _LETTERS:
                raise ValueError(f"bad Pauli word {word!r} for {self.n_qubits} qubits")
            clean.append((float(coef), str(word)))
        self.terms = clean

    @classmethod
    def single(cls, n, qubit, letter, coef=1.0):
        word = ["I"] * n
        word[qubit] = letter
        return cls(n, [(coef, "".join(word))])

    def __add__(self, other):
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit count mismatch")
        return PauliSum(self.n_qubits, self.terms + other.terms)

    def scaled(self, factor):
        return PauliSum(self.n_qubits, [(factor * c, w) for c, w in self.terms])

    def apply(self, psi) -> np.ndarray:
        out = np.zeros_like(psi, dtype=complex)
        for coef, word in self.terms:
            out += coef * apply_pauli_word(psi, word)
        return out

    def to_matrix(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        mat = np.zeros((dim, dim), dtype=complex)
        eye = np.eye(dim, dtype=complex)
        for k in range(dim):
            mat[:, k] = self.apply(eye[:, k])
        return mat

    @cached_property
    def eigh(self):
        """Cached ``(eigenvalues, eigenvectors)`` of the dense matrix."""
        if self.n_qubits > MAX_PAULI_EXP_QUBITS:
            raise UnsupportedSizeError(
                f"dense Pauli-sum exponentials support n <= {MAX_PAULI_EXP_QUBITS}")
        return np.linalg.eigh(self.to_matrix())


_POPCOUNT_CACHE: dict = {}


def _parity(n: int, mask: int) -> np.ndarray:
    key = (n, mask)
    par = _POPCOUNT_CACHE.get(key)
    if par is None:
        x = np.arange(1 << n) & mask
        par = np.zeros(1 << n, dtype=np.int64)
        while mask:
            par ^= x & 1
            x = x >> 1
            mask >>= 1
        _POPCOUNT_CACHE[key] = par
    return par


def apply_pauli_word(psi, word: str) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    n = len(word)
    xmask = zmask = 0
    n_y = 0
    for q, letter in enumerate(word):
        if letter in "XY":
            xmask |= 1 << q
        if letter in "ZY":
            zmask |= 1 << q
        n_y += letter == "Y"
    sign = 1 - 2 * _parity(n, zmask)
    phased = (1j ** n_y) * sign * psi
    out = np.empty_like(phased)
    out[np.arange(1 << n) ^ xmask] = phased
    return out


@dataclass
class AngleVector:
    gammas: np.ndarray
    betas: np.ndarray
    mus: np.ndarray = None

    def __post_init__(self):
        self.gammas = np.atleast_1d(np.asarray(self.gammas, dtype=float))
        self.betas = np.atleast_1d(np.asarray(self.betas, dtype=float))
        if self.gammas.shape != self.betas.shape:
            raise ValueError("gammas and betas must have the same depth")
        if self.mus is not None:
            self.mus = np.atleast_1d(np.asarray(self.mus, dtype=float))

    @property
    def depth(self):
        return self.gammas.size

    def to_flat(self):
        parts = [] if self.mus is None else [self.mus]
        return np.concatenate(parts + [self.gammas, self.betas])

    @classmethod
    def from_flat(cls, x, p, n_mus=0):
        x = np.asarray(x, dtype=float)
        if x.size != n_mus + 2 * p:
            raise ValueError(f"expected {n_mus + 2 * p} parameters, got {x.size}")
        mus = x[:n_mus] if n_mus else None
        return cls(x[n_mus:n_mus + p], x[n_mus + p:], mus)


# --------------------------------------------------------------------------
# state preparation and gates
# --------------------------------------------------------------------------

def prepare_basis(n: int, b: int) -> np.ndarray:
    if not 0 <= b < 1 << n:
        raise ValueError(f"basis label {b} outside [0, {(1 << n) - 1}]")
    psi = np.zeros(1 << n, dtype=complex)
    psi[b] = 1.0
    return psi


def prepare_plus(n: int) -> np.ndarray:
    return np.full(1 << n, (1 << n) ** -0.5, dtype=complex)


def _work_copy(state):
    return np.array(state, dtype=complex, copy=True)


def apply_rx_all(state, mus) -> np.ndarray:
    psi = _work_copy(state)
    mus = np.ascontiguousarray(mus, dtype=float)
    if mus.shape != (n_qubits_of(psi),):
        raise ValueError(f"need one angle per qubit ({n_qubits_of(psi)}), got {mus.shape}")
    return kernels.rx_layer(psi, mus)


def rx_product_state(mus) -> np.ndarray:
    """``prod_q RX(mu_q) |0...0>`` built directly as a Kronecker product."""
    mus = np.asarray(mus, dtype=float)
    psi = np.ones(1, dtype=complex)
    for mu in mus:  # qubit 0 is the least significant factor
        single = np.array([np.cos(mu / 2), -1j * np.sin(mu / 2)])
        psi = np.kron(single, psi)
    return psi


def apply_hadamard_all(state) -> np.ndarray:
    return kernels.walsh_hadamard(_work_copy(state))


def apply_family_circuit(state, fi: FamilyIndex) -> np.ndarray:
    """Apply ``C_r = D_r H^{(x)n}`` (Hadamards first, then the phases)."""
    psi = _work_copy(state)
    n = n_qubits_of(psi)
    if fi.n_qubits != n:
        raise ValueError(f"circuit on {fi.n_qubits} qubits, state on {n}")
    kernels.walsh_hadamard(psi)
    psi *= family_phases(n, fi.r)
    return psi


def _check_cost(psi, cost):
    values = cost.values if isinstance(cost, DiagonalCost) else np.asarray(cost, dtype=float)
    if values.shape != psi.shape:
        raise ValueError(f"cost of length {values.shape[0]} for a state of length {psi.shape[0]}")
    return values


def evolve_cost(state, cost, gamma: float) -> np.ndarray:
    psi = _work_copy(state)
    values = _check_cost(psi, cost)
    psi *= np.exp(-1j * gamma * values)
    return psi


def evolve_xmixer(state, beta: float) -> np.ndarray:
    psi = _work_copy(state)
    return kernels.rx_layer(psi, np.full(n_qubits_of(psi), 2.0 * beta))


def qaoa_evolve(state, cost, gammas, betas) -> np.ndarray:
    """Alternating cost / X-mixer layers starting from ``state``."""
    psi = _work_copy(state)
    values = np.ascontiguousarray(_check_cost(psi, cost))
    gammas = np.ascontiguousarray(gammas, dtype=float)
    betas = np.ascontiguousarray(betas, dtype=float)
    return kernels.qaoa_layers(psi, values, gammas, betas)


def evolve_pauli_sum(state, h: PauliSum, t: float) -> np.ndarray:
    psi = np.asarray(state, dtype=complex)
    if h.n_qubits != n_qubits_of(psi):
        raise ValueError("Hamiltonian and state qubit counts differ")
    evals, evecs = h.eigh
    return evecs @ (np.exp(-1j * t * evals) * (evecs.conj().T @ psi))


def expectation(state, h) -> float:
    psi = np.asarray(state, dtype=complex)
    if isinstance(h, PauliSum):
        if h.n_qubits != n_qubits_of(psi):
            raise ValueError("Hamiltonian and state qubit counts differ")
        val = np.vdot(psi, h.apply(psi))
        if abs(val.imag) > 1e-10:
            raise ValueError(f"expectation has imaginary residue {val.imag!r}")
        return float(val.real)
    values = _check_cost(psi, h)
    return float(np.dot(np.abs(psi) ** 2, values))


def probabilities(state) -> np.ndarray:
    return np.abs(np.asarray(state)) ** 2
