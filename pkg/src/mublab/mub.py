"""Complete mutually unbiased bases.

Two constructions are provided:

* prime dimensions ``d``: the Pauli eigenbases for ``d = 2`` and the
  Weyl-Heisenberg quadratic-phase bases for odd primes;
* qubit registers ``d = 2**n`` (``n <= 4``): the computational basis plus the
  ``2**n`` families ``C_r = D_r H^{(x)n}``, where ``D_r`` is diagonal with
  entries ``i**(x^T M_r x)`` and ``M_r`` is the trace-form matrix of
  multiplication by ``r`` in GF(2^n).

Basis matrices store basis states as columns.  Any construction is only
trusted after :func:`verify_unbiasedness` passes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .numcore import ContractViolation, InvalidDimensionError, as_rng, haar_unitary

# x^2+x+1, x^3+x+1, x^4+x+1; n = 1 is plain GF(2)
IRREDUCIBLE_POLYS = {1: 0b11, 2: 0b111, 3: 0b1011, 4: 0b10011}
MAX_QUBITS = 4
# family circuits themselves are cheap; only dense MUB systems are capped at 4
MAX_FAMILY_QUBITS = 14

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31)


class UnsupportedDimensionError(ValueError):
    pass


# --------------------------------------------------------------------------
# GF(2^n)
# --------------------------------------------------------------------------

def _poly_for(n: int) -> int:
    if n in IRREDUCIBLE_POLYS:
        return IRREDUCIBLE_POLYS[n]
    return _find_irreducible(n)


@lru_cache(maxsize=None)
def _find_irreducible(n: int) -> int:
    """Lowest-weight-first irreducible polynomial of degree ``n`` over GF(2)."""
    for low in range(1, 1 << n, 2):
        poly = (1 << n) | low
        if _is_irreducible(poly, n):
            return poly
    raise RuntimeError(f"no irreducible polynomial of degree {n}")  # pragma: no cover


def _is_irreducible(poly: int, n: int) -> bool:
    for deg in range(1, n // 2 + 1):
        for low in range(1 << deg):
            div = (1 << deg) | low
            if _poly_mod(poly, div) == 0:
                return False
    return True


def _poly_mod(a: int, m: int) -> int:
    dm = m.bit_length() - 1
    while a and a.bit_length() - 1 >= dm:
        a ^= m << (a.bit_length() - 1 - dm)
    return a


def gf_mul(a: int, b: int, n: int) -> int:
    """Product in GF(2^n) with elements as bit-packed polynomials."""
    poly = _poly_for(n)
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a >> n:
            a ^= poly
    return out


def gf_trace(a: int, n: int) -> int:
    """Absolute trace GF(2^n) -> GF(2): a + a^2 + ... + a^(2^(n-1))."""
    acc = 0
    t = a
    for _ in range(n):
        acc ^= t
        t = gf_mul(t, t, n)
    if acc not in (0, 1):  # pragma: no cover - field arithmetic guarantees this
        raise RuntimeError("trace left the prime field")
    return acc


@lru_cache(maxsize=None)
def trace_form_matrix(n: int, r: int) -> np.ndarray:
    """Symmetric binary matrix ``M[j, k] = Tr(r * x^j * x^k)``."""
    m = np.zeros((n, n), dtype=np.int64)
    for j in range(n):
        for k in range(j, n):
            v = gf_trace(gf_mul(r, gf_mul(1 << j, 1 << k, n), n), n)
            m[j, k] = m[k, j] = v
    m.setflags(write=False)
    return m


def _bit_matrix(n: int) -> np.ndarray:
    x = np.arange(1 << n)
    return ((x[:, None] >> np.arange(n)[None, :]) & 1).astype(np.int64)


# --------------------------------------------------------------------------
# family circuits C_r = D_r H^{(x)n}
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FamilyIndex:
    n_qubits: int
    r: int
    b: int = 0

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        dim = 1 << self.n_qubits
        if not 0 <= self.r < dim:
            raise ValueError(f"family index r={self.r} outside [0, {dim - 1}]")
        if not 0 <= self.b < dim:
            raise ValueError(f"label b={self.b} outside [0, {dim - 1}]")


@dataclass(frozen=True)
class DiagonalPhaseCircuit:
    """Diagonal ``D`` with entries ``i ** phase_exponents[x]``."""

    n_qubits: int
    phase_exponents: np.ndarray

    def diagonal(self) -> np.ndarray:
        return _I_POWERS[self.phase_exponents % 4]


_I_POWERS = np.array([1, 1j, -1, -1j], dtype=complex)


@lru_cache(maxsize=None)
def _phase_exponents(n: int, r: int) -> np.ndarray:
    m = trace_form_matrix(n, r)
    bits = _bit_matrix(n)
    # integer quadratic form: diagonal terms once, off-diagonal terms twice
    e = np.einsum("xj,jk,xk->x", bits, m, bits) % 4
    e = e.astype(np.int8)
    e.setflags(write=False)
    return e


def phase_circuit(n: int, r: int) -> DiagonalPhaseCircuit:
    if not 1 <= n <= MAX_FAMILY_QUBITS:
        raise ValueError(f"n_qubits must lie in [1, {MAX_FAMILY_QUBITS}], got {n}")
    if not 0 <= r < (1 << n):
        raise ValueError(f"family index r={r} outside [0, {(1 << n) - 1}]")
    return DiagonalPhaseCircuit(n, _phase_exponents(n, r))


@lru_cache(maxsize=256)
def family_phases(n: int, r: int) -> np.ndarray:
    """Diagonal of ``D_r`` as a read-only complex vector."""
    diag = phase_circuit(n, r).diagonal()
    diag.setflags(write=False)
    return diag


def hadamard_matrix(n: int) -> np.ndarray:
    bits = _bit_matrix(n)
    parity = (bits @ bits.T) & 1
    return (1 - 2 * parity) / np.sqrt(1 << n)


def family_matrix(n: int, r: int) -> np.ndarray:
    """Dense ``C_r = D_r H^{(x)n}``; column ``b`` is ``C_r |b>``."""
    return family_phases(n, r)[:, None] * hadamard_matrix(n)


def family_state(fi: FamilyIndex) -> np.ndarray:
    n = fi.n_qubits
    x = np.arange(1 << n)
    parity = np.array([bin(v).count("1") & 1 for v in (x & fi.b)])
    return family_phases(n, fi.r) * (1 - 2 * parity) / np.sqrt(1 << n)


def valid_family_range(n: int) -> range:
    """Non-computational family indices used by the search routines."""
    return range(1, 1 << n)


# --------------------------------------------------------------------------
# basis unions and MUB systems
# --------------------------------------------------------------------------

def _check_unitary(u, tol=1e-10):
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError("basis matrix must be square")
    dev = np.abs(u.conj().T @ u - np.eye(u.shape[0])).max()
    if dev > tol:
        raise ContractViolation(f"basis matrix is not unitary (deviation {dev:.3g})")
    return u


@dataclass
class BasisUnion:
    """Labelled list of ``d + 1`` orthonormal bases (repetition allowed)."""

    dim: int
    bases: list
    labels: list = field(default=None)

    def __post_init__(self):
        self.bases = [_check_unitary(b) for b in self.bases]
        for b in self.bases:
            if b.shape[0] != self.dim:
                raise ValueError(f"basis of dimension {b.shape[0]} in a d={self.dim} union")
        if self.labels is None:
            self.labels = list(range(len(self.bases)))
        if len(self.labels) != len(self.bases):
            raise ValueError("one label per basis required")

    @classmethod
    def from_bases(cls, bases, labels=None, *, strict_count=True):
        bases = [np.asarray(b, dtype=complex) for b in bases]
        d = bases[0].shape[0]
        if strict_count and len(bases) != d + 1:
            raise ValueError(f"a basis union in d={d} has {d + 1} bases, got {len(bases)}")
        return cls(d, bases, labels)

    @property
    def n_states(self):
        return self.dim * len(self.bases)

    def states(self) -> np.ndarray:
        """All basis states as rows, grouped by basis."""
        return np.concatenate([b.T for b in self.bases], axis=0)

    def state_labels(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.bases)), self.dim)


@dataclass
class MubSystem(BasisUnion):
    construction_tag: str = "prime"

    def to_json(self) -> str:
        return json.dumps(mub_to_dict(self))


def mub_to_dict(sys: MubSystem) -> dict:
    return {
        "d": sys.dim,
        "construction_tag": sys.construction_tag,
        "bases": [
            [[[float(a.real), float(a.imag)] for a in col] for col in basis.T]
            for basis in sys.bases
        ],
    }


def mub_from_dict(data: dict) -> MubSystem:
    bases = []
    for basis in data["bases"]:
        cols = np.array([[complex(re, im) for re, im in col] for col in basis])
        bases.append(cols.T)
    return MubSystem(int(data["d"]), bases, construction_tag=data["construction_tag"])


def _is_prime(d: int) -> bool:
    return d >= 2 and all(d % p for p in range(2, int(d ** 0.5) + 1))


def build_prime_mub(d: int) -> MubSystem:
    if not _is_prime(d):
        raise UnsupportedDimensionError(f"d={d} is not prime")
    if d > 31:
        raise UnsupportedDimensionError(f"prime d={d} above supported bound 31")
    if d == 2:
        s = 1 / np.sqrt(2)
        bases = [
            np.eye(2, dtype=complex),
            np.array([[s, s], [s, -s]], dtype=complex),
            np.array([[s, s], [1j * s, -1j * s]], dtype=complex),
        ]
    else:
        omega = np.exp(2j * np.pi / d)
        j = np.arange(d)
        bases = [np.eye(d, dtype=complex)]
        for a in range(d):
            # column i, component j: omega^(a j^2 + i j) / sqrt(d)
            expo = (a * j[:, None] ** 2 + j[None, :] * j[:, None]) % d
            bases.append(omega ** expo / np.sqrt(d))
    return MubSystem(d, bases, construction_tag="prime")


def build_qubit_mub(n: int) -> MubSystem:
    if not 1 <= n <= MAX_QUBITS:
        raise UnsupportedDimensionError(f"qubit MUB supports 1 <= n <= {MAX_QUBITS}, got {n}")
    d = 1 << n
    bases = [np.eye(d, dtype=complex)]
    bases += [family_matrix(n, r) for r in range(d)]
    return MubSystem(d, bases, construction_tag="qubit_register")


def random_basis_union(d: int, rng) -> BasisUnion:
    if d < 2:
        raise InvalidDimensionError(f"d must be >= 2, got {d}")
    rng = as_rng(rng)
    return BasisUnion(d, [haar_unitary(d, rng) for _ in range(d + 1)])


# --------------------------------------------------------------------------
# verification
# --------------------------------------------------------------------------

@dataclass
class UnbiasednessReport:
    max_overlap_deviation: float
    max_orthonormality_deviation: float
    tol: float

    @property
    def passed(self) -> bool:
        return (self.max_overlap_deviation <= self.tol
                and self.max_orthonormality_deviation <= self.tol)

    def to_dict(self):
        return {
            "max_overlap_deviation": self.max_overlap_deviation,
            "max_orthonormality_deviation": self.max_orthonormality_deviation,
            "tol": self.tol,
            "passed": self.passed,
        }


def overlap_table(u, v) -> np.ndarray:
    """``|<u_i|v_j>|^2`` for all column pairs."""
    return np.abs(np.asarray(u).conj().T @ np.asarray(v)) ** 2


def verify_unbiasedness(sys: BasisUnion, tol: float = 1e-9) -> UnbiasednessReport:
    d = sys.dim
    ortho = 0.0
    overlap = 0.0
    for a, u in enumerate(sys.bases):
        ortho = max(ortho, float(np.abs(u.conj().T @ u - np.eye(d)).max()))
        for v in sys.bases[a + 1:]:
            overlap = max(overlap, float(np.abs(overlap_table(u, v) - 1.0 / d).max()))
    return UnbiasednessReport(overlap, ortho, tol)


@dataclass
class CollapseReport:
    max_rotation_deviation: float
    max_diagonal_deviation: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rotation_deviation <= self.tol and self.max_diagonal_deviation <= self.tol


def _diagonal_values(cost, n):
    values = getattr(cost, "values", cost)
    values = np.asarray(values)
    if values.ndim == 2:
        off = values - np.diag(np.diag(values))
        if np.abs(off).max() > 0:
            raise ContractViolation("cost matrix is not diagonal in the computational basis")
        values = np.diag(values)
    if values.shape != (1 << n,):
        raise ValueError(f"cost has {values.shape} entries, expected {1 << n}")
    return values.astype(complex)


def verify_diagonal_collapse(n: int, cost, r_list=None, tol: float = 1e-10) -> CollapseReport:
    """Check ``C_r^dag H_C C_r`` is r-independent with constant diagonal."""
    if not 1 <= n <= MAX_QUBITS:
        raise UnsupportedDimensionError(f"dense collapse check supports n <= {MAX_QUBITS}")
    values = _diagonal_values(cost, n)
    if r_list is None:
        r_list = range(1 << n)
    had = hadamard_matrix(n)
    hc = np.diag(values)
    reference = had @ hc @ had
    expected_diag = values.sum() / (1 << n)
    rot_dev = 0.0
    diag_dev = 0.0
    for r in r_list:
        c = family_matrix(n, r)
        rotated = c.conj().T @ hc @ c
        rot_dev = max(rot_dev, float(np.abs(rotated - reference).max()))
        diag_dev = max(diag_dev, float(np.abs(np.diag(rotated) - expected_diag).max()))
    return CollapseReport(rot_dev, diag_dev, tol)
