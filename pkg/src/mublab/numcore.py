"""Complex linear algebra, random-matrix sampling and seeded randomness.

States and matrices are plain numpy arrays.  The functions here validate
their inputs and raise ``ValueError`` subclasses on contract violations.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

# exact identities are checked at EXACT_TOL, Monte Carlo claims at MC_SIGMAS
# standard errors
EXACT_TOL = 1e-10
MC_SIGMAS = 5.0
HERMITIAN_TOL = 1e-12
STATE_NORM_TOL = 1e-8


class InvalidDimensionError(ValueError):
    pass


class InvalidStateError(ValueError):
    pass


class ContractViolation(ValueError):
    pass


_MASK64 = (1 << 64) - 1


class SeededRng:
    """Counter-based generator keyed by ``(seed, stream_id)``.

    Backed by numpy's Philox bit generator, so two instances with the same
    pair produce the same sequence regardless of process or thread.  Use
    :meth:`derive` to split independent child streams for parallel tasks.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, stream_id={self.stream_id})"

    def derive(self, *keys) -> "SeededRng":
        """Child stream determined by this stream's identity and ``keys``."""
        text = "|".join([str(self.stream_id)] + [repr(k) for k in keys])
        digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
        return SeededRng(self.seed, int.from_bytes(digest, "little"))

    # thin pass-throughs used throughout the package
    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def random(self, size=None):
        return self.generator.random(size)


def as_rng(rng) -> SeededRng:
    if isinstance(rng, SeededRng):
        return rng
    if isinstance(rng, (int, np.integer)):
        return SeededRng(int(rng))
    raise TypeError(f"expected SeededRng or integer seed, got {type(rng).__name__}")


@dataclass(frozen=True)
class EstimateWithError:
    mean: float
    stderr: float
    n_samples: int

    @classmethod
    def from_samples(cls, x) -> "EstimateWithError":
        x = np.asarray(x, dtype=float)
        n = x.size
        if n == 0:
            raise ValueError("no samples")
        sd = x.std(ddof=1) if n > 1 else 0.0
        return cls(float(x.mean()), float(sd / np.sqrt(n)), int(n))

    def joint_stderr(self, other: "EstimateWithError") -> float:
        return float(np.hypot(self.stderr, other.stderr))

    def to_dict(self):
        return {"mean": self.mean, "stderr": self.stderr, "n_samples": self.n_samples}


# --------------------------------------------------------------------------
# validation helpers
# --------------------------------------------------------------------------

def is_hermitian(a, tol=HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.abs(a - a.conj().T).max() <= tol


def as_state(psi, tol=STATE_NORM_TOL) -> np.ndarray:
    """Validate and return a unit-norm complex amplitude vector."""
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1 or psi.size == 0:
        raise InvalidStateError("state must be a non-empty 1-D amplitude vector")
    norm = np.vdot(psi, psi).real
    if abs(norm - 1.0) > tol:
        raise InvalidStateError(f"state norm^2 = {norm!r} deviates from 1")
    return psi


def normalize(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return psi / np.linalg.norm(psi)


# --------------------------------------------------------------------------
# random Hamiltonians
# --------------------------------------------------------------------------

def gue_size(d: int) -> int:
    """Number of real standard normals that parametrise one d x d GUE draw."""
    return d * d


def gue_from_normals(z, d: int) -> np.ndarray:
    """Assemble the Hermitian matrix whose independent entries are ``z``.

    Layout of ``z``: ``d`` diagonal entries, then the real parts and then the
    imaginary parts of the strict upper triangle in ``np.triu_indices``
    order.  Off-diagonal entries are ``(x + i y) / sqrt(2)``.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (d * d,):
        raise ValueError(f"expected {d * d} normals, got shape {z.shape}")
    m = d * (d - 1) // 2
    iu = np.triu_indices(d, k=1)
    h = np.zeros((d, d), dtype=complex)
    h[np.diag_indices(d)] = z[:d]
    upper = (z[d:d + m] + 1j * z[d + m:]) / np.sqrt(2.0)
    h[iu] = upper
    h[(iu[1], iu[0])] = upper.conj()
    return h


def sample_gue(d: int, rng) -> np.ndarray:
    """GUE draw normalised so that ``Var Tr(HA) = Tr(A^2)`` for traceless A."""
    if d < 2:
        raise InvalidDimensionError(f"GUE needs d >= 2, got {d}")
    rng = as_rng(rng)
    return gue_from_normals(rng.standard_normal(d * d), d)


def project_traceless(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if not is_hermitian(a):
        raise ContractViolation("project_traceless expects a Hermitian matrix")
    d = a.shape[0]
    return a - (np.trace(a) / d) * np.eye(d)


def sample_isotropic_traceless(d: int, rng) -> np.ndarray:
    return project_traceless(sample_gue(d, rng))


def q_operator(psi) -> np.ndarray:
    """Traceless projector ``|psi><psi| - I/d``."""
    psi = as_state(psi)
    d = psi.size
    return np.outer(psi, psi.conj()) - np.eye(d) / d


def hs_inner(a, b) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    val = np.sum(a * b.T)  # Tr(AB) without forming the product
    if abs(val.imag) > 1e-12 * max(1.0, abs(val.real)):
        raise ContractViolation(f"Tr(AB) has imaginary part {val.imag!r}")
    return float(val.real)


def q_features(states) -> np.ndarray:
    """Coordinates of each ``Q_psi`` against the GUE normals.

    For ``z`` laid out as in :func:`gue_from_normals`,
    ``z @ q_features(states)[:, k] == Tr(H(z) Q_{psi_k})``.  Returns an array
    of shape ``(d*d, n_states)``.
    """
    s = np.asarray(states, dtype=complex)
    if s.ndim == 1:
        s = s[None, :]
    d = s.shape[1]
    iu = np.triu_indices(d, k=1)
    prob = np.abs(s) ** 2 - 1.0 / d
    c = s[:, iu[0]].conj() * s[:, iu[1]]
    root2 = np.sqrt(2.0)
    feats = np.concatenate([prob, root2 * c.real, -root2 * c.imag], axis=1)
    return np.ascontiguousarray(feats.T)


# --------------------------------------------------------------------------
# Haar unitaries
# --------------------------------------------------------------------------

def haar_unitary(d: int, rng) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    if d < 1:
        raise InvalidDimensionError(f"dimension must be positive, got {d}")
    rng = as_rng(rng)
    g = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(g)
    diag = np.diag(r)
    phases = diag / np.abs(diag)
    return q * phases[None, :]


def haar_state(d: int, rng) -> np.ndarray:
    rng = as_rng(rng)
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)
