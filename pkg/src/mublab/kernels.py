"""Hot numeric kernels.

Every kernel has a loop implementation compiled with numba (``*_nb``) and a
vectorised numpy implementation (``*_np``).  The public names dispatch on
``mublab._accel.USE_NUMBA``.  Both paths are kept bit-compatible to within
floating point reassociation and are cross-checked in the test-suite.

Qubit ``q`` is bit ``q`` of the amplitude index (qubit 0 is the LSB).
"""
import numpy as np

from ._accel import USE_NUMBA, njit

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


# --------------------------------------------------------------------------
# Walsh-Hadamard transform: H^{(x)n} applied in place
# --------------------------------------------------------------------------

@njit
def walsh_hadamard_nb(psi):
    dim = psi.shape[0]
    h = 1
    while h < dim:
        for start in range(0, dim, 2 * h):
            for k in range(start, start + h):
                a = psi[k]
                b = psi[k + h]
                psi[k] = (a + b) * _INV_SQRT2
                psi[k + h] = (a - b) * _INV_SQRT2
        h *= 2
    return psi


def walsh_hadamard_np(psi):
    dim = psi.shape[0]
    n = dim.bit_length() - 1
    h = 1
    for _ in range(n):
        view = psi.reshape(-1, 2, h)
        a = view[:, 0, :].copy()
        b = view[:, 1, :]
        view[:, 0, :] = (a + b) * _INV_SQRT2
        view[:, 1, :] = (a - b) * _INV_SQRT2
        h *= 2
    return psi


# --------------------------------------------------------------------------
# Per-qubit RX(theta_q) = exp(-i theta_q X / 2), in place
# --------------------------------------------------------------------------

@njit
def rx_layer_nb(psi, thetas):
    dim = psi.shape[0]
    n = thetas.shape[0]
    for q in range(n):
        c = np.cos(0.5 * thetas[q])
        s = np.sin(0.5 * thetas[q])
        ms = -1j * s
        step = 1 << q
        for start in range(0, dim, 2 * step):
            for k in range(start, start + step):
                a = psi[k]
                b = psi[k + step]
                psi[k] = c * a + ms * b
                psi[k + step] = ms * a + c * b
    return psi


def rx_layer_np(psi, thetas):
    for q, theta in enumerate(thetas):
        c = np.cos(0.5 * theta)
        ms = -1j * np.sin(0.5 * theta)
        step = 1 << q
        view = psi.reshape(-1, 2, step)
        a = view[:, 0, :].copy()
        b = view[:, 1, :].copy()
        view[:, 0, :] = c * a + ms * b
        view[:, 1, :] = ms * a + c * b
    return psi


# --------------------------------------------------------------------------
# Diagonal-cost QAOA layers with transverse X mixer, in place
# --------------------------------------------------------------------------

@njit
def qaoa_layers_nb(psi, cost, gammas, betas):
    dim = psi.shape[0]
    n = 0
    while (1 << n) < dim:
        n += 1
    for layer in range(gammas.shape[0]):
        g = gammas[layer]
        for k in range(dim):
            psi[k] *= np.exp(-1j * g * cost[k])
        c = np.cos(betas[layer])
        ms = -1j * np.sin(betas[layer])
        for q in range(n):
            step = 1 << q
            for start in range(0, dim, 2 * step):
                for k in range(start, start + step):
                    a = psi[k]
                    b = psi[k + step]
                    psi[k] = c * a + ms * b
                    psi[k + step] = ms * a + c * b
    return psi


def qaoa_layers_np(psi, cost, gammas, betas):
    n = psi.shape[0].bit_length() - 1
    for g, b in zip(gammas, betas):
        psi *= np.exp(-1j * g * cost)
        rx_layer_np(psi, np.full(n, 2.0 * b))
    return psi


# --------------------------------------------------------------------------
# Row maxima of a product of real matrices: max_j (Z @ F)[i, j]
# --------------------------------------------------------------------------

@njit
def rowmax_matmul_nb(z, f):
    n, k = z.shape
    m = f.shape[1]
    out = np.empty(n)
    acc = np.empty(m)
    for i in range(n):
        for j in range(m):
            acc[j] = 0.0
        for t in range(k):
            zt = z[i, t]
            if zt != 0.0:
                for j in range(m):
                    acc[j] += zt * f[t, j]
        best = acc[0]
        for j in range(1, m):
            if acc[j] > best:
                best = acc[j]
        out[i] = best
    return out


def rowmax_matmul_np(z, f):
    return (z @ f).max(axis=1)


# --------------------------------------------------------------------------
# Max over blocks of centred within-block values:
#   max_{a,i} (z[a, i] - mean_i z[a, i])  for z of shape (n, blocks, d)
# --------------------------------------------------------------------------

@njit
def centered_block_max_nb(z):
    n, blocks, d = z.shape
    out = np.empty(n)
    for s in range(n):
        best = -np.inf
        for a in range(blocks):
            tot = 0.0
            top = -np.inf
            for i in range(d):
                v = z[s, a, i]
                tot += v
                if v > top:
                    top = v
            val = top - tot / d
            if val > best:
                best = val
        out[s] = best
    return out


def centered_block_max_np(z):
    return (z.max(axis=2) - z.mean(axis=2)).max(axis=1)


if USE_NUMBA:
    walsh_hadamard = walsh_hadamard_nb
    rx_layer = rx_layer_nb
    qaoa_layers = qaoa_layers_nb
    centered_block_max = centered_block_max_nb
else:
    walsh_hadamard = walsh_hadamard_np
    rx_layer = rx_layer_np
    qaoa_layers = qaoa_layers_np
    centered_block_max = centered_block_max_np

# BLAS beats the fused loop for every ensemble size used here (see
# benchmarks/bench_kernels.py), so the width estimator always uses numpy.
rowmax_matmul = rowmax_matmul_np
