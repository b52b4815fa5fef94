"""Independent reference computations for the tests.

Nothing here calls into the package's rotation, readout or channel code: Pauli
matrices and Kraus elements are spelled out literally and probabilities come
from spectral projectors instead of rotate-then-dephase.
"""

import itertools
import math

import numpy as np

I = np.array([[1, 0], [0, 1]], dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)


def spin_along(theta, phi):
    return (
        math.cos(phi) * math.sin(theta) * X
        + math.sin(phi) * math.sin(theta) * Y
        + math.cos(theta) * Z
    )


def kron_all(mats):
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def projector_probabilities(rho, angles):
    """P(s_1..s_N) = Tr(rho (x)_i (1 + s_i r_i.sigma)/2) for every sign pattern."""
    out = {}
    for signs in itertools.product((1, -1), repeat=len(angles)):
        proj = kron_all([(I + s * spin_along(t, p)) / 2 for s, (t, p) in zip(signs, angles)])
        out[signs] = float(np.trace(rho @ proj).real)
    return out


def projector_correlation(rho, angles):
    return sum(math.prod(s) * p for s, p in projector_probabilities(rho, angles).items())


def ad_kraus(gamma):
    return [
        np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex),
    ]


def pd_kraus(lam):
    return [
        np.array([[1, 0], [0, math.sqrt(1 - lam)]], dtype=complex),
        np.array([[0, 0], [0, math.sqrt(lam)]], dtype=complex),
    ]


def relaxation_kraus_single(t1, t2, t):
    gamma = 1 - math.exp(-t / t1)
    lam = 1 - math.exp(-2 * t / t2 + t / t1)
    return [p @ a for a in ad_kraus(gamma) for p in pd_kraus(lam)]


def relaxation_kraus_two(params):
    """All 4x4 products E_a (x) E_b of the two single-qubit element sets."""
    (t1a, t2a, t), (t1b, t2b, _) = params
    ka = relaxation_kraus_single(t1a, t2a, t)
    kb = relaxation_kraus_single(t1b, t2b, t)
    return [np.kron(a, b) for a in ka for b in kb]


def apply_kraus(rho, elements):
    return sum(e @ rho @ e.conj().T for e in elements)


def bloch_relaxation(rho, t1, t2, t):
    """Closed-form single-qubit T1/T2 decay toward |0>."""
    x = 2 * rho[0, 1].real
    y = -2 * rho[0, 1].imag
    z = (rho[0, 0] - rho[1, 1]).real
    z = 1 - (1 - z) * math.exp(-t / t1)
    x, y = x * math.exp(-t / t2), y * math.exp(-t / t2)
    return 0.5 * (I + x * X + y * Y + z * Z)


def random_density(dim, rng, rank=None):
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_unitary(dim, rng):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_pure(dim, rng):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)
