"""Dense complex-matrix core: qubit states, operators, tensor products.

Qubit 0 is the leftmost tensor factor, i.e. the most significant bit of the
computational-basis index: ``|b0 b1 ... b_{N-1}>`` sits at row
``sum(b_i * 2**(N-1-i))``.
"""

from __future__ import annotations

import dataclasses
import string
from typing import Iterable, Union

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10
NORM_TOL = 1e-12
OBSERVABLE_TOL = 1e-10

# Raise at runtime (``densmat.MAX_QUBITS = 14``) if you have the memory.
MAX_QUBITS = 12


class ValidationError(ValueError):
    """Bad input: wrong shape, out-of-range parameter, unphysical state."""


class InvariantError(RuntimeError):
    """An internal invariant failed; indicates a bug rather than bad input."""


I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": SX, "Y": SY, "Z": SZ}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def qubits_for_dim(dim: int) -> int:
    """Number of qubits for a Hilbert-space dimension; rejects non powers of two."""
    if dim < 1 or dim & (dim - 1):
        raise ValidationError(f"dimension {dim} is not a power of two")
    n = dim.bit_length() - 1
    if n > MAX_QUBITS:
        raise ValidationError(f"{n} qubits exceeds the cap of {MAX_QUBITS}")
    return n


@dataclasses.dataclass(frozen=True, eq=False)
class PureState:
    """Normalized state vector of ``num_qubits`` qubits."""

    amplitudes: np.ndarray
    num_qubits: int = dataclasses.field(init=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        if amps.size < 2:
            raise ValidationError("a pure state needs at least one qubit")
        n = qubits_for_dim(amps.size)
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise ValidationError(f"state not normalized: sum |a|^2 = {norm2!r}")
        object.__setattr__(self, "amplitudes", _frozen(amps))
        object.__setattr__(self, "num_qubits", n)

    @classmethod
    def normalized(cls, amplitudes) -> "PureState":
        amps = np.asarray(amplitudes, dtype=complex).ravel()
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValidationError("zero vector cannot be normalized")
        return cls(amps / norm)

    @classmethod
    def basis(cls, label: str) -> "PureState":
        """Computational basis state from a bit string such as ``"01"``."""
        if not label or set(label) - {"0", "1"}:
            raise ValidationError(f"bad basis label {label!r}")
        amps = np.zeros(2 ** len(label), dtype=complex)
        amps[int(label, 2)] = 1.0
        return cls(amps)


@dataclasses.dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A ``2**N x 2**N`` complex matrix tagged with its qubit count.

    Construction only checks the shape. Physical validity (Hermitian, unit
    trace, positive) is checked by :func:`validate`, since tomography of noisy
    data legitimately produces matrices that fail it.
    """

    matrix: np.ndarray
    num_qubits: int = dataclasses.field(init=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"density matrix must be square, got shape {m.shape}")
        n = qubits_for_dim(m.shape[0])
        if n < 1:
            raise ValidationError("density matrix must describe at least one qubit")
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "num_qubits", n)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityMatrix":
        d = 2**n
        return cls(np.eye(d) / d)

    def purity(self) -> float:
        return float(np.einsum("ij,ji->", self.matrix, self.matrix).real)


StateLike = Union[DensityMatrix, np.ndarray]


def as_matrix(rho: StateLike) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.matrix
    return np.asarray(rho, dtype=complex)


def pure_to_density(psi: Union[PureState, np.ndarray]) -> DensityMatrix:
    """Return the projector ``|psi><psi|``.

    Raises:
        ValidationError: if ``psi`` is a raw vector that is not normalized.
    """
    if not isinstance(psi, PureState):
        psi = PureState(psi)
    a = psi.amplitudes
    return DensityMatrix(np.outer(a, a.conj()))


def tensor(*factors: np.ndarray) -> np.ndarray:
    """Kronecker product of one or more matrices, left factor most significant."""
    if not factors:
        raise ValidationError("tensor needs at least one factor")
    out = np.asarray(factors[0])
    for f in factors[1:]:
        out = np.kron(out, np.asarray(f))
    return out


def pauli_string(label: str) -> np.ndarray:
    """Matrix of a Pauli string such as ``"XZ"`` (letter i acts on qubit i)."""
    try:
        return tensor(*(PAULI[c] for c in label.upper()))
    except KeyError as exc:
        raise ValidationError(f"bad Pauli string {label!r}") from exc


def hermiticity_residue(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def expectation(rho: StateLike, obs: np.ndarray) -> float:
    """``Tr(rho @ obs)`` for a Hermitian observable, as a real number."""
    m = as_matrix(rho)
    obs = np.asarray(obs, dtype=complex)
    if obs.shape != m.shape:
        raise ValidationError(f"observable shape {obs.shape} does not match state {m.shape}")
    if hermiticity_residue(obs) > OBSERVABLE_TOL:
        raise ValidationError("observable is not Hermitian")
    value = np.einsum("ij,ji->", m, obs)
    if abs(value.imag) > OBSERVABLE_TOL:
        raise ValidationError(f"expectation has imaginary part {value.imag:.3e}; state not Hermitian?")
    return float(value.real)


def partial_trace(rho: StateLike, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on the qubits in ``keep`` (kept in ascending order)."""
    m = as_matrix(rho)
    n = qubits_for_dim(m.shape[0])
    keep = sorted(set(keep))
    if not keep:
        raise ValidationError("keep must name at least one qubit")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValidationError(f"qubit indices {keep} out of range for {n} qubits")
    letters = string.ascii_letters
    rows = list(letters[:n])
    cols = list(letters[n : 2 * n])
    for q in range(n):
        if q not in keep:
            cols[q] = rows[q]
    out = "".join(rows[q] for q in keep) + "".join(cols[q] for q in keep)
    reduced = np.einsum("".join(rows) + "".join(cols) + "->" + out, m.reshape((2,) * (2 * n)))
    d = 2 ** len(keep)
    return DensityMatrix(reduced.reshape(d, d))


def apply_local(m: np.ndarray, op: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """``A m A^dagger`` with ``A`` a single-qubit operator acting on ``qubit``.

    Works on the reshaped tensor so the ``2**n`` operator is never formed.
    """
    d = 2**n
    hi, lo = 2**qubit, 2 ** (n - qubit - 1)
    t = m.reshape(hi, 2, lo, d)
    t = np.einsum("ab,ibjk->iajk", op, t).reshape(d, d)
    t = t.reshape(d, hi, 2, lo)
    t = np.einsum("ab,kibj->kiaj", op.conj(), t)
    return t.reshape(d, d)


@dataclasses.dataclass(frozen=True)
class ValidityReport:
    hermiticity_residue: float
    trace_deviation: float
    min_eigenvalue: float

    @property
    def passed(self) -> bool:
        return (
            self.hermiticity_residue <= HERMITIAN_TOL
            and self.trace_deviation <= TRACE_TOL
            and self.min_eigenvalue >= PSD_TOL
        )

    def __bool__(self) -> bool:
        return self.passed


def validate(rho: StateLike) -> ValidityReport:
    """Report how far ``rho`` is from a physical density matrix. Never raises."""
    m = as_matrix(rho)
    herm = 0.5 * (m + m.conj().T)
    return ValidityReport(
        hermiticity_residue=hermiticity_residue(m),
        trace_deviation=float(abs(np.trace(m) - 1.0)),
        min_eigenvalue=float(np.linalg.eigvalsh(herm)[0]),
    )


def ensure_valid(rho: StateLike, what: str = "state") -> None:
    """Raise :class:`InvariantError` if an internally produced state is unphysical."""
    report = validate(rho)
    if not report.passed:
        raise InvariantError(f"{what} failed validation: {report}")
