"""Gates and Kraus channels.

Rotations follow ``R_a(angle) = exp(-i * angle * sigma_a / 2)``. With that
convention ``U(r) = R_y(-theta) R_z(-phi)`` satisfies
``U^dagger sigma_z U = r . sigma`` for ``r = (cos phi sin theta, sin phi sin theta, cos theta)``.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional, Sequence

import numpy as np

from .densmat import (
    I2,
    PAULI,
    DensityMatrix,
    StateLike,
    ValidationError,
    apply_local,
    as_matrix,
    ensure_valid,
    qubits_for_dim,
)

COMPLETENESS_TOL = 1e-10


@dataclasses.dataclass(frozen=True)
class Rotation:
    axis: str
    angle: float

    def __post_init__(self):
        if self.axis not in ("x", "y", "z"):
            raise ValidationError(f"rotation axis must be x, y or z, got {self.axis!r}")


def rotation_matrix(rot: Rotation) -> np.ndarray:
    half = 0.5 * rot.angle
    return math.cos(half) * I2 - 1j * math.sin(half) * PAULI[rot.axis.upper()]


def rx(angle: float) -> np.ndarray:
    return rotation_matrix(Rotation("x", angle))


def ry(angle: float) -> np.ndarray:
    return rotation_matrix(Rotation("y", angle))


def rz(angle: float) -> np.ndarray:
    return rotation_matrix(Rotation("z", angle))


def direction_unitary(theta: float, phi: float) -> np.ndarray:
    """Rotation taking the eigenbasis of ``r . sigma`` onto the computational basis."""
    return ry(-theta) @ rz(-phi)


def _check_qubit(qubit: int, n: int) -> None:
    if not 0 <= qubit < n:
        raise ValidationError(f"qubit {qubit} out of range for {n} qubits")


def embed_single(gate: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """``1 x ... x gate x ... x 1`` with ``gate`` at factor position ``qubit``."""
    _check_qubit(qubit, n)
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (2, 2):
        raise ValidationError(f"single-qubit gate must be 2x2, got {gate.shape}")
    return np.kron(np.kron(np.eye(2**qubit), gate), np.eye(2 ** (n - qubit - 1)))


def cnot(control: int, target: int, n: int) -> np.ndarray:
    """Permutation matrix flipping ``target`` when ``control`` is 1."""
    _check_qubit(control, n)
    _check_qubit(target, n)
    if control == target:
        raise ValidationError("control and target must differ")
    d = 2**n
    cbit, tbit = 1 << (n - 1 - control), 1 << (n - 1 - target)
    u = np.zeros((d, d), dtype=complex)
    for i in range(d):
        u[i ^ tbit if i & cbit else i, i] = 1.0
    return u


@dataclasses.dataclass(frozen=True, eq=False)
class KrausChannel:
    """Trace-preserving channel ``rho -> sum_k E_k rho E_k^dagger``."""

    elements: tuple

    def __post_init__(self):
        elems = tuple(np.array(e, dtype=complex) for e in self.elements)
        if not elems:
            raise ValidationError("a channel needs at least one Kraus element")
        shape = elems[0].shape
        if len(shape) != 2 or shape[0] != shape[1] or any(e.shape != shape for e in elems):
            raise ValidationError("Kraus elements must be square and of equal size")
        qubits_for_dim(shape[0])
        residue = self.completeness_residue(elems)
        if residue > COMPLETENESS_TOL:
            raise ValidationError(f"Kraus elements not complete: residue {residue:.3e}")
        for e in elems:
            e.setflags(write=False)
        object.__setattr__(self, "elements", elems)

    @staticmethod
    def completeness_residue(elements) -> float:
        total = sum(e.conj().T @ e for e in elements)
        return float(np.max(np.abs(total - np.eye(total.shape[0]))))

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    @property
    def num_qubits(self) -> int:
        return qubits_for_dim(self.dim)


def compose(first: KrausChannel, second: KrausChannel) -> KrausChannel:
    """Channel applying ``first`` then ``second``; zero products are dropped."""
    elems = [b @ a for a in first.elements for b in second.elements]
    kept = [e for e in elems if np.any(np.abs(e) > 0)]
    return KrausChannel(tuple(kept))


def kraus_map(m: np.ndarray, ch: KrausChannel, qubit: Optional[int] = None) -> np.ndarray:
    """``sum_k E_k m E_k^dagger`` on an arbitrary matrix, without validity checks.

    The map is linear, so it may be applied to deviation matrices or to a
    scaled component of a state.
    """
    m = np.asarray(m, dtype=complex)
    n = qubits_for_dim(m.shape[0])
    if qubit is None:
        if ch.dim != m.shape[0]:
            raise ValidationError(f"channel dimension {ch.dim} does not match state {m.shape[0]}")
        return sum(e @ m @ e.conj().T for e in ch.elements)
    _check_qubit(qubit, n)
    if ch.dim != 2:
        raise ValidationError("local application needs a single-qubit channel")
    return sum(apply_local(m, e, qubit, n) for e in ch.elements)


def apply_channel(rho: StateLike, ch: KrausChannel, qubit: Optional[int] = None) -> DensityMatrix:
    """Apply ``ch`` to the whole state, or a single-qubit ``ch`` to ``qubit``.

    Raises:
        ValidationError: on dimension mismatch.
        InvariantError: if the output is not a valid density matrix.
    """
    result = DensityMatrix(kraus_map(as_matrix(rho), ch, qubit))
    ensure_valid(result, "channel output")
    return result


def apply_unitary(rho: StateLike, u: np.ndarray, qubit: Optional[int] = None) -> DensityMatrix:
    """``U rho U^dagger``; with ``qubit`` set, ``u`` is a 2x2 gate on that qubit."""
    m = as_matrix(rho)
    if qubit is None:
        if u.shape != m.shape:
            raise ValidationError(f"unitary shape {u.shape} does not match state {m.shape}")
        return DensityMatrix(u @ m @ u.conj().T)
    n = qubits_for_dim(m.shape[0])
    _check_qubit(qubit, n)
    return DensityMatrix(apply_local(m, np.asarray(u, dtype=complex), qubit, n))


def apply_local_unitaries(rho: StateLike, gates: Sequence[np.ndarray]) -> DensityMatrix:
    """Apply ``gates[i]`` to qubit ``i`` (the tensor product ``U_0 x ... x U_{N-1}``)."""
    m = as_matrix(rho)
    n = qubits_for_dim(m.shape[0])
    if len(gates) != n:
        raise ValidationError(f"need {n} single-qubit gates, got {len(gates)}")
    # Unitaries fix the identity; rotating only the traceless part keeps the
    # tiny deviation of a pseudo-pure state free of roundoff from the background.
    background = np.trace(m) / m.shape[0]
    dev = m - background * np.eye(m.shape[0])
    for q, g in enumerate(gates):
        dev = apply_local(dev, np.asarray(g, dtype=complex), q, n)
    return DensityMatrix(dev + background * np.eye(m.shape[0]))


def unitary_channel(u: np.ndarray) -> KrausChannel:
    return KrausChannel((u,))


def amplitude_damping(gamma: float) -> KrausChannel:
    """Decay ``|1> -> |0>`` with probability ``gamma``."""
    if not 0.0 <= gamma <= 1.0:
        raise ValidationError(f"damping probability must be in [0, 1], got {gamma}")
    e0 = np.array([[1, 0], [0, math.sqrt(1 - gamma)]])
    e1 = np.array([[0, math.sqrt(gamma)], [0, 0]])
    return KrausChannel((e0, e1))


def phase_damping(lam: float) -> KrausChannel:
    """Off-diagonals scaled by ``sqrt(1 - lam)``; populations untouched."""
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"phase damping parameter must be in [0, 1], got {lam}")
    e0 = np.array([[1, 0], [0, math.sqrt(1 - lam)]])
    e1 = np.array([[0, 0], [0, math.sqrt(lam)]])
    return KrausChannel((e0, e1))


def full_dephasing() -> KrausChannel:
    return KrausChannel((np.diag([1.0, 0.0]), np.diag([0.0, 1.0])))


@dataclasses.dataclass(frozen=True)
class RelaxationParams:
    """T1/T2 for one qubit plus the time it spends relaxing, all in seconds.

    ``t1`` may be ``math.inf`` to switch off population decay.
    """

    t1: float
    t2: float
    duration: float

    def __post_init__(self):
        if not (self.t1 > 0 and self.t2 > 0):
            raise ValidationError("T1 and T2 must be positive")
        if not self.duration >= 0:
            raise ValidationError("duration must be non-negative")
        if self.t2 > 2 * self.t1:
            raise ValidationError(
                f"T2={self.t2} > 2*T1={2 * self.t1} implies a negative pure-dephasing rate"
            )

    def with_duration(self, duration: float) -> "RelaxationParams":
        return dataclasses.replace(self, duration=duration)


def relaxation_channel(params: RelaxationParams) -> KrausChannel:
    """Single-qubit T1/T2 relaxation toward ``|0>``.

    Amplitude damping with ``p1 = 1 - exp(-t/T1)`` followed by enough phase
    damping that coherences shrink by exactly ``exp(-t/T2)`` overall.
    Elements are built from the exponentials directly so that survival
    factors far below machine epsilon are not rounded away.
    """
    t = params.duration
    survive = math.exp(-t / params.t1)
    # amplitude damping already scales coherences by exp(-t / (2 T1))
    rate = 2 * t / params.t2 - t / params.t1
    keep = math.exp(-rate)
    damping = (
        np.array([[1, 0], [0, math.sqrt(survive)]]),
        np.array([[0, math.sqrt(-math.expm1(-t / params.t1))], [0, 0]]),
    )
    dephasing = (
        np.array([[1, 0], [0, math.sqrt(keep)]]),
        np.array([[0, 0], [0, math.sqrt(max(-math.expm1(-rate), 0.0))]]),
    )
    return compose(KrausChannel(damping), KrausChannel(dephasing))


def relaxation_map(m: np.ndarray, params: Sequence[RelaxationParams]) -> np.ndarray:
    """Relax every qubit independently; ``params[i]`` belongs to qubit ``i``.

    Linear and unvalidated, like :func:`kraus_map`.
    """
    m = np.asarray(m, dtype=complex)
    n = qubits_for_dim(m.shape[0])
    if len(params) != n:
        raise ValidationError(f"need relaxation parameters for {n} qubits, got {len(params)}")
    for q, p in enumerate(params):
        m = kraus_map(m, relaxation_channel(p), qubit=q)
    return m


def apply_relaxation(rho: StateLike, params: Sequence[RelaxationParams]) -> DensityMatrix:
    result = DensityMatrix(relaxation_map(as_matrix(rho), params))
    ensure_valid(result, "relaxed state")
    return result
