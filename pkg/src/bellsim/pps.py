"""State preparation: target states, pseudo-pure states, thermal equilibrium.

A pseudo-pure state mixes a pure target with the maximally mixed state,
``rho = (1 - eps)/2**N * 1 + eps |psi><psi|``. Only its deviation from the
identity is visible to NMR detection, and that part transforms like the pure
state under any unitary.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from .channels import cnot, relaxation_map, rx, ry
from .densmat import (
    DensityMatrix,
    PureState,
    StateLike,
    ValidationError,
    apply_local,
    as_matrix,
    ensure_valid,
    pure_to_density,
    qubits_for_dim,
)
from .readout import gradient_dephase

# Keeps the first-order expansion of exp(-beta H) honest.
MAX_THERMAL_WEIGHT = 0.1

STATE_LABELS = ("zero", "uniform", "cat", "singlet", "custom")


def named_state(label: str, n: int = 2, amplitudes=None) -> PureState:
    """The states used in the CHSH runs.

    ``zero`` is ``|0...0>``, ``uniform`` the equal superposition, ``cat`` the
    GHZ state ``(|0...0> + |1...1>)/sqrt2`` and ``singlet``
    ``(|01> - |10>)/sqrt2`` (two qubits only). ``custom`` normalizes the given
    amplitudes.
    """
    d = 2**n
    if label == "zero":
        return PureState.basis("0" * n)
    if label == "uniform":
        return PureState(np.full(d, 1 / math.sqrt(d)))
    if label == "cat":
        amps = np.zeros(d)
        amps[0] = amps[-1] = 1 / math.sqrt(2)
        return PureState(amps)
    if label == "singlet":
        if n != 2:
            raise ValidationError("the singlet is defined for two qubits")
        return PureState(np.array([0, 1, -1, 0]) / math.sqrt(2))
    if label == "custom":
        if amplitudes is None:
            raise ValidationError("custom state needs amplitudes")
        return PureState.normalized(amplitudes)
    raise ValidationError(f"unknown state label {label!r}; expected one of {', '.join(STATE_LABELS)}")


@dataclasses.dataclass(frozen=True, eq=False)
class PseudoPureState:
    epsilon: float
    target: PureState
    rho: DensityMatrix

    @property
    def num_qubits(self) -> int:
        return self.target.num_qubits


def _check_epsilon(epsilon: float) -> None:
    if not 0.0 < epsilon <= 1.0:
        raise ValidationError(f"polarization must lie in (0, 1], got {epsilon!r}")


def pps_matrix(target: PureState, epsilon: float) -> np.ndarray:
    d = target.amplitudes.size
    return (1 - epsilon) / d * np.eye(d) + epsilon * pure_to_density(target).matrix


def make_pps(target: PureState, epsilon: float) -> PseudoPureState:
    """Pseudo-pure state with polarization ``epsilon`` around ``target``."""
    _check_epsilon(epsilon)
    rho = DensityMatrix(pps_matrix(target, epsilon))
    ensure_valid(rho, "pseudo-pure state")
    return PseudoPureState(epsilon, target, rho)


@dataclasses.dataclass(frozen=True)
class ThermalConfig:
    """High-temperature equilibrium of uncoupled spins.

    ``weights[i]`` is ``beta * omega_i / 2`` for qubit ``i``; the Hamiltonian is
    ``H = -sum_i (omega_i / 2) sigma_z^(i)`` so that ``|0>`` is the lower,
    more populated level.
    """

    weights: tuple

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if not w:
            raise ValidationError("thermal state needs at least one qubit")
        bad = [x for x in w if not abs(x) < MAX_THERMAL_WEIGHT]
        if bad:
            raise ValidationError(
                f"thermal weights {bad} break the high-temperature expansion (|w| < {MAX_THERMAL_WEIGHT})"
            )
        object.__setattr__(self, "weights", w)

    @property
    def num_qubits(self) -> int:
        return len(self.weights)


def thermal_state(cfg: ThermalConfig) -> DensityMatrix:
    """``(1 - beta H) / 2**N``, diagonal in the computational basis."""
    n = cfg.num_qubits
    idx = np.arange(2**n)
    diag = np.ones(2**n)
    for q, w in enumerate(cfg.weights):
        z = 1 - 2 * ((idx >> (n - 1 - q)) & 1)
        diag = diag + w * z
    rho = DensityMatrix(np.diag(diag / 2**n))
    ensure_valid(rho, "thermal state")
    return rho


def spatial_average(rho_eq: StateLike) -> tuple[DensityMatrix, float]:
    """Turn a two-spin equilibrium state into the ``|00>`` pseudo-pure state.

    Gate-and-gradient version of spatial averaging: a nutation of the less
    split spin followed by a crusher gradient equalizes polarizations, then a
    pi/4 pulse, a CNOT and a -pi/4 pulse move half of the other spin's
    polarization into the two-spin order, and a second gradient removes all
    coherences. Returns the state and its polarization.
    """
    m = as_matrix(rho_eq)
    if qubits_for_dim(m.shape[0]) != 2:
        raise ValidationError("spatial averaging is implemented for two spins")
    diag = np.real(np.diag(m))
    # z-polarizations <Z1>, <Z2> of the input
    pol = [diag[0] + diag[1] - diag[2] - diag[3], diag[0] - diag[1] + diag[2] - diag[3]]
    split = max(
        (q for q in (0, 1) if 0 < pol[q] / 2 <= pol[1 - q]),
        key=lambda q: pol[q],
        default=None,
    )
    if split is None:
        raise ValidationError(f"spin polarizations {pol} cannot be averaged into a pseudo-pure state")
    other = 1 - split
    nutation = math.acos(min(pol[split] / (2 * pol[other]), 1.0))
    m = apply_local(m, rx(nutation), other, 2)
    m = gradient_dephase(m).matrix
    m = apply_local(m, ry(math.pi / 4), split, 2)
    c = cnot(other, split, 2)
    m = c @ m @ c.conj().T
    m = apply_local(m, ry(-math.pi / 4), split, 2)
    rho = gradient_dephase(m)
    ensure_valid(rho, "spatially averaged state")
    return rho, pol[split] / 2


def equilibrium_for(epsilon: float, n: int = 2) -> ThermalConfig:
    """Equal-weight equilibrium whose spatial average has polarization ``epsilon``."""
    _check_epsilon(epsilon)
    return ThermalConfig((2 * epsilon,) * n)


def preparation_unitary(target: PureState) -> np.ndarray:
    """A unitary taking ``|0...0>`` to ``target`` (Householder reflection)."""
    psi = target.amplitudes
    d = psi.size
    phase = psi[0] / abs(psi[0]) if abs(psi[0]) > 1e-15 else 1.0
    e0 = np.zeros(d, dtype=complex)
    e0[0] = 1.0
    v = psi / phase - e0
    nv = np.linalg.norm(v)
    if nv < 1e-15:
        return phase * np.eye(d, dtype=complex)
    v /= nv
    return phase * (np.eye(d) - 2 * np.outer(v, v.conj()))


def prep_sequence_cat(epsilon: float) -> PseudoPureState:
    """Cat-state PPS built from the ``|00>`` PPS by gates and a gradient.

    Crusher gradient, ``R_y(pi/2)`` on qubit 0, then CNOT(0 -> 1).
    """
    start = make_pps(PureState.basis("00"), epsilon)
    m = gradient_dephase(start.rho).matrix
    m = apply_local(m, ry(math.pi / 2), 0, 2)
    c = cnot(0, 1, 2)
    rho = DensityMatrix(c @ m @ c.conj().T)
    ensure_valid(rho, "cat preparation")
    return PseudoPureState(epsilon, named_state("cat"), rho)


def prepare(target: PureState, epsilon: float, from_equilibrium: bool = True) -> PseudoPureState:
    """Prepare a PPS the way the bulk experiment does.

    Two-qubit runs with a polarization small enough for the high-temperature
    equilibrium start from ``rho_eq``, spatially average to the ``|00>`` PPS
    and then apply the target's preparation unitary. Everything else is
    built directly.
    """
    _check_epsilon(epsilon)
    n = target.num_qubits
    if not (from_equilibrium and n == 2 and 2 * epsilon < MAX_THERMAL_WEIGHT):
        return make_pps(target, epsilon)
    rho, _ = spatial_average(thermal_state(equilibrium_for(epsilon, n)))
    u = preparation_unitary(target)
    dev = rho.matrix - 0.25 * np.eye(4)
    rho = DensityMatrix(u @ dev @ u.conj().T + 0.25 * np.eye(4))
    ensure_valid(rho, "prepared state")
    return PseudoPureState(epsilon, target, rho)


def deviation(rho: StateLike) -> np.ndarray:
    """``rho - Tr(rho) * 1 / 2**N``."""
    m = as_matrix(rho)
    d = m.shape[0]
    return m - np.trace(m) / d * np.eye(d)


def fidelity_delta(rho_exp: StateLike, rho_id: StateLike) -> float:
    """Relative Frobenius distance between deviation matrices.

    Raises:
        ValidationError: on shape mismatch or a reference with no deviation.
    """
    a, b = as_matrix(rho_exp), as_matrix(rho_id)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch {a.shape} vs {b.shape}")
    ref = deviation(b)
    norm = np.linalg.norm(ref)
    if norm == 0:
        raise ValidationError("reference deviation has zero norm")
    return float(np.linalg.norm(deviation(a) - ref) / norm)


def relax_polarized(pps_rho: StateLike, epsilon: float, params: Sequence) -> DensityMatrix:
    """Relax only the polarized fraction of a pseudo-pure state.

    The maximally mixed background is the infinite-temperature equilibrium and
    is left alone; the fraction ``epsilon`` relaxes through the T1/T2 channel.
    Equals the plain channel at ``epsilon = 1``.
    """
    m = as_matrix(pps_rho)
    d = m.shape[0]
    background = (1 - epsilon) / d * np.eye(d)
    rho = DensityMatrix(background + relaxation_map(m - background, params))
    ensure_valid(rho, "relaxed state")
    return rho

