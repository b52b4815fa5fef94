"""NMR readout emulation.

A field gradient stands in for projective measurement in the computational
basis; the spectrum of one spin is reduced to the population differences
across its transitions, one line per configuration of the other spins.
"""

from __future__ import annotations

import dataclasses
import itertools
from typing import Dict, List, Mapping, Tuple

import numpy as np

from .channels import apply_local_unitaries, direction_unitary
from .densmat import (
    DensityMatrix,
    StateLike,
    ValidationError,
    as_matrix,
    pauli_string,
    qubits_for_dim,
    ValidityReport,
    validate,
)

POPULATION_TOL = 1e-12
REFERENCE_FLOOR = 1e-14
EXPECTATION_SLACK = 1e-9

# Per-qubit (theta, phi) that rotate the named Pauli axis onto sigma_z.
AXIS_ANGLES = {"x": (np.pi / 2, 0.0), "y": (np.pi / 2, np.pi / 2), "z": (0.0, 0.0)}


def gradient_dephase(rho: StateLike) -> DensityMatrix:
    """Zero every off-diagonal element; the diagonal is kept bit for bit."""
    m = as_matrix(rho)
    return DensityMatrix(np.diag(np.diag(m)))


def basis_labels(n: int) -> List[str]:
    return ["".join(bits) for bits in itertools.product("01", repeat=n)]


@dataclasses.dataclass(frozen=True, eq=False)
class PopulationVector:
    populations: np.ndarray
    labels: Tuple[str, ...]

    @property
    def num_qubits(self) -> int:
        return len(self.labels[0])


def extract_populations(rho: StateLike) -> PopulationVector:
    """Diagonal of ``rho`` in basis-label order, tiny negatives clipped to 0.

    Raises:
        ValidationError: if a population is negative beyond roundoff.
    """
    m = as_matrix(rho)
    n = qubits_for_dim(m.shape[0])
    pops = np.real(np.diag(m)).copy()
    if np.any(pops < -POPULATION_TOL):
        raise ValidationError(f"negative population {pops.min():.3e}")
    pops[pops < 0] = 0.0
    pops.setflags(write=False)
    return PopulationVector(pops, tuple(basis_labels(n)))


@dataclasses.dataclass(frozen=True, eq=False)
class SpectrumModel:
    """Line amplitudes of one spin, indexed by the other spins' bits (in qubit order)."""

    spin: int
    line_amplitudes: np.ndarray


def spectral_amplitudes(pops: PopulationVector, spin: int) -> SpectrumModel:
    """``P(spin=0, c) - P(spin=1, c)`` for each configuration ``c`` of the other spins."""
    n = pops.num_qubits
    if not 0 <= spin < n:
        raise ValidationError(f"spin {spin} out of range for {n} qubits")
    t = pops.populations.reshape((2,) * n)
    t = np.moveaxis(t, spin, 0)
    lines = (t[0] - t[1]).ravel()
    return SpectrumModel(spin, lines)


def normalize_by_reference(signal: SpectrumModel, reference: SpectrumModel) -> SpectrumModel:
    """Divide every line by the largest-magnitude reference line.

    Raises:
        ValidationError: if the reference has no line above ``1e-14``.
    """
    ref = np.asarray(reference.line_amplitudes)
    k = int(np.argmax(np.abs(ref)))
    if abs(ref[k]) <= REFERENCE_FLOOR:
        raise ValidationError("reference spectrum is empty")
    return SpectrumModel(signal.spin, np.asarray(signal.line_amplitudes) / ref[k])


def correlation_from_spectrum(spectrum: SpectrumModel) -> float:
    """Full N-spin correlation from one spin's lines.

    Each line is weighted by the product of the other spins' outcome signs
    (bit 0 -> +1), which rebuilds ``sum_s (prod s_j) P(s)``; the maximally
    mixed part cancels line by line.
    """
    lines = np.asarray(spectrum.line_amplitudes)
    parity = np.array([bin(i).count("1") & 1 for i in range(lines.size)])
    return float(np.sum(np.where(parity, -1.0, 1.0) * lines))


def read_spectrum(rho: StateLike, directions, spin: int = 0) -> SpectrumModel:
    """Rotate each spin to its measurement direction, dephase, and read ``spin``.

    ``directions`` is a sequence of ``(theta, phi)`` pairs, one per qubit.
    """
    gates = [direction_unitary(th, ph) for th, ph in directions]
    rotated = apply_local_unitaries(rho, gates)
    return spectral_amplitudes(extract_populations(gradient_dephase(rotated)), spin)


# --- tomography -------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class TomographySetting:
    """Readout axis per qubit, e.g. ``("x", "z")``, and the rotation angles realizing it."""

    axes: Tuple[str, ...]

    @property
    def angles(self) -> List[Tuple[float, float]]:
        return [AXIS_ANGLES[a] for a in self.axes]

    @property
    def label(self) -> str:
        return "".join(self.axes).upper()


def tomography_settings(n: int) -> List[TomographySetting]:
    """The ``3**n`` readout settings of Pauli tomography."""
    if n < 1:
        raise ValidationError("tomography needs at least one qubit")
    return [TomographySetting(axes) for axes in itertools.product("xyz", repeat=n)]


def setting_expectations(pops: PopulationVector, setting: TomographySetting) -> Dict[str, float]:
    """All Pauli strings a single setting determines (each letter or I)."""
    n = len(setting.axes)
    p = pops.populations
    signs = 1 - 2 * ((np.arange(p.size)[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1)
    out = {}
    for mask in itertools.product((False, True), repeat=n):
        label = "".join(a.upper() if used else "I" for a, used in zip(setting.axes, mask))
        weight = np.prod(np.where(mask, signs, 1), axis=1)
        out[label] = float(np.dot(weight, p))
    return out


def measure_pauli_expectations(rho: StateLike, settings=None) -> Dict[str, float]:
    """Pauli expectations of ``rho`` through the rotate/dephase/populations readout.

    Strings reachable from several settings are averaged, merged by key.
    """
    n = qubits_for_dim(as_matrix(rho).shape[0])
    settings = tomography_settings(n) if settings is None else settings
    sums: Dict[str, float] = {}
    counts: Dict[str, int] = {}
    for s in settings:
        gates = [direction_unitary(th, ph) for th, ph in s.angles]
        pops = extract_populations(gradient_dephase(apply_local_unitaries(rho, gates)))
        for label, v in setting_expectations(pops, s).items():
            sums[label] = sums.get(label, 0.0) + v
            counts[label] = counts.get(label, 0) + 1
    return {k: sums[k] / counts[k] for k in sorted(sums)}


@dataclasses.dataclass(frozen=True, eq=False)
class TomographyResult:
    rho_reconstructed: DensityMatrix
    pauli_expectations: Dict[str, float]
    validity: ValidityReport


def tomography_reconstruct(expectations: Mapping[str, float]) -> TomographyResult:
    """Linear inversion ``rho = 2**-N sum_P <P> P``.

    The result is Hermitian with unit trace by construction; positivity is
    reported in ``validity`` and not enforced.

    Raises:
        ValidationError: on missing or inconsistent strings, or ``|<P>| > 1``.
    """
    if not expectations:
        raise ValidationError("no expectations given")
    labels = {k.upper(): float(v) for k, v in expectations.items()}
    n = len(next(iter(labels)))
    if any(len(k) != n or set(k) - set("IXYZ") for k in labels):
        raise ValidationError("Pauli strings must all have the same length and use I, X, Y, Z")
    identity = "I" * n
    if identity in labels and abs(labels[identity] - 1.0) > EXPECTATION_SLACK:
        raise ValidationError(f"identity expectation must be 1, got {labels[identity]}")
    labels[identity] = 1.0
    needed = ["".join(p) for p in itertools.product("IXYZ", repeat=n)]
    missing = [k for k in needed if k not in labels]
    if missing:
        raise ValidationError(f"missing Pauli strings: {', '.join(missing[:8])}{'...' if len(missing) > 8 else ''}")
    too_big = {k: v for k, v in labels.items() if abs(v) > 1 + EXPECTATION_SLACK}
    if too_big:
        raise ValidationError(f"expectations outside [-1, 1]: {too_big}")
    d = 2**n
    m = np.zeros((d, d), dtype=complex)
    for k in needed:
        if labels[k]:
            m += labels[k] * pauli_string(k)
    rho = DensityMatrix(m / d)
    return TomographyResult(rho, {k: labels[k] for k in needed}, validate(rho))
