"""Bulk-ensemble pipeline and the separability gate.

A pseudo-pure state with ``eps <= 1/(1 + 2**(N-1))`` is separable, so a local
hidden-variable description of the ensemble exists. The model is used here
operationally: every step of the experiment (preparation from equilibrium,
relaxation, rotations, gradient, spectral readout, reference normalization)
is simulated as a Kraus map and analyzed exactly like measured spectra.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .bell import (
    InequalitySpec,
    chsh_spec,
    evaluate_inequality,
    is_violation,
)
from .channels import RelaxationParams
from .densmat import DensityMatrix, PureState, ValidationError, pure_to_density
from .pps import prepare, relax_polarized
from .readout import (
    SpectrumModel,
    correlation_from_spectrum,
    normalize_by_reference,
    read_spectrum,
)

Relaxation = Union[None, RelaxationParams, Sequence[RelaxationParams]]


def separability_bound(n: int) -> float:
    """Largest polarization for which every ``n``-qubit PPS is separable."""
    if n < 1:
        raise ValidationError("need at least one qubit")
    return 1.0 / (1 + 2 ** (n - 1))


@dataclasses.dataclass(frozen=True)
class Applicability:
    applicable: bool
    margin: float
    bound: float


def lrhvm_applicable(epsilon: float, n: int) -> Applicability:
    """Whether the ensemble at ``epsilon`` admits the local realistic reading.

    The boundary counts as applicable. ``margin`` is ``bound - epsilon``.
    """
    if not 0.0 < epsilon <= 1.0:
        raise ValidationError(f"polarization must lie in (0, 1], got {epsilon!r}")
    bound = separability_bound(n)
    return Applicability(epsilon <= bound, bound - epsilon, bound)


def per_qubit_relaxation(relaxation: Relaxation, n: int) -> Optional[List[RelaxationParams]]:
    if relaxation is None:
        return None
    if isinstance(relaxation, RelaxationParams):
        return [relaxation] * n
    params = list(relaxation)
    if len(params) != n:
        raise ValidationError(f"relaxation given for {len(params)} qubits, state has {n}")
    return params


@dataclasses.dataclass(frozen=True, eq=False)
class EnsembleRun:
    target: PureState
    epsilon: float
    theta_grid: Sequence[float]
    relaxation: Relaxation = None
    from_equilibrium: bool = True
    label: str = "custom"

    def __post_init__(self):
        grid = tuple(float(t) for t in self.theta_grid)
        if not grid:
            raise ValidationError("theta grid is empty")
        if any(not -1e-12 <= t <= math.pi / 2 + 1e-12 for t in grid):
            raise ValidationError("theta grid values must lie in [0, pi/2]")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValidationError(f"polarization must lie in (0, 1], got {self.epsilon!r}")
        object.__setattr__(self, "theta_grid", grid)
        per_qubit_relaxation(self.relaxation, self.target.num_qubits)


@dataclasses.dataclass(frozen=True)
class ExperimentRecord:
    state: str
    epsilon: float
    theta: float
    relaxation: Optional[Tuple[RelaxationParams, ...]]
    correlations: Tuple[float, ...]
    value_normalized: float
    value_raw: float
    violated_normalized: bool
    violated_raw: bool


@dataclasses.dataclass(frozen=True)
class SweepResult:
    records: List[ExperimentRecord]
    threshold_epsilon: Optional[float] = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


@dataclasses.dataclass(frozen=True, eq=False)
class BulkSample:
    """A prepared (and possibly relaxed) ensemble with its reference readout."""

    rho: DensityMatrix
    reference: SpectrumModel
    epsilon: float


def prepare_bulk(
    target: PureState,
    epsilon: float,
    relaxation: Relaxation = None,
    from_equilibrium: bool = True,
) -> BulkSample:
    """Prepare signal and ``|0...0>`` reference ensembles through the same route."""
    n = target.num_qubits
    params = per_qubit_relaxation(relaxation, n)

    def run(psi: PureState) -> DensityMatrix:
        rho = prepare(psi, epsilon, from_equilibrium).rho
        if params is not None:
            rho = relax_polarized(rho, epsilon, params)
        return rho

    reference_rho = run(PureState.basis("0" * n))
    reference = read_spectrum(reference_rho, [(0.0, 0.0)] * n)
    return BulkSample(run(target), reference, epsilon)


def bulk_correlation(sample: BulkSample, dirs) -> Tuple[float, float]:
    """Normalized and raw correlation read from spin 0's spectrum."""
    spectrum = read_spectrum(sample.rho, [(d.theta, d.phi) for d in dirs])
    normalized = normalize_by_reference(spectrum, sample.reference)
    return correlation_from_spectrum(normalized), correlation_from_spectrum(spectrum)


def bulk_inequality(spec: InequalitySpec, sample: BulkSample) -> Tuple[float, float, Tuple[float, ...]]:
    """Inequality value from bulk readout: ``(normalized, raw, per-term normalized E)``."""
    if spec.num_observers != sample.rho.num_qubits:
        raise ValidationError(
            f"inequality has {spec.num_observers} observers but the ensemble has {sample.rho.num_qubits} qubits"
        )
    value = raw = 0.0
    terms = []
    for key, c in spec.coefficients.items():
        if not c:
            continue
        e_norm, e_raw = bulk_correlation(sample, spec.term_directions(key))
        value += c * e_norm
        raw += c * e_raw
        terms.append(e_norm)
    return value, raw, tuple(terms)


def _map(fn: Callable, items: Sequence, workers: Optional[int]) -> list:
    if workers and workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def bulk_chsh_curve(run: EnsembleRun, workers: Optional[int] = None, spec_for=chsh_spec) -> SweepResult:
    """CHSH(theta) of the bulk ensemble over ``run.theta_grid``.

    ``spec_for(theta)`` builds the inequality at each grid point, so another
    two-setting inequality can be swept with the same machinery.
    """
    sample = prepare_bulk(run.target, run.epsilon, run.relaxation, run.from_equilibrium)
    params = per_qubit_relaxation(run.relaxation, run.target.num_qubits)
    relax = tuple(params) if params else None

    def point(theta: float) -> ExperimentRecord:
        spec = spec_for(theta)
        value, raw, terms = bulk_inequality(spec, sample)
        return ExperimentRecord(
            state=run.label,
            epsilon=run.epsilon,
            theta=theta,
            relaxation=relax,
            correlations=terms,
            value_normalized=value,
            value_raw=raw,
            violated_normalized=is_violation(value, spec.classical_bound),
            violated_raw=is_violation(raw, spec.classical_bound),
        )

    return SweepResult(_map(point, run.theta_grid, workers))


def crossing_threshold(eps: Sequence[float], values: Sequence[float], bound: float) -> Optional[float]:
    """First polarization where ``|value|`` rises through ``bound``, by linear interpolation."""
    pairs = sorted(zip(eps, (abs(v) for v in values)))
    for (e0, v0), (e1, v1) in zip(pairs, pairs[1:]):
        if v0 <= bound < v1 or (v0 < bound <= v1):
            return e0 + (bound - v0) * (e1 - e0) / (v1 - v0)
    return None


def polarization_sweep(
    target: PureState,
    eps_grid: Sequence[float],
    theta_star: float,
    label: str = "custom",
    workers: Optional[int] = None,
    spec_for=chsh_spec,
) -> SweepResult:
    """Raw (unnormalized) inequality value at ``theta_star`` for each polarization.

    Without reference normalization the value scales with ``eps``; the
    threshold where it crosses the classical bound is reported.
    """
    grid = [float(e) for e in eps_grid]
    if not grid:
        raise ValidationError("polarization grid is empty")
    if any(not 0.0 < e <= 1.0 for e in grid):
        raise ValidationError("polarization grid values must lie in (0, 1]")
    spec = spec_for(theta_star)

    def point(eps: float) -> ExperimentRecord:
        value, raw, terms = bulk_inequality(spec, prepare_bulk(target, eps))
        return ExperimentRecord(
            state=label,
            epsilon=eps,
            theta=theta_star,
            relaxation=None,
            correlations=terms,
            value_normalized=value,
            value_raw=raw,
            violated_normalized=is_violation(value, spec.classical_bound),
            violated_raw=is_violation(raw, spec.classical_bound),
        )

    records = _map(point, grid, workers)
    threshold = crossing_threshold(grid, [r.value_raw for r in records], spec.classical_bound)
    return SweepResult(records, threshold)


def pure_chsh_curve(target: PureState, theta_grid: Sequence[float], spec_for=chsh_spec) -> List[float]:
    """The pure-state quantum prediction on the same grid."""
    rho = pure_to_density(target)
    return [evaluate_inequality(spec_for(t), rho).value for t in theta_grid]



def detected_state(target: PureState, relaxation: Relaxation = None) -> DensityMatrix:
    """State of the polarized fraction alone, the sub-ensemble NMR actually sees."""
    rho = pure_to_density(target)
    params = per_qubit_relaxation(relaxation, target.num_qubits)
    if params is None:
        return rho
    return relax_polarized(rho, 1.0, params)
