"""Correlation functions and Bell-inequality evaluation.

An inequality is a real coefficient per tuple of setting labels plus the
bound ``L`` obeyed by every local realistic model:
``-L <= sum C(n_1..n_N) E(n_1..n_N) <= L``. Outcomes are ``s = +1`` for
computational bit 0 and ``-1`` for bit 1.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .channels import apply_local_unitaries, direction_unitary
from .densmat import (
    PAULI,
    StateLike,
    ValidationError,
    as_matrix,
    expectation,
    qubits_for_dim,
    tensor,
)
from .readout import extract_populations, gradient_dephase

VIOLATION_SLACK = 1e-9
PROBABILITY_TOL = 1e-12
PROBABILITY_SUM_TOL = 1e-10
CHSH_CLASSICAL_BOUND = 2.0
TSIRELSON_BOUND = 2 * math.sqrt(2)

Outcome = Tuple[int, ...]


@dataclasses.dataclass(frozen=True)
class MeasurementDirection:
    """Spin-projection axis ``r = (cos phi sin theta, sin phi sin theta, cos theta)``."""

    theta: float
    phi: float = 0.0

    @property
    def vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([math.cos(self.phi) * st, math.sin(self.phi) * st, math.cos(self.theta)])

    def observable(self) -> np.ndarray:
        x, y, z = self.vector
        return x * PAULI["X"] + y * PAULI["Y"] + z * PAULI["Z"]

    def unitary(self) -> np.ndarray:
        return direction_unitary(self.theta, self.phi)


@dataclasses.dataclass(frozen=True)
class OutcomeDistribution:
    probabilities: Dict[Outcome, float]

    def __post_init__(self):
        probs = {}
        for k, p in self.probabilities.items():
            k = tuple(int(s) for s in k)
            if set(k) - {1, -1}:
                raise ValidationError(f"outcome {k} is not a tuple of +1/-1")
            if p < -PROBABILITY_TOL:
                raise ValidationError(f"negative probability {p} for outcome {k}")
            probs[k] = max(float(p), 0.0)
        total = sum(probs.values())
        if abs(total - 1.0) > PROBABILITY_SUM_TOL:
            raise ValidationError(f"probabilities sum to {total!r}")
        object.__setattr__(self, "probabilities", dict(sorted(probs.items(), reverse=True)))

    @property
    def num_observers(self) -> int:
        return len(next(iter(self.probabilities)))


def _check_directions(rho: StateLike, dirs: Sequence[MeasurementDirection]) -> np.ndarray:
    m = as_matrix(rho)
    n = qubits_for_dim(m.shape[0])
    if len(dirs) != n:
        raise ValidationError(f"{len(dirs)} directions given for a {n}-qubit state")
    return m


def joint_probabilities(rho: StateLike, dirs: Sequence[MeasurementDirection]) -> OutcomeDistribution:
    """Rotate each qubit by ``U(r_i)``, dephase, and read the populations."""
    m = _check_directions(rho, dirs)
    rotated = apply_local_unitaries(m, [d.unitary() for d in dirs])
    pops = extract_populations(gradient_dephase(rotated))
    probs = {
        tuple(1 - 2 * int(b) for b in label): p for label, p in zip(pops.labels, pops.populations)
    }
    return OutcomeDistribution(probs)


def correlation_from_probs(dist: OutcomeDistribution) -> float:
    return float(sum(math.prod(s) * p for s, p in dist.probabilities.items()))


def correlation_qm(rho: StateLike, dirs: Sequence[MeasurementDirection]) -> float:
    """``Tr(rho r_1.sigma x ... x r_N.sigma)``."""
    m = _check_directions(rho, dirs)
    return expectation(m, tensor(*(d.observable() for d in dirs)))


@dataclasses.dataclass(frozen=True)
class InequalitySpec:
    """Coefficients over setting tuples (1-based labels) and the local-realist bound."""

    num_observers: int
    settings_per_observer: int
    coefficients: Mapping[Tuple[int, ...], float]
    classical_bound: float
    directions: Mapping[Tuple[int, int], MeasurementDirection]

    def __post_init__(self):
        n, m = self.num_observers, self.settings_per_observer
        if n < 1 or m < 1:
            raise ValidationError("need at least one observer and one setting")
        if not self.classical_bound > 0:
            raise ValidationError("classical bound must be positive")
        coeffs = {tuple(int(i) for i in k): float(v) for k, v in self.coefficients.items()}
        for key in coeffs:
            if len(key) != n or any(not 1 <= i <= m for i in key):
                raise ValidationError(f"coefficient key {key} does not fit {n} observers x {m} settings")
        if not any(coeffs.values()):
            raise ValidationError("inequality has no nonzero coefficient")
        dirs = {(int(o), int(s)): d for (o, s), d in self.directions.items()}
        for key in coeffs:
            for obs, setting in enumerate(key, start=1):
                if (obs, setting) not in dirs:
                    raise ValidationError(f"no direction for observer {obs}, setting {setting}")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "directions", dirs)

    def term_directions(self, key: Tuple[int, ...]) -> List[MeasurementDirection]:
        return [self.directions[(obs, s)] for obs, s in enumerate(key, start=1)]

    # declarative document form (JSON-compatible dict, angles in degrees)
    def to_document(self) -> dict:
        return {
            "num_observers": self.num_observers,
            "settings_per_observer": self.settings_per_observer,
            "classical_bound": self.classical_bound,
            "coefficients": [
                {"settings": list(k), "value": v} for k, v in sorted(self.coefficients.items())
            ],
            "directions": [
                {
                    "observer": o,
                    "setting": s,
                    "theta_deg": math.degrees(d.theta),
                    "phi_deg": math.degrees(d.phi),
                }
                for (o, s), d in sorted(self.directions.items())
            ],
        }

    @classmethod
    def from_document(cls, doc: Mapping) -> "InequalitySpec":
        try:
            return cls(
                num_observers=int(doc["num_observers"]),
                settings_per_observer=int(doc["settings_per_observer"]),
                classical_bound=float(doc["classical_bound"]),
                coefficients={tuple(c["settings"]): float(c["value"]) for c in doc["coefficients"]},
                directions={
                    (int(d["observer"]), int(d["setting"])): MeasurementDirection(
                        math.radians(float(d["theta_deg"])), math.radians(float(d.get("phi_deg", 0.0)))
                    )
                    for d in doc["directions"]
                },
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed inequality document: {exc!r}") from exc


@dataclasses.dataclass(frozen=True)
class InequalityResult:
    value: float
    bound: float
    violated: bool
    per_term: List[Tuple[Tuple[int, ...], float, float]]  # (settings, C, E)


def is_violation(value: float, bound: float) -> bool:
    return abs(value) > bound + VIOLATION_SLACK


def evaluate_inequality(spec: InequalitySpec, rho: StateLike, correlation=correlation_qm) -> InequalityResult:
    """``sum_n C(n) E(n)`` and whether it breaks the bound.

    ``correlation(rho, dirs)`` may be swapped for another readout path.
    """
    n = qubits_for_dim(as_matrix(rho).shape[0])
    if n != spec.num_observers:
        raise ValidationError(f"inequality has {spec.num_observers} observers but the state has {n} qubits")
    terms = []
    for key, c in spec.coefficients.items():
        if c:
            terms.append((key, c, correlation(rho, spec.term_directions(key))))
    value = float(sum(c * e for _, c, e in terms))
    return InequalityResult(value, spec.classical_bound, is_violation(value, spec.classical_bound), terms)


def chsh_spec(theta: float) -> InequalitySpec:
    """CHSH with settings along polar angles 0, 2theta, 4theta, 6theta in the xz-plane.

    Observer 1 holds ``n1`` (0) and ``n3`` (4 theta) as settings 1 and 2;
    observer 2 holds ``n2`` (2 theta) and ``n4`` (6 theta). The quantity is
    ``E(n1,n2) + E(n3,n2) + E(n3,n4) - E(n1,n4)``.
    """
    return InequalitySpec(
        num_observers=2,
        settings_per_observer=2,
        coefficients={(1, 1): 1.0, (2, 1): 1.0, (2, 2): 1.0, (1, 2): -1.0},
        classical_bound=CHSH_CLASSICAL_BOUND,
        directions={
            (1, 1): MeasurementDirection(0.0),
            (1, 2): MeasurementDirection(4 * theta),
            (2, 1): MeasurementDirection(2 * theta),
            (2, 2): MeasurementDirection(6 * theta),
        },
    )


def chsh_qm_prediction(theta: float) -> float:
    """Pure cat-state CHSH value for the :func:`chsh_spec` directions."""
    return 3 * math.cos(2 * theta) - math.cos(6 * theta)


@dataclasses.dataclass(frozen=True)
class ShotResult:
    counts: Dict[Outcome, int]
    e_estimate: float
    std_error: float
    shots: int


def sample_shots(dist: OutcomeDistribution, shots: int, seed: int) -> ShotResult:
    """Draw ``shots`` outcomes and estimate the correlation.

    ``std_error`` is the sample standard deviation of the outcome product
    divided by ``sqrt(shots)``.
    """
    if shots < 1:
        raise ValidationError("shots must be at least 1")
    outcomes = list(dist.probabilities)
    p = np.array([dist.probabilities[o] for o in outcomes])
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, p / p.sum())
    products = np.array([math.prod(o) for o in outcomes], dtype=float)
    n_plus = int(counts[products > 0].sum())
    mean = (2 * n_plus - shots) / shots
    # products are +/-1, so the sample variance has a closed form
    var = shots * (1 - mean * mean) / (shots - 1) if shots > 1 else 0.0
    return ShotResult(
        counts={o: int(c) for o, c in zip(outcomes, counts)},
        e_estimate=float(mean),
        std_error=float(math.sqrt(max(var, 0.0) / shots)),
        shots=shots,
    )


def sample_inequality(
    spec: InequalitySpec, rho: StateLike, shots: int, seed: int
) -> Tuple[float, float, List[ShotResult]]:
    """Finite-shot estimate of an inequality value and its standard error.

    Each term gets its own child seed so results do not depend on term order
    elsewhere.
    """
    keys = [k for k, c in spec.coefficients.items() if c]
    seeds = np.random.SeedSequence(seed).generate_state(len(keys))
    value, var, results = 0.0, 0.0, []
    for key, s in zip(keys, seeds):
        c = spec.coefficients[key]
        r = sample_shots(joint_probabilities(rho, spec.term_directions(key)), shots, int(s))
        value += c * r.e_estimate
        var += (c * r.std_error) ** 2
        results.append(r)
    return value, math.sqrt(var), results

