"""Density-matrix simulation of NMR Bell-inequality tests."""

from .densmat import (
    DensityMatrix,
    InvariantError,
    PureState,
    ValidationError,
    expectation,
    partial_trace,
    pure_to_density,
    tensor,
    validate,
)
from .bell import (
    InequalitySpec,
    MeasurementDirection,
    chsh_qm_prediction,
    chsh_spec,
    correlation_qm,
    evaluate_inequality,
)
from .pps import make_pps, named_state
from .lrhvm import (
    EnsembleRun,
    bulk_chsh_curve,
    lrhvm_applicable,
    polarization_sweep,
    separability_bound,
)

__version__ = "0.1.0"
