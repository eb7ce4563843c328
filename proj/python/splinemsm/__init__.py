"""Semiparametric continuous-time multistate models for interval-censored
panel data: spline log-hazards, penalised likelihood, automatic smoothing
selection, and simulation-based prediction intervals.

The heavy lifting happens in the compiled extension; this package re-exports
its surface.
"""

from ._splinemsm import (
    Fit,
    NumericalError,
    PanelDataset,
    Scenario,
    ValidationError,
    __version__,
    fit,
    load_fit,
    place_knots,
    read_dataset,
    simulate,
    true_transition_probabilities,
)

__all__ = [
    "Fit",
    "NumericalError",
    "PanelDataset",
    "Scenario",
    "ValidationError",
    "__version__",
    "fit",
    "load_fit",
    "place_knots",
    "read_dataset",
    "simulate",
    "true_transition_probabilities",
]
