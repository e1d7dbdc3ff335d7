"""Simulation and likelihood calibration of WVAG-driven Ornstein-Uhlenbeck processes.

Two model families share the :class:`LdoupModel` container: ``wvag-ou``
(stationary law WVAG, compound-Poisson driver) and ``ou-wvag`` (WVAG driver).
"""

from .errors import (ConstraintInfeasibleError, DegenerateSeriesError, DimensionUnsupportedError,
                     LdoupError, MassDeficitError, NoRepeatedLineError, OptimizerFailedError,
                     ParameterError, QuadratureNotConvergedError, StepTooCoarseError)
from .estimation import EstimationResult, fit_ouwvag, fit_wvagou, recover_lambda_eta
from .moments import stationary_cov, zstar_moments
from .params import LdoupModel, ModelKind, ObservationSet, WvagParams, load_model, reference_model
from .sampling import sample_path, sample_paths

__version__ = "0.1.0"

__all__ = [
    "ConstraintInfeasibleError", "DegenerateSeriesError", "DimensionUnsupportedError", "LdoupError",
    "MassDeficitError", "NoRepeatedLineError", "OptimizerFailedError", "ParameterError",
    "QuadratureNotConvergedError", "StepTooCoarseError",
    "EstimationResult", "fit_ouwvag", "fit_wvagou", "recover_lambda_eta",
    "stationary_cov", "zstar_moments",
    "LdoupModel", "ModelKind", "ObservationSet", "WvagParams", "load_model", "reference_model",
    "sample_path", "sample_paths",
]
