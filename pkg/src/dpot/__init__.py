"""Demographic-parity post-processing of multiclass predictor scores."""

from .barycenter import BarycenterResult, CouplingPlan, solve_barycenter, tv_barycenter
from .core import EmpiricalDistribution, ScoredDataset, empirical_from_points, project_to_simplex
from .errors import DpotError
from .metrics import balanced_error, dp_gap, max_fair_accuracy, outcomes_from_predictions
from .pipeline import PostProcessorModel, apply, fit, load_model, save_model
from .transport import LookupTransport, NnTransport, SmoothingConfig

__version__ = "0.1.0"
