"""Recovering preferences from finite choice data: relations, metrics, experiments and estimators."""

from importlib import metadata as _metadata

try:
    __version__ = _metadata.version("artifact")
except _metadata.PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .errors import ConfigError, ContractViolation, EstimationError, PreferenceError
from .spaces import AlternativeSpace, SpaceKind
from .preferences import (
    DiscountedUtility,
    ErraticPWL,
    ExpectedUtility,
    Family,
    NaturalOrder,
    PreferenceSpec,
    TabulatedRelation,
    TabulatedUtility,
    TotalIndifference,
    strictly_prefers,
    weak_prefers,
)
from .dominance import DominanceKind, DominanceRelation, Menu, dominates, menu_dominates
from .metric import EvaluationGrid, RelationGraph, hausdorff_distance, preference_distance, relation_graph
from .experiment import (
    ErrorModel,
    ExperimentPlan,
    RevealedRelation,
    TieRule,
    exhaustive_plan,
    random_plan,
    simulate_noiseless,
    simulate_noisy,
)
from .estimator import EstimateResult, EstimatorConfig, kemeny_loss, kemeny_minimize_eu, kemeny_minimize_search
from .bounds import estimate_mu, estimate_r, estimate_sample_complexity, shatter_probe, theorem3_bound

__all__ = [name for name in dir() if not name.startswith("_")]
