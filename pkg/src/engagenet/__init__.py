"""Engagement networks from LMS activity logs.

Activity log -> binary synchronous-engagement matrix -> bootstrap-averaged,
chapter-constrained discrete Bayesian network -> queries and reports.
"""

from importlib.resources import files

from .bn import Dag, ScoredNetwork, SearchParams, allowed_arc, bic_score, hill_climb
from .bootstrap import ArcStrengthTable, ConsensusNetwork, bootstrap_learn, resample_rows
from .engagement import EngagementMatrix, build_matrix, exclude_high_access, is_synchronous
from .ingest import ActivityEvent, CourseConfig, load_config, map_event, parse_log
from .inference import CptSet, Query, empirical_conditional, fit_cpts, model_query, parse_query
from .resources import ResourceId, ResourceKind
from .synthetic import GroundTruth, emit_logs, reference_preset, sample_cohort

__version__ = "0.1.0"


def example_paths():
    """(log, config) paths of the bundled synthetic fixture."""
    data = files(__name__) / "data"
    return data / "example_log.csv", data / "example_config.json"


__all__ = [
    "ActivityEvent",
    "ArcStrengthTable",
    "ConsensusNetwork",
    "CourseConfig",
    "CptSet",
    "Dag",
    "EngagementMatrix",
    "GroundTruth",
    "Query",
    "ResourceId",
    "ResourceKind",
    "ScoredNetwork",
    "SearchParams",
    "allowed_arc",
    "bic_score",
    "bootstrap_learn",
    "build_matrix",
    "emit_logs",
    "empirical_conditional",
    "example_paths",
    "exclude_high_access",
    "fit_cpts",
    "hill_climb",
    "is_synchronous",
    "load_config",
    "map_event",
    "model_query",
    "parse_log",
    "parse_query",
    "reference_preset",
    "resample_rows",
    "sample_cohort",
]
