from .dag import Arc, CycleError, Dag, allowed_arc, sorted_arcs
from .exhaustive import enumerate_dags, exhaustive_best
from .score import FamilyScorer, ScoredNetwork, bic_score, family_bic
from .search import SearchParams, hill_climb, hill_climb_data

__all__ = [
    "Arc",
    "CycleError",
    "Dag",
    "FamilyScorer",
    "ScoredNetwork",
    "SearchParams",
    "allowed_arc",
    "bic_score",
    "enumerate_dags",
    "exhaustive_best",
    "family_bic",
    "hill_climb",
    "hill_climb_data",
    "sorted_arcs",
]
