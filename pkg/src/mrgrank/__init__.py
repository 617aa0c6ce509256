"""Uncertainty-aware ranking for heterogeneous microblog graphs."""

from .graph import (HeterogeneousGraph, Item, SolverConfig,
                    build_graph_from_corpus, default_alpha)
from .ranking import ConvergenceError, RankingState, solve_exact
from .walks import WalkStore, sample_walks, scores_from_walks
from .uncertainty import compute_vmr, propagation_matrix
from .incremental import Edit, apply_score_edit
from .session import Session

__all__ = [
    "HeterogeneousGraph", "Item", "SolverConfig", "build_graph_from_corpus",
    "default_alpha", "ConvergenceError", "RankingState", "solve_exact",
    "WalkStore", "sample_walks", "scores_from_walks", "compute_vmr",
    "propagation_matrix", "Edit", "apply_score_edit", "Session",
]

__version__ = "0.1.0"
