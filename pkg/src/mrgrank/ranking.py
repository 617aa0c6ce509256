"""Fixed-point ranking state and the exact matrix solver.

The transition matrix is row-stochastic (row i = outgoing distribution of
item i), so the score fixed point solved here is R = d*T'R + (1-d)W with
T' the transpose of the transition matrix.  This is the same fixed point
the random-walk sampler estimates: r_j = (1-d) * sum_i w_i z_ij.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import HeterogeneousGraph, SolverConfig


class ConvergenceError(RuntimeError):
    def __init__(self, residual, max_iter):
        super().__init__("no convergence after %d iterations (residual %.3e)"
                         % (max_iter, residual))
        self.residual = residual
        self.max_iter = max_iter


@dataclass
class RankingState:
    r: np.ndarray                # score per item, >= 0
    v: np.ndarray | None = None  # variance per item (Monte Carlo only)
    u: np.ndarray | None = None  # uncertainty per item (set by uncertainty module)
    iteration_count: int | None = None
    residual: float | None = None
    method: str = "exact"

    @property
    def has_variance(self) -> bool:
        return self.v is not None

    def copy(self) -> "RankingState":
        return RankingState(
            r=self.r.copy(),
            v=None if self.v is None else self.v.copy(),
            u=None if self.u is None else self.u.copy(),
            iteration_count=self.iteration_count,
            residual=self.residual,
            method=self.method,
        )


def fixed_point_residual(graph: HeterogeneousGraph, r: np.ndarray) -> float:
    """Max-norm residual of R - (d*T'R + (1-d)W)."""
    d = graph.config.d
    nxt = d * (graph.transition.T @ r) + (1.0 - d) * graph.priors
    return float(np.max(np.abs(r - nxt))) if r.size else 0.0


def solve_exact(graph: HeterogeneousGraph, cfg: SolverConfig | None = None,
                tol: float = 1e-12, max_iter: int = 10000) -> RankingState:
    """Power iteration on R = d*T'R + (1-d)W.

    Converges for any d < 1 since the update is a contraction; dangling
    rows simply drop their mass (no redistribution), matching the
    early-termination policy of the walk sampler.
    """
    cfg = (cfg or graph.config).validate()
    if tol <= 0:
        raise ValueError("tol must be positive")
    d = cfg.d
    w = graph.priors
    tt = graph.transition.T.tocsr()
    r = (1.0 - d) * w.copy()
    for it in range(1, max_iter + 1):
        nxt = d * (tt @ r) + (1.0 - d) * w
        res = float(np.max(np.abs(nxt - r))) if r.size else 0.0
        r = nxt
        if res < tol:
            return RankingState(r=r, iteration_count=it, residual=res, method="exact")
    raise ConvergenceError(res, max_iter)
