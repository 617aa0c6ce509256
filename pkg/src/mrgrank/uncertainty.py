"""Variance-mean-ratio uncertainty, cluster aggregation and propagation.

Per-item uncertainty is the dispersion ratio u_j = v_j / r_j of the sampled
score distribution.  Uncertainty flows between linked items through
m*_ij = d^2 m_ij^2 r_i / ((1 - d^2 m_jj) r_j), which the cluster-level
aggregations build on.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import HeterogeneousGraph, KINDS
from .ranking import RankingState


@dataclass
class UncertaintyReport:
    u: np.ndarray              # raw VMR per item
    u_normalized: np.ndarray   # per-kind min-max mapped to [0, 1]
    zero_score: np.ndarray     # flag: items with r == 0 (u forced to 0)


def compute_vmr(state: RankingState, kind_codes: np.ndarray) -> UncertaintyReport:
    """u_j = v_j / r_j, with zero-score items flagged and set to 0.

    Display normalization is min-max within each item kind, so the glyph
    range [0, 1] holds regardless of the unbounded raw VMR.
    """
    if state.v is None:
        raise ValueError("ranking state has no variance (exact solve?)")
    if np.any(state.v < 0):
        raise ValueError("invalid variance")
    r = state.r
    v = state.v
    zero = r <= 0
    u = np.zeros_like(r)
    np.divide(v, r, out=u, where=~zero)
    u_norm = np.zeros_like(u)
    for code in range(len(KINDS)):
        mask = kind_codes == code
        if not mask.any():
            continue
        seg = u[mask]
        lo, hi = seg.min(), seg.max()
        u_norm[mask] = (seg - lo) / (hi - lo) if hi > lo else 0.0
    return UncertaintyReport(u=u, u_normalized=u_norm, zero_score=zero)


def cluster_uncertainty(report: UncertaintyReport, members,
                        state: RankingState) -> float:
    """Score-weighted sum of member uncertainties; equals v_c / r_c."""
    members = np.asarray(members, dtype=np.int64)
    if members.size == 0:
        raise ValueError("empty cluster")
    rc = state.r[members].sum()
    if rc <= 0:
        return 0.0
    k = state.r[members] / rc
    return float(np.dot(k, report.u[members]))


def cluster_summary(report: UncertaintyReport, members) -> dict:
    """Box-plot style six-number summary over member normalized uncertainty.

    Whiskers follow the 1.5*IQR rule (nearest data point inside the fence)
    and everything is clamped to the [0, 1] display range.
    """
    members = np.asarray(members, dtype=np.int64)
    vals = np.sort(report.u_normalized[members])
    q25 = float(np.percentile(vals, 25))
    q75 = float(np.percentile(vals, 75))
    iqr = q75 - q25
    lo_fence = q25 - 1.5 * iqr
    hi_fence = q75 + 1.5 * iqr
    inside = vals[(vals >= lo_fence) & (vals <= hi_fence)]
    lo_ext = float(inside.min()) if inside.size else q25
    hi_ext = float(inside.max()) if inside.size else q75
    clamp = lambda x: min(1.0, max(0.0, x))
    return {
        "min": 0.0,
        "lower_extreme": clamp(lo_ext),
        "lower_hinge": clamp(q25),
        "upper_hinge": clamp(q75),
        "upper_extreme": clamp(hi_ext),
        "max": 1.0,
    }


@dataclass
class PropagationMatrix:
    m_star: sp.csr_matrix   # m*_ij for i != j with m_ij > 0
    flows: sp.csr_matrix    # u_{i->j} = m*_ij * u_i
    markov_residual: float  # diagnostic: ||U M* - U||_inf


def propagation_matrix(graph: HeterogeneousGraph, state: RankingState,
                       report: UncertaintyReport) -> PropagationMatrix:
    """m*_ij = d^2 m_ij^2 r_i / ((1 - d^2 m_jj) r_j) for linked pairs."""
    d = graph.config.d
    t = graph.transition.tocoo()
    diag = np.asarray(graph.transition.diagonal()).ravel()
    denom_diag = 1.0 - d * d * diag
    if np.any(denom_diag <= 0):
        raise ValueError("singular self-loop")
    r = state.r
    mask = t.row != t.col
    i, j, m = t.row[mask], t.col[mask], t.data[mask]
    ok = r[j] > 0
    i, j, m = i[ok], j[ok], m[ok]
    vals = (d * d) * m * m * r[i] / (denom_diag[j] * r[j])
    shape = (graph.n_items, graph.n_items)
    m_star = sp.csr_matrix((vals, (i, j)), shape=shape)
    flows = sp.csr_matrix((vals * report.u[i], (i, j)), shape=shape)
    u = report.u
    resid = float(np.max(np.abs(np.asarray(m_star.T @ u).ravel() - u))) if u.size else 0.0
    return PropagationMatrix(m_star=m_star, flows=flows, markov_residual=resid)


def cluster_propagation(pm: PropagationMatrix, source, target,
                        state: RankingState) -> float:
    """u_{cs->ct} = sum_{j in ct} (r_j / r_ct) * sum_{i in cs} u_{i->j}."""
    source = np.asarray(source, dtype=np.int64)
    target = np.asarray(target, dtype=np.int64)
    if np.intersect1d(source, target).size:
        raise ValueError("clusters must be disjoint")
    rct = state.r[target].sum()
    if rct <= 0:
        return 0.0
    block = pm.flows[source][:, target]
    incoming = np.asarray(block.sum(axis=0)).ravel()
    k = state.r[target] / rct
    return float(np.dot(k, incoming))


def report_json(report: UncertaintyReport, state: RankingState,
                clusters: dict | None = None, pm: PropagationMatrix | None = None,
                flows: list | None = None) -> dict:
    out = {
        "u": report.u.tolist(),
        "u_normalized": report.u_normalized.tolist(),
        "zero_score": report.zero_score.astype(int).tolist(),
    }
    if clusters is not None:
        out["clusters"] = {
            cid: cluster_summary(report, members) for cid, members in clusters.items()
        }
    if flows is not None:
        out["flows"] = flows
    if pm is not None:
        out["markov_residual"] = pm.markov_residual
    return out
