"""Local ranking updates by reweighting stored walks.

Prior edits change transition rows only through destination-prior factors
(no edges are added or removed), so every stored walk stays a valid sample
path.  Affected walks get new per-step weights m'_uv / m0_uv and their
contributions to the visit statistics are swapped in place; untouched walks
keep their statistics bit for bit.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import HeterogeneousGraph
from .ranking import RankingState
from .walks import WalkStore, scores_from_walks


@dataclass
class Edit:
    item_id: str
    new_prior: float | None = None
    ui_score: int | None = None


@dataclass
class EditResult:
    state: RankingState
    affected: list            # item indices whose statistics/scores may change
    touched_steps: int
    touched_walks: int
    old_priors: dict          # item index -> prior before the edit
    new_priors: dict


def ui_score_bucket(state: RankingState, graph: HeterogeneousGraph,
                    idx: int) -> int:
    """Decile (1..10) of the item's score within its kind."""
    kind = graph.kind_of(idx)
    sl = graph.kind_slices[kind]
    scores = state.r[sl]
    local = idx - sl.start
    order = np.lexsort((np.arange(scores.size), scores))
    rank = int(np.where(order == local)[0][0])
    return min(10, 1 + (10 * rank) // scores.size)


def prior_for_ui_score(state: RankingState, graph: HeterogeneousGraph,
                       idx: int, ui_score: int) -> float:
    """Map a 1-10 UI score to a prior: double per bucket above the current one."""
    if not (1 <= ui_score <= 10):
        raise ValueError("ui_score must be in 1..10")
    bucket = ui_score_bucket(state, graph, idx)
    return float(graph.priors[idx] * 2.0 ** (ui_score - bucket))


def _resolve_edits(store: WalkStore, graph: HeterogeneousGraph, edits,
                   state: RankingState | None) -> dict[int, float]:
    resolved: dict[int, float] = {}
    for e in edits:
        if isinstance(e, tuple):
            e = Edit(item_id=e[0], new_prior=e[1])
        idx = graph.id_index.get(e.item_id)
        if idx is None:
            raise KeyError("unknown item id %r" % e.item_id)
        if e.new_prior is not None:
            new = float(e.new_prior)
        else:
            if state is None:
                raise ValueError("ui_score edits need the current ranking state")
            new = prior_for_ui_score(state, graph, idx, e.ui_score)
        if new <= 0:
            raise ValueError("non-positive prior")
        resolved[idx] = new
    return resolved


def _changed_rows(graph: HeterogeneousGraph, changed_items) -> list[int]:
    """Rows of the transition matrix whose normalization involves an edited item."""
    csc = graph.alpha_affinity.tocsc()
    rows = set()
    for j in changed_items:
        rows.update(csc.indices[csc.indptr[j]:csc.indptr[j + 1]].tolist())
    return sorted(rows)


def _visited_nodes(store: WalkStore, walks: np.ndarray) -> np.ndarray:
    from .walks import _ranges
    walks = np.asarray(walks, dtype=np.int64)
    if walks.size == 0:
        return np.empty(0, dtype=np.int64)
    vlens = store.offsets[walks + 1] - store.offsets[walks]
    vpos = _ranges(store.offsets[walks], vlens)
    return np.unique(store.flat_nodes[vpos]).astype(np.int64)


def affected_set(store: WalkStore, graph: HeterogeneousGraph, edits,
                 state: RankingState | None = None) -> list[int]:
    """Items whose visit statistics or scores may change under the edits.

    Superset-exact: contains every item whose z row/column or score
    changes (edited items, starts of affected walks, every node those
    walks visit, and everything reached by walks from edited items whose
    start prior reweights their score contribution).
    """
    resolved = _resolve_edits(store, graph, edits, state)
    changed = [i for i, w in resolved.items() if w != graph.priors[i]]
    if not changed:
        return []
    rows = _changed_rows(graph, changed)
    walks = store.walks_from_rows(rows)
    out = set(changed)
    if walks.size:
        out.update(store.walk_start(walks).tolist())
    # columns: nodes visited by affected walks, plus nodes reached from
    # edited starts (their w_i term changes every score they feed)
    wpn = store.walks_per_node
    start_walks = [np.arange(i * wpn, (i + 1) * wpn, dtype=np.int64) for i in changed]
    all_walks = np.unique(np.concatenate([walks] + start_walks))
    out.update(_visited_nodes(store, all_walks).tolist())
    return sorted(out)


def apply_score_edit(store: WalkStore, graph: HeterogeneousGraph, edits,
                     state: RankingState | None = None,
                     log_path=None) -> EditResult:
    """Apply prior/UI-score edits and reweight affected walks in place.

    Equivalent to recomputing every walk's weights under the new transition
    matrix, but touches only walks that traverse a changed transition.
    """
    resolved = _resolve_edits(store, graph, edits, state)
    old_priors = {i: float(graph.priors[i]) for i in resolved}
    changed = [i for i, w in resolved.items() if w != graph.priors[i]]

    if log_path is not None:
        with open(log_path, "a") as f:
            for i, new in resolved.items():
                f.write(json.dumps({
                    "timestamp": time.time(),
                    "item_id": graph.items[i].id,
                    "old": old_priors[i],
                    "new": new,
                }, sort_keys=True) + "\n")

    if not changed:
        new_state = scores_from_walks(store, graph.priors, graph.config)
        return EditResult(state=new_state, affected=[], touched_steps=0,
                          touched_walks=0, old_priors=old_priors,
                          new_priors={i: float(v) for i, v in resolved.items()})

    for i in changed:
        graph.priors[i] = resolved[i]
    rows = _changed_rows(graph, changed)
    changed_edges = graph.recompute_transition_rows(rows)
    walks = store.walks_for_edges(changed_edges)

    touched_steps = 0
    if walks.size:
        # subtract old contributions
        r0, c0, s1_0, s2_0 = store.visit_sums(walks)
        # new factors for every step of the affected walks
        vstarts = store.offsets[walks]
        slens = store.offsets[walks + 1] - vstarts - 1
        from .walks import _ranges
        spos = _ranges(vstarts - walks, slens)
        touched_steps = int(spos.size)
        frm, to = store.step_endpoints()
        t = graph.transition.tocsr()
        new_m = np.asarray(t[frm[spos], to[spos]]).ravel()
        store.step_factor[spos] = new_m / store.step_m0[spos]
        r1, c1, s1_1, s2_1 = store.visit_sums(walks)
        shape = (store.n_items, store.n_items)
        store.s1 = (store.s1 - sp.csr_matrix((s1_0, (r0, c0)), shape=shape)
                    + sp.csr_matrix((s1_1, (r1, c1)), shape=shape)).tocsr()
        store.s2 = (store.s2 - sp.csr_matrix((s2_0, (r0, c0)), shape=shape)
                    + sp.csr_matrix((s2_1, (r1, c1)), shape=shape)).tocsr()

    new_state = scores_from_walks(store, graph.priors, graph.config)
    aff = set(changed)
    if walks.size:
        aff.update(store.walk_start(walks).tolist())
    wpn = store.walks_per_node
    start_walks = [np.arange(i * wpn, (i + 1) * wpn, dtype=np.int64) for i in changed]
    all_walks = np.unique(np.concatenate([walks] + start_walks))
    aff.update(_visited_nodes(store, all_walks).tolist())
    return EditResult(state=new_state, affected=sorted(aff),
                      touched_steps=touched_steps, touched_walks=int(walks.size),
                      old_priors=old_priors,
                      new_priors={i: float(v) for i, v in resolved.items()})


def renormalize_priors(graph: HeterogeneousGraph):
    """Explicit per-kind prior re-normalization (deferred during edits)."""
    for sl in graph.kind_slices.values():
        total = graph.priors[sl].sum()
        if total > 0:
            graph.priors[sl] /= total
    graph.recompute_transition_rows(range(graph.n_items))
