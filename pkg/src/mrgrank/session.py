"""Session object: corpus + graph + walks + scores + derived geometry.

A session is the unit the CLI and HTTP service operate on.  It owns a single
writer lock; readers consume immutable snapshots (new RankingState / report
objects are swapped in atomically).  Persistence is a small sectioned binary
file that embeds the corpus, current priors and the walk snapshot, so a
reloaded session reproduces scores and layouts bit for bit.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field

import numpy as np

from .graph import (AffinityBlocks, HeterogeneousGraph, PriorVector,
                    SolverConfig, assemble, corpus_items, default_alpha,
                    load_config, load_jsonl, KINDS)
from .ranking import RankingState, solve_exact
from .walks import (WalkStore, sample_walks, scores_from_walks,
                    walks_from_bytes, walks_to_bytes)
from .uncertainty import (PropagationMatrix, UncertaintyReport,
                          cluster_propagation, cluster_summary,
                          cluster_uncertainty, compute_vmr,
                          propagation_matrix)
from .clustering import (ClusterModel, build_cluster_graph, build_hierarchy,
                         select_representatives)
from .layout import LayoutResult, compute_layout
from .flows import bundle_paths, route_flows

_MAGIC = b"MRGS"
_VERSION = 1

_ALPHA_SHORT = {"post": "p", "user": "u", "hashtag": "h"}


def _alpha_to_json(alpha: dict) -> dict:
    return {_ALPHA_SHORT[s] + _ALPHA_SHORT[d]: v for (s, d), v in alpha.items()}


class SessionError(RuntimeError):
    """Raised for operations that need state the session does not have yet."""


@dataclass
class ClusterView:
    """One hierarchy level of one kind, plus score-derived decorations."""
    kind: str
    level: int
    nodes: list                   # ClusterNode list (local member indices)
    reps: dict                    # node idx -> [global item indices]
    assignment: dict              # global non-rep idx -> global rep idx
    graph: object                 # nx.Graph over node idx


class Session:
    def __init__(self, posts: list[dict], users: list[dict],
                 cfg: SolverConfig, alpha: dict | None = None,
                 extras: dict | None = None):
        if not posts:
            raise ValueError("empty corpus")
        self.posts = posts
        self.users = users
        self.cfg = cfg.validate()
        self.alpha = dict(alpha or default_alpha())
        self.extras = dict(extras or {})
        items = corpus_items(posts, users)
        blocks = AffinityBlocks.from_corpus(
            posts, users, items, alpha=self.alpha,
            tau_sim=self.extras.get("tau_sim", 0.2),
            top_k=self.extras.get("top_k_neighbors", 50))
        priors = PriorVector.from_corpus(items, posts)
        self.graph: HeterogeneousGraph = assemble(blocks, priors, cfg, items)
        self.store: WalkStore | None = None
        self.state: RankingState | None = None
        self.report: UncertaintyReport | None = None
        self.lock = threading.RLock()
        self._models: dict[str, ClusterModel] = {}
        self._views: dict[tuple, ClusterView] = {}
        self._layouts: dict[tuple, LayoutResult] = {}
        self._layout_bytes: dict[tuple, bytes] = {}
        self._pm: PropagationMatrix | None = None

    # ------------------------------------------------------------------
    # solving

    @classmethod
    def from_corpus_files(cls, posts_path, users_path, config_path=None):
        if config_path is not None:
            cfg, alpha, extras = load_config(config_path)
        else:
            cfg, alpha, extras = SolverConfig(), default_alpha(), {}
        return cls(load_jsonl(posts_path), load_jsonl(users_path),
                   cfg, alpha, extras)

    def solve(self, method: str = "mc") -> RankingState:
        with self.lock:
            if method == "exact":
                state = solve_exact(self.graph, self.cfg)
            elif method == "mc":
                if self.store is None:
                    self.store = sample_walks(self.graph, self.cfg)
                state = scores_from_walks(self.store, self.graph.priors, self.cfg)
            else:
                raise ValueError("unknown solve method %r" % method)
            self.state = state
            self.report = (compute_vmr(state, self.graph.kind_codes)
                           if state.has_variance else None)
            self._invalidate_scores()
            return state

    def require_state(self) -> RankingState:
        if self.state is None:
            raise SessionError("no scores yet; run solve first")
        return self.state

    def _invalidate_scores(self):
        """Drop caches derived from scores (clusters by affinity survive)."""
        self._views.clear()
        self._layouts.clear()
        self._layout_bytes.clear()
        self._pm = None

    # ------------------------------------------------------------------
    # rankings

    def item_index(self, item_id: str) -> int:
        try:
            return self.graph.id_index[item_id]
        except KeyError:
            raise KeyError("unknown item %r" % item_id)

    def rankings(self, kind: str, top: int = 20) -> list[dict]:
        state = self.require_state()
        if kind not in KINDS:
            raise ValueError("unknown kind %r" % kind)
        sl = self.graph.kind_slices[kind]
        scores = state.r[sl]
        order = np.lexsort((np.arange(scores.size), -scores))[:top]
        out = []
        for local in order:
            g = int(local) + sl.start
            it = self.graph.items[g]
            row = {"id": it.id, "label": it.label, "kind": kind,
                   "score": float(state.r[g])}
            if self.report is not None:
                row["uncertainty"] = float(self.report.u[g])
                row["uncertainty_normalized"] = float(self.report.u_normalized[g])
                row["zero_score"] = bool(self.report.zero_score[g])
            out.append(row)
        return out

    def related(self, item_id: str, top: int = 10) -> dict:
        """Strongest affinity neighbours of one item, grouped by kind."""
        idx = self.item_index(item_id)
        a = self.graph.alpha_affinity
        cols = a.indices[a.indptr[idx]:a.indptr[idx + 1]]
        vals = a.data[a.indptr[idx]:a.indptr[idx + 1]]
        out: dict = {k: [] for k in KINDS}
        order = np.lexsort((cols, -vals))
        for j in order:
            c, v = int(cols[j]), float(vals[j])
            kind = self.graph.kind_of(c)
            if len(out[kind]) < top:
                out[kind].append({"id": self.graph.items[c].id,
                                  "label": self.graph.items[c].label,
                                  "weight": v})
        return out

    # ------------------------------------------------------------------
    # clustering / layout

    def cluster_model(self, kind: str) -> ClusterModel:
        if kind not in KINDS:
            raise ValueError("unknown kind %r" % kind)
        if kind not in self._models:
            sl = self.graph.kind_slices[kind]
            ids = [it.id for it in self.graph.items[sl]]
            aff = self.graph.alpha_affinity[sl, sl]
            self._models[kind] = build_hierarchy(ids, aff, kind=kind)
        return self._models[kind]

    def cluster_view(self, kind: str, level: int, k_reps: int = 8) -> ClusterView:
        key = (kind, level)
        if key in self._views:
            return self._views[key]
        state = self.require_state()
        model = self.cluster_model(kind)
        nodes = model.level(level)        # raises ValueError on bad level
        sl = self.graph.kind_slices[kind]
        aff = self.graph.alpha_affinity[sl, sl]
        cg = build_cluster_graph(model, level, aff,
                                 theta_edge=self.extras.get("theta_edge", 3))
        reps: dict = {}
        assignment: dict = {}
        local_scores = state.r[sl]
        for node in nodes:
            r, a = select_representatives(node.members, local_scores, aff,
                                          k=k_reps)
            reps[node.idx] = [int(x) + sl.start for x in r]
            for m, rep in a.items():
                assignment[int(m) + sl.start] = int(rep) + sl.start
        view = ClusterView(kind=kind, level=level, nodes=nodes, reps=reps,
                           assignment=assignment, graph=cg)
        self._views[key] = view
        return view

    def cluster_id(self, kind: str, level: int, node_idx: int) -> str:
        return "%s:%d:%d" % (kind, level, node_idx)

    def parse_cluster_id(self, cid: str):
        """-> (kind, level, members as global indices). KeyError if unknown."""
        try:
            kind, level_s, idx_s = cid.split(":")
            level, idx = int(level_s), int(idx_s)
        except ValueError:
            raise KeyError("malformed cluster id %r" % cid)
        if kind not in KINDS:
            raise KeyError("unknown cluster %r" % cid)
        view = self.cluster_view(kind, level)
        for node in view.nodes:
            if node.idx == idx:
                sl = self.graph.kind_slices[kind]
                return kind, level, node.members + sl.start
        raise KeyError("unknown cluster %r" % cid)

    def clusters_json(self, kind: str, level: int) -> dict:
        state = self.require_state()
        view = self.cluster_view(kind, level)
        sl = self.graph.kind_slices[kind]
        out = []
        for node in view.nodes:
            members = node.members + sl.start
            entry = {
                "id": self.cluster_id(kind, level, node.idx),
                "members": [self.graph.items[m].id for m in members],
                "representatives": [self.graph.items[m].id
                                    for m in view.reps[node.idx]],
                "score": float(state.r[members].sum()),
            }
            if self.report is not None:
                entry["uncertainty"] = cluster_uncertainty(self.report, members,
                                                           state)
                entry["summary"] = cluster_summary(self.report, members)
            out.append(entry)
        edges = [{"source": self.cluster_id(kind, level, u),
                  "target": self.cluster_id(kind, level, v),
                  "weight": int(d["weight"])}
                 for u, v, d in view.graph.edges(data=True)]
        return {"kind": kind, "level": level, "max_level":
                self.cluster_model(kind).max_depth, "clusters": out,
                "edges": edges}

    def layout(self, kind: str, level: int) -> LayoutResult:
        key = (kind, level)
        if key in self._layouts:
            return self._layouts[key]
        view = self.cluster_view(kind, level)
        rep_weights: dict = {}
        for rep in view.assignment.values():
            rep_weights[rep] = rep_weights.get(rep, 0) + 1
        result = compute_layout(view.graph, view.reps, rep_weights,
                                seed=self.cfg.rng_seed)
        self._layouts[key] = result
        return result

    def layout_json_bytes(self, kind: str, level: int) -> bytes:
        key = (kind, level)
        if key not in self._layout_bytes:
            result = self.layout(kind, level)
            doc = result.to_json()
            doc["kind"] = kind
            doc["level"] = level
            # remap center/cell keys to public cluster ids
            doc["cluster_centers"] = {
                self.cluster_id(kind, level, int(k)): v
                for k, v in doc["cluster_centers"].items()}
            doc["cells"] = {
                self.cluster_id(kind, level, int(k)): v
                for k, v in doc["cells"].items()}
            doc["node_positions"] = {
                self.graph.items[int(k)].id: v
                for k, v in doc["node_positions"].items()}
            self._layout_bytes[key] = json.dumps(
                doc, sort_keys=True, separators=(",", ":")).encode()
        return self._layout_bytes[key]

    # ------------------------------------------------------------------
    # uncertainty propagation

    def propagation(self) -> PropagationMatrix:
        state = self.require_state()
        if self.report is None:
            raise SessionError("no variance estimates; solve with method=mc")
        if self._pm is None:
            self._pm = propagation_matrix(self.graph, state, self.report)
        return self._pm

    def propagation_flows(self, sources: list[str], top_k: int = 10) -> dict:
        state = self.require_state()
        pm = self.propagation()
        parsed = [self.parse_cluster_id(c) for c in sources]
        kinds = {(k, lvl) for k, lvl, _ in parsed}
        if len(kinds) != 1:
            raise ValueError("sources must share one kind and level")
        kind, level = next(iter(kinds))
        view = self.cluster_view(kind, level)
        sl = self.graph.kind_slices[kind]
        members = {self.cluster_id(kind, level, n.idx): n.members + sl.start
                   for n in view.nodes}
        flows: dict = {}
        for cid_src in sources:
            vals = {}
            for cid_dst, m_dst in members.items():
                if cid_dst == cid_src:
                    continue
                vals[cid_dst] = cluster_propagation(pm, members[cid_src],
                                                    m_dst, state)
            flows[cid_src] = vals
        layout = self.layout(kind, level)
        centers = {self.cluster_id(kind, level, int(k)): v
                   for k, v in layout.cluster_centers.items()}
        paths = route_flows(flows, centers, top_k=top_k)
        bundled = bundle_paths(paths, canvas=layout.canvas)
        return {
            "kind": kind, "level": level,
            "markov_residual": pm.markov_residual,
            "flows": {s: {t: float(v) for t, v in d.items()}
                      for s, d in flows.items()},
            "paths": [p.to_json() for p in bundled],
        }

    # ------------------------------------------------------------------
    # edits

    def apply_ui_score(self, item_id: str, ui_score: int,
                       log_path=None) -> dict:
        from .incremental import Edit, apply_score_edit
        with self.lock:
            state = self.require_state()
            if self.store is None:
                raise SessionError("score edits need a sampled walk store")
            idx = self.item_index(item_id)
            old_state = state
            old_report = self.report
            result = apply_score_edit(
                self.store, self.graph,
                [Edit(item_id=item_id, ui_score=int(ui_score))],
                state=state, log_path=log_path)
            self.state = result.state
            self.report = compute_vmr(result.state, self.graph.kind_codes)
            self._invalidate_scores()
            changes = []
            for g in result.affected:
                row = {"id": self.graph.items[g].id,
                       "old_score": float(old_state.r[g]),
                       "new_score": float(result.state.r[g])}
                if old_report is not None:
                    row["old_uncertainty"] = float(old_report.u[g])
                    row["new_uncertainty"] = float(self.report.u[g])
                changes.append(row)
            return {
                "item_id": item_id,
                "ui_score": int(ui_score),
                "old_prior": result.old_priors[idx],
                "new_prior": result.new_priors[idx],
                "affected": [self.graph.items[g].id for g in result.affected],
                "changes": changes,
                "touched_walks": result.touched_walks,
                "touched_steps": result.touched_steps,
            }

    # ------------------------------------------------------------------
    # persistence

    def save(self, path):
        with self.lock:
            header = {
                "version": _VERSION,
                "config": {
                    "d": self.cfg.d,
                    "walks_per_node": self.cfg.walks_per_node,
                    "max_walk_length": self.cfg.max_walk_length,
                    "rng_seed": self.cfg.rng_seed,
                    "variance_estimator": self.cfg.variance_estimator,
                },
                "alpha": _alpha_to_json(self.alpha),
                "extras": self.extras,
                "method": self.state.method if self.state is not None else None,
                "has_store": self.store is not None,
            }
            sections = [
                json.dumps(header, sort_keys=True).encode(),
                "".join(json.dumps(p, sort_keys=True) + "\n"
                        for p in self.posts).encode(),
                "".join(json.dumps(u, sort_keys=True) + "\n"
                        for u in self.users).encode(),
                self.graph.priors.astype("<f8").tobytes(),
                walks_to_bytes(self.store) if self.store is not None else b"",
            ]
            with open(path, "wb") as f:
                f.write(_MAGIC)
                for sec in sections:
                    f.write(len(sec).to_bytes(8, "little"))
                    f.write(sec)

    @classmethod
    def load(cls, path) -> "Session":
        with open(path, "rb") as f:
            if f.read(4) != _MAGIC:
                raise ValueError("not a session file")

            def sec():
                n = int.from_bytes(f.read(8), "little")
                return f.read(n)

            header = json.loads(sec())
            if header["version"] != _VERSION:
                raise ValueError("unsupported session version %r"
                                 % header["version"])
            posts = [json.loads(l) for l in sec().decode().splitlines() if l]
            users = [json.loads(l) for l in sec().decode().splitlines() if l]
            priors = np.frombuffer(sec(), dtype="<f8").copy()
            store_bytes = sec()
        c = header["config"]
        cfg = SolverConfig(d=c["d"], walks_per_node=c["walks_per_node"],
                           max_walk_length=c["max_walk_length"],
                           rng_seed=c["rng_seed"],
                           variance_estimator=c["variance_estimator"])
        alpha = default_alpha()
        short = {"p": "post", "u": "user", "h": "hashtag"}
        for key, val in header.get("alpha", {}).items():
            alpha[(short[key[0]], short[key[1]])] = float(val)
        session = cls(posts, users, cfg, alpha, header.get("extras") or {})
        if priors.size != session.graph.n_items:
            raise ValueError("prior section does not match corpus")
        if not np.array_equal(priors, session.graph.priors):
            session.graph.priors = priors
            session.graph.recompute_transition_rows(
                range(session.graph.n_items))
        if header.get("has_store"):
            session.store = walks_from_bytes(store_bytes)
        method = header.get("method")
        if method == "mc" and session.store is not None:
            session.state = scores_from_walks(session.store,
                                              session.graph.priors, cfg)
            session.report = compute_vmr(session.state,
                                         session.graph.kind_codes)
        elif method == "exact":
            session.state = solve_exact(session.graph, cfg)
        return session
