"""Heterogeneous microblog graph: items, affinity blocks, priors, assembly.

Items of three kinds (posts, users, hashtags) are joined into a single
block-structured transition matrix.  Within-kind affinities come from
TF-IDF cosine similarity (posts), follower edges (users) and co-occurrence
counts (hashtags); cross-kind blocks encode authorship and tag usage.
"""
from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

KINDS = ("post", "user", "hashtag")
KIND_CODE = {k: i for i, k in enumerate(KINDS)}

# --------------------------------------------------------------------------
# items and configuration


@dataclass(frozen=True)
class Item:
    id: str
    kind: str          # "post" | "user" | "hashtag"
    label: str
    payload: dict = field(default_factory=dict)


@dataclass
class SolverConfig:
    d: float = 0.85
    walks_per_node: int = 1000
    max_walk_length: int = 100
    rng_seed: int = 0
    variance_estimator: str = "poisson"   # "poisson" | "empirical"

    def validate(self):
        if not (0.0 < self.d < 1.0):
            raise ValueError("damping factor must be in (0, 1)")
        if self.walks_per_node < 1:
            raise ValueError("walks_per_node must be >= 1")
        if self.max_walk_length < 1:
            raise ValueError("max_walk_length must be >= 1")
        if self.variance_estimator not in ("poisson", "empirical"):
            raise ValueError("unknown variance estimator %r" % self.variance_estimator)
        return self


def default_alpha() -> dict:
    """Per-source-kind mixing weights: 0.5 within kind, 0.25 to each other kind."""
    alpha = {}
    for src in KINDS:
        for dst in KINDS:
            alpha[(src, dst)] = 0.5 if src == dst else 0.25
    return alpha


def load_config(path) -> tuple[SolverConfig, dict, dict]:
    """Read a JSON config file -> (SolverConfig, alpha dict, extras)."""
    with open(path) as f:
        raw = json.load(f)
    cfg = SolverConfig(
        d=raw.get("d", 0.85),
        walks_per_node=raw.get("walks_per_node", 1000),
        max_walk_length=raw.get("max_walk_length", 100),
        rng_seed=raw.get("rng_seed", 0),
        variance_estimator=raw.get("variance_estimator", "poisson"),
    ).validate()
    alpha = default_alpha()
    for key, val in raw.get("alpha", {}).items():
        src, dst = key[0], key[1]
        src = {"p": "post", "u": "user", "h": "hashtag"}[src]
        dst = {"p": "post", "u": "user", "h": "hashtag"}[dst]
        alpha[(src, dst)] = float(val)
    extras = {k: raw[k] for k in ("tau_sim", "top_k_neighbors") if k in raw}
    return cfg, alpha, extras


# --------------------------------------------------------------------------
# corpus ingestion

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumerics, drop tokens shorter than 2 chars."""
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if len(t) >= 2]


def load_jsonl(path) -> list[dict]:
    records = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def corpus_items(posts: list[dict], users: list[dict]) -> list[Item]:
    """Build the ordered item list (posts, users, hashtags) from corpus records.

    Hashtag items are derived from the union of tags seen on posts.  Post
    authors must resolve to known users.
    """
    user_ids = {u["id"] for u in users}
    items: list[Item] = []
    for p in posts:
        if p["author_id"] not in user_ids:
            raise ValueError("post %s has unknown author %s" % (p["id"], p["author_id"]))
        items.append(Item(
            id=p["id"], kind="post", label=p.get("text", "")[:80],
            payload={
                "author_id": p["author_id"],
                "hashtags": list(p.get("hashtags", [])),
                "text": p.get("text", ""),
                "timestamp": p.get("timestamp"),
                "retweet_count": int(p.get("retweet_count", 0)),
            }))
    for u in users:
        items.append(Item(
            id=u["id"], kind="user", label=u.get("handle", u["id"]),
            payload={
                "handle": u.get("handle", u["id"]),
                "followers": list(u.get("followers", [])),
                "follower_count": int(u.get("follower_count", len(u.get("followers", [])))),
            }))
    tags = sorted({t for p in posts for t in p.get("hashtags", [])})
    for t in tags:
        items.append(Item(id="tag:" + t, kind="hashtag", label="#" + t, payload={"tag": t}))
    seen = set()
    for it in items:
        if it.id in seen:
            raise ValueError("duplicate item id %r" % it.id)
        seen.add(it.id)
    return items


# --------------------------------------------------------------------------
# within-kind graphs


def build_post_graph(posts: list[dict], tau_sim: float = 0.2,
                     top_k: int = 50) -> sp.csr_matrix:
    """TF-IDF cosine similarity between post texts, sparsified.

    Entries below tau_sim are dropped; each post keeps at most top_k
    neighbors (union over both endpoints, so the result stays symmetric).
    Diagonal is zero.  Posts with no usable tokens get empty rows.
    """
    if not posts:
        raise ValueError("empty corpus")
    n = len(posts)
    docs = [tokenize(p.get("text", "")) for p in posts]
    vocab: dict[str, int] = {}
    rows, cols, vals = [], [], []
    for i, toks in enumerate(docs):
        counts: dict[str, int] = {}
        for t in toks:
            counts[t] = counts.get(t, 0) + 1
        for t, c in counts.items():
            j = vocab.setdefault(t, len(vocab))
            rows.append(i)
            cols.append(j)
            vals.append(float(c))
    if not vocab:
        return sp.csr_matrix((n, n))
    tf = sp.csr_matrix((vals, (rows, cols)), shape=(n, len(vocab)))
    df = np.asarray((tf > 0).sum(axis=0)).ravel()
    # smoothed idf keeps corpus-wide terms alive (identical texts -> sim 1.0)
    idf = 1.0 + np.log((1.0 + n) / (1.0 + df))
    x = tf.multiply(idf).tocsr()
    norms = np.sqrt(np.asarray(x.multiply(x).sum(axis=1)).ravel())
    inv = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 0.0)
    x = sp.diags(inv) @ x
    sim = (x @ x.T).tocsr()
    sim.setdiag(0.0)
    sim.eliminate_zeros()
    sim.data[sim.data < tau_sim] = 0.0
    sim.eliminate_zeros()
    if top_k is not None and sim.nnz:
        keep = sp.lil_matrix((n, n))
        for i in range(n):
            row = sim.getrow(i)
            if row.nnz > top_k:
                order = np.argsort(-row.data, kind="stable")[:top_k]
                keep[i, row.indices[order]] = 1
            elif row.nnz:
                keep[i, row.indices] = 1
        keep = keep.tocsr()
        keep = ((keep + keep.T) > 0).astype(float)   # union keeps symmetry
        sim = sim.multiply(keep).tocsr()
    return sim


def build_user_graph(users: list[dict]) -> sp.csr_matrix:
    """Directed follower graph: M[i, j] = 1 iff user i follows user j."""
    index = {u["id"]: i for i, u in enumerate(users)}
    n = len(users)
    rows, cols = [], []
    unresolved = 0
    for j, u in enumerate(users):
        for fid in u.get("followers", []):
            i = index.get(fid)
            if i is None:
                unresolved += 1
                continue
            rows.append(i)
            cols.append(j)
    if unresolved:
        log.warning("dropped %d unresolved follower ids", unresolved)
    m = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    m.data[:] = 1.0   # collapse duplicates
    return m


def build_hashtag_graph(posts: list[dict], tag_index: dict[str, int]) -> sp.csr_matrix:
    """Co-occurrence counts: M[i, j] = number of posts containing both tags."""
    n = len(tag_index)
    rows, cols, vals = [], [], []
    for p in posts:
        tags = sorted({tag_index[t] for t in p.get("hashtags", [])})
        for a in range(len(tags)):
            for b in range(a + 1, len(tags)):
                rows += [tags[a], tags[b]]
                cols += [tags[b], tags[a]]
                vals += [1.0, 1.0]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def build_cross_links(posts: list[dict], user_index: dict[str, int],
                      tag_index: dict[str, int]) -> dict:
    """Authorship and tag-usage blocks; transposed pairs are exact transposes."""
    np_, nu, nh = len(posts), len(user_index), len(tag_index)
    pu_r, pu_c = [], []
    ph_r, ph_c = [], []
    uh: dict[tuple[int, int], float] = {}
    for i, p in enumerate(posts):
        a = user_index[p["author_id"]]
        pu_r.append(i)
        pu_c.append(a)
        for t in set(p.get("hashtags", [])):
            h = tag_index[t]
            ph_r.append(i)
            ph_c.append(h)
            uh[(a, h)] = uh.get((a, h), 0.0) + 1.0
    m_pu = sp.csr_matrix((np.ones(len(pu_r)), (pu_r, pu_c)), shape=(np_, nu))
    m_ph = sp.csr_matrix((np.ones(len(ph_r)), (ph_r, ph_c)), shape=(np_, nh))
    if uh:
        keys = sorted(uh)
        r = [k[0] for k in keys]
        c = [k[1] for k in keys]
        v = [uh[k] for k in keys]
        m_uh = sp.csr_matrix((v, (r, c)), shape=(nu, nh))
    else:
        m_uh = sp.csr_matrix((nu, nh))
    return {
        ("post", "user"): m_pu, ("user", "post"): m_pu.T.tocsr(),
        ("post", "hashtag"): m_ph, ("hashtag", "post"): m_ph.T.tocsr(),
        ("user", "hashtag"): m_uh, ("hashtag", "user"): m_uh.T.tocsr(),
    }


# --------------------------------------------------------------------------
# priors, blocks, assembly


@dataclass
class PriorVector:
    w: np.ndarray                 # concatenated per-kind priors
    kind_slices: dict[str, slice]

    def validate(self):
        if np.any(self.w < 0):
            raise ValueError("priors must be nonnegative")
        for kind, sl in self.kind_slices.items():
            seg = self.w[sl]
            if seg.size and abs(seg.sum() - 1.0) > 1e-12:
                raise ValueError("priors for kind %r do not sum to 1" % kind)
        return self

    @classmethod
    def from_corpus(cls, items: list[Item], posts: list[dict]) -> "PriorVector":
        usage: dict[str, int] = {}
        for p in posts:
            for t in set(p.get("hashtags", [])):
                usage[t] = usage.get(t, 0) + 1
        raw = np.zeros(len(items))
        for i, it in enumerate(items):
            if it.kind == "post":
                raw[i] = 1.0 + it.payload["retweet_count"]
            elif it.kind == "user":
                raw[i] = 1.0 + it.payload["follower_count"]
            else:
                raw[i] = 1.0 + usage.get(it.payload["tag"], 0)
        slices = kind_slices(items)
        for sl in slices.values():
            total = raw[sl].sum()
            if total > 0:
                raw[sl] /= total
        return cls(w=raw, kind_slices=slices).validate()


def kind_slices(items: list[Item]) -> dict[str, slice]:
    slices = {}
    pos = 0
    for kind in KINDS:
        cnt = sum(1 for it in items if it.kind == kind)
        slices[kind] = slice(pos, pos + cnt)
        pos += cnt
    if pos != len(items):
        raise ValueError("items are not ordered post/user/hashtag")
    for kind, sl in slices.items():
        for it in items[sl]:
            if it.kind != kind:
                raise ValueError("items are not grouped by kind")
    return slices


@dataclass
class AffinityBlocks:
    blocks: dict    # (src_kind, dst_kind) -> sparse matrix
    alpha: dict     # (src_kind, dst_kind) -> weight in [0, 1]

    @classmethod
    def from_corpus(cls, posts: list[dict], users: list[dict], items: list[Item],
                    alpha: dict | None = None, tau_sim: float = 0.2,
                    top_k: int = 50) -> "AffinityBlocks":
        user_index = {u["id"]: i for i, u in enumerate(users)}
        tags = [it.payload["tag"] for it in items if it.kind == "hashtag"]
        tag_index = {t: i for i, t in enumerate(tags)}
        blocks = {
            ("post", "post"): build_post_graph(posts, tau_sim=tau_sim, top_k=top_k),
            ("user", "user"): build_user_graph(users),
            ("hashtag", "hashtag"): build_hashtag_graph(posts, tag_index),
        }
        blocks.update(build_cross_links(posts, user_index, tag_index))
        return cls(blocks=blocks, alpha=dict(alpha or default_alpha()))


@dataclass
class HeterogeneousGraph:
    """Assembled item graph with a row-stochastic transition matrix.

    ``alpha_affinity`` holds the alpha-weighted affinities without prior
    scaling; ``transition`` row r is alpha_affinity[r] * w_dest renormalized
    to sum to 1 (dangling rows stay all-zero).
    """
    items: list[Item]
    kind_slices: dict[str, slice]
    alpha_affinity: sp.csr_matrix
    priors: np.ndarray            # current (possibly edited, unnormalized)
    transition: sp.csr_matrix
    config: SolverConfig
    base_priors: np.ndarray = None

    def __post_init__(self):
        if self.base_priors is None:
            self.base_priors = self.priors.copy()
        self.id_index = {it.id: i for i, it in enumerate(self.items)}
        codes = np.empty(len(self.items), dtype=np.int8)
        for kind, sl in self.kind_slices.items():
            codes[sl] = KIND_CODE[kind]
        self.kind_codes = codes

    @property
    def n_items(self) -> int:
        return len(self.items)

    def kind_of(self, idx: int) -> str:
        return KINDS[self.kind_codes[idx]]

    def out_degree(self) -> np.ndarray:
        return np.diff(self.transition.indptr)

    def recompute_transition_rows(self, rows) -> np.ndarray:
        """Re-derive transition rows from alpha_affinity and current priors.

        Returns the sorted array of columns whose transition entry actually
        changed in any of the given rows.
        """
        t = self.transition.tolil()
        a = self.alpha_affinity
        changed_cols = set()
        for r in rows:
            cols = a.indices[a.indptr[r]:a.indptr[r + 1]]
            vals = a.data[a.indptr[r]:a.indptr[r + 1]] * self.priors[cols]
            total = vals.sum()
            new_row = vals / total if total > 0 else vals * 0.0
            old = self.transition
            old_cols = old.indices[old.indptr[r]:old.indptr[r + 1]]
            old_vals = old.data[old.indptr[r]:old.indptr[r + 1]]
            old_map = dict(zip(old_cols.tolist(), old_vals.tolist()))
            for c, v in zip(cols.tolist(), new_row.tolist()):
                if old_map.get(c, 0.0) != v:
                    changed_cols.add((r, c))
            t.rows[r] = cols.tolist()
            t.data[r] = new_row.tolist()
        self.transition = t.tocsr()
        self.transition.sort_indices()
        return changed_cols


def assemble(blocks: AffinityBlocks, priors: PriorVector, cfg: SolverConfig,
             items: list[Item]) -> HeterogeneousGraph:
    """Assemble the block matrix, scale by destination priors, row-normalize."""
    cfg.validate()
    slices = priors.kind_slices
    counts = {k: slices[k].stop - slices[k].start for k in KINDS}
    for (src, dst), m in blocks.blocks.items():
        if m.shape != (counts[src], counts[dst]):
            raise ValueError("block %s->%s has shape %s, expected %s"
                             % (src, dst, m.shape, (counts[src], counts[dst])))
        if m.nnz and m.data.min() < 0:
            raise ValueError("negative affinity in block %s->%s" % (src, dst))
    for src in KINDS:
        has_edges = any(m.nnz for (s, d), m in blocks.blocks.items() if s == src)
        survives = any(m.nnz and blocks.alpha.get((s, d), 0.0) > 0.0
                       for (s, d), m in blocks.blocks.items() if s == src)
        if has_edges and not survives:
            raise ValueError("degenerate mixing weights for kind %r" % src)

    grid = [[None] * 3 for _ in range(3)]
    for si, src in enumerate(KINDS):
        for di, dst in enumerate(KINDS):
            m = blocks.blocks.get((src, dst))
            if m is None:
                m = sp.csr_matrix((counts[src], counts[dst]))
            grid[si][di] = m * blocks.alpha.get((src, dst), 0.0)
    a = sp.bmat(grid, format="csr")
    a.eliminate_zeros()
    a.sort_indices()

    w = priors.validate().w.copy()
    scaled = a.multiply(w[np.newaxis, :]).tocsr()
    row_sums = np.asarray(scaled.sum(axis=1)).ravel()
    inv = np.where(row_sums > 0, 1.0 / np.where(row_sums > 0, row_sums, 1.0), 0.0)
    t = (sp.diags(inv) @ scaled).tocsr()
    t.sort_indices()
    return HeterogeneousGraph(items=items, kind_slices=slices, alpha_affinity=a,
                              priors=w, transition=t, config=cfg)


def build_graph_from_corpus(posts_path, users_path, cfg: SolverConfig,
                            alpha: dict | None = None, tau_sim: float = 0.2,
                            top_k: int = 50) -> HeterogeneousGraph:
    posts = load_jsonl(posts_path)
    users = load_jsonl(users_path)
    if not posts:
        raise ValueError("empty corpus")
    items = corpus_items(posts, users)
    blocks = AffinityBlocks.from_corpus(posts, users, items, alpha=alpha,
                                        tau_sim=tau_sim, top_k=top_k)
    priors = PriorVector.from_corpus(items, posts)
    return assemble(blocks, priors, cfg, items)
