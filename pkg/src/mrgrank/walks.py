"""Monte Carlo random-walk solver with a persistent, reweightable walk store.

Walks start once per item, continue with probability d per step, follow the
row distribution of the transition matrix and terminate at dangling nodes.
Visit statistics (z, v_z) are kept as sparse per-(start, node) aggregates of
weighted visit counts, so stored walks can be reweighted in place when
transition probabilities change.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import HeterogeneousGraph, SolverConfig
from .ranking import RankingState

_SEED_MASK = (1 << 64) - 1


def _ranges(starts: np.ndarray, lens: np.ndarray) -> np.ndarray:
    """Concatenate arange(s, s+l) for each (s, l) pair."""
    lens = np.asarray(lens, dtype=np.int64)
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    heads = np.concatenate(([0], np.cumsum(lens)[:-1]))
    return (np.repeat(np.asarray(starts, dtype=np.int64), lens)
            + np.arange(total, dtype=np.int64) - np.repeat(heads, lens))


def _segmented_cumsum(x: np.ndarray, seg_lens: np.ndarray) -> np.ndarray:
    """Cumulative sum restarting at each segment boundary."""
    if x.size == 0:
        return x.copy()
    seg_lens = np.asarray(seg_lens, dtype=np.int64)
    cs = np.cumsum(x)
    heads = np.concatenate(([0], np.cumsum(seg_lens)[:-1]))
    sub = np.where(heads > 0, cs[heads - 1], 0.0)
    return cs - np.repeat(sub, seg_lens)


@dataclass
class WalkStore:
    n_items: int
    walks_per_node: int
    d: float
    seed: int
    variance_estimator: str
    flat_nodes: np.ndarray        # int32, concatenated visit sequences
    offsets: np.ndarray           # int64, per-walk visit ranges (n_walks + 1)
    step_m0: np.ndarray           # transition prob of each step at sampling time
    step_factor: np.ndarray       # current per-step reweighting multipliers
    s1: sp.csr_matrix = None      # per-(start, node) sum of weighted counts
    s2: sp.csr_matrix = None      # per-(start, node) sum of squared weighted counts
    _edge_index: tuple | None = field(default=None, repr=False)

    # ------------------------------------------------------------------
    @property
    def n_walks(self) -> int:
        return self.offsets.size - 1

    @property
    def total_steps(self) -> int:
        return self.step_m0.size

    def walk_start(self, w) -> np.ndarray:
        return np.asarray(w) // self.walks_per_node

    def walk_visits(self, w: int) -> np.ndarray:
        return self.flat_nodes[self.offsets[w]:self.offsets[w + 1]]

    def step_range(self, w: int) -> tuple[int, int]:
        return int(self.offsets[w] - w), int(self.offsets[w + 1] - (w + 1))

    def step_endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        """(from, to) node arrays for every stored step."""
        total = self.flat_nodes.size
        last = np.zeros(total, dtype=bool)
        last[self.offsets[1:] - 1] = True
        first = np.zeros(total, dtype=bool)
        first[self.offsets[:-1]] = True
        return self.flat_nodes[~last], self.flat_nodes[~first]

    def step_walks(self) -> np.ndarray:
        lens = np.diff(self.offsets) - 1
        return np.repeat(np.arange(self.n_walks, dtype=np.int64), lens)

    # ------------------------------------------------------------------
    @property
    def z(self) -> sp.csr_matrix:
        """Mean weighted visit counts per (start, node)."""
        return self.s1 / self.walks_per_node

    def v_z(self, estimator: str | None = None) -> sp.csr_matrix:
        est = estimator or self.variance_estimator
        if est == "poisson":
            return self.z
        n = self.walks_per_node
        if n < 2:
            return self.s1 * 0.0
        var = (self.s2 - self.s1.multiply(self.s1) / n) / (n - 1)
        var.data = np.maximum(var.data, 0.0)   # clamp fp negatives
        return var.tocsr()

    # ------------------------------------------------------------------
    def prefix_weights(self, walks: np.ndarray,
                       factors: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Per-visit importance weights for the given walks.

        The visit at position t of a walk carries the product of the step
        factors of its first t steps (1 for the start visit).  Returns
        (visit nodes, weights), both flat in walk order.
        """
        factors = self.step_factor if factors is None else factors
        walks = np.asarray(walks, dtype=np.int64)
        vlens = self.offsets[walks + 1] - self.offsets[walks]
        slens = vlens - 1
        vpos = _ranges(self.offsets[walks], vlens)
        spos = _ranges(self.offsets[walks] - walks, slens)
        logs = _segmented_cumsum(np.log(factors[spos]), slens)
        pw = np.empty(vpos.size)
        heads = np.concatenate(([0], np.cumsum(vlens)[:-1]))
        mask = np.ones(vpos.size, dtype=bool)
        mask[heads] = False
        pw[heads] = 1.0
        pw[mask] = np.exp(logs)
        return self.flat_nodes[vpos], pw

    def visit_sums(self, walks: np.ndarray,
                   factors: np.ndarray | None = None):
        """Aggregate weighted visit counts of the given walks.

        Returns (starts, nodes, c, c2) where c is the per-(walk, node)
        weighted count summed into (start, node) cells and c2 the matching
        sum of squares.  Suitable for building s1/s2 deltas.
        """
        walks = np.asarray(walks, dtype=np.int64)
        nodes, pw = self.prefix_weights(walks, factors)
        vlens = self.offsets[walks + 1] - self.offsets[walks]
        wrep = np.repeat(walks, vlens)
        keys = wrep * self.n_items + nodes
        uniq, inv = np.unique(keys, return_inverse=True)
        c = np.bincount(inv, weights=pw, minlength=uniq.size)
        uw = uniq // self.n_items
        un = (uniq % self.n_items).astype(np.int64)
        ustart = self.walk_start(uw)
        # collapse to (start, node) cells
        cell = ustart * self.n_items + un
        cuniq, cinv = np.unique(cell, return_inverse=True)
        s1 = np.bincount(cinv, weights=c, minlength=cuniq.size)
        s2 = np.bincount(cinv, weights=c * c, minlength=cuniq.size)
        return cuniq // self.n_items, cuniq % self.n_items, s1, s2

    def rebuild_aggregates(self):
        """Recompute s1/s2 for all walks from the current step factors."""
        rows, cols, s1, s2 = self.visit_sums(np.arange(self.n_walks))
        shape = (self.n_items, self.n_items)
        self.s1 = sp.csr_matrix((s1, (rows, cols)), shape=shape)
        self.s2 = sp.csr_matrix((s2, (rows, cols)), shape=shape)

    # ------------------------------------------------------------------
    def edge_index(self):
        """Sorted (edge key -> steps/walks) index over traversed edges."""
        if self._edge_index is None:
            frm, to = self.step_endpoints()
            keys = frm.astype(np.int64) * self.n_items + to
            order = np.argsort(keys, kind="stable")
            self._edge_index = (keys[order], order.astype(np.int64),
                                self.step_walks()[order])
        return self._edge_index

    def walks_for_edges(self, edges) -> np.ndarray:
        """Unique walk ids traversing any of the given (u, v) edges."""
        keys_sorted, _, walks_sorted = self.edge_index()
        out = []
        for u, v in edges:
            k = int(u) * self.n_items + int(v)
            lo = np.searchsorted(keys_sorted, k, side="left")
            hi = np.searchsorted(keys_sorted, k, side="right")
            if hi > lo:
                out.append(walks_sorted[lo:hi])
        if not out:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate(out))

    def walks_from_rows(self, rows) -> np.ndarray:
        """Unique walk ids with any step leaving one of the given nodes."""
        keys_sorted, _, walks_sorted = self.edge_index()
        out = []
        for u in rows:
            lo = np.searchsorted(keys_sorted, int(u) * self.n_items, side="left")
            hi = np.searchsorted(keys_sorted, (int(u) + 1) * self.n_items, side="left")
            if hi > lo:
                out.append(walks_sorted[lo:hi])
        if not out:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate(out))

    def invalidate(self):
        self._edge_index = None


# --------------------------------------------------------------------------
# sampling


def _sampling_tables(graph: HeterogeneousGraph):
    """Global inverse-CDF table: row r occupies values (r, r+1]."""
    t = graph.transition.copy()
    t.eliminate_zeros()
    t.sort_indices()
    indptr, indices, data = t.indptr, t.indices, t.data
    aug = np.empty(t.nnz)
    for r in range(t.shape[0]):
        lo, hi = indptr[r], indptr[r + 1]
        if lo == hi:
            continue
        c = np.cumsum(data[lo:hi])
        c /= c[-1]
        aug[lo:hi] = r + c
        aug[hi - 1] = r + 1.0
    return aug, indices, np.diff(indptr)


def sample_walks(graph: HeterogeneousGraph, cfg: SolverConfig | None = None) -> WalkStore:
    """Sample walks_per_node terminating walks from every item.

    Each start item gets its own RNG stream derived from (rng_seed, item
    index), so sampling is reproducible and could be parallelized per item.
    """
    cfg = (cfg or graph.config).validate()
    n = graph.n_items
    wpn = cfg.walks_per_node
    d = cfg.d
    aug, indices, outdeg = _sampling_tables(graph)

    walk_parts, node_parts, level_parts = [], [], []
    for i in range(n):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=cfg.rng_seed & _SEED_MASK, spawn_key=(i,)))
        alive = np.arange(wpn, dtype=np.int64) + i * wpn
        cur = np.full(wpn, i, dtype=np.int64)
        walk_parts.append(alive)
        node_parts.append(cur)
        level_parts.append(np.zeros(wpn, dtype=np.int32))
        for step in range(1, cfg.max_walk_length + 1):
            keep = outdeg[cur] > 0
            if not keep.all():
                alive, cur = alive[keep], cur[keep]
            if alive.size == 0:
                break
            cont = rng.random(alive.size) < d
            if not cont.all():
                alive, cur = alive[cont], cur[cont]
            if alive.size == 0:
                break
            u = rng.random(alive.size)
            pos = np.searchsorted(aug, cur + u, side="right")
            cur = indices[pos].astype(np.int64)
            walk_parts.append(alive.copy())
            node_parts.append(cur.copy())
            level_parts.append(np.full(alive.size, step, dtype=np.int32))

    walks = np.concatenate(walk_parts)
    nodes = np.concatenate(node_parts)
    levels = np.concatenate(level_parts)
    order = np.lexsort((levels, walks))
    flat_nodes = nodes[order].astype(np.int32)
    counts = np.bincount(walks, minlength=n * wpn)
    offsets = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)

    store = WalkStore(
        n_items=n, walks_per_node=wpn, d=d, seed=cfg.rng_seed,
        variance_estimator=cfg.variance_estimator,
        flat_nodes=flat_nodes, offsets=offsets,
        step_m0=np.empty(0), step_factor=np.empty(0))
    frm, to = store.step_endpoints()
    if frm.size:
        t = graph.transition.tocsr()
        store.step_m0 = np.asarray(t[frm, to]).ravel().astype(np.float64)
    else:
        store.step_m0 = np.empty(0)
    store.step_factor = np.ones_like(store.step_m0)
    store.rebuild_aggregates()
    return store


def scores_from_walks(store: WalkStore, priors: np.ndarray,
                      cfg: SolverConfig) -> RankingState:
    """Scores r_j = (1-d) sum_i w_i z_ij and variances from v_z."""
    d = cfg.d if cfg is not None else store.d
    w = np.asarray(priors, dtype=np.float64)
    z = store.z
    r = (1.0 - d) * np.asarray(z.T @ w).ravel()
    v = (1.0 - d) ** 2 * np.asarray(store.v_z().T @ (w * w)).ravel()
    return RankingState(r=r, v=v, method="mc")


# --------------------------------------------------------------------------
# binary snapshot

_MAGIC = b"MRGW"
_VERSION = 1


def walks_to_bytes(store: WalkStore) -> bytes:
    """Versioned binary snapshot: JSON header plus raw little-endian arrays."""
    header = {
        "version": _VERSION,
        "n_items": store.n_items,
        "walks_per_node": store.walks_per_node,
        "d": store.d,
        "seed": store.seed,
        "variance_estimator": store.variance_estimator,
        "n_walks": store.n_walks,
        "n_visits": int(store.flat_nodes.size),
        "n_steps": int(store.step_m0.size),
    }
    blob = json.dumps(header, sort_keys=True).encode()
    parts = [
        _MAGIC,
        len(blob).to_bytes(8, "little"),
        blob,
        store.offsets.astype("<i8").tobytes(),
        store.flat_nodes.astype("<i4").tobytes(),
        store.step_m0.astype("<f8").tobytes(),
        store.step_factor.astype("<f8").tobytes(),
    ]
    return b"".join(parts)


def save_walks(store: WalkStore, path):
    with open(path, "wb") as f:
        f.write(walks_to_bytes(store))


def walks_from_bytes(buf: bytes) -> WalkStore:
    pos = 0

    def take(n):
        nonlocal pos
        chunk = buf[pos:pos + n]
        if len(chunk) != n:
            raise ValueError("truncated walk snapshot")
        pos += n
        return chunk

    if take(4) != _MAGIC:
        raise ValueError("not a walk snapshot")
    hlen = int.from_bytes(take(8), "little")
    header = json.loads(take(hlen))
    if header["version"] != _VERSION:
        raise ValueError("unsupported snapshot version %r" % header["version"])
    offsets = np.frombuffer(take(8 * (header["n_walks"] + 1)), dtype="<i8")
    flat_nodes = np.frombuffer(take(4 * header["n_visits"]), dtype="<i4")
    step_m0 = np.frombuffer(take(8 * header["n_steps"]), dtype="<f8")
    step_factor = np.frombuffer(take(8 * header["n_steps"]), dtype="<f8")
    store = WalkStore(
        n_items=header["n_items"], walks_per_node=header["walks_per_node"],
        d=header["d"], seed=header["seed"],
        variance_estimator=header["variance_estimator"],
        flat_nodes=flat_nodes.copy(), offsets=offsets.copy(),
        step_m0=step_m0.copy(), step_factor=step_factor.copy())
    store.rebuild_aggregates()
    return store


def load_walks(path) -> WalkStore:
    with open(path, "rb") as f:
        return walks_from_bytes(f.read())
