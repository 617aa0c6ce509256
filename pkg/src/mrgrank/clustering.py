"""Item hierarchy, representative selection and the cluster graph.

A deterministic average-linkage agglomerative tree is built per item kind
from its (symmetrized) affinity block.  Ties in linkage similarity are
broken by the smallest pair of node indices, so rebuilding with the same
inputs reproduces the same tree.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np
import scipy.sparse as sp


@dataclass
class ClusterNode:
    idx: int
    members: np.ndarray           # local item indices (within the kind)
    children: tuple | None = None  # (left idx, right idx) or None for leaves
    linkage: float = 0.0           # average affinity at the merge
    depth: int = 0


@dataclass
class ClusterModel:
    kind: str
    item_ids: list[str]            # local index -> item id
    nodes: list[ClusterNode]
    root: int

    @property
    def n_leaves(self) -> int:
        return len(self.item_ids)

    @property
    def max_depth(self) -> int:
        return max(n.depth for n in self.nodes)

    def level(self, depth: int) -> list[ClusterNode]:
        """Cut of the tree at the given depth (leaves shallower than the cut
        stay as their own clusters)."""
        if depth < 0 or depth > self.max_depth:
            raise ValueError("invalid level %d (0..%d)" % (depth, self.max_depth))
        out = []
        stack = [self.root]
        while stack:
            i = stack.pop()
            node = self.nodes[i]
            if node.depth == depth or node.children is None:
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return sorted(out, key=lambda n: int(n.members.min()))

    def to_json(self) -> dict:
        def rec(i):
            node = self.nodes[i]
            d = {"idx": node.idx, "depth": node.depth,
                 "members": [self.item_ids[m] for m in node.members.tolist()]}
            if node.children is not None:
                d["linkage"] = node.linkage
                d["children"] = [rec(c) for c in node.children]
            return d
        return {"kind": self.kind, "root": rec(self.root)}


def build_hierarchy(item_ids: list[str], affinity: sp.spmatrix,
                    kind: str = "") -> ClusterModel:
    """Average-linkage agglomeration over pairwise affinities (higher = closer)."""
    n = len(item_ids)
    if n == 0:
        raise ValueError("no items to cluster")
    nodes = [ClusterNode(idx=i, members=np.array([i])) for i in range(n)]
    if n == 1:
        return ClusterModel(kind=kind, item_ids=list(item_ids), nodes=nodes, root=0)

    a = sp.csr_matrix(affinity, dtype=np.float64)
    s = np.asarray((a + a.T).todense()) / 2.0
    np.fill_diagonal(s, -np.inf)
    sizes = np.ones(n)
    active = np.ones(n, dtype=bool)
    cluster_of = np.arange(n)          # matrix row -> tree node idx
    for _ in range(n - 1):
        masked = np.where(active[:, None] & active[None, :], s, -np.inf)
        flat = int(np.argmax(masked))   # first occurrence = smallest (i, j)
        i, j = divmod(flat, n)
        if i > j:
            i, j = j, i
        link = float(masked[i, j])
        left, right = cluster_of[i], cluster_of[j]
        members = np.sort(np.concatenate([nodes[left].members, nodes[right].members]))
        new = ClusterNode(idx=len(nodes), members=members,
                          children=(left, right),
                          linkage=0.0 if link == -np.inf else link)
        nodes.append(new)
        # average linkage update into row/col i
        ni, nj = sizes[i], sizes[j]
        merged = (ni * s[i, :] + nj * s[j, :]) / (ni + nj)
        s[i, :] = merged
        s[:, i] = merged
        s[i, i] = -np.inf
        active[j] = False
        sizes[i] = ni + nj
        cluster_of[i] = new.idx
    root = len(nodes) - 1

    # assign depths top-down
    stack = [(root, 0)]
    while stack:
        idx, depth = stack.pop()
        nodes[idx].depth = depth
        if nodes[idx].children is not None:
            for c in nodes[idx].children:
                stack.append((c, depth + 1))
    return ClusterModel(kind=kind, item_ids=list(item_ids), nodes=nodes, root=root)


def select_representatives(members, scores: np.ndarray, affinity: sp.spmatrix,
                           k: int = 8):
    """Top-k members by score (ties by index); assign the rest to their
    highest-affinity representative (ties by representative order)."""
    members = np.asarray(members, dtype=np.int64)
    if k < 1:
        raise ValueError("k must be >= 1")
    order = np.lexsort((members, -scores[members]))
    reps = members[order[:min(k, members.size)]].tolist()
    assignment = {}
    if members.size > len(reps):
        a = sp.csr_matrix(affinity)
        sym = (a + a.T) / 2.0
        for m in members:
            if m in reps:
                continue
            best, best_aff = reps[0], -1.0
            for rep in reps:
                aff = sym[m, rep]
                if aff > best_aff:
                    best, best_aff = rep, aff
            assignment[int(m)] = int(best)
    return reps, assignment


def build_cluster_graph(model: ClusterModel, level: int, affinity: sp.spmatrix,
                        theta_edge: int = 3) -> nx.Graph:
    """Cluster-level graph: edge iff the count of item-level edges between
    two clusters reaches theta_edge (inclusive)."""
    clusters = model.level(level)
    a = sp.csr_matrix(affinity)
    sym = ((a + a.T) > 0).astype(np.int64)
    g = nx.Graph()
    for node in clusters:
        g.add_node(node.idx, members=node.members.tolist())
    for x in range(len(clusters)):
        for y in range(x + 1, len(clusters)):
            cx, cy = clusters[x], clusters[y]
            count = int(sym[cx.members][:, cy.members].sum())
            if count >= theta_edge:
                g.add_edge(cx.idx, cy.idx, weight=count)
    return g
