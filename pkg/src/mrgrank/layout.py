"""Server-side display geometry: cluster layout, Voronoi cells, node placement.

All geometry lives on a rectangular canvas (default the unit square).
Cluster centers come from a deterministic stress-based layout, cells from a
clipped Voronoi tessellation, representatives from a small constrained force
simulation inside their (convex) cells, and non-representatives from a
Gaussian kernel density field anchored at representative positions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy.spatial import Voronoi
from shapely.geometry import Point, Polygon, box

DEFAULT_CANVAS = (1.0, 1.0)


# --------------------------------------------------------------------------
# cluster centers


def layout_clusters(cluster_graph: nx.Graph, canvas=DEFAULT_CANVAS,
                    margin: float = 0.12, delta_min: float = 0.02) -> dict:
    """Deterministic stress-majorization positions for cluster nodes.

    Components are laid out independently and packed on a grid; positions
    are centered on the canvas and pairwise separated by at least delta_min.
    """
    if cluster_graph.number_of_nodes() == 0:
        raise ValueError("empty cluster graph")
    w, h = canvas
    nodes = sorted(cluster_graph.nodes())
    if len(nodes) == 1:
        return {nodes[0]: (w / 2.0, h / 2.0)}

    comps = sorted(nx.connected_components(cluster_graph), key=min)
    ncomp = len(comps)
    cols = math.ceil(math.sqrt(ncomp))
    rows = math.ceil(ncomp / cols)
    pos: dict = {}
    for ci, comp in enumerate(comps):
        comp = sorted(comp)
        sub = cluster_graph.subgraph(comp)
        if len(comp) == 1:
            local = {comp[0]: np.zeros(2)}
        else:
            local = nx.kamada_kawai_layout(sub, weight=None)
        pts = np.array([local[n] for n in comp], dtype=float)
        pts -= pts.mean(axis=0)
        extent = np.abs(pts).max()
        if extent > 0:
            pts /= extent
        cx = (ci % cols + 0.5) / cols * w
        cy = (ci // cols + 0.5) / rows * h
        half = 0.5 * min(w / cols, h / rows) * (1.0 - margin)
        for n, p in zip(comp, pts):
            pos[n] = np.array([cx + p[0] * half, cy + p[1] * half])

    pts = np.array([pos[n] for n in nodes])
    pts += np.array([w / 2.0, h / 2.0]) - pts.mean(axis=0)

    # enforce minimum pairwise separation (deterministic nudges)
    for _ in range(50):
        moved = False
        for a in range(len(nodes)):
            for b in range(a + 1, len(nodes)):
                delta = pts[b] - pts[a]
                dist = float(np.hypot(*delta))
                if dist < delta_min:
                    if dist < 1e-12:
                        direction = np.array([1.0, 0.0])
                    else:
                        direction = delta / dist
                    push = 0.5 * (delta_min - dist)
                    pts[a] -= direction * push
                    pts[b] += direction * push
                    moved = True
        if not moved:
            break
    pad = margin * min(w, h) / 4.0
    pts[:, 0] = np.clip(pts[:, 0], pad, w - pad)
    pts[:, 1] = np.clip(pts[:, 1], pad, h - pad)
    return {n: (float(p[0]), float(p[1])) for n, p in zip(nodes, pts)}


# --------------------------------------------------------------------------
# Voronoi cells


def voronoi_cells(centers: dict, canvas=DEFAULT_CANVAS) -> dict:
    """Clipped Voronoi cells per center, as CCW vertex lists.

    Sites are mirrored across the four canvas edges so every original cell
    is finite and exactly clipped to the canvas.
    """
    w, h = canvas
    ids = sorted(centers)
    pts = np.array([centers[i] for i in ids], dtype=float)
    n = len(ids)
    for a in range(n):
        for b in range(a + 1, n):
            if np.hypot(*(pts[a] - pts[b])) < 1e-9:
                raise ValueError("degenerate sites")
    if n == 1:
        return {ids[0]: [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)]}

    mirrored = [pts]
    mirrored.append(pts * [-1, 1])                      # left edge
    mirrored.append(pts * [-1, 1] + [2 * w, 0])         # right edge
    mirrored.append(pts * [1, -1])                      # bottom edge
    mirrored.append(pts * [1, -1] + [0, 2 * h])         # top edge
    vor = Voronoi(np.vstack(mirrored))
    canvas_box = box(0.0, 0.0, w, h)
    cells = {}
    for k, cid in enumerate(ids):
        region = vor.regions[vor.point_region[k]]
        poly = Polygon(vor.vertices[region])
        poly = poly.intersection(canvas_box)
        coords = list(poly.exterior.coords[:-1])
        # ensure CCW
        if Polygon(coords).exterior.is_ccw is False:
            coords = coords[::-1]
        cells[cid] = [(float(x), float(y)) for x, y in coords]
    return cells


def cell_polygon(cell) -> Polygon:
    return Polygon(cell)


def cell_diameter(cell) -> float:
    pts = np.array(cell)
    best = 0.0
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            best = max(best, float(np.hypot(*(pts[a] - pts[b]))))
    return best


# --------------------------------------------------------------------------
# representative placement


def place_in_cell(cell, k: int, seed: int = 0, iterations: int = 60) -> np.ndarray:
    """Place k points inside a convex cell: mutual repulsion plus a boundary
    force pushing back toward the centroid.  Points never leave the cell."""
    poly = cell_polygon(cell)
    centroid = np.array(poly.centroid.coords[0])
    if k == 1:
        return centroid[None, :]
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed & ((1 << 64) - 1)))
    r0 = 0.25 * math.sqrt(poly.area / math.pi)
    angles = 2 * math.pi * (np.arange(k) / k) + rng.random() * 2 * math.pi
    pts = centroid + r0 * np.column_stack([np.cos(angles), np.sin(angles)])
    pts = _pull_inside(poly, centroid, pts)
    scale = math.sqrt(poly.area)
    for it in range(iterations):
        step = 0.08 * scale * (0.95 ** it)
        force = np.zeros_like(pts)
        for a in range(k):
            for b in range(k):
                if a == b:
                    continue
                delta = pts[a] - pts[b]
                d = max(float(np.hypot(*delta)), 1e-6 * scale)
                force[a] += delta / d * (0.02 * scale / d) * 0.02 * scale
        # boundary repulsion: push toward centroid when close to the edge
        for a in range(k):
            d_edge = poly.exterior.distance(Point(pts[a]))
            if d_edge < 0.15 * scale:
                direction = centroid - pts[a]
                norm = float(np.hypot(*direction))
                if norm > 1e-12:
                    force[a] += direction / norm * (0.15 * scale - d_edge)
        norms = np.hypot(force[:, 0], force[:, 1])
        big = norms > step
        force[big] *= (step / norms[big])[:, None]
        pts = _pull_inside(poly, centroid, pts + force)
    return pts


def _pull_inside(poly: Polygon, centroid: np.ndarray, pts: np.ndarray,
                 margin_frac: float = 0.02) -> np.ndarray:
    """Pull points toward the centroid until they are strictly inside.

    Valid for convex cells: the segment to the centroid stays inside."""
    margin = margin_frac * math.sqrt(poly.area)
    out = pts.copy()
    for a in range(len(out)):
        p = out[a]
        for _ in range(40):
            pt = Point(p)
            if poly.contains(pt) and poly.exterior.distance(pt) >= margin * 0.5:
                break
            p = centroid + 0.8 * (p - centroid)
        out[a] = p
    return out


# --------------------------------------------------------------------------
# density field


@dataclass
class DensityField:
    """Sum of isotropic Gaussian kernels; integrates to the total weight."""
    points: np.ndarray      # (m, 2) kernel centers
    weights: np.ndarray     # (m,)
    bandwidths: np.ndarray  # (m,)
    canvas: tuple = DEFAULT_CANVAS
    grid_size: int = 64

    def evaluate(self, xy: np.ndarray) -> np.ndarray:
        xy = np.atleast_2d(xy)
        out = np.zeros(len(xy))
        for p, wgt, hh in zip(self.points, self.weights, self.bandwidths):
            d2 = ((xy - p) ** 2).sum(axis=1)
            out += wgt / (2 * math.pi * hh * hh) * np.exp(-d2 / (2 * hh * hh))
        return out

    def grid(self) -> tuple[np.ndarray, tuple]:
        w, h = self.canvas
        xs = (np.arange(self.grid_size) + 0.5) * w / self.grid_size
        ys = (np.arange(self.grid_size) + 0.5) * h / self.grid_size
        gx, gy = np.meshgrid(xs, ys)
        vals = self.evaluate(np.column_stack([gx.ravel(), gy.ravel()]))
        return vals.reshape(self.grid_size, self.grid_size), (0.0, 0.0, w, h)


# --------------------------------------------------------------------------
# assembled result


@dataclass
class LayoutResult:
    canvas: tuple
    cluster_centers: dict       # cluster id -> (x, y)
    cells: dict                 # cluster id -> [(x, y), ...]
    node_positions: dict        # item index -> (x, y)
    density: DensityField | None = None

    def to_json(self) -> dict:
        out = {
            "canvas": list(self.canvas),
            "cluster_centers": {str(k): list(v) for k, v in self.cluster_centers.items()},
            "cells": {str(k): [list(p) for p in v] for k, v in self.cells.items()},
            "node_positions": {str(k): list(v) for k, v in self.node_positions.items()},
        }
        if self.density is not None:
            vals, extent = self.density.grid()
            out["density"] = {"grid": np.round(vals, 10).tolist(), "extent": list(extent)}
        return out


def compute_layout(cluster_graph: nx.Graph, reps: dict, rep_weights: dict,
                   seed: int = 0, canvas=DEFAULT_CANVAS) -> LayoutResult:
    """Full geometry pass: centers -> cells -> representative positions ->
    density field over assigned non-representative mass.

    ``reps`` maps cluster id -> list of item indices, ``rep_weights`` maps
    item index -> number of non-representatives assigned to it.
    """
    centers = layout_clusters(cluster_graph, canvas=canvas)
    cells = voronoi_cells(centers, canvas=canvas)
    node_positions: dict = {}
    dens_pts, dens_w, dens_h = [], [], []
    for cid in sorted(cells):
        items = reps.get(cid, [])
        if not items:
            continue
        pts = place_in_cell(cells[cid], len(items),
                            seed=seed * 1000003 + int(cid))
        bandwidth = cell_diameter(cells[cid]) / 6.0
        for item, p in zip(items, pts):
            node_positions[int(item)] = (float(p[0]), float(p[1]))
            wgt = rep_weights.get(int(item), 0)
            if wgt > 0:
                dens_pts.append(p)
                dens_w.append(float(wgt))
                dens_h.append(bandwidth)
    density = None
    if dens_pts:
        density = DensityField(points=np.array(dens_pts), weights=np.array(dens_w),
                               bandwidths=np.array(dens_h), canvas=canvas)
    return LayoutResult(canvas=canvas, cluster_centers=centers, cells=cells,
                        node_positions=node_positions, density=density)
