import numpy as np
import networkx as nx
import pytest
from shapely.geometry import Point, Polygon

from mrgrank.layout import (DEFAULT_CANVAS, DensityField, cell_diameter,
                            cell_polygon, compute_layout, layout_clusters,
                            place_in_cell, voronoi_cells)


def _random_cluster_graph(rng, n):
    g = nx.Graph()
    g.add_nodes_from(range(n))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.3:
                g.add_edge(i, j, weight=int(rng.integers(1, 5)))
    return g


class TestClusterLayout:
    def test_single_cluster_at_center(self):
        g = nx.Graph()
        g.add_node(0)
        centers = layout_clusters(g)
        assert centers[0] == pytest.approx((0.5, 0.5))

    def test_two_clusters_symmetric_about_center(self):
        g = nx.Graph()
        g.add_edge(0, 1, weight=1)
        centers = layout_clusters(g)
        mid = (np.array(centers[0]) + np.array(centers[1])) / 2
        assert np.allclose(mid, [0.5, 0.5], atol=1e-6)

    def test_triangle_nearly_equilateral(self):
        g = nx.Graph()
        for u, v in [(0, 1), (1, 2), (0, 2)]:
            g.add_edge(u, v, weight=1)
        centers = layout_clusters(g)
        pts = np.array([centers[i] for i in range(3)])
        d = [np.linalg.norm(pts[i] - pts[j])
             for i, j in [(0, 1), (1, 2), (0, 2)]]
        assert (max(d) - min(d)) / np.mean(d) < 0.02

    def test_min_separation_enforced(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            g = _random_cluster_graph(rng, int(rng.integers(2, 9)))
            centers = layout_clusters(g, delta_min=0.02)
            pts = np.array(list(centers.values()))
            for i in range(len(pts)):
                for j in range(i + 1, len(pts)):
                    assert np.linalg.norm(pts[i] - pts[j]) >= 0.02 - 1e-9

    def test_empty_graph_rejected(self):
        with pytest.raises(ValueError):
            layout_clusters(nx.Graph())


class TestVoronoi:
    def test_single_center_full_canvas(self):
        cells = voronoi_cells({0: (0.3, 0.7)})
        poly = cell_polygon(cells[0])
        assert poly.area == pytest.approx(1.0)

    def test_two_centers_bisector(self):
        cells = voronoi_cells({0: (0.25, 0.5), 1: (0.75, 0.5)})
        a, b = cell_polygon(cells[0]), cell_polygon(cells[1])
        assert a.area == pytest.approx(0.5, abs=1e-9)
        assert b.area == pytest.approx(0.5, abs=1e-9)
        for x, y in cells[0]:
            assert x <= 0.5 + 1e-9

    def test_point_sampling_oracle(self):
        rng = np.random.default_rng(3)
        centers = {i: tuple(rng.random(2) * 0.8 + 0.1) for i in range(10)}
        cells = voronoi_cells(centers)
        polys = {i: cell_polygon(c) for i, c in cells.items()}
        pts = rng.random((10000, 2))
        sites = np.array([centers[i] for i in range(10)])
        nearest = np.argmin(((pts[:, None, :] - sites[None]) ** 2).sum(-1), axis=1)
        bad = 0
        for p, k in zip(pts, nearest):
            if not polys[int(k)].buffer(1e-9).contains(Point(p)):
                bad += 1
        assert bad == 0

    def test_cells_tile_canvas(self):
        rng = np.random.default_rng(5)
        centers = {i: tuple(rng.random(2)) for i in range(6)}
        cells = voronoi_cells(centers)
        total = sum(cell_polygon(c).area for c in cells.values())
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_coincident_sites_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            voronoi_cells({0: (0.5, 0.5), 1: (0.5, 0.5)})


class TestPlacement:
    def test_single_representative_at_centroid(self):
        cell = [(0, 0), (1, 0), (1, 1), (0, 1)]
        pts = place_in_cell(cell, 1)
        assert np.allclose(pts[0], [0.5, 0.5])

    def test_containment_over_random_instances(self):
        rng = np.random.default_rng(11)
        for trial in range(50):
            n = int(rng.integers(2, 8))
            centers = {i: tuple(rng.random(2) * 0.9 + 0.05) for i in range(n)}
            try:
                cells = voronoi_cells(centers)
            except ValueError:
                continue
            cid = int(rng.integers(0, n))
            k = int(rng.integers(1, 9))
            pts = place_in_cell(cells[cid], k, seed=trial)
            poly = cell_polygon(cells[cid]).buffer(1e-9)
            for p in pts:
                assert poly.contains(Point(p))

    def test_deterministic(self):
        cell = [(0.1, 0.1), (0.9, 0.2), (0.8, 0.9), (0.2, 0.8)]
        a = place_in_cell(cell, 5, seed=3)
        b = place_in_cell(cell, 5, seed=3)
        assert np.array_equal(a, b)


class TestDensity:
    def test_integrates_to_total_weight(self):
        rng = np.random.default_rng(2)
        pts = rng.random((6, 2)) * 0.6 + 0.2
        w = rng.integers(1, 10, 6).astype(float)
        field = DensityField(points=pts, weights=w,
                             bandwidths=np.full(6, 0.05), canvas=(1.0, 1.0))
        # integrate over an extended domain so the gaussian tails are captured
        n = 400
        xs = np.linspace(-0.5, 1.5, n)
        ys = np.linspace(-0.5, 1.5, n)
        gx, gy = np.meshgrid(xs, ys)
        vals = field.evaluate(np.column_stack([gx.ravel(), gy.ravel()]))
        integral = vals.sum() * (2.0 / n) ** 2
        assert integral == pytest.approx(w.sum(), rel=0.02)

    def test_grid_shape_and_extent(self):
        field = DensityField(points=np.array([[0.5, 0.5]]),
                             weights=np.array([2.0]),
                             bandwidths=np.array([0.1]), canvas=(1.0, 1.0))
        vals, extent = field.grid()
        assert vals.shape == (64, 64)
        assert extent == (0.0, 0.0, 1.0, 1.0)   # (x0, y0, x1, y1)


class TestFullLayout:
    def _layout(self, seed=0):
        rng = np.random.default_rng(seed)
        g = _random_cluster_graph(rng, 4)
        reps = {i: [10 * i + k for k in range(3)] for i in range(4)}
        weights = {10 * i + k: int(rng.integers(0, 6))
                   for i in range(4) for k in range(3)}
        return compute_layout(g, reps, weights, seed=seed)

    def test_representatives_inside_their_cells(self):
        res = self._layout()
        for cid, items in {i: [10 * i + k for k in range(3)]
                           for i in range(4)}.items():
            poly = cell_polygon(res.cells[cid]).buffer(1e-9)
            for it in items:
                assert poly.contains(Point(res.node_positions[it]))

    def test_json_roundtrip_deterministic(self):
        import json
        a = json.dumps(self._layout(seed=5).to_json(), sort_keys=True)
        b = json.dumps(self._layout(seed=5).to_json(), sort_keys=True)
        assert a == b
