"""Uncertainty-propagation flow routing and force-directed path bundling.

Each selected source cluster gets a flow tree rooted at its center: targets
in a similar direction share a trunk through a junction point, and branch
values add up exactly to the trunk value.  Trees from multiple sources are
then bundled with angle/scale/position compatibility forces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class FlowPath:
    source: object                 # source cluster id
    target: object                 # target cluster id
    points: np.ndarray             # polyline control points, (n, 2)
    seg_values: np.ndarray         # per-segment flow magnitude, (n - 1,)
    value: float                   # flow into the target
    group: int = -1                # bundle group id

    def to_json(self) -> dict:
        return {
            "source": str(self.source),
            "target": str(self.target),
            "points": [[float(x), float(y)] for x, y in self.points],
            "seg_values": [float(v) for v in self.seg_values],
            "value": float(self.value),
            "group": int(self.group),
        }


# --------------------------------------------------------------------------
# routing


def route_flows(source_flows: dict, centers: dict, top_k: int = 10,
                spiral_angle_deg: float = 25.0) -> list[FlowPath]:
    """Build one flow tree per source.

    ``source_flows`` maps source id -> {target id: flow value}.  Targets in
    a common direction (angular spread below twice the spiral angle) share a
    junction; trunk values are the sums of their branch values, and every
    root-to-target path approaches its target monotonically.
    """
    paths: list[FlowPath] = []
    spread_limit = 2.0 * math.radians(spiral_angle_deg)
    for src in sorted(source_flows, key=str):
        flows = {t: v for t, v in source_flows[src].items() if v > 0 and t != src}
        if not flows:
            continue
        targets = sorted(flows, key=lambda t: (-flows[t], str(t)))[:top_k]
        root = np.array(centers[src], dtype=float)
        polar = []
        for t in targets:
            vec = np.array(centers[t], dtype=float) - root
            r = float(np.hypot(*vec))
            if r < 1e-12:
                continue
            polar.append((math.atan2(vec[1], vec[0]), r, t))
        polar.sort(key=lambda p: (p[0], str(p[2])))

        groups: list[list] = []
        for entry in polar:
            if groups and entry[0] - groups[-1][0][0] <= spread_limit \
                    and entry[0] - groups[-1][-1][0] <= spread_limit:
                groups[-1].append(entry)
            else:
                groups.append([entry])

        for grp in groups:
            if len(grp) == 1:
                ang, r, t = grp[0]
                tp = np.array(centers[t], dtype=float)
                paths.append(FlowPath(source=src, target=t,
                                      points=np.vstack([root, tp]),
                                      seg_values=np.array([flows[t]]),
                                      value=float(flows[t])))
                continue
            vals = np.array([flows[t] for _, _, t in grp])
            dirs = np.array([[math.cos(a), math.sin(a)] for a, _, _ in grp])
            mean_dir = (dirs * vals[:, None]).sum(axis=0)
            norm = float(np.hypot(*mean_dir))
            mean_dir = dirs[0] if norm < 1e-12 else mean_dir / norm
            r_min = min(r for _, r, _ in grp)
            # keep |J| <= (t - root) . mean_dir for every target so the path
            # root -> J -> t never moves away from t
            proj = [float((np.array(centers[t]) - root) @ mean_dir) for _, _, t in grp]
            min_proj = min(proj)
            if min_proj <= 0:
                for ang, r, t in grp:
                    tp = np.array(centers[t], dtype=float)
                    paths.append(FlowPath(source=src, target=t,
                                          points=np.vstack([root, tp]),
                                          seg_values=np.array([flows[t]]),
                                          value=float(flows[t])))
                continue
            radius = min(0.5 * r_min, 0.9 * min_proj)
            junction = root + radius * mean_dir
            trunk_value = float(vals.sum())
            for ang, r, t in grp:
                tp = np.array(centers[t], dtype=float)
                paths.append(FlowPath(source=src, target=t,
                                      points=np.vstack([root, junction, tp]),
                                      seg_values=np.array([trunk_value, flows[t]]),
                                      value=float(flows[t])))
    return paths


def path_is_monotone(path: FlowPath, tol: float = 1e-9) -> bool:
    """Distance to the target is non-increasing along the whole polyline."""
    target = path.points[-1]
    for a, b in zip(path.points[:-1], path.points[1:]):
        step = b - a
        # |x - target| along the segment is convex; its maximum slope is at b
        if float((b - target) @ step) > tol:
            return False
    return True


# --------------------------------------------------------------------------
# compatibility measures (computed on path chords)


def angle_compatibility(e_i: np.ndarray, e_j: np.ndarray) -> float:
    ni, nj = np.hypot(*e_i), np.hypot(*e_j)
    if ni < 1e-12 or nj < 1e-12:
        return 0.0
    return abs(float(e_i @ e_j) / (ni * nj))


def scale_compatibility(e_i: np.ndarray, e_j: np.ndarray) -> float:
    """2 / (l_avg*l_min + l_min/l_avg).

    Symmetric and positive; equals 1 for equal unit lengths and grows
    without bound as the shorter chord shrinks relative to the average.
    Bundling normalizes coordinates to the unit square first, which keeps
    the product compatibility usable as a grouping score.
    """
    li, lj = float(np.hypot(*e_i)), float(np.hypot(*e_j))
    l_avg = (li + lj) / 2.0
    lmin = min(li, lj)
    if l_avg < 1e-12 or lmin < 1e-12:
        return 0.0
    return 2.0 / (l_avg * lmin + lmin / l_avg)


def position_compatibility(mid_i: np.ndarray, mid_j: np.ndarray,
                           e_i: np.ndarray, e_j: np.ndarray) -> float:
    li, lj = float(np.hypot(*e_i)), float(np.hypot(*e_j))
    l_avg = (li + lj) / 2.0
    if l_avg < 1e-12:
        return 0.0
    return l_avg / (l_avg + float(np.hypot(*(mid_i - mid_j))))


def edge_compatibility(p_i: np.ndarray, p_j: np.ndarray) -> float:
    """Total compatibility of two paths from their endpoint chords."""
    e_i = p_i[-1] - p_i[0]
    e_j = p_j[-1] - p_j[0]
    mid_i = (p_i[0] + p_i[-1]) / 2.0
    mid_j = (p_j[0] + p_j[-1]) / 2.0
    return (angle_compatibility(e_i, e_j)
            * scale_compatibility(e_i, e_j)
            * position_compatibility(mid_i, mid_j, e_i, e_j))


# --------------------------------------------------------------------------
# bundling


def resample_path(points: np.ndarray, seg_values: np.ndarray,
                  n_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Arc-length resampling to n_points; per-segment values carried over
    from the original segment containing each new segment midpoint."""
    pts = np.asarray(points, dtype=float)
    seg_len = np.hypot(*(pts[1:] - pts[:-1]).T)
    total = seg_len.sum()
    if total < 1e-12:
        new = np.tile(pts[0], (n_points, 1))
        return new, np.full(n_points - 1, seg_values[0] if len(seg_values) else 0.0)
    cum = np.concatenate(([0.0], np.cumsum(seg_len)))
    s = np.linspace(0.0, total, n_points)
    new = np.empty((n_points, 2))
    for d in range(2):
        new[:, d] = np.interp(s, cum, pts[:, d])
    mids = (s[:-1] + s[1:]) / 2.0
    orig_seg = np.clip(np.searchsorted(cum, mids, side="right") - 1, 0, len(seg_len) - 1)
    return new, np.asarray(seg_values, dtype=float)[orig_seg]


def bundle_paths(paths: list[FlowPath], n_points: int = 20, iterations: int = 60,
                 spring_k: float = 0.1, step: float = 0.02, cooling: float = 0.95,
                 ce_threshold: float = 0.05, canvas=(1.0, 1.0)) -> list[FlowPath]:
    """Iteratively attract compatible paths toward each other.

    Endpoints are pinned.  Compatibility uses the printed angle/scale/
    position measures on unit-box-normalized coordinates (the scale measure
    is not scale invariant, so coordinates are normalized first).
    """
    if len(paths) < 2:
        return [FlowPath(p.source, p.target, *resample_path(p.points, p.seg_values, n_points),
                         value=p.value, group=g) for g, p in enumerate(paths)]
    scale = float(max(canvas))
    polys = []
    vals = []
    for p in paths:
        pts, sv = resample_path(p.points, p.seg_values, n_points)
        polys.append(pts / scale)
        vals.append(sv)

    n = len(polys)
    ce = np.zeros((n, n))
    flip = np.zeros((n, n), dtype=bool)
    for a in range(n):
        for b in range(a + 1, n):
            c = edge_compatibility(polys[a], polys[b])
            ce[a, b] = ce[b, a] = c
            ch_a = polys[a][-1] - polys[a][0]
            ch_b = polys[b][-1] - polys[b][0]
            flip[a, b] = flip[b, a] = float(ch_a @ ch_b) < 0

    arr = np.stack(polys)                     # (n, P, 2)
    for it in range(iterations):
        s = step * (cooling ** it)
        new = arr.copy()
        for a in range(n):
            f = np.zeros((n_points, 2))
            f[1:-1] += spring_k * (arr[a, :-2] - arr[a, 1:-1])
            f[1:-1] += spring_k * (arr[a, 2:] - arr[a, 1:-1])
            for b in range(n):
                if b == a or ce[a, b] <= ce_threshold:
                    continue
                other = arr[b][::-1] if flip[a, b] else arr[b]
                f[1:-1] += ce[a, b] * (other[1:-1] - arr[a, 1:-1])
            norms = np.hypot(f[:, 0], f[:, 1])
            big = norms > s
            f[big] *= (s / norms[big])[:, None]
            f[0] = 0.0
            f[-1] = 0.0
            new[a] = arr[a] + f
        arr = new

    groups = _bundle_groups(ce, ce_threshold)
    out = []
    for a, p in enumerate(paths):
        out.append(FlowPath(source=p.source, target=p.target,
                            points=arr[a] * scale, seg_values=vals[a],
                            value=p.value, group=groups[a]))
    return out


def _bundle_groups(ce: np.ndarray, threshold: float) -> list[int]:
    n = ce.shape[0]
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a in range(n):
        for b in range(a + 1, n):
            if ce[a, b] > threshold:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[rb] = ra
    roots = {}
    out = []
    for a in range(n):
        r = find(a)
        out.append(roots.setdefault(r, len(roots)))
    return out


# --------------------------------------------------------------------------
# SVG export


def flows_svg(paths: list[FlowPath], canvas=(1.0, 1.0), size: int = 800) -> str:
    """Minimal standalone SVG rendering of flow paths (for headless checks)."""
    w, h = canvas
    sx = size / w
    sy = size / h
    colors = ["#e6762d", "#2d7fe6", "#3fa65c", "#a14fc9", "#c94f60", "#888833"]
    lines = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
        'viewBox="0 0 %d %d">' % (size, size, size, size),
        '<rect width="%d" height="%d" fill="white"/>' % (size, size),
    ]
    vmax = max((p.seg_values.max() for p in paths if len(p.seg_values)), default=1.0)
    for p in paths:
        color = colors[p.group % len(colors)] if p.group >= 0 else colors[0]
        for (a, b), v in zip(zip(p.points[:-1], p.points[1:]), p.seg_values):
            width = 0.5 + 6.0 * (v / vmax if vmax > 0 else 0.0)
            lines.append(
                '<line x1="%.2f" y1="%.2f" x2="%.2f" y2="%.2f" stroke="%s" '
                'stroke-width="%.2f" stroke-opacity="0.7" stroke-linecap="round"/>'
                % (a[0] * sx, size - a[1] * sy, b[0] * sx, size - b[1] * sy,
                   color, width))
    lines.append("</svg>")
    return "\n".join(lines)
