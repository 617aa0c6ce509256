import {
  buildChangeGlyph,
  buildGlyph,
  scoreRadiusScale,
  type ChangeGlyphSpec,
  type GlyphSpec,
} from "./glyph.js";
import type {
  ClusterEntry,
  ClustersPayload,
  EditDelta,
  Kind,
  LayoutPayload,
  PropagationPayload,
  RankedItem,
} from "./types.js";

/** One representative node on the canvas. */
export interface SceneNode {
  id: string;
  clusterId: string;
  x: number;
  y: number;
  score: number;
  radius: number;
  changeGlyph?: ChangeGlyphSpec;
}

export interface SceneCluster {
  id: string;
  center: [number, number];
  cell: [number, number][];
  score: number;
  radius: number;
  glyph?: GlyphSpec;
}

export interface Scene {
  kind: Kind;
  level: number;
  canvas: [number, number];
  clusters: SceneCluster[];
  nodes: SceneNode[];
  density?: { grid: number[][]; extent: [number, number, number, number] };
  flows?: PropagationPayload;
}

const MAX_CLUSTER_RADIUS = 0.06;
const MAX_NODE_RADIUS = 0.018;

/**
 * Assemble the drawable scene from service payloads. All numbers come from
 * the service; the only arithmetic here is visual scaling.
 */
export function buildScene(
  layout: LayoutPayload,
  rankings: RankedItem[],
  clusters: ClustersPayload,
  flows?: PropagationPayload,
): Scene {
  const scoreById = new Map(rankings.map((r) => [r.id, r.score]));
  const maxClusterScore = Math.max(...clusters.clusters.map((c) => c.score), 0);
  const clusterScale = scoreRadiusScale(maxClusterScore, MAX_CLUSTER_RADIUS, 0.012);
  const maxItemScore = Math.max(...rankings.map((r) => r.score), 0);
  const nodeScale = scoreRadiusScale(maxItemScore, MAX_NODE_RADIUS, 0.004);

  const sceneClusters: SceneCluster[] = clusters.clusters.map((c) => {
    const center = layout.cluster_centers[c.id];
    if (!center) {
      throw new Error(`layout is missing cluster ${c.id}`);
    }
    const radius = clusterScale(c.score);
    return {
      id: c.id,
      center,
      cell: layout.cells[c.id] ?? [],
      score: c.score,
      radius,
      glyph: c.summary
        ? buildGlyph(center[0], center[1], radius * 1.25, c.summary)
        : undefined,
    };
  });

  const clusterOf = new Map<string, string>();
  for (const c of clusters.clusters) {
    for (const rep of c.representatives) {
      clusterOf.set(rep, c.id);
    }
  }

  const nodes: SceneNode[] = [];
  for (const [id, pos] of Object.entries(layout.node_positions)) {
    const score = scoreById.get(id) ?? 0;
    nodes.push({
      id,
      clusterId: clusterOf.get(id) ?? "",
      x: pos[0],
      y: pos[1],
      score,
      radius: nodeScale(score),
    });
  }
  nodes.sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0));

  return {
    kind: layout.kind,
    level: layout.level,
    canvas: layout.canvas,
    clusters: sceneClusters,
    nodes,
    density: layout.density,
    flows,
  };
}

/**
 * Apply an edit delta: update scores/radii and attach a change glyph to every
 * affected node that is on the canvas. Unaffected nodes keep identical
 * geometry (same object, untouched).
 */
export function applyEditDelta(scene: Scene, delta: EditDelta): Scene {
  const changeById = new Map(delta.changes.map((c) => [c.id, c]));
  const maxItemScore = Math.max(
    ...scene.nodes.map((n) => changeById.get(n.id)?.new_score ?? n.score),
    0,
  );
  const nodeScale = scoreRadiusScale(maxItemScore, MAX_NODE_RADIUS, 0.004);
  const nodes = scene.nodes.map((n) => {
    const change = changeById.get(n.id);
    if (!change) {
      return n;
    }
    return {
      ...n,
      score: change.new_score,
      radius: nodeScale(change.new_score),
      changeGlyph: buildChangeGlyph(
        n.x,
        n.y,
        change.old_score,
        change.new_score,
        (s) => Math.max(nodeScale(s), 1e-6),
      ),
    };
  });
  return { ...scene, nodes };
}

/** Detail panel ordering: members of a cluster, descending u, ties by id. */
export function sortByUncertainty(
  cluster: ClusterEntry,
  rankings: RankedItem[],
): RankedItem[] {
  const members = new Set(cluster.members);
  return rankings
    .filter((r) => members.has(r.id))
    .sort((a, b) => {
      const ua = a.uncertainty ?? 0;
      const ub = b.uncertainty ?? 0;
      if (ua !== ub) {
        return ub - ua;
      }
      return a.id < b.id ? -1 : a.id > b.id ? 1 : 0;
    });
}

export interface ViewState {
  kind: Kind;
  level: number;
}

/** hashtag <-> user toggle; posts stay a list and are never a map view. */
export function switchView(state: ViewState): ViewState {
  if (state.kind === "hashtag") {
    return { ...state, kind: "user" };
  }
  if (state.kind === "user") {
    return { ...state, kind: "hashtag" };
  }
  return state;
}

export interface LabelRingEntry {
  id: string;
  label: string;
  weight: number;
  angle: number;
}

/** Radial ring of cross-linked items around a selection, strongest first. */
export function labelRing(
  related: { id: string; label: string; weight: number }[],
  limit = 12,
): LabelRingEntry[] {
  const kept = related.slice(0, limit);
  const n = kept.length;
  return kept.map((r, i) => ({
    ...r,
    angle: n > 0 ? -Math.PI / 2 + (2 * Math.PI * i) / n : 0,
  }));
}

/** 300 ms position interpolation between two layouts of the same items. */
export function interpolatePositions(
  from: Record<string, [number, number]>,
  to: Record<string, [number, number]>,
  t: number,
): Record<string, [number, number]> {
  const clamped = Math.min(1, Math.max(0, t));
  const out: Record<string, [number, number]> = {};
  for (const [id, dest] of Object.entries(to)) {
    const src = from[id] ?? dest;
    out[id] = [
      src[0] + (dest[0] - src[0]) * clamped,
      src[1] + (dest[1] - src[1]) * clamped,
    ];
  }
  return out;
}

export const VIEW_TRANSITION_MS = 300;
