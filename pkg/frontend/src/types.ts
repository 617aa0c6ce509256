/** Payload shapes served by the ranking service. */

export type Kind = "post" | "user" | "hashtag";

export interface RankedItem {
  id: string;
  label: string;
  kind: Kind;
  score: number;
  uncertainty?: number;
  uncertainty_normalized?: number;
  zero_score?: boolean;
}

export interface RankingsPayload {
  kind: Kind;
  items: RankedItem[];
}

/** Six-number box summary; all values normalized to [0, 1]. */
export interface ClusterSummary {
  min: number;
  lower_extreme: number;
  lower_hinge: number;
  upper_hinge: number;
  upper_extreme: number;
  max: number;
}

export interface ClusterEntry {
  id: string;
  members: string[];
  representatives: string[];
  score: number;
  uncertainty?: number;
  summary?: ClusterSummary;
}

export interface ClustersPayload {
  kind: Kind;
  level: number;
  max_level: number;
  clusters: ClusterEntry[];
  edges: { source: string; target: string; weight: number }[];
}

export interface LayoutPayload {
  kind: Kind;
  level: number;
  canvas: [number, number];
  cluster_centers: Record<string, [number, number]>;
  cells: Record<string, [number, number][]>;
  node_positions: Record<string, [number, number]>;
  density?: { grid: number[][]; extent: [number, number, number, number] };
}

export interface FlowPathPayload {
  source: string;
  target: string;
  points: [number, number][];
  seg_values: number[];
  value: number;
  group: number;
}

export interface PropagationPayload {
  kind: Kind;
  level: number;
  markov_residual: number;
  flows: Record<string, Record<string, number>>;
  paths: FlowPathPayload[];
}

export interface EditDelta {
  item_id: string;
  ui_score: number;
  old_prior: number;
  new_prior: number;
  affected: string[];
  changes: {
    id: string;
    old_score: number;
    new_score: number;
    old_uncertainty?: number;
    new_uncertainty?: number;
  }[];
  touched_walks: number;
  touched_steps: number;
}

export interface RelatedPayload {
  id: string;
  related: Record<Kind, { id: string; label: string; weight: number }[]>;
}

export interface ServiceError {
  error: string;
  message: string;
}
