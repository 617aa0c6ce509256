import type { ClusterSummary } from "./types.js";

/**
 * Line-based box-plot glyph bent around the upper boundary of a node.
 * The six summary values map onto an arc spanning [startAngle, endAngle];
 * 0 maps to the arc start, 1 to the arc end, so arc positions are monotone
 * in value by construction.
 */
export interface GlyphSpec {
  cx: number;
  cy: number;
  radius: number;
  /** radians, arc runs counterclockwise from start to end over the node top */
  startAngle: number;
  endAngle: number;
  /** angles for [min, lowerExtreme, lowerHinge, upperHinge, upperExtreme, max] */
  arcAngles: [number, number, number, number, number, number];
}

export interface ChangeGlyphSpec {
  cx: number;
  cy: number;
  /** dotted ring showing the pre-edit score */
  previousRadius: number;
  /** filled boundary showing the current score */
  currentRadius: number;
}

const SUMMARY_KEYS: (keyof ClusterSummary)[] = [
  "min",
  "lower_extreme",
  "lower_hinge",
  "upper_hinge",
  "upper_extreme",
  "max",
];

export function summaryValues(s: ClusterSummary): number[] {
  return SUMMARY_KEYS.map((k) => s[k]);
}

/**
 * Pure function of the six-number summary. Throws if the summary is not
 * monotone or leaves [0, 1]; the service guarantees both, so a violation here
 * means a corrupted payload, not a rendering choice.
 */
export function buildGlyph(
  cx: number,
  cy: number,
  radius: number,
  summary: ClusterSummary,
  startAngle: number = (-5 * Math.PI) / 6,
  endAngle: number = -Math.PI / 6,
): GlyphSpec {
  const values = summaryValues(summary);
  for (let i = 0; i < values.length; i++) {
    if (values[i] < -1e-12 || values[i] > 1 + 1e-12) {
      throw new Error(`summary value out of range: ${SUMMARY_KEYS[i]}=${values[i]}`);
    }
    if (i > 0 && values[i] < values[i - 1] - 1e-12) {
      throw new Error(
        `summary not monotone: ${SUMMARY_KEYS[i - 1]} > ${SUMMARY_KEYS[i]}`,
      );
    }
  }
  const span = endAngle - startAngle;
  const arcAngles = values.map((v) => startAngle + span * v) as GlyphSpec["arcAngles"];
  return { cx, cy, radius, startAngle, endAngle, arcAngles };
}

export function arcPoint(g: GlyphSpec, angle: number): [number, number] {
  return [g.cx + g.radius * Math.cos(angle), g.cy + g.radius * Math.sin(angle)];
}

export function buildChangeGlyph(
  cx: number,
  cy: number,
  oldScore: number,
  newScore: number,
  scale: (score: number) => number,
): ChangeGlyphSpec {
  const previousRadius = scale(oldScore);
  const currentRadius = scale(newScore);
  if (!(previousRadius > 0) || !(currentRadius > 0)) {
    throw new Error("change glyph radii must be positive");
  }
  return { cx, cy, previousRadius, currentRadius };
}

/** sqrt scaling so node area tracks score; floor keeps tiny scores visible */
export function scoreRadiusScale(
  maxScore: number,
  maxRadius: number,
  minRadius = 1.5,
): (score: number) => number {
  const safeMax = maxScore > 0 ? maxScore : 1;
  return (score) =>
    Math.max(minRadius, maxRadius * Math.sqrt(Math.max(score, 0) / safeMax));
}
