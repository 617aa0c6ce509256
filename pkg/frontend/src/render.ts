import { arcPoint, type GlyphSpec } from "./glyph.js";
import type { LabelRingEntry, Scene, SceneCluster, SceneNode } from "./scene.js";

/** DOM-free SVG string renderer so the output is testable under node. */

const FMT_DIGITS = 5;

function fmt(x: number): string {
  // toFixed keeps the output stable across runs; trailing zeros trimmed
  return Number(x.toFixed(FMT_DIGITS)).toString();
}

function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function polygonPoints(cell: [number, number][]): string {
  return cell.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
}

function densityRects(
  density: NonNullable<Scene["density"]>,
  maxCells = 64,
): string[] {
  const { grid, extent } = density;
  const [x0, y0, x1, y1] = extent;
  const rows = grid.length;
  const cols = rows > 0 ? grid[0].length : 0;
  if (rows === 0 || cols === 0) {
    return [];
  }
  let peak = 0;
  for (const row of grid) {
    for (const v of row) {
      if (v > peak) {
        peak = v;
      }
    }
  }
  if (peak <= 0) {
    return [];
  }
  // downsample to keep the SVG small; shading is qualitative anyway
  const stepR = Math.max(1, Math.floor(rows / maxCells));
  const stepC = Math.max(1, Math.floor(cols / maxCells));
  const w = ((x1 - x0) / cols) * stepC;
  const h = ((y1 - y0) / rows) * stepR;
  const rects: string[] = [];
  for (let i = 0; i < rows; i += stepR) {
    for (let j = 0; j < cols; j += stepC) {
      const v = grid[i][j] / peak;
      if (v < 0.02) {
        continue;
      }
      const x = x0 + (j / cols) * (x1 - x0);
      const y = y0 + (i / rows) * (y1 - y0);
      rects.push(
        `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" ` +
          `fill="#4a6fa5" opacity="${fmt(0.35 * v)}"/>`,
      );
    }
  }
  return rects;
}

function glyphPath(g: GlyphSpec): string {
  // arc backbone from min to max, with radial ticks at each summary value
  const [a0, , , , , a5] = g.arcAngles;
  const start = arcPoint(g, a0);
  const end = arcPoint(g, a5);
  const large = Math.abs(a5 - a0) > Math.PI ? 1 : 0;
  const sweep = a5 > a0 ? 1 : 0;
  const parts = [
    `M ${fmt(start[0])} ${fmt(start[1])} ` +
      `A ${fmt(g.radius)} ${fmt(g.radius)} 0 ${large} ${sweep} ` +
      `${fmt(end[0])} ${fmt(end[1])}`,
  ];
  for (const angle of g.arcAngles) {
    const inner: [number, number] = [
      g.cx + g.radius * 0.85 * Math.cos(angle),
      g.cy + g.radius * 0.85 * Math.sin(angle),
    ];
    const outer: [number, number] = [
      g.cx + g.radius * 1.15 * Math.cos(angle),
      g.cy + g.radius * 1.15 * Math.sin(angle),
    ];
    parts.push(
      `M ${fmt(inner[0])} ${fmt(inner[1])} L ${fmt(outer[0])} ${fmt(outer[1])}`,
    );
  }
  return parts.join(" ");
}

function renderCluster(c: SceneCluster): string {
  const out: string[] = [`<g class="cluster" data-id="${esc(c.id)}">`];
  if (c.cell.length >= 3) {
    out.push(
      `<polygon class="cell" points="${polygonPoints(c.cell)}" ` +
        `fill="none" stroke="#b8c4d0" stroke-width="0.002"/>`,
    );
  }
  out.push(
    `<circle class="hull" cx="${fmt(c.center[0])}" cy="${fmt(c.center[1])}" ` +
      `r="${fmt(c.radius)}" fill="#dce8f5" stroke="#5b7a9d" stroke-width="0.0015"/>`,
  );
  if (c.glyph) {
    out.push(
      `<path class="glyph" d="${glyphPath(c.glyph)}" fill="none" ` +
        `stroke="#30475e" stroke-width="0.0015"/>`,
    );
  }
  out.push("</g>");
  return out.join("");
}

function renderNode(n: SceneNode): string {
  const out: string[] = [`<g class="node" data-id="${esc(n.id)}">`];
  out.push(
    `<circle cx="${fmt(n.x)}" cy="${fmt(n.y)}" r="${fmt(n.radius)}" ` +
      `fill="#e8a06b" stroke="#8a5a2b" stroke-width="0.001"/>`,
  );
  if (n.changeGlyph) {
    const g = n.changeGlyph;
    out.push(
      `<circle class="change-old" cx="${fmt(g.cx)}" cy="${fmt(g.cy)}" ` +
        `r="${fmt(g.previousRadius)}" fill="none" stroke="#b03030" ` +
        `stroke-width="0.001" stroke-dasharray="0.004 0.003"/>`,
    );
    out.push(
      `<circle class="change-new" cx="${fmt(g.cx)}" cy="${fmt(g.cy)}" ` +
        `r="${fmt(g.currentRadius)}" fill="none" stroke="#b03030" ` +
        `stroke-width="0.0015"/>`,
    );
  }
  out.push("</g>");
  return out.join("");
}

function renderFlows(flows: NonNullable<Scene["flows"]>): string {
  if (flows.paths.length === 0) {
    return "";
  }
  const peak = Math.max(...flows.paths.map((p) => p.value), 0);
  const parts: string[] = ['<g class="flows">'];
  for (const p of flows.paths) {
    const d = p.points
      .map(([x, y], i) => `${i === 0 ? "M" : "L"} ${fmt(x)} ${fmt(y)}`)
      .join(" ");
    const w = peak > 0 ? 0.001 + 0.006 * (p.value / peak) : 0.001;
    parts.push(
      `<path data-source="${esc(p.source)}" data-target="${esc(p.target)}" ` +
        `d="${d}" fill="none" stroke="#7a4f9d" stroke-opacity="0.6" ` +
        `stroke-width="${fmt(w)}"/>`,
    );
  }
  parts.push("</g>");
  return parts.join("");
}

/** Radial label ring around a selected node. */
export function renderLabelRing(
  cx: number,
  cy: number,
  radius: number,
  entries: LabelRingEntry[],
): string {
  if (entries.length === 0) {
    return "";
  }
  const parts: string[] = ['<g class="label-ring">'];
  for (const e of entries) {
    const x = cx + radius * Math.cos(e.angle);
    const y = cy + radius * Math.sin(e.angle);
    const anchor = Math.cos(e.angle) >= 0 ? "start" : "end";
    parts.push(
      `<line x1="${fmt(cx)}" y1="${fmt(cy)}" x2="${fmt(x)}" y2="${fmt(y)}" ` +
        `stroke="#999" stroke-width="0.0008"/>`,
    );
    parts.push(
      `<text data-id="${esc(e.id)}" x="${fmt(x)}" y="${fmt(y)}" ` +
        `font-size="0.014" text-anchor="${anchor}">${esc(e.label)}</text>`,
    );
  }
  parts.push("</g>");
  return parts.join("");
}

export function renderScene(scene: Scene, width = 800): string {
  const [cw, ch] = scene.canvas;
  const height = Math.round((width * ch) / cw);
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${fmt(cw)} ${fmt(ch)}" data-kind="${scene.kind}" ` +
      `data-level="${scene.level}">`,
  ];
  if (scene.density) {
    parts.push(`<g class="density">${densityRects(scene.density).join("")}</g>`);
  }
  for (const c of scene.clusters) {
    parts.push(renderCluster(c));
  }
  // flow layer sits above cells but below item nodes; omitted entirely when
  // nothing is selected or all routed flows are empty
  if (scene.flows) {
    const layer = renderFlows(scene.flows);
    if (layer) {
      parts.push(layer);
    }
  }
  for (const n of scene.nodes) {
    parts.push(renderNode(n));
  }
  parts.push("</svg>");
  return parts.join("\n");
}
