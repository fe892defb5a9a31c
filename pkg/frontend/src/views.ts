// Pure view builders: snapshot JSON in, SVG strings / text lines out.
// Keeping these free of DOM access makes them directly unit-testable.

import type {
  BeliefSummary,
  Cell,
  PendingRequest,
  Projection,
  Snapshot,
} from "./types.js";

const CELL = 36; // px per grid cell
const PAD = 14;

const ROBOT_COLORS = [
  "#2563eb", "#dc2626", "#059669", "#d97706", "#7c3aed",
  "#0891b2", "#be185d", "#4d7c0f",
];

export function robotColor(index: number): string {
  return ROBOT_COLORS[index % ROBOT_COLORS.length] ?? "#334155";
}

function px(cell: Cell, height: number): { x: number; y: number } {
  // grid origin is bottom-left; SVG origin is top-left
  return {
    x: PAD + cell[0] * CELL + CELL / 2,
    y: PAD + (height - 1 - cell[1]) * CELL + CELL / 2,
  };
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** The live workspace: obstacles, labeled stations, robots and their plans. */
export function renderGridSvg(snapshot: Snapshot): string {
  const grid = snapshot.grid;
  const width = PAD * 2 + grid.width * CELL;
  const height = PAD * 2 + grid.height * CELL;
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
      `width="${width}" height="${height}" role="img" aria-label="workspace grid">`,
  ];
  for (let x = 0; x <= grid.width; x++) {
    const gx = PAD + x * CELL;
    parts.push(
      `<line x1="${gx}" y1="${PAD}" x2="${gx}" y2="${height - PAD}" class="gridline"/>`,
    );
  }
  for (let y = 0; y <= grid.height; y++) {
    const gy = PAD + y * CELL;
    parts.push(
      `<line x1="${PAD}" y1="${gy}" x2="${width - PAD}" y2="${gy}" class="gridline"/>`,
    );
  }
  const obstacles = grid.obstacles ?? grid.known_obstacles;
  for (const cell of obstacles) {
    const { x, y } = px(cell, grid.height);
    parts.push(
      `<rect x="${x - CELL / 2 + 2}" y="${y - CELL / 2 + 2}" ` +
        `width="${CELL - 4}" height="${CELL - 4}" class="obstacle" ` +
        `data-cell="${cell[0]},${cell[1]}"/>`,
    );
  }
  if (grid.obstacles) {
    for (const cell of grid.known_obstacles) {
      const { x, y } = px(cell, grid.height);
      parts.push(`<circle cx="${x}" cy="${y}" r="3" class="known-marker"/>`);
    }
  }
  for (const [symbol, cell] of Object.entries(grid.stations).sort()) {
    const { x, y } = px(cell, grid.height);
    parts.push(
      `<g class="station" data-symbol="${esc(symbol)}">` +
        `<rect x="${x - 12}" y="${y - 12}" width="24" height="24" rx="5"/>` +
        `<text x="${x}" y="${y + 5}">${esc(symbol)}</text></g>`,
    );
  }
  snapshot.robots.forEach((robot, index) => {
    const color = robotColor(index);
    if (robot.plan.length > 1) {
      const points = robot.plan
        .map((cell) => {
          const { x, y } = px(cell, grid.height);
          return `${x},${y}`;
        })
        .join(" ");
      parts.push(
        `<polyline points="${points}" class="plan" stroke="${color}" ` +
          `data-robot="${esc(robot.id)}"/>`,
      );
    }
    const { x, y } = px(robot.cell, grid.height);
    const ring = robot.battery_low ? ' stroke-dasharray="3 2"' : "";
    parts.push(
      `<g class="robot" data-robot="${esc(robot.id)}">` +
        `<circle cx="${x}" cy="${y}" r="11" fill="${color}"${ring}/>` +
        `<text x="${x}" y="${y + 4}">${esc(robot.id)}</text></g>`,
    );
  });
  parts.push("</svg>");
  return parts.join("");
}

/** Belief histogram with a mean marker, plus the mean trajectory so far. */
export function renderTrustSvg(
  belief: BeliefSummary,
  trajectory: number[],
  label: string,
): string {
  const width = 360;
  const height = 150;
  const histTop = 10;
  const histHeight = 80;
  const trajTop = 104;
  const trajHeight = 36;
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
      `width="${width}" height="${height}" role="img" aria-label="trust of ${esc(label)}">`,
  ];
  const bins = belief.bins ?? [];
  if (bins.length > 0) {
    const peak = Math.max(...bins, 1e-9);
    const barWidth = width / bins.length;
    bins.forEach((p, i) => {
      const barHeight = (p / peak) * histHeight;
      parts.push(
        `<rect x="${(i * barWidth).toFixed(2)}" y="${(histTop + histHeight - barHeight).toFixed(2)}" ` +
          `width="${Math.max(barWidth - 0.5, 0.5).toFixed(2)}" height="${barHeight.toFixed(2)}" class="bar"/>`,
      );
    });
  }
  const meanX = belief.mean * width;
  parts.push(
    `<line x1="${meanX.toFixed(2)}" y1="${histTop}" x2="${meanX.toFixed(2)}" ` +
      `y2="${histTop + histHeight}" class="mean-marker"/>`,
    `<text x="${Math.min(meanX + 4, width - 60).toFixed(2)}" y="${histTop + 12}" class="mean-label">` +
      `${belief.mean.toFixed(3)}</text>`,
  );
  if (trajectory.length > 1) {
    const step = width / (trajectory.length - 1);
    const points = trajectory
      .map((m, i) => `${(i * step).toFixed(2)},${(trajTop + (1 - m) * trajHeight).toFixed(2)}`)
      .join(" ");
    parts.push(`<polyline points="${points}" class="trajectory"/>`);
  }
  parts.push("</svg>");
  return parts.join("");
}

/** Human-readable lines for the approve/deny dialog. */
export function decisionLines(pending: PendingRequest): string[] {
  const lines: string[] = [
    `${pending.robot} completed action "${pending.symbol}".`,
  ];
  if (pending.reassignments.length > 0) {
    for (const change of pending.reassignments) {
      lines.push(`${change.symbol}: ${change.from} → ${change.to}`);
    }
  } else {
    lines.push("No ownership changes proposed.");
  }
  for (const pin of pending.pinned) {
    lines.push(`${pin.symbol} stays with ${pin.robot} (in progress).`);
  }
  pending.proposed.steps.forEach((step, index) => {
    const body = step.map((c) => `(${c.robot},${c.symbol})`).join(" ");
    lines.push(`step ${index}: ${body}`);
  });
  lines.push(`accumulated trust: ${pending.proposed.total_trust.toFixed(4)}`);
  return lines;
}

/** Flat "who does what" summary of the current allocation. */
export function projectionLines(projections: Record<string, Projection[]>): string[] {
  const lines: string[] = [];
  for (const [robot, entries] of Object.entries(projections).sort()) {
    if (entries.length === 0) continue;
    const body = entries.map(([step, symbol]) => `${symbol}@${step}`).join(" ");
    lines.push(`${robot}: ${body}`);
  }
  return lines;
}

export function statusLine(snapshot: Snapshot): string {
  const state = snapshot.finished
    ? "finished"
    : snapshot.pending
      ? "awaiting decision"
      : "running";
  return `t=${snapshot.clock} · epoch ${snapshot.allocation.epoch} · ${state}`;
}
