/**
 * Consensus chart: per-FOV median dots with min-max whiskers, one series
 * per arm. Plain SVG so the bundle stays dependency-free; geometry is
 * kept simple (linear scales, fixed margins) and each mark carries data
 * attributes so tests can read the mapping back.
 */

import type { ConsensusReport, ConsensusRow } from "./api.js";

const WIDTH = 640;
const HEIGHT = 320;
const MARGIN = { top: 24, right: 24, bottom: 40, left: 48 };

export const ARM_COLORS: Record<string, string> = {
  adjacent: "#2563eb", // median dots for the ground-truth arm
  synthetic: "#d97706",
};

const SVG_NS = "http://www.w3.org/2000/svg";

function svgEl<K extends keyof SVGElementTagNameMap>(
  doc: Document,
  tag: K,
): SVGElementTagNameMap[K] {
  return doc.createElementNS(SVG_NS, tag);
}

export function renderConsensusChart(
  container: HTMLElement,
  report: ConsensusReport,
): SVGSVGElement {
  const doc = container.ownerDocument;
  const svg = svgEl(doc, "svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute("role", "img");
  svg.setAttribute("aria-label", `consensus of ${report.category} scores`);

  const rows = [...report.rows].sort(
    (a, b) => a.fov - b.fov || a.arm.localeCompare(b.arm),
  );
  const fovs = [...new Set(rows.map((r) => r.fov))];
  const arms = [...new Set(rows.map((r) => r.arm))];

  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const xFov = (fov: number, arm: string): number => {
    const slot = fovs.indexOf(fov);
    const offset = (arms.indexOf(arm) + 1) / (arms.length + 1);
    return MARGIN.left + ((slot + offset) * plotW) / Math.max(fovs.length, 1);
  };
  const yScore = (score: number): number =>
    MARGIN.top + plotH - (score / 100) * plotH;

  // y axis: 0..100 with quarter gridlines
  for (const tick of [0, 25, 50, 75, 100]) {
    const y = yScore(tick);
    const line = svgEl(doc, "line");
    line.setAttribute("x1", String(MARGIN.left));
    line.setAttribute("x2", String(WIDTH - MARGIN.right));
    line.setAttribute("y1", String(y));
    line.setAttribute("y2", String(y));
    line.setAttribute("stroke", "#e5e7eb");
    svg.appendChild(line);
    const label = svgEl(doc, "text");
    label.setAttribute("x", String(MARGIN.left - 8));
    label.setAttribute("y", String(y + 4));
    label.setAttribute("text-anchor", "end");
    label.setAttribute("class", "tick");
    label.textContent = String(tick);
    svg.appendChild(label);
  }

  for (const row of rows) {
    const x = xFov(row.fov, row.arm);
    const color = ARM_COLORS[row.arm] ?? "#374151";

    const whisker = svgEl(doc, "line");
    whisker.setAttribute("x1", String(x));
    whisker.setAttribute("x2", String(x));
    whisker.setAttribute("y1", String(yScore(row.min)));
    whisker.setAttribute("y2", String(yScore(row.max)));
    whisker.setAttribute("stroke", color);
    whisker.setAttribute("stroke-width", "2");
    whisker.setAttribute("class", "whisker");
    whisker.setAttribute("data-arm", row.arm);
    whisker.setAttribute("data-fov", String(row.fov));
    svg.appendChild(whisker);

    const dot = svgEl(doc, "circle");
    dot.setAttribute("cx", String(x));
    dot.setAttribute("cy", String(yScore(row.median)));
    dot.setAttribute("r", "5");
    dot.setAttribute("fill", color);
    dot.setAttribute("class", "median");
    dot.setAttribute("data-arm", row.arm);
    dot.setAttribute("data-fov", String(row.fov));
    dot.setAttribute("data-median", String(row.median));
    dot.setAttribute("data-n", String(row.n));
    svg.appendChild(dot);

    const fovLabel = svgEl(doc, "text");
    fovLabel.setAttribute("x", String(x));
    fovLabel.setAttribute("y", String(HEIGHT - MARGIN.bottom + 18));
    fovLabel.setAttribute("text-anchor", "middle");
    fovLabel.setAttribute("class", "tick");
    fovLabel.textContent = `fov ${row.fov}`;
    svg.appendChild(fovLabel);
  }

  // legend, one entry per arm actually present
  arms.forEach((arm, idx) => {
    const y = MARGIN.top + idx * 18;
    const swatch = svgEl(doc, "circle");
    swatch.setAttribute("cx", String(WIDTH - MARGIN.right - 96));
    swatch.setAttribute("cy", String(y));
    swatch.setAttribute("r", "5");
    swatch.setAttribute("fill", ARM_COLORS[arm] ?? "#374151");
    svg.appendChild(swatch);
    const label = svgEl(doc, "text");
    label.setAttribute("x", String(WIDTH - MARGIN.right - 84));
    label.setAttribute("y", String(y + 4));
    label.setAttribute("class", "legend");
    label.textContent = arm;
    svg.appendChild(label);
  });

  container.replaceChildren(svg);
  return svg;
}

/** Rows for one stain, the form the chart plots. */
export function rowsForStain(
  report: ConsensusReport,
  stain: string,
): ConsensusRow[] {
  return report.rows.filter(
    (row) => row.stain.toLowerCase() === stain.toLowerCase(),
  );
}
