/** Pure SVG/HTML rendering of a view model. No DOM access here: everything
 * returns markup strings so the same code drives the page and any test.
 */

import { layoutTree, NODE_H, NODE_W } from "./layout";
import type { ViewModel, ViewNode } from "./types";

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Card fill by state, in priority order. */
export function nodeFill(node: ViewNode): string {
  if (node.pruned) return "#e4e4ea";
  if (node.accepted) return "#9ccc8f";
  if (node.onFinalChain) return "#d7ecc7";
  if (node.id === 0) return "#f1f3f4";
  if (node.vqa === null) return "#fdf3d8";
  return "#ffffff";
}

function nodeStroke(node: ViewNode, model: ViewModel, selectedId: number | null): string {
  if (node.id === selectedId) return 'stroke="#e65100" stroke-width="3"';
  if (node.id === model.cursor && !model.control.finished) return 'stroke="#1a73e8" stroke-width="3"';
  if (model.optimal.eligible.includes(node.id)) return 'stroke="#7b1fa2" stroke-width="2.5"';
  return 'stroke="#5f6368" stroke-width="1"';
}

function cardText(node: ViewNode): string {
  const title = node.id === 0 ? "root" : `#${node.id}`;
  const lines = [`${title} · d${node.depth}`];
  if (node.vqa !== null) {
    lines.push(`vqa ${node.vqa}`);
    lines.push(`clip ${(node.clip ?? 0).toFixed(3)}`);
  } else if (node.id !== 0) {
    lines.push("evaluating");
  }
  return lines
    .map(
      (line, i) =>
        `<text x="0" y="${-10 + i * 16}" text-anchor="middle" font-size="12">${escapeXml(line)}</text>`,
    )
    .join("");
}

export function renderTreeSvg(model: ViewModel, selectedId: number | null = null): string {
  const layout = layoutTree(model);
  const parts: string[] = [];

  for (const edge of model.edges) {
    const a = layout.points[String(edge.from)];
    const b = layout.points[String(edge.to)];
    if (!a || !b) continue;
    const onChain =
      model.nodes[String(edge.from)]?.onFinalChain && model.nodes[String(edge.to)]?.onFinalChain;
    const style = onChain ? 'stroke="#558b2f" stroke-width="3"' : 'stroke="#9aa0a6" stroke-width="1.5"';
    parts.push(`<line x1="${a.x}" y1="${a.y}" x2="${b.x}" y2="${b.y}" ${style}/>`);
  }

  for (const ref of model.references) {
    const a = layout.points[String(ref.from)];
    const b = layout.points[String(ref.to)];
    if (!a || !b) continue;
    const midX = (a.x + b.x) / 2 + 36;
    const midY = (a.y + b.y) / 2;
    const opacity = (0.25 + 0.6 * (ref.similarity / 100)).toFixed(2);
    parts.push(
      `<path d="M ${a.x} ${a.y} Q ${midX} ${midY} ${b.x} ${b.y}" fill="none" ` +
        `stroke="#c2185b" stroke-width="1.5" stroke-dasharray="5 4" opacity="${opacity}"/>`,
    );
  }

  const ids = Object.values(model.nodes)
    .map((n) => n.id)
    .sort((a, b) => a - b);
  for (const id of ids) {
    const node = model.nodes[String(id)];
    const point = layout.points[String(id)];
    const opacity = node.pruned ? "0.55" : "1";
    parts.push(
      `<g data-node-id="${id}" transform="translate(${point.x} ${point.y})" opacity="${opacity}" cursor="pointer">` +
        `<rect x="${-NODE_W / 2}" y="${-NODE_H / 2}" width="${NODE_W}" height="${NODE_H}" rx="8" ` +
        `fill="${nodeFill(node)}" ${nodeStroke(node, model, selectedId)}/>` +
        cardText(node) +
        `</g>`,
    );
  }

  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${layout.width}" height="${layout.height}" ` +
    `viewBox="0 0 ${layout.width} ${layout.height}" font-family="system-ui, sans-serif">` +
    parts.join("") +
    `</svg>`
  );
}

/** Best-so-far vqa (green) and per-state clip (blue) over evaluation steps. */
export function renderChartSvg(model: ViewModel, width = 640, height = 170): string {
  const pad = 28;
  const plotW = width - 2 * pad;
  const plotH = height - 2 * pad;
  const n = model.series.length;
  const x = (step: number) => pad + (n <= 1 ? plotW / 2 : ((step - 1) / (n - 1)) * plotW);
  const y = (value: number) => pad + (1 - Math.max(0, Math.min(1, value))) * plotH;
  const poly = (values: number[]) =>
    values.map((v, i) => `${x(i + 1).toFixed(1)},${y(v).toFixed(1)}`).join(" ");

  const parts = [
    `<rect x="${pad}" y="${pad}" width="${plotW}" height="${plotH}" fill="none" stroke="#dadce0"/>`,
    `<text x="${pad}" y="${pad - 8}" font-size="11" fill="#5f6368">score over steps (n=${n})</text>`,
    `<text x="${pad - 6}" y="${y(1) + 4}" font-size="10" text-anchor="end" fill="#5f6368">1</text>`,
    `<text x="${pad - 6}" y="${y(0) + 4}" font-size="10" text-anchor="end" fill="#5f6368">0</text>`,
  ];
  if (n > 0) {
    parts.push(
      `<polyline points="${poly(model.series.map((s) => s.clip))}" fill="none" stroke="#1a73e8" stroke-width="1.5" opacity="0.7"/>`,
      `<polyline points="${poly(model.series.map((s) => s.bestVqa))}" fill="none" stroke="#2e7d32" stroke-width="2.5"/>`,
    );
  }
  parts.push(
    `<text x="${width - pad}" y="${pad - 8}" font-size="11" text-anchor="end">` +
      `<tspan fill="#2e7d32">best vqa</tspan> <tspan fill="#1a73e8">clip</tspan></text>`,
  );
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" font-family="system-ui, sans-serif">` +
    parts.join("") +
    `</svg>`
  );
}

export function statusLine(model: ViewModel): string {
  if (model.control.finished) {
    const finals = model.finalStates.join(", ");
    return `finished: ${model.termination} · final ${finals || "-"}${model.fallbackUsed ? " (fallback)" : ""}`;
  }
  if (model.control.paused) return "paused";
  if (model.control.running) return "running";
  return "waiting for events";
}
