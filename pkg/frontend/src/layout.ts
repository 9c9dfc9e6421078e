/** Depth-layer tree layout.
 *
 * Leaves take consecutive horizontal slots in id (creation) order and every
 * inner node centers over its children, so the tree reads top-down with the
 * root centered and subtrees kept contiguous. References are drawn later as
 * an overlay and play no part in positioning.
 */

import type { ViewModel } from "./types";

export const NODE_W = 112;
export const NODE_H = 58;
export const H_STEP = 136;
export const V_STEP = 104;
export const MARGIN = 40;

export interface NodePoint {
  id: number;
  x: number;
  y: number;
}

export interface Layout {
  points: Record<string, NodePoint>;
  width: number;
  height: number;
}

export function layoutTree(model: ViewModel): Layout {
  const ids = Object.values(model.nodes)
    .map((n) => n.id)
    .sort((a, b) => a - b);
  const childrenOf = new Map<number, number[]>();
  for (const id of ids) childrenOf.set(id, []);
  for (const edge of model.edges) childrenOf.get(edge.from)?.push(edge.to);
  for (const kids of childrenOf.values()) kids.sort((a, b) => a - b);

  const slotOf = new Map<number, number>();
  let nextSlot = 0;
  const place = (id: number): number => {
    const kids = childrenOf.get(id) ?? [];
    if (kids.length === 0) {
      const slot = nextSlot;
      nextSlot += 1;
      slotOf.set(id, slot);
      return slot;
    }
    const slots = kids.map(place);
    const slot = (Math.min(...slots) + Math.max(...slots)) / 2;
    slotOf.set(id, slot);
    return slot;
  };
  if (model.nodes["0"]) place(0);
  for (const id of ids) {
    if (!slotOf.has(id)) {
      slotOf.set(id, nextSlot);
      nextSlot += 1;
    }
  }

  const points: Record<string, NodePoint> = {};
  let maxDepth = 0;
  for (const id of ids) {
    const node = model.nodes[String(id)];
    maxDepth = Math.max(maxDepth, node.depth);
    points[String(id)] = {
      id,
      x: MARGIN + (slotOf.get(id) ?? 0) * H_STEP + NODE_W / 2,
      y: MARGIN + node.depth * V_STEP + NODE_H / 2,
    };
  }
  return {
    points,
    width: MARGIN * 2 + Math.max(nextSlot, 1) * H_STEP,
    height: MARGIN * 2 + (maxDepth + 1) * V_STEP,
  };
}
