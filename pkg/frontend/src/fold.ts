/** Event-stream fold: the only place view state is ever produced.
 *
 * Every state change in the UI originates from a server event passing
 * through `foldEvent`; controls POST to the service and wait for the
 * resulting events rather than patching the model locally. The fold is
 * pure (input model untouched), idempotent over replayed events, and
 * refuses gaps, so a stream resumed from `lastSeq + 1` reproduces the
 * exact model a continuous stream would have built.
 */

import type { EventRecord, SeriesPoint, ViewModel, ViewNode } from "./types";

export function initialViewModel(): ViewModel {
  return {
    runId: null,
    configDigest: null,
    instruction: null,
    checklist: [],
    nodes: {},
    edges: [],
    references: [],
    series: [],
    optimal: { eligible: [], overall: [] },
    cursor: null,
    control: { running: false, paused: false, finished: false },
    termination: null,
    finalStates: [],
    fallbackUsed: null,
    controlLog: [],
    counters: {},
    lastSeq: -1,
  };
}

function makeNode(id: number, parentId: number | null, depth: number): ViewNode {
  return {
    id,
    parentId,
    depth,
    vqa: null,
    clip: null,
    pruned: false,
    accepted: false,
    onFinalChain: false,
    stayPassed: null,
    stayFailed: [],
  };
}

/** Numeric value of a score string; integral fractions arrive without a
 * denominator ("0", "1"), everything else as "num/den". */
export function vqaValue(vqa: string | null): number {
  if (!vqa) return 0;
  const [num, den] = vqa.split("/");
  return Number(num) / (den === undefined ? 1 : Number(den));
}

function lexBetter(vqa: number, clip: number, bestVqa: number, bestClip: number): boolean {
  return vqa > bestVqa || (vqa === bestVqa && clip > bestClip);
}

function nextSeriesPoint(series: SeriesPoint[], stateId: number, vqa: number, clip: number): SeriesPoint {
  const prev = series[series.length - 1];
  let bestVqa = vqa;
  let bestClip = clip;
  if (prev && !lexBetter(vqa, clip, prev.bestVqa, prev.bestClip)) {
    bestVqa = prev.bestVqa;
    bestClip = prev.bestClip;
  }
  return { step: series.length + 1, stateId, vqa, clip, bestVqa, bestClip };
}

function markFinalChains(model: ViewModel, finalStates: number[]): void {
  for (const finalId of finalStates) {
    let id: number | null = finalId;
    while (id !== null) {
      const node: ViewNode | undefined = model.nodes[String(id)];
      if (!node || node.onFinalChain) break;
      node.onFinalChain = true;
      id = node.parentId;
    }
  }
}

export function foldEvent(model: ViewModel, event: EventRecord): ViewModel {
  if (event.seq <= model.lastSeq) return model;
  if (event.seq !== model.lastSeq + 1) {
    throw new Error(`event gap: expected seq ${model.lastSeq + 1}, got ${event.seq}`);
  }

  const next = structuredClone(model);
  next.lastSeq = event.seq;
  next.counters[event.kind] = (next.counters[event.kind] ?? 0) + 1;

  switch (event.kind) {
    case "run_started": {
      const p = event.payload as { config_digest: string; instruction: string };
      next.runId = event.run_id;
      next.configDigest = p.config_digest;
      next.instruction = p.instruction;
      next.nodes["0"] = makeNode(0, null, 0);
      next.cursor = 0;
      next.control.running = true;
      break;
    }
    case "checklist_built": {
      const p = event.payload as { questions: string[] };
      next.checklist = [...p.questions];
      break;
    }
    case "state_created": {
      const p = event.payload as { parent_id: number; depth: number };
      const id = event.state_id as number;
      next.nodes[String(id)] = makeNode(id, p.parent_id, p.depth);
      next.edges.push({ from: p.parent_id, to: id });
      break;
    }
    case "reference_linked": {
      const p = event.payload as { ref: number; similarity: number };
      next.references.push({ from: event.state_id as number, to: p.ref, similarity: p.similarity });
      break;
    }
    case "state_evaluated": {
      const p = event.payload as { vqa: string; clip: number };
      const id = event.state_id as number;
      const node = next.nodes[String(id)];
      if (node) {
        node.vqa = p.vqa;
        node.clip = p.clip;
      }
      next.series.push(nextSeriesPoint(next.series, id, vqaValue(p.vqa), p.clip));
      break;
    }
    case "optimal_updated": {
      const p = event.payload as { eligible: number[]; overall: number[] };
      next.optimal = { eligible: [...p.eligible], overall: [...p.overall] };
      break;
    }
    case "stay_evaluated": {
      const p = event.payload as { passed: boolean; failed: string[] };
      const id = event.state_id as number;
      const node = next.nodes[String(id)];
      if (node) {
        node.stayPassed = p.passed;
        node.stayFailed = [...p.failed];
      }
      if (p.passed) next.cursor = id;
      break;
    }
    case "backtracked": {
      const p = event.payload as { from: number; to: number | null };
      next.cursor = p.to;
      break;
    }
    case "paused":
      next.control.paused = true;
      break;
    case "resumed":
      next.control.paused = false;
      break;
    case "control_applied": {
      const p = event.payload as { kind: string; state_id: number | null };
      next.controlLog.push({
        seq: event.seq,
        kind: p.kind,
        stateId: p.state_id ?? null,
        accepted: true,
        reason: null,
      });
      break;
    }
    case "control_rejected": {
      const p = event.payload as { kind: string; state_id: number | null; reason: string };
      next.controlLog.push({
        seq: event.seq,
        kind: p.kind,
        stateId: p.state_id ?? null,
        accepted: false,
        reason: p.reason,
      });
      break;
    }
    case "pruned": {
      const p = event.payload as { subtree: number[] };
      for (const id of p.subtree) {
        const node = next.nodes[String(id)];
        if (node) node.pruned = true;
      }
      break;
    }
    case "accepted": {
      const node = next.nodes[String(event.state_id)];
      if (node) node.accepted = true;
      break;
    }
    case "run_finished": {
      const p = event.payload as {
        termination: string;
        final_states: number[];
        fallback_used: boolean;
      };
      next.termination = p.termination;
      next.finalStates = [...p.final_states];
      next.fallbackUsed = p.fallback_used;
      next.control = { running: false, paused: false, finished: true };
      markFinalChains(next, p.final_states);
      break;
    }
    default:
      // Progress noise (thought_generated, retry chatter, ...) only counts;
      // unknown future kinds fold the same way instead of breaking the UI.
      break;
  }
  return next;
}

export function foldEvents(model: ViewModel, events: Iterable<EventRecord>): ViewModel {
  let current = model;
  for (const event of events) current = foldEvent(current, event);
  return current;
}
