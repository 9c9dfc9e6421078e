/** Wire records from the run service and the view model folded from them. */

/** One line of the newline-delimited event stream. */
export interface EventRecord {
  seq: number;
  run_id: string;
  kind: string;
  state_id: number | null;
  payload: Record<string, unknown>;
  ts: number;
}

/** Row of GET /runs. */
export interface RunRow {
  run_id: string;
  finished: boolean;
  size: number;
  error: string | null;
}

export interface ImageDoc {
  id: string;
  kind: string;
  locator: string;
}

export interface StateDoc {
  state_id: number;
  parent_id: number | null;
  depth: number;
  input: ImageDoc;
  output: ImageDoc;
  thought: string;
  evaluation: unknown;
  status: string;
}

/** GET /runs/{id}/topology. Only the parts the viewer touches are typed. */
export interface TopologyDoc {
  version: string;
  config_digest: string;
  root: StateDoc;
  states: StateDoc[];
}

export type ControlKind = "pause" | "resume" | "prune" | "force_backtrack" | "accept";

export interface ControlAction {
  kind: ControlKind;
  stateId?: number | null;
}

/** One state card. Flags accumulate from events; colors are derived later. */
export interface ViewNode {
  id: number;
  parentId: number | null;
  depth: number;
  vqa: string | null;
  clip: number | null;
  pruned: boolean;
  accepted: boolean;
  onFinalChain: boolean;
  stayPassed: boolean | null;
  stayFailed: string[];
}

export interface TreeEdge {
  from: number;
  to: number;
}

/** Drawn dashed: `from` consulted `to` while being created. */
export interface ReferenceEdge {
  from: number;
  to: number;
  similarity: number;
}

/** One evaluated state in creation order, with the running best alongside. */
export interface SeriesPoint {
  step: number;
  stateId: number;
  vqa: number;
  clip: number;
  bestVqa: number;
  bestClip: number;
}

export interface ControlLogEntry {
  seq: number;
  kind: string;
  stateId: number | null;
  accepted: boolean;
  reason: string | null;
}

/**
 * Pure fold of the event stream. Rebuilding from the same events always
 * produces an identical model, which is what makes reconnect-at-offset safe.
 */
export interface ViewModel {
  runId: string | null;
  configDigest: string | null;
  instruction: string | null;
  checklist: string[];
  nodes: Record<string, ViewNode>;
  edges: TreeEdge[];
  references: ReferenceEdge[];
  series: SeriesPoint[];
  optimal: { eligible: number[]; overall: number[] };
  cursor: number | null;
  control: { running: boolean; paused: boolean; finished: boolean };
  termination: string | null;
  finalStates: number[];
  fallbackUsed: boolean | null;
  controlLog: ControlLogEntry[];
  counters: Record<string, number>;
  lastSeq: number;
}
