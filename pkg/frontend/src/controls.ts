/** Control actions: local gating mirrors the server contract, the POST is
 * the only effect. The model never changes here; the run loop's own events
 * report what actually happened.
 */

import { authHeaders } from "./api";
import type { ControlAction, ControlKind, ViewModel } from "./types";

export const CONTROL_KINDS: readonly ControlKind[] = [
  "pause",
  "resume",
  "prune",
  "force_backtrack",
  "accept",
];

const NEEDS_STATE: readonly ControlKind[] = ["prune", "accept"];

export class ControlRefused extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ControlRefused";
  }
}

/** Why a button should be disabled right now, or null when it may fire. */
export function controlDisabledReason(
  kind: ControlKind,
  model: ViewModel,
  stateId: number | null,
): string | null {
  if (model.control.finished) return "run finished";
  if (NEEDS_STATE.includes(kind)) {
    if (stateId === null) return "select a state first";
    if (stateId === 0) return "the root cannot be targeted";
    if (!model.nodes[String(stateId)]) return `no state ${stateId}`;
  }
  return null;
}

export async function sendControl(
  base: string,
  runId: string,
  action: ControlAction,
  token?: string,
): Promise<{ accepted: boolean }> {
  const response = await fetch(`${base}/runs/${runId}/control`, {
    method: "POST",
    headers: { "content-type": "application/json", ...authHeaders(token) },
    body: JSON.stringify({ kind: action.kind, state_id: action.stateId ?? null }),
  });
  if (response.status === 409) throw new ControlRefused("run finished", 409);
  if (!response.ok) {
    let detail = `HTTP ${response.status}`;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // keep the status line
    }
    throw new ControlRefused(detail, response.status);
  }
  return (await response.json()) as { accepted: boolean };
}
