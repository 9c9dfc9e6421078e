/** Thin fetch wrappers over the run service. */

import type { RunRow, TopologyDoc } from "./types";

export function authHeaders(token?: string): Record<string, string> {
  return token ? { authorization: `Bearer ${token}` } : {};
}

export class RequestFailed extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "RequestFailed";
  }
}

async function detailOf(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: string };
    if (body.detail) return body.detail;
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return `HTTP ${response.status}`;
}

async function getJson<T>(url: string, token?: string): Promise<T> {
  const response = await fetch(url, { headers: authHeaders(token) });
  if (!response.ok) throw new RequestFailed(await detailOf(response), response.status);
  return (await response.json()) as T;
}

export function listRuns(base: string, token?: string): Promise<RunRow[]> {
  return getJson<RunRow[]>(`${base}/runs`, token);
}

export async function startRun(
  base: string,
  body: Record<string, unknown>,
  token?: string,
): Promise<string> {
  const response = await fetch(`${base}/runs`, {
    method: "POST",
    headers: { "content-type": "application/json", ...authHeaders(token) },
    body: JSON.stringify(body),
  });
  if (!response.ok) throw new RequestFailed(await detailOf(response), response.status);
  const doc = (await response.json()) as { run_id: string };
  return doc.run_id;
}

export function fetchTopology(base: string, runId: string, token?: string): Promise<TopologyDoc> {
  return getJson<TopologyDoc>(`${base}/runs/${runId}/topology`, token);
}

export function imageUrl(base: string, runId: string, imageId: string): string {
  return `${base}/runs/${runId}/images/${imageId}`;
}
