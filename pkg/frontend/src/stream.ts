/** Newline-delimited event stream consumer with offset resume.
 *
 * The service keeps the response open until the run finishes, so a clean
 * end-of-stream means "fully streamed". Anything else (dropped connection,
 * a line cut mid-write) restarts the request at `offset = last seq + 1`;
 * the seq guard drops whatever the new response re-sends.
 */

import { authHeaders, RequestFailed } from "./api";
import type { EventRecord } from "./types";

export interface StreamOptions {
  base: string;
  runId: string;
  token?: string;
  /** First sequence number wanted; defaults to 0. */
  fromSeq?: number;
  retryDelayMs?: number;
  signal?: AbortSignal;
  onStatus?: (status: string) => void;
}

const PERMANENT = new Set([400, 401, 404]);

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export async function streamEvents(
  opts: StreamOptions,
  onEvent: (event: EventRecord) => void,
): Promise<void> {
  let nextSeq = opts.fromSeq ?? 0;
  const retryDelay = opts.retryDelayMs ?? 300;

  for (;;) {
    try {
      const response = await fetch(`${opts.base}/runs/${opts.runId}/events?offset=${nextSeq}`, {
        headers: authHeaders(opts.token),
        signal: opts.signal,
      });
      if (!response.ok) throw new RequestFailed(`event stream: HTTP ${response.status}`, response.status);
      if (!response.body) throw new RequestFailed("event stream: no body", 0);

      const reader = response.body.getReader();
      const decoder = new TextDecoder();
      let buffer = "";
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        buffer += decoder.decode(value, { stream: true });
        let newline: number;
        while ((newline = buffer.indexOf("\n")) >= 0) {
          const line = buffer.slice(0, newline);
          buffer = buffer.slice(newline + 1);
          if (!line.trim()) continue;
          const event = JSON.parse(line) as EventRecord;
          if (event.seq >= nextSeq) {
            nextSeq = event.seq + 1;
            onEvent(event);
          }
        }
      }
      return;
    } catch (error) {
      if (opts.signal?.aborted) return;
      if (error instanceof RequestFailed && PERMANENT.has(error.status)) throw error;
      opts.onStatus?.(`stream dropped (${String(error)}), resuming from seq ${nextSeq}`);
      await sleep(retryDelay);
    }
  }
}
