/** Browser entry: run list, live viewer, and the control panel. */

import { authHeaders, fetchTopology, imageUrl, listRuns, startRun } from "./api";
import { ControlRefused, CONTROL_KINDS, controlDisabledReason, sendControl } from "./controls";
import { foldEvent, initialViewModel } from "./fold";
import { escapeXml, renderChartSvg, renderTreeSvg, statusLine } from "./render";
import { streamEvents } from "./stream";
import type { ControlKind, ImageDoc, TopologyDoc, ViewModel } from "./types";

const params = new URLSearchParams(location.search);
const base = params.get("base") ?? "";
const token = params.get("token") ?? undefined;
const runId = params.get("run");

const app = document.getElementById("app") as HTMLElement;

// ---------------------------------------------------------------------------
// Run list page
// ---------------------------------------------------------------------------

const SAMPLE_RUN = {
  task: {
    initial: {
      attributes: Object.fromEntries(Array.from({ length: 8 }, (_, i) => [`a${i}`, "v0"])),
      detail_budget: 1.0,
    },
    edits: [
      ["a0", "v1"],
      ["a1", "v2"],
      ["a2", "v3"],
    ],
  },
  preset: "main",
  p: 0.8,
  q: 0.05,
  persistence: 0.85,
};

function runLink(id: string): string {
  const query = new URLSearchParams();
  query.set("run", id);
  if (base) query.set("base", base);
  if (token) query.set("token", token);
  return `?${query.toString()}`;
}

async function renderRunList(): Promise<void> {
  let rowsHtml: string;
  try {
    const rows = await listRuns(base, token);
    rowsHtml = rows.length
      ? rows
          .map(
            (row) =>
              `<tr><td><a href="${runLink(row.run_id)}">${escapeXml(row.run_id)}</a></td>` +
              `<td>${row.size}</td><td>${row.finished ? "finished" : "live"}</td>` +
              `<td>${row.error ? escapeXml(row.error) : ""}</td></tr>`,
          )
          .join("")
      : `<tr><td colspan="4" class="muted">no runs yet</td></tr>`;
  } catch (error) {
    rowsHtml = `<tr><td colspan="4" class="error">${escapeXml(String(error))}</td></tr>`;
  }
  app.innerHTML = `
    <h1>runs</h1>
    <table class="runs">
      <thead><tr><th>run</th><th>states</th><th>status</th><th>error</th></tr></thead>
      <tbody>${rowsHtml}</tbody>
    </table>
    <p><button id="start-sample">start a sample run</button></p>
    <p class="muted">service base: ${escapeXml(base || "(same origin)")}</p>`;
  const button = document.getElementById("start-sample") as HTMLButtonElement | null;
  button?.addEventListener("click", async () => {
    button.disabled = true;
    try {
      const id = await startRun(base, { ...SAMPLE_RUN, seed: Date.now() % 1000000 }, token);
      location.search = runLink(id);
    } catch (error) {
      button.disabled = false;
      alert(String(error));
    }
  });
}

// ---------------------------------------------------------------------------
// Viewer page
// ---------------------------------------------------------------------------

interface ViewerState {
  model: ViewModel;
  selectedId: number | null;
  notice: string;
  topology: TopologyDoc | null;
}

function imageDocFor(view: ViewerState, stateId: number): ImageDoc | null {
  const doc = view.topology;
  if (!doc) return null;
  if (stateId === doc.root.state_id) return doc.root.output;
  return doc.states.find((s) => s.state_id === stateId)?.output ?? null;
}

const locatorCache = new Map<string, Record<string, unknown>>();

async function fetchSimPayload(id: string, run: string): Promise<Record<string, unknown>> {
  const cached = locatorCache.get(id);
  if (cached) return cached;
  const response = await fetch(imageUrl(base, run, id), { headers: authHeaders(token) });
  if (!response.ok) throw new Error(`image ${id}: HTTP ${response.status}`);
  const payload = (await response.json()) as Record<string, unknown>;
  locatorCache.set(id, payload);
  return payload;
}

function attributeGrid(
  payload: Record<string, unknown>,
  rootPayload: Record<string, unknown> | null,
): string {
  const attrs = (payload.attributes ?? {}) as Record<string, string>;
  const rootAttrs = (rootPayload?.attributes ?? {}) as Record<string, string>;
  const cells = Object.keys(attrs)
    .sort()
    .map((key) => {
      const changed = rootPayload !== null && rootAttrs[key] !== attrs[key];
      return `<div class="cell${changed ? " changed" : ""}"><span>${escapeXml(key)}</span>${escapeXml(attrs[key])}</div>`;
    })
    .join("");
  const budget = typeof payload.detail_budget === "number" ? payload.detail_budget.toFixed(4) : "?";
  return `<div class="grid">${cells}</div><p class="muted">detail budget ${budget}</p>`;
}

async function renderThumbnail(view: ViewerState, run: string, stateId: number): Promise<void> {
  const slot = document.getElementById("thumb");
  const doc = imageDocFor(view, stateId);
  if (!slot || !doc) return;
  try {
    if (doc.kind === "sim") {
      const rootDoc = view.topology ? view.topology.root.output : null;
      const payload = await fetchSimPayload(doc.id, run);
      const rootPayload =
        rootDoc && rootDoc.id !== doc.id ? await fetchSimPayload(rootDoc.id, run) : null;
      slot.innerHTML = attributeGrid(payload, stateId === 0 ? null : rootPayload);
    } else {
      const response = await fetch(imageUrl(base, run, doc.id), { headers: authHeaders(token) });
      if (!response.ok) throw new Error(`HTTP ${response.status}`);
      const url = URL.createObjectURL(await response.blob());
      slot.innerHTML = `<img src="${url}" alt="state ${stateId} output"/>`;
    }
  } catch (error) {
    slot.innerHTML = `<span class="error">${escapeXml(String(error))}</span>`;
  }
}

function detailsHtml(view: ViewerState): string {
  if (view.selectedId === null) return `<p class="muted">click a state card to inspect it</p>`;
  const node = view.model.nodes[String(view.selectedId)];
  if (!node) return `<p class="muted">state ${view.selectedId} is gone</p>`;
  const rows: string[] = [
    `<dt>state</dt><dd>${node.id === 0 ? "root" : `#${node.id}`} (depth ${node.depth})</dd>`,
  ];
  if (node.vqa !== null) {
    rows.push(`<dt>vqa</dt><dd>${escapeXml(node.vqa)}</dd>`);
    rows.push(`<dt>clip</dt><dd>${(node.clip ?? 0).toFixed(4)}</dd>`);
  }
  if (node.stayPassed !== null) {
    rows.push(
      `<dt>stay</dt><dd>${node.stayPassed ? "passed" : `failed: ${escapeXml(node.stayFailed.join(", "))}`}</dd>`,
    );
  }
  const flags = [
    node.pruned ? "pruned" : "",
    node.accepted ? "accepted" : "",
    node.onFinalChain ? "on final chain" : "",
  ].filter(Boolean);
  if (flags.length) rows.push(`<dt>flags</dt><dd>${flags.join(", ")}</dd>`);
  const refs = view.model.references.filter((r) => r.from === node.id);
  if (refs.length) {
    rows.push(
      `<dt>references</dt><dd>${refs.map((r) => `#${r.to} (${r.similarity})`).join(", ")}</dd>`,
    );
  }
  if (view.topology) {
    const stateDoc =
      node.id === 0
        ? view.topology.root
        : view.topology.states.find((s) => s.state_id === node.id);
    if (stateDoc) rows.push(`<dt>thought</dt><dd>${escapeXml(stateDoc.thought)}</dd>`);
  }
  return `<dl>${rows.join("")}</dl><div id="thumb" class="thumb"></div>`;
}

function controlsHtml(view: ViewerState): string {
  const buttons = CONTROL_KINDS.map((kind) => {
    const reason = controlDisabledReason(kind, view.model, view.selectedId);
    const disabled = reason ? ` disabled title="${escapeXml(reason)}"` : "";
    return `<button data-control="${kind}"${disabled}>${kind.replace("_", " ")}</button>`;
  }).join("");
  const target = view.selectedId === null ? "none" : `#${view.selectedId}`;
  return `${buttons}<span class="muted">target: ${target}</span>`;
}

function renderViewer(view: ViewerState, run: string): void {
  app.innerHTML = `
    <header>
      <h1>run ${escapeXml(run)}</h1>
      <span class="status ${view.model.control.finished ? "done" : "live"}">${escapeXml(statusLine(view.model))}</span>
      <a href="${base ? `?base=${encodeURIComponent(base)}` : "?"}" class="muted">all runs</a>
    </header>
    <div class="controls" id="controls">${controlsHtml(view)}</div>
    <p class="notice">${escapeXml(view.notice)}</p>
    <div class="columns">
      <div class="tree">${renderTreeSvg(view.model, view.selectedId)}</div>
      <aside>
        ${renderChartSvg(view.model, 360, 150)}
        <div class="details">${detailsHtml(view)}</div>
      </aside>
    </div>`;
  if (view.selectedId !== null) void renderThumbnail(view, run, view.selectedId);
}

function startViewer(run: string): void {
  const view: ViewerState = {
    model: initialViewModel(),
    selectedId: null,
    notice: "",
    topology: null,
  };
  let renderQueued = false;
  const scheduleRender = () => {
    if (renderQueued) return;
    renderQueued = true;
    requestAnimationFrame(() => {
      renderQueued = false;
      renderViewer(view, run);
    });
  };

  app.addEventListener("click", async (domEvent) => {
    const target = domEvent.target as Element;
    const card = target.closest<SVGGElement>("[data-node-id]");
    if (card) {
      view.selectedId = Number(card.dataset.nodeId);
      scheduleRender();
      return;
    }
    const button = target.closest<HTMLButtonElement>("[data-control]");
    if (button && !button.disabled) {
      const kind = button.dataset.control as ControlKind;
      try {
        await sendControl(base, run, { kind, stateId: view.selectedId }, token);
        view.notice = `${kind} sent; waiting for the run loop to report it`;
      } catch (error) {
        view.notice =
          error instanceof ControlRefused ? `${kind} refused: ${error.message}` : String(error);
      }
      scheduleRender();
    }
  });

  void streamEvents(
    {
      base,
      runId: run,
      token,
      onStatus: (status) => {
        view.notice = status;
        scheduleRender();
      },
    },
    (event) => {
      view.model = foldEvent(view.model, event);
      if (view.model.control.finished && view.topology === null) {
        void fetchTopology(base, run, token).then((doc) => {
          view.topology = doc;
          scheduleRender();
        });
      }
      scheduleRender();
    },
  ).catch((error) => {
    view.notice = String(error);
    scheduleRender();
  });

  renderViewer(view, run);
}

// ---------------------------------------------------------------------------

if (runId) {
  startViewer(runId);
} else {
  void renderRunList();
  setInterval(() => void renderRunList(), 3000);
}
