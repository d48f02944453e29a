/**
 * DOM wiring for the chat client. All state transitions live in ChatStore;
 * this file only projects ViewState into elements and forwards events.
 */

import { ApiClient } from "./api.js";
import { descriptionPanel, traceHops, transcriptBubbles } from "./render.js";
import { ChatStore } from "./state.js";

const api = new ApiClient("");
const store = new ChatStore(api);

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function render(): void {
  const state = store.state;

  const uploadSection = byId<HTMLElement>("upload-section");
  const uploadStatus = byId<HTMLElement>("upload-status");
  uploadSection.classList.toggle("hidden", state.phase === "ready");
  uploadStatus.textContent = state.phase === "uploading" ? "uploading…" : "";

  const diagBox = byId<HTMLElement>("diagnostics");
  diagBox.replaceChildren();
  for (const diagnostic of state.diagnostics) {
    diagBox.append(el("div", "diagnostic", diagnostic));
  }
  const retry = byId<HTMLButtonElement>("retry-upload");
  retry.classList.toggle("hidden", state.uploadError === null);
  byId<HTMLElement>("upload-error").textContent = state.uploadError ?? "";

  const descBox = byId<HTMLElement>("description");
  descBox.replaceChildren();
  const panel = descriptionPanel(state);
  if (panel) {
    descBox.append(el("h2", undefined, panel.title));
    descBox.append(el("p", "narrative", panel.body));
    if (panel.troubleshooting) {
      descBox.append(el("div", "troubleshooting", panel.troubleshooting));
    }
  }

  const chat = byId<HTMLElement>("chat-section");
  chat.classList.toggle("hidden", state.phase !== "ready");
  const transcriptBox = byId<HTMLElement>("transcript");
  transcriptBox.replaceChildren();
  for (const bubble of transcriptBubbles(state)) {
    const div = el("div", `bubble ${bubble.role}`);
    if (bubble.pending) div.classList.add("pending");
    if (bubble.failed) div.classList.add("failed");
    div.append(el("p", undefined, bubble.text));
    if (bubble.traceId) {
      const link = el("button", "trace-link", "trace");
      link.addEventListener("click", () => void store.openTrace(bubble.traceId as string));
      div.append(link);
    }
    transcriptBox.append(div);
  }
  transcriptBox.scrollTop = transcriptBox.scrollHeight;

  byId<HTMLElement>("busy-notice").textContent = state.busyNotice ?? "";
  byId<HTMLButtonElement>("send").disabled = state.pending;

  const drawer = byId<HTMLElement>("trace-drawer");
  drawer.classList.toggle("hidden", state.openTrace === null && !state.traceError);
  const hopsBox = byId<HTMLElement>("trace-hops");
  hopsBox.replaceChildren();
  if (state.traceError) {
    hopsBox.append(el("div", "diagnostic", state.traceError));
  } else if (state.openTrace) {
    byId<HTMLElement>("trace-title").textContent =
      `trace ${state.openTrace.trace_id}: ${state.openTrace.query}`;
    for (const hop of traceHops(state.openTrace)) {
      const row = el("div", "hop");
      row.append(el("span", "hop-agent", `${hop.agent} [${hop.mode}]`));
      if (hop.functionName) {
        row.append(el("code", undefined, `${hop.functionName}(${hop.argumentsText ?? ""})`));
      }
      if (hop.resultDigest) {
        row.append(el("span", "digest", `result ${hop.resultDigest}`));
      }
      if (hop.note) {
        row.append(el("span", "note", hop.note));
      }
      hopsBox.append(row);
    }
  }
}

function wire(): void {
  const fileInput = byId<HTMLInputElement>("model-file");
  fileInput.addEventListener("change", () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    void file.text().then((text) => void store.uploadModel(text));
  });
  byId<HTMLButtonElement>("retry-upload").addEventListener("click", () => {
    void store.retryUpload();
  });
  const input = byId<HTMLTextAreaElement>("question");
  const send = () => {
    const text = input.value;
    void store.sendTurn(text).then((sent) => {
      if (sent) input.value = "";
    });
  };
  byId<HTMLButtonElement>("send").addEventListener("click", send);
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter" && !event.shiftKey) {
      event.preventDefault();
      send();
    }
  });
  byId<HTMLButtonElement>("close-trace").addEventListener("click", () => {
    store.closeTrace();
  });
  store.subscribe(render);
}

wire();
