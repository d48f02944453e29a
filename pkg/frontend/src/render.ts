/**
 * Pure render-model builders: ViewState in, display descriptors out.
 * Keeping these DOM-free makes the transcript/trace rendering testable and
 * guarantees the UI shows nothing it did not receive from the service.
 */

import { AgentTrace } from "./api.js";
import { ViewState } from "./state.js";

export interface Bubble {
  role: "user" | "assistant";
  text: string;
  traceId: string | null;
  pending: boolean;
  failed: boolean;
}

export function transcriptBubbles(state: ViewState): Bubble[] {
  const bubbles: Bubble[] = [];
  for (const turn of state.turns) {
    bubbles.push({
      role: "user",
      text: turn.user,
      traceId: null,
      pending: false,
      failed: false,
    });
    if (turn.status === "pending") {
      bubbles.push({
        role: "assistant",
        text: "…",
        traceId: null,
        pending: true,
        failed: false,
      });
    } else if (turn.status === "failed") {
      bubbles.push({
        role: "assistant",
        text: turn.error ?? "request failed",
        traceId: null,
        pending: false,
        failed: true,
      });
    } else {
      bubbles.push({
        role: "assistant",
        text: turn.answer ?? "",
        traceId: turn.traceId,
        pending: false,
        failed: false,
      });
    }
  }
  return bubbles;
}

export interface DescriptionPanel {
  title: string;
  body: string;
  troubleshooting: string | null;
}

/** Split an infeasible model's description into body + troubleshooting so
 * the conflict section can be visually distinguished. */
export function descriptionPanel(state: ViewState): DescriptionPanel | null {
  if (!state.description || !state.modelId) {
    return null;
  }
  const parts = state.description.split("\n\n");
  const infeasible = state.modelStatus === "infeasible";
  return {
    title: `model ${state.modelId} (${state.modelStatus})`,
    body: infeasible && parts.length > 1 ? parts.slice(0, -1).join("\n\n") : state.description,
    troubleshooting: infeasible && parts.length > 1 ? parts[parts.length - 1] ?? null : null,
  };
}

export interface HopView {
  agent: string;
  mode: string;
  functionName: string | null;
  argumentsText: string | null;
  resultDigest: string | null;
  note: string;
}

export function traceHops(trace: AgentTrace): HopView[] {
  return trace.hops.map((hop) => ({
    agent: hop.agent,
    mode: hop.mode,
    functionName: hop.function,
    argumentsText: hop.arguments ? JSON.stringify(hop.arguments) : null,
    resultDigest: hop.result_digest,
    note: hop.note,
  }));
}

const NUMERAL_RE = /(?<![\w.])-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?(?!\w|\.\d)/g;

/** Standalone numerals in a rendered text (same notion the service uses). */
export function numeralsIn(text: string): number[] {
  return Array.from(text.matchAll(NUMERAL_RE), (m) => Number(m[0]));
}

/** Every number reachable in a payload (numbers plus numerals in strings). */
export function payloadNumbers(payload: unknown): number[] {
  const out: number[] = [];
  const visit = (node: unknown): void => {
    if (typeof node === "number") {
      out.push(node);
    } else if (typeof node === "string") {
      out.push(...numeralsIn(node));
    } else if (Array.isArray(node)) {
      node.forEach(visit);
    } else if (node && typeof node === "object") {
      for (const [key, value] of Object.entries(node)) {
        out.push(...numeralsIn(key));
        visit(value);
      }
    }
  };
  visit(payload);
  return out;
}

/** Numerals in `text` with no counterpart among `numbers` (tolerant match). */
export function unmatchedNumerals(text: string, numbers: number[]): number[] {
  return numeralsIn(text).filter(
    (n) => !numbers.some((p) => Math.abs(n - p) <= 1e-6 * Math.max(1, Math.abs(p))),
  );
}
