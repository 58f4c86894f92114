/**
 * Pure view helpers. Cells pass gateway field values through
 * byte-identical; the only things computed here are CSS class names.
 */

import { AgentEntry, TICKET_FIELDS, Ticket } from "./protocol.js";
import { ShellEntry } from "./state.js";

export const EMPTY_TICKETS = "no tickets yet";

export function ticketCells(t: Ticket): string[] {
  return TICKET_FIELDS.map((f) => t[f]);
}

export function agentCells(a: AgentEntry): string[] {
  return [a.name, a.host, a.port, a.level];
}

const STATE_CLASSES: Record<string, string> = {
  "ALERT !": "alert",
  finished: "finished",
  aborted: "aborted",
  checkout: "checkout",
};

export function stateBadge(t: Ticket): string {
  return STATE_CLASSES[t.stateuntil] ?? "pending";
}

export interface TranscriptLine {
  head: string;
  body: string;
  cls: string;
}

const PERFORMATIVE_CLASSES: Record<string, string> = {
  INFORM: "ok",
  FAILURE: "failure",
  REFUSE: "refuse",
  "NOT-UNDERSTOOD": "not-understood",
};

export function transcriptLine(e: ShellEntry): TranscriptLine {
  const head = `${e.target}> ${e.command}`;
  if (e.pending) {
    return { head, body: "... pending", cls: "pending" };
  }
  return {
    head,
    body: e.response,
    cls: PERFORMATIVE_CLASSES[e.performative] ?? "other",
  };
}
