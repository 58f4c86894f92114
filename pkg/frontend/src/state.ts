/**
 * Console state and the event reducers. No optimistic updates: every
 * mutation here is driven by a gateway payload, either a snapshot
 * fetch or an /events frame. Shell responses pair to their command by
 * conversation id, so any number of commands can be in flight at once.
 */

import {
  AgentEntry, Ticket, parseAgentRow, parseEventFrame, parseTicketRow,
} from "./protocol.js";

export type Connection = "connecting" | "live" | "dropped";

export interface ShellEntry {
  cid: string;
  target: string;
  command: string;
  pending: boolean;
  performative: string;   // empty until the notification lands
  response: string;       // notification body, verbatim
}

export interface ConsoleState {
  agents: AgentEntry[];
  tickets: Ticket[];          // upsert order; views sort on top
  transcript: ShellEntry[];   // all targets interleaved, send order
  selected: string | null;
  connection: Connection;
  benchLines: string[];
  notice: string;             // one-line inline error surface
}

export function newState(): ConsoleState {
  return {
    agents: [],
    tickets: [],
    transcript: [],
    selected: null,
    connection: "connecting",
    benchLines: [],
    notice: "",
  };
}

export function applyAgentsDoc(s: ConsoleState, text: string): void {
  const rows: AgentEntry[] = [];
  for (const line of text.split("\n")) {
    const row = parseAgentRow(line);
    if (row) rows.push(row);
  }
  s.agents = rows;
  if (s.selected && !rows.some((a) => a.name === s.selected)) {
    s.selected = null;
  }
}

export function applyTicketsDoc(s: ConsoleState, text: string): void {
  const rows: Ticket[] = [];
  for (const line of text.split("\n")) {
    if (line.trim()) rows.push(parseTicketRow(line));
  }
  s.tickets = rows;
}

/** Insert or replace by tid; existing rows keep their position. */
export function upsertTicket(s: ConsoleState, line: string): Ticket {
  const t = parseTicketRow(line);
  const at = s.tickets.findIndex((x) => x.tid === t.tid);
  if (at >= 0) s.tickets[at] = t;
  else s.tickets.push(t);
  return t;
}

export function recordSend(s: ConsoleState, cid: string, target: string,
                           command: string): void {
  s.transcript.push({
    cid, target, command, pending: true, performative: "", response: "",
  });
}

export function resolveShell(s: ConsoleState, cid: string,
                             performative: string,
                             content: string): ShellEntry | null {
  const entry = s.transcript.find((e) => e.cid === cid && e.pending);
  if (!entry) return null;
  entry.pending = false;
  entry.performative = performative;
  entry.response = content;
  return entry;
}

export function pendingCids(s: ConsoleState, target?: string): string[] {
  return s.transcript
    .filter((e) => e.pending && (target === undefined || e.target === target))
    .map((e) => e.cid);
}

/** Route one /events frame; returns the frame kind for the caller. */
export function applyEvent(s: ConsoleState, text: string): string {
  const frame = parseEventFrame(text);
  if (frame.event === "ticket") {
    upsertTicket(s, frame.content);
  } else if (frame.event === "shell") {
    resolveShell(s, frame.headers["conversation-id"] ?? "",
                 frame.headers["performative"] ?? "", frame.content);
  } else if (frame.event === "bench") {
    s.benchLines.push(frame.content);
  }
  return frame.event;
}

/** Stable sort for the table view; the state array is left alone. */
export function sortedTickets(s: ConsoleState, key: keyof Ticket,
                              ascending: boolean): Ticket[] {
  const tagged = s.tickets.map((t, i) => ({ t, i }));
  tagged.sort((a, b) => {
    const va = a.t[key];
    const vb = b.t[key];
    if (va !== vb) {
      return (va < vb ? -1 : 1) * (ascending ? 1 : -1);
    }
    return a.i - b.i;
  });
  return tagged.map((x) => x.t);
}
