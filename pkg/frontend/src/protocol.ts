/**
 * Wire shapes shared with the gateway: header-line documents, event
 * frames, directory rows, and shell-quoted ticket rows.
 *
 * Parsing only. The console never transforms a field value; whatever
 * the gateway sent is what gets displayed.
 */

export interface HeaderDoc {
  headers: Record<string, string>;
  content: string;
}

/** Split "Key: value" lines, blank line, free text. Keys lowercased. */
export function parseHeaderDoc(text: string): HeaderDoc {
  const cut = text.indexOf("\n\n");
  const head = cut < 0 ? text : text.slice(0, cut);
  const content = cut < 0 ? "" : text.slice(cut + 2);
  const headers: Record<string, string> = {};
  for (const line of head.split("\n")) {
    if (!line.trim()) continue;
    const sep = line.indexOf(":");
    if (sep < 0) continue;
    headers[line.slice(0, sep).trim().toLowerCase()] =
      line.slice(sep + 1).trim();
  }
  return { headers, content };
}

export interface EventFrame {
  event: string;
  headers: Record<string, string>;
  content: string;
}

export function parseEventFrame(text: string): EventFrame {
  const { headers, content } = parseHeaderDoc(text);
  return { event: headers["event"] ?? "", headers, content };
}

/** Ticket rows arrive shell-quoted ("ALERT !" is one field). */
export function shellSplit(line: string): string[] {
  const out: string[] = [];
  let cur = "";
  let seen = false;
  let i = 0;
  while (i < line.length) {
    const c = line[i];
    if (c === " " || c === "\t") {
      if (seen) {
        out.push(cur);
        cur = "";
        seen = false;
      }
      i += 1;
    } else if (c === "'" || c === '"') {
      const end = line.indexOf(c, i + 1);
      if (end < 0) throw new Error(`unterminated ${c} quote`);
      cur += line.slice(i + 1, end);
      seen = true;
      i = end + 1;
    } else if (c === "\\" && i + 1 < line.length) {
      cur += line[i + 1];
      seen = true;
      i += 2;
    } else {
      cur += c;
      seen = true;
      i += 1;
    }
  }
  if (seen) out.push(cur);
  return out;
}

export const TICKET_FIELDS = [
  "tid", "datastore", "sender", "tidreply", "framework", "deweycode",
  "statefrom", "stateuntil", "keymethod", "parmethod", "engine",
] as const;

export type TicketField = (typeof TICKET_FIELDS)[number];
export type Ticket = Record<TicketField, string>;

export function parseTicketRow(line: string): Ticket {
  const parts = shellSplit(line);
  if (parts.length !== TICKET_FIELDS.length) {
    throw new Error(
      `ticket row needs ${TICKET_FIELDS.length} fields, got ${parts.length}`);
  }
  const t = {} as Ticket;
  TICKET_FIELDS.forEach((f, i) => {
    t[f] = parts[i] as string;
  });
  return t;
}

export interface AgentEntry {
  name: string;
  host: string;
  port: string;
  level: string;
}

/** "agent <name> <host> <port> <level>"; anything else is not a row. */
export function parseAgentRow(line: string): AgentEntry | null {
  const parts = line.trim().split(/\s+/);
  if (parts.length !== 5 || parts[0] !== "agent") return null;
  return {
    name: parts[1] as string,
    host: parts[2] as string,
    port: parts[3] as string,
    level: parts[4] as string,
  };
}
