/**
 * HTTP and event-stream glue. The gateway speaks header-line documents
 * over plain text, so requests are assembled by string concatenation
 * and every response body is returned verbatim for display.
 */

import { parseHeaderDoc } from "./protocol.js";

export interface GatewayReply {
  status: number;
  text: string;
}

export class GatewayClient {
  constructor(private base: string = "") {}

  private async post(path: string, body: string): Promise<GatewayReply> {
    const r = await fetch(this.base + path, {
      method: "POST",
      headers: { "content-type": "text/plain" },
      body,
    });
    return { status: r.status, text: await r.text() };
  }

  async agents(): Promise<GatewayReply> {
    const r = await fetch(this.base + "/agents");
    return { status: r.status, text: await r.text() };
  }

  async tickets(): Promise<GatewayReply> {
    const r = await fetch(this.base + "/tickets");
    return { status: r.status, text: await r.text() };
  }

  async setRunlevel(agent: string, level: number): Promise<GatewayReply> {
    return this.post("/runlevel", `Agent: ${agent}\nLevel: ${level}\n`);
  }

  /**
   * Dispatch one engine action; resolves to the conversation id the
   * /events stream will answer on. Never waits for the notification.
   */
  async shell(target: string, command: string,
              action = "EVAL_COMMAND",
              session = ""): Promise<GatewayReply & { cid?: string }> {
    let head = `Target: ${target}\nAction: ${action}\n`;
    if (session) head += `Session: ${session}\n`;
    const reply = await this.post("/shell", `${head}\n${command}`);
    if (reply.status !== 200) return reply;
    const cid = parseHeaderDoc(reply.text).headers["conversation-id"];
    return { ...reply, cid };
  }
}

// Minimal view of a WebSocket so tests can hand in a fake.
export interface WsLike {
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  close(): void;
}

/** /events connection that reconnects with backoff after a drop. */
export class EventStream {
  private ws: WsLike | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private delay = 1000;
  private closed = false;

  constructor(
    private url: string,
    private onFrame: (text: string) => void,
    private onStatus: (s: "connecting" | "live" | "dropped") => void,
    private factory: (url: string) => WsLike =
      (u) => new WebSocket(u) as unknown as WsLike,
  ) {}

  start(): void {
    this.closed = false;
    this.connect();
  }

  private connect(): void {
    this.onStatus("connecting");
    const ws = this.factory(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.delay = 1000;
      this.onStatus("live");
    };
    ws.onmessage = (ev) => this.onFrame(String(ev.data));
    ws.onerror = () => { /* onclose follows */ };
    ws.onclose = () => {
      if (!this.closed) this.drop();
    };
  }

  private drop(): void {
    this.onStatus("dropped");
    this.timer = setTimeout(() => this.connect(), this.delay);
    this.delay = Math.min(this.delay * 2, 10000);
  }

  close(): void {
    this.closed = true;
    if (this.timer) clearTimeout(this.timer);
    this.ws?.close();
  }
}
