import { describe, expect, it, vi } from "vitest";

import { EventStream, WsLike } from "../src/gateway.js";
import {
  applyAgentsDoc, applyEvent, applyTicketsDoc, newState, pendingCids,
  recordSend, resolveShell, sortedTickets, upsertTicket,
} from "../src/state.js";
import { stateBadge } from "../src/render.js";

function ticketFrame(row: string): string {
  return `Event: ticket\n\n${row}`;
}

function shellFrame(cid: string, performative: string,
                    body: string): string {
  return `Event: shell\nConversation-Id: ${cid}\n`
    + `Performative: ${performative}\nSender: x@h:1\n\n${body}`;
}

describe("ticket table state", () => {
  it("mirrors the announce -> checkout -> ALERT ! sequence in order", () => {
    const s = newState();
    const badges: string[] = [];

    applyEvent(s, ticketFrame(
      "260825001 /res/a.pcap.facts watchdog1 - lab UDP-SSDP "
      + "pending unset - - -"));
    badges.push(stateBadge(s.tickets[0]!));
    applyEvent(s, ticketFrame(
      "260825001 /res/a.pcap.facts watchdog1 c-9 lab UDP-SSDP "
      + "pending checkout - x1 -"));
    badges.push(stateBadge(s.tickets[0]!));
    applyEvent(s, ticketFrame(
      "260825001 /res/a.pcap.facts watchdog1 c-9 lab UDP-SSDP "
      + "closed 'ALERT !' Efficacy x1 rulekit.all"));
    badges.push(stateBadge(s.tickets[0]!));

    expect(badges).toEqual(["pending", "checkout", "alert"]);
    expect(s.tickets.length).toBe(1);           // updates, not duplicates
    expect(s.tickets[0]!.stateuntil).toBe("ALERT !");
  });

  it("starts empty and replaces wholesale on a snapshot", () => {
    const s = newState();
    expect(s.tickets).toEqual([]);
    applyTicketsDoc(s,
      "260825001 /a f - lab UDP pending unset - - -\n"
      + "260825002 /b f - lab TCP pending unset - - -\n");
    expect(s.tickets.map((t) => t.tid)).toEqual(["260825001", "260825002"]);
    applyTicketsDoc(s, "");
    expect(s.tickets).toEqual([]);
  });

  it("sorts by tid stably across updates", () => {
    const s = newState();
    upsertTicket(s, "260825003 /c f - lab UDP pending unset - - -");
    upsertTicket(s, "260825001 /a f - lab UDP pending unset - - -");
    upsertTicket(s, "260825002 /b f - lab UDP pending unset - - -");
    const before = sortedTickets(s, "tid", true).map((t) => t.tid);
    expect(before).toEqual(["260825001", "260825002", "260825003"]);

    upsertTicket(s, "260825002 /b f c-1 lab UDP pending checkout - x1 -");
    const after = sortedTickets(s, "tid", true);
    expect(after.map((t) => t.tid)).toEqual(before);   // update kept its slot
    expect(after[1]!.stateuntil).toBe("checkout");
    const bySender = sortedTickets(s, "sender", true).map((t) => t.tid);
    expect(bySender).toEqual(["260825003", "260825001", "260825002"]);
  });
});

describe("shell transcript state", () => {
  it("resolves overlapping commands independently, in any order", () => {
    const s = newState();
    recordSend(s, "c-1", "expert1", "(facts)");
    recordSend(s, "c-2", "expert1", "(agenda)");
    expect(pendingCids(s, "expert1")).toEqual(["c-1", "c-2"]);

    // the second reply lands first
    applyEvent(s, shellFrame("c-2", "INFORM", "ok\n0 activations"));
    expect(pendingCids(s)).toEqual(["c-1"]);
    expect(s.transcript[1]!.response).toBe("ok\n0 activations");
    expect(s.transcript[0]!.pending).toBe(true);

    applyEvent(s, shellFrame("c-1", "INFORM", "ok\nf-0"));
    expect(pendingCids(s)).toEqual([]);
    expect(s.transcript[0]!.response).toBe("ok\nf-0");
  });

  it("keeps FAILURE and REFUSE notifications verbatim", () => {
    const s = newState();
    recordSend(s, "c-3", "expert1", "(borken");
    applyEvent(s, shellFrame("c-3", "FAILURE", "error\nunbalanced form"));
    expect(s.transcript[0]!.performative).toBe("FAILURE");
    expect(s.transcript[0]!.response).toBe("error\nunbalanced form");

    recordSend(s, "c-4", "board", "RUN_INFINITY");
    applyEvent(s, shellFrame("c-4", "REFUSE", "no engine here"));
    expect(s.transcript[1]!.performative).toBe("REFUSE");
  });

  it("drops notifications that match no pending command", () => {
    const s = newState();
    expect(resolveShell(s, "c-9", "INFORM", "ok")).toBeNull();
    expect(s.transcript).toEqual([]);
  });
});

describe("agents and runlevels", () => {
  it("shows the directory's level byte for byte", () => {
    const s = newState();
    applyAgentsDoc(s,
      "agent ams 127.0.0.1 40000 5\nagent expert1 127.0.0.1 40000 5\n");
    expect(s.agents.map((a) => [a.name, a.level])).toEqual(
      [["ams", "5"], ["expert1", "5"]]);

    // after n-6! the directory reports the expert at level 0
    applyAgentsDoc(s,
      "agent ams 127.0.0.1 40000 5\nagent expert1 127.0.0.1 40000 0\n");
    expect(s.agents[1]!.level).toBe("0");
  });

  it("clears a selection whose agent disappeared", () => {
    const s = newState();
    applyAgentsDoc(s, "agent w 127.0.0.1 1 5\n");
    s.selected = "w";
    applyAgentsDoc(s, "agent ams 127.0.0.1 1 5\n");
    expect(s.selected).toBeNull();
  });
});

describe("event stream reconnect", () => {
  function fakeWs(): WsLike & { closedByUs: boolean } {
    return {
      onopen: null, onmessage: null, onclose: null, onerror: null,
      closedByUs: false,
      close() { this.closedByUs = true; },
    };
  }

  it("reconnects after a drop and reports each phase", () => {
    vi.useFakeTimers();
    const made: Array<ReturnType<typeof fakeWs>> = [];
    const frames: string[] = [];
    const phases: string[] = [];
    const stream = new EventStream(
      "ws://gw/events",
      (f) => frames.push(f),
      (s) => phases.push(s),
      () => { const ws = fakeWs(); made.push(ws); return ws; });

    stream.start();
    made[0]!.onopen!();
    made[0]!.onmessage!({ data: "Event: bench\n\nhello" });
    made[0]!.onclose!();                   // server went away
    expect(made.length).toBe(1);
    vi.advanceTimersByTime(1000);          // backoff elapses
    expect(made.length).toBe(2);
    made[1]!.onopen!();

    expect(frames).toEqual(["Event: bench\n\nhello"]);
    expect(phases).toEqual(
      ["connecting", "live", "dropped", "connecting", "live"]);

    stream.close();
    made[1]!.onclose!();                   // no further reconnect
    vi.advanceTimersByTime(60000);
    expect(made.length).toBe(2);
    vi.useRealTimers();
  });
});
