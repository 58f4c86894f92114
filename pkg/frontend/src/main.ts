/**
 * DOM wiring for the operator console. One event-stream connection
 * drives all live updates; HTTP is only used for snapshots and for
 * dispatching commands. Everything renders from ConsoleState.
 */

import { GatewayClient, EventStream } from "./gateway.js";
import { TICKET_FIELDS, Ticket } from "./protocol.js";
import {
  ConsoleState, applyAgentsDoc, applyEvent, applyTicketsDoc, newState,
  recordSend, sortedTickets,
} from "./state.js";
import {
  EMPTY_TICKETS, agentCells, stateBadge, ticketCells, transcriptLine,
} from "./render.js";

// Engine actions the gateway accepts (arity 0 or 1); wider ones need
// the programmatic API.
const SHELL_ACTIONS = [
  "EVAL_COMMAND", "MAKE_ASSERT_STRING", "MAKE_BUILD", "MAKE_RESET",
  "MAKE_CLEAR", "RUN_INFINITY", "RUN_NUMBER_OF_CYCLES",
  "RUN_ONCE_THEN_BATCH", "RUN_INNER_SHELL", "LOAD_FILE", "LOAD_FACTS",
  "LOAD_FROM_RESOURCE", "LOAD_FROM_STRING", "LOAD_ASSERT_STRING",
  "LOAD_BLOAD", "LOAD_SLOAD", "APPEND_INPUT_BUFFER",
  "SET_INPUT_BUFFER_COUNT", "SET_WATCH", "SET_UNWATCH", "FACT_INDEX",
];

const RUNLEVELS: Array<[string, number]> = [
  ["n-1", 1], ["n-3", 3], ["n-5", 5], ["n-6!", 6],
];

// Served same-origin behind the gateway, or from any static server
// with ?gateway=http://host:port pointing at it.
function gatewayBase(): string {
  const base = new URLSearchParams(location.search).get("gateway");
  return base ? base.replace(/\/+$/, "") : "";
}

const state: ConsoleState = newState();
const client = new GatewayClient(gatewayBase());

let sortKey: keyof Ticket = "tid";
let sortAsc = true;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function text(tag: string, value: string, cls?: string): HTMLElement {
  const node = document.createElement(tag);
  node.textContent = value;
  if (cls) node.className = cls;
  return node;
}

// -- agents table -----------------------------------------------------------

function renderAgents(): void {
  const body = el<HTMLTableSectionElement>("agents-body");
  body.replaceChildren();
  for (const agent of state.agents) {
    const tr = document.createElement("tr");
    for (const cell of agentCells(agent)) tr.appendChild(text("td", cell));
    const controls = document.createElement("td");
    for (const [label, level] of RUNLEVELS) {
      const btn = text("button", label) as HTMLButtonElement;
      btn.onclick = () => setRunlevel(agent.name, level);
      controls.appendChild(btn);
    }
    tr.appendChild(controls);
    body.appendChild(tr);
  }
}

async function setRunlevel(name: string, level: number): Promise<void> {
  const reply = await client.setRunlevel(name, level);
  state.notice = reply.status === 200
    ? "" : `${name}: ${reply.text.trim()} (${reply.status})`;
  await refreshAgents();   // the badge comes from the directory, not from us
  render();
}

async function refreshAgents(): Promise<void> {
  const reply = await client.agents();
  if (reply.status === 200) applyAgentsDoc(state, reply.text);
}

async function refreshTickets(): Promise<void> {
  const reply = await client.tickets();
  // 404 means no board in the deployment; show the empty state
  applyTicketsDoc(state, reply.status === 200 ? reply.text : "");
}

// -- ticket table -----------------------------------------------------------

function renderTickets(): void {
  const body = el<HTMLTableSectionElement>("tickets-body");
  const empty = el<HTMLElement>("tickets-empty");
  body.replaceChildren();
  empty.textContent = state.tickets.length === 0 ? EMPTY_TICKETS : "";
  for (const t of sortedTickets(state, sortKey, sortAsc)) {
    const tr = document.createElement("tr");
    tr.className = stateBadge(t);
    for (const cell of ticketCells(t)) tr.appendChild(text("td", cell));
    body.appendChild(tr);
  }
}

function buildTicketHead(): void {
  const row = el<HTMLTableRowElement>("tickets-head");
  row.replaceChildren();
  for (const field of TICKET_FIELDS) {
    const th = text("th", field);
    th.onclick = () => {
      sortAsc = sortKey === field ? !sortAsc : true;
      sortKey = field;
      renderTickets();
    };
    row.appendChild(th);
  }
}

// -- shell panel ------------------------------------------------------------

function renderTargets(): void {
  const select = el<HTMLSelectElement>("shell-target");
  const current = select.value;
  select.replaceChildren();
  for (const agent of state.agents) {
    select.appendChild(text("option", agent.name));
  }
  if ([...select.options].some((o) => o.value === current)) {
    select.value = current;
  }
}

function renderTranscript(): void {
  const box = el<HTMLElement>("transcript");
  box.replaceChildren();
  for (const entry of state.transcript) {
    const line = transcriptLine(entry);
    const div = document.createElement("div");
    div.className = `entry ${line.cls}`;
    div.appendChild(text("div", line.head, "head"));
    div.appendChild(text("pre", line.body, "body"));
    box.appendChild(div);
  }
  box.scrollTop = box.scrollHeight;
}

async function execute(): Promise<void> {
  const target = el<HTMLSelectElement>("shell-target").value;
  const action = el<HTMLSelectElement>("shell-action").value;
  const session = el<HTMLInputElement>("shell-session").value.trim();
  const command = el<HTMLTextAreaElement>("shell-command").value;
  if (!target) {
    state.notice = "no target selected";
    render();
    return;
  }
  const reply = await client.shell(target, command, action, session);
  if (reply.status === 200 && reply.cid) {
    recordSend(state, reply.cid, target, command.trim() || action);
    state.notice = "";
  } else {
    state.notice = `${reply.text.trim()} (${reply.status})`;
  }
  render();   // the command box stays enabled; responses arrive by event
}

// -- wiring -----------------------------------------------------------------

function render(): void {
  el<HTMLElement>("connection").textContent = state.connection;
  el<HTMLElement>("connection").className = state.connection;
  el<HTMLElement>("notice").textContent = state.notice;
  renderAgents();
  renderTargets();
  renderTickets();
  renderTranscript();
  const bench = el<HTMLElement>("bench");
  bench.textContent = state.benchLines.slice(-5).join("\n");
}

function wsUrl(): string {
  const base = gatewayBase();
  if (base) return base.replace(/^http/, "ws") + "/events";
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${location.host}/events`;
}

export function boot(): void {
  buildTicketHead();
  const actions = el<HTMLSelectElement>("shell-action");
  for (const code of SHELL_ACTIONS) actions.appendChild(text("option", code));

  el<HTMLButtonElement>("shell-exec").onclick = () => { void execute(); };
  el<HTMLTextAreaElement>("shell-command").addEventListener(
    "keydown", (ev) => {
      if (ev.key === "Enter" && ev.ctrlKey && ev.shiftKey) {
        ev.preventDefault();
        void execute();
      }
    });

  const stream = new EventStream(
    wsUrl(),
    (frame) => {
      applyEvent(state, frame);
      render();
    },
    (status) => {
      state.connection = status;
      if (status === "live") {
        // a drop may have eaten events; resync both snapshots
        void refreshAgents().then(refreshTickets).then(render);
      }
      render();
    });
  stream.start();
  void refreshAgents().then(refreshTickets).then(render);
}

boot();
