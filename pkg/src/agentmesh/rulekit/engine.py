"""Forward-chaining engine: fact store, agenda, firing loop.

One Engine instance is single-threaded by design; the owning worker
thread is the only caller. Matching is delegated to the kernel backend
(pure or compiled, chosen at import).

Behavioural notes that tests rely on:

* Duplicate facts (same template, same slot values) are not asserted
  twice; the second assert is a no-op reporting the existing fact.
* Refraction: an activation (rule, fact tuple) fires at most once until
  reset, even if the agenda is rebuilt.
* Retraction drops pending activations that mention the retracted fact.
* run() raises RuleRuntimeError on a right-hand-side failure (division
  by zero, retracting a dead fact); the engine stays usable and the
  count of completed firings is preserved on the exception.
"""

from __future__ import annotations

import heapq
import struct
from collections import deque

from . import kernel
from .constructs import (AssertAction, BindAction, Deffacts, Expr, FactSpec,
                         HaltAction, PrintoutAction, Program, RetractAction,
                         Rule, SetResultAction, Template)
from .kernel import CompiledRule, CompileError
from .parser import (Node, ParseError, _build_construct, _build_fact_slots,
                     _head, read_forms)
from .values import NIL, Symbol, Value, is_numeric, render_value

DUMP_MAGIC = b"RKDUMP01"
WATCH_NAMES = ("facts", "rules", "activations")
STRATEGIES = ("depth", "breadth")
TRACE_CAP = 10000


class EngineError(Exception):
    pass


class RuleRuntimeError(EngineError):
    """A rule right-hand side failed mid-run."""

    def __init__(self, message: str, rule: str = "", fired: int = 0):
        super().__init__(message)
        self.rule = rule
        self.fired = fired


class _Activation:
    __slots__ = ("rule_name", "salience", "fids", "binds", "recency", "dead")

    def __init__(self, rule_name, salience, fids, binds):
        self.rule_name = rule_name
        self.salience = salience
        self.fids = fids
        self.binds = binds
        self.recency = max(fids) if fids else 0
        self.dead = False

    def label(self) -> str:
        facts = ",".join(f"f-{i}" for i in self.fids)
        return f"{self.salience} {self.rule_name}: {facts}" if facts else \
            f"{self.salience} {self.rule_name}:"


class Engine:
    def __init__(self, strategy: str = "depth"):
        self.templates: dict[str, Template] = {}
        self.rules: dict[str, Rule] = {}
        self.compiled: dict[str, CompiledRule] = {}
        self.deffacts: dict[str, Deffacts] = {}
        self._order: list[tuple[str, str]] = []  # (kind, name) definition order
        self.store: dict[str, dict[int, tuple]] = {}
        self.fact_by_id: dict[int, tuple[str, tuple]] = {}
        self._dup: dict[tuple[str, tuple], int] = {}
        self._next_fid = 1
        self._heap: list = []
        self._by_fid: dict[int, list[_Activation]] = {}
        self._fired: set[tuple[str, tuple]] = set()
        self.strategy = strategy if strategy in STRATEGIES else "depth"
        self.watches: set[str] = set()
        self._trace: deque[str] = deque(maxlen=TRACE_CAP)
        self._output: list[str] = []
        self.result: Symbol = NIL
        self.cursor: int | None = None
        self.input_buffer = ""
        self._halted = False

    # -- tracing ------------------------------------------------------------

    def _t(self, line: str):
        self._trace.append(line)

    def take_trace(self) -> list[str]:
        lines = list(self._trace)
        self._trace.clear()
        return lines

    def take_output(self) -> str:
        text = "".join(self._output)
        self._output.clear()
        return text

    def watch(self, name: str):
        if name == "all":
            self.watches.update(WATCH_NAMES)
        elif name in WATCH_NAMES:
            self.watches.add(name)
        else:
            raise EngineError(f"unknown watch item {name!r}")

    def unwatch(self, name: str):
        if name == "all":
            self.watches.clear()
        elif name in WATCH_NAMES:
            self.watches.discard(name)
        else:
            raise EngineError(f"unknown watch item {name!r}")

    # -- construct installation --------------------------------------------

    def install_template(self, template: Template):
        old = self.templates.get(template.name)
        if old is not None:
            # identical re-install happens when a rule file is loaded over
            # a live engine; only a changed shape is an error
            if old.slots == template.slots:
                return
            raise EngineError(
                f"template {template.name!r} already defined with different slots")
        self.templates[template.name] = template
        self._order.append(("template", template.name))

    def install_rule(self, rule: Rule):
        if rule.name in self.rules:
            raise EngineError(f"rule {rule.name!r} already defined")
        try:
            crule = kernel.compile_rule(rule, self.templates)
        except CompileError as exc:
            raise EngineError(str(exc)) from None
        self._check_actions(rule, crule)
        self.rules[rule.name] = rule
        self.compiled[rule.name] = crule
        self._order.append(("rule", rule.name))
        self._schedule_matches(crule, kernel.match_all(crule, self.store))

    def install_deffacts(self, df: Deffacts):
        if df.name in self.deffacts:
            raise EngineError(f"deffacts {df.name!r} already defined")
        for spec in df.facts:
            self._check_fact_spec(spec)
        self.deffacts[df.name] = df
        self._order.append(("deffacts", df.name))

    def install_program(self, program: Program):
        for construct in program.ordered:
            if isinstance(construct, Template):
                self.install_template(construct)
            elif isinstance(construct, Rule):
                self.install_rule(construct)
            else:
                self.install_deffacts(construct)

    def _check_fact_spec(self, spec: FactSpec):
        tmpl = self.templates.get(spec.template)
        if tmpl is None:
            raise EngineError(f"unknown template {spec.template!r}")
        for slot, value in spec.slots:
            try:
                tmpl.slot_index(slot)
            except KeyError:
                raise EngineError(
                    f"template {spec.template!r} has no slot {slot!r}") from None
            _check_value(value)

    def _check_actions(self, rule: Rule, crule: CompiledRule):
        bound = set(crule.var_names) | {n for _, n in crule.addr_vars}
        addr = {n for _, n in crule.addr_vars}
        for act in rule.actions:
            if isinstance(act, AssertAction):
                tmpl = self.templates.get(act.template)
                if tmpl is None:
                    raise EngineError(
                        f"rule {rule.name!r} asserts unknown template "
                        f"{act.template!r}")
                for slot, expr in act.slots:
                    try:
                        tmpl.slot_index(slot)
                    except KeyError:
                        raise EngineError(
                            f"rule {rule.name!r}: template {act.template!r} "
                            f"has no slot {slot!r}") from None
                    _check_expr_vars(rule.name, expr, bound)
            elif isinstance(act, RetractAction):
                if act.var not in addr:
                    raise EngineError(
                        f"rule {rule.name!r} retracts ?{act.var}, which is "
                        f"not a fact address")
            elif isinstance(act, BindAction):
                _check_expr_vars(rule.name, act.expr, bound)
                bound.add(act.var)
            elif isinstance(act, PrintoutAction):
                for part in act.parts:
                    if isinstance(part, Expr):
                        _check_expr_vars(rule.name, part, bound)

    # -- facts --------------------------------------------------------------

    def assert_spec(self, spec: FactSpec) -> int | None:
        tmpl = self.templates.get(spec.template)
        if tmpl is None:
            raise EngineError(f"unknown template {spec.template!r}")
        values = [NIL] * len(tmpl.slots)
        for slot, value in spec.slots:
            try:
                si = tmpl.slot_index(slot)
            except KeyError:
                raise EngineError(
                    f"template {spec.template!r} has no slot {slot!r}") from None
            _check_value(value)
            values[si] = value
        return self._assert(spec.template, tuple(values))

    def assert_values(self, template: str, slots: dict[str, Value]) -> int | None:
        return self.assert_spec(FactSpec(template, tuple(slots.items())))

    def _assert(self, template: str, values: tuple) -> int | None:
        key = (template, values)
        if key in self._dup:
            return None
        fid = self._next_fid
        self._next_fid += 1
        self.store.setdefault(template, {})[fid] = values
        self.fact_by_id[fid] = (template, values)
        self._dup[key] = fid
        if "facts" in self.watches:
            self._t(f"==> f-{fid} {self._render_fact(fid)}")
        for crule in self.compiled.values():
            for pos, (ptemplate, _checks) in enumerate(crule.patterns):
                if ptemplate != template:
                    continue
                matches = kernel.match_with_pinned(
                    crule, self.store, pos, fid, values)
                self._schedule_matches(crule, matches)
        return fid

    def retract(self, fid: int):
        info = self.fact_by_id.pop(fid, None)
        if info is None:
            raise EngineError(f"fact f-{fid} does not exist")
        template, values = info
        del self.store[template][fid]
        del self._dup[(template, values)]
        if "facts" in self.watches:
            self._t(f"<== f-{fid} {FactSpec.from_values(self.templates[template], values).render()}")
        for act in self._by_fid.pop(fid, ()):
            if not act.dead:
                act.dead = True
                if "activations" in self.watches:
                    self._t(f"<== Activation {act.label()}")

    def _render_fact(self, fid: int) -> str:
        template, values = self.fact_by_id[fid]
        return FactSpec.from_values(self.templates[template], values).render()

    def fact_count(self) -> int:
        return len(self.fact_by_id)

    def facts_lines(self) -> list[str]:
        return [f"f-{fid} {self._render_fact(fid)}"
                for fid in sorted(self.fact_by_id)]

    def fact_slot(self, fid: int, slot: str) -> Value:
        info = self.fact_by_id.get(fid)
        if info is None:
            raise EngineError(f"fact f-{fid} does not exist")
        template, values = info
        try:
            si = self.templates[template].slot_index(slot)
        except KeyError:
            raise EngineError(
                f"template {template!r} has no slot {slot!r}") from None
        return values[si]

    def set_cursor(self, fid: int):
        if fid not in self.fact_by_id:
            raise EngineError(f"fact f-{fid} does not exist")
        self.cursor = fid

    # -- agenda -------------------------------------------------------------
    # Order: salience desc, then fact recency (newest matched fact first
    # under depth, oldest first under breadth), then rule name, then the
    # fact-id tuple as a final total-order tiebreak.

    def _key(self, act: _Activation):
        if self.strategy == "depth":
            return (-act.salience, -act.recency, act.rule_name,
                    tuple(-f for f in act.fids))
        return (-act.salience, act.recency, act.rule_name, act.fids)

    def _schedule_matches(self, crule: CompiledRule, matches: list):
        for fids, binds in matches:
            if (crule.name, fids) in self._fired:
                continue
            act = _Activation(crule.name, crule.salience, fids, binds)
            heapq.heappush(self._heap, (self._key(act), act))
            for fid in fids:
                self._by_fid.setdefault(fid, []).append(act)
            if "activations" in self.watches:
                self._t(f"==> Activation {act.label()}")

    def _pop(self) -> _Activation | None:
        while self._heap:
            _key, act = heapq.heappop(self._heap)
            if act.dead:
                continue
            if any(fid not in self.fact_by_id for fid in act.fids):
                act.dead = True
                continue
            act.dead = True  # leaving the agenda either way
            return act
        return None

    def set_strategy(self, name: str):
        if name not in STRATEGIES:
            raise EngineError(f"unknown strategy {name!r}")
        if name == self.strategy:
            return
        self.strategy = name
        live = [act for _k, act in self._heap if not act.dead]
        self._heap = [(self._key(a), a) for a in live]
        heapq.heapify(self._heap)

    def agenda_lines(self) -> list[str]:
        live = [(k, a) for k, a in self._heap
                if not a.dead and all(f in self.fact_by_id for f in a.fids)]
        live.sort(key=lambda e: e[0])
        return [a.label() for _k, a in live]

    def agenda_size(self) -> int:
        return len(self.agenda_lines())

    # -- firing -------------------------------------------------------------

    def run(self, limit: int | None = None) -> int:
        fired = 0
        self._halted = False
        while limit is None or fired < limit:
            act = self._pop()
            if act is None:
                break
            self._fired.add((act.rule_name, act.fids))
            fired += 1
            if "rules" in self.watches:
                facts = ",".join(f"f-{i}" for i in act.fids)
                self._t(f"FIRE {fired} {act.rule_name}: {facts}")
            try:
                self._fire(act)
            except RuleRuntimeError as exc:
                exc.fired = fired - 1
                exc.rule = act.rule_name
                self._t(f"ERROR {act.rule_name}: {exc}")
                raise
            if self._halted:
                break
        return fired

    def _fire(self, act: _Activation):
        crule = self.compiled[act.rule_name]
        rule = self.rules[act.rule_name]
        env: dict[str, Value | int] = dict(zip(crule.var_names, act.binds))
        for pos, name in crule.addr_vars:
            env[name] = act.fids[pos]
        for action in rule.actions:
            if isinstance(action, AssertAction):
                spec = FactSpec(action.template, tuple(
                    (slot, _eval(expr, env)) for slot, expr in action.slots))
                self.assert_spec(spec)
            elif isinstance(action, RetractAction):
                fid = env[action.var]
                if not isinstance(fid, int) or fid not in self.fact_by_id:
                    raise RuleRuntimeError(
                        f"cannot retract f-{fid}: fact does not exist")
                self.retract(fid)
            elif isinstance(action, BindAction):
                env[action.var] = _eval(action.expr, env)
            elif isinstance(action, PrintoutAction):
                self._output.append(_format_printout(action.parts, env))
            elif isinstance(action, HaltAction):
                self._halted = True
            elif isinstance(action, SetResultAction):
                self.result = action.status

    # -- lifecycle ----------------------------------------------------------

    def reset(self):
        self.store.clear()
        self.fact_by_id.clear()
        self._dup.clear()
        self._heap.clear()
        self._by_fid.clear()
        self._fired.clear()
        self._next_fid = 1
        self.result = NIL
        self.cursor = None
        self._halted = False
        for crule in self.compiled.values():
            if not crule.patterns:
                self._schedule_matches(crule, kernel.match_all(crule, self.store))
        for kind, name in self._order:
            if kind == "deffacts":
                for spec in self.deffacts[name].facts:
                    self.assert_spec(spec)

    def clear_all(self):
        self.__init__(strategy="depth")

    # -- source loading and dumps ------------------------------------------

    def load_source(self, text: str) -> int:
        """Install constructs / assert facts from source text.

        Accepts deftemplate, defrule, deffacts and bare (assert ...)
        forms, in order. Returns the number of forms applied.
        """
        try:
            forms = read_forms(text)
        except ParseError as exc:
            raise EngineError(str(exc)) from None
        count = 0
        for form in forms:
            self._apply_form(form)
            count += 1
        return count

    def _apply_form(self, form):
        if not isinstance(form, Node):
            raise EngineError("expected a construct or assert form")
        head = _head(form)
        try:
            if head == "assert":
                if len(form.items) != 2 or not isinstance(form.items[1], Node):
                    raise EngineError("assert takes one fact form")
                template, slots = _build_fact_slots(form.items[1], exprs=False)
                self.assert_spec(FactSpec(template, slots))
                return
            construct = _build_construct(form)
        except ParseError as exc:
            raise EngineError(str(exc)) from None
        if isinstance(construct, Template):
            self.install_template(construct)
        elif isinstance(construct, Rule):
            self.install_rule(construct)
        else:
            self.install_deffacts(construct)

    def dump_text(self) -> str:
        parts = []
        for kind, name in self._order:
            if kind == "template":
                parts.append(self.templates[name].render())
            elif kind == "rule":
                parts.append(self.rules[name].render())
            else:
                parts.append(self.deffacts[name].render())
        for fid in sorted(self.fact_by_id):
            parts.append(f"(assert {self._render_fact(fid)})")
        return "\n".join(parts) + "\n"

    def dump_framed(self) -> bytes:
        payload = self.dump_text().encode("utf-8")
        return DUMP_MAGIC + struct.pack(">I", len(payload)) + payload

    def load_framed(self, blob: bytes) -> int:
        if len(blob) < len(DUMP_MAGIC) + 4 or not blob.startswith(DUMP_MAGIC):
            raise EngineError("not a framed engine dump")
        (length,) = struct.unpack_from(">I", blob, len(DUMP_MAGIC))
        start = len(DUMP_MAGIC) + 4
        payload = blob[start:start + length]
        if len(payload) != length:
            raise EngineError("framed dump is truncated")
        return self.load_source(payload.decode("utf-8"))

    def rule_names(self) -> list[str]:
        return [name for kind, name in self._order if kind == "rule"]


# ---------------------------------------------------------------------------
# right-hand-side evaluation

def _check_value(value):
    if isinstance(value, bool) or not isinstance(value, (Symbol, str, int, float)):
        raise EngineError(f"bad slot value {value!r}")


def _check_expr_vars(rule: str, expr: Expr, bound: set[str]):
    if expr.kind == "var":
        if expr.var not in bound:
            raise EngineError(
                f"rule {rule!r} uses ?{expr.var} before it is bound")
    elif expr.kind == "arith":
        for a in expr.args:
            _check_expr_vars(rule, a, bound)


def _eval(expr: Expr, env: dict) -> Value:
    if expr.kind == "lit":
        return expr.value
    if expr.kind == "var":
        try:
            return env[expr.var]
        except KeyError:
            raise RuleRuntimeError(f"variable ?{expr.var} is unbound") from None
    values = [_eval(a, env) for a in expr.args]
    for v in values:
        if not is_numeric(v):
            raise RuleRuntimeError(
                f"non-numeric operand {render_value(v)} for ({expr.op} ...)")
    acc = values[0]
    for v in values[1:]:
        if expr.op == "+":
            acc = acc + v
        elif expr.op == "-":
            acc = acc - v
        elif expr.op == "*":
            acc = acc * v
        else:
            try:
                acc = acc / v
            except ZeroDivisionError:
                raise RuleRuntimeError("division by zero") from None
    return acc


def _format_printout(parts, env) -> str:
    out = []
    for part in parts:
        if isinstance(part, Symbol) and part.name == "crlf":
            out.append("\n")
            continue
        value = _eval(part, env)
        if isinstance(value, str):
            out.append(value)
        elif isinstance(value, Symbol):
            out.append(value.name)
        elif isinstance(value, float):
            out.append(repr(value))
        else:
            out.append(str(value))
    return "".join(out)
