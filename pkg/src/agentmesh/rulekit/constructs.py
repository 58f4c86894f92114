"""Parsed constructs of the rule language: templates, rules, deffacts.

These are plain data produced by the parser and consumed by the engine;
they never reference a live engine.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .values import Symbol, Value, render_value

# comparison operators usable in slot tests
TEST_OPS = ("=", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class Template:
    name: str
    slots: tuple[str, ...]

    def slot_index(self, slot: str) -> int:
        try:
            return self.slots.index(slot)
        except ValueError:
            raise KeyError(slot) from None

    def render(self) -> str:
        slots = " ".join(f"(slot {s})" for s in self.slots)
        return f"(deftemplate {self.name} {slots})" if slots else f"(deftemplate {self.name})"


# ---------------------------------------------------------------------------
# patterns

@dataclass(frozen=True)
class Constraint:
    """One slot constraint inside a pattern.

    kind: 'lit' | 'var' | 'wild' | 'test'
    For 'test', `op` is one of TEST_OPS and the operand is either a
    literal value (`operand_var is None`) or a variable name.
    """
    kind: str
    value: Value | None = None
    var: str | None = None
    op: str | None = None
    operand_var: str | None = None

    def render(self) -> str:
        if self.kind == "lit":
            return render_value(self.value)
        if self.kind == "var":
            return f"?{self.var}"
        if self.kind == "wild":
            return "?"
        operand = f"?{self.operand_var}" if self.operand_var else render_value(self.value)
        return f"({self.op} {operand})"


@dataclass(frozen=True)
class Pattern:
    template: str
    constraints: tuple[tuple[str, Constraint], ...]  # (slot-name, constraint)
    addr_var: str | None = None  # bound via  ?f <- (pattern ...)

    def render(self) -> str:
        inner = " ".join(f"({slot} {c.render()})" for slot, c in self.constraints)
        body = f"({self.template} {inner})" if inner else f"({self.template})"
        return f"?{self.addr_var} <- {body}" if self.addr_var else body


# ---------------------------------------------------------------------------
# action expressions

@dataclass(frozen=True)
class Expr:
    """Literal, variable reference, or arithmetic node (+ - * /)."""
    kind: str  # 'lit' | 'var' | 'arith'
    value: Value | None = None
    var: str | None = None
    op: str | None = None
    args: tuple["Expr", ...] = ()

    def render(self) -> str:
        if self.kind == "lit":
            return render_value(self.value)
        if self.kind == "var":
            return f"?{self.var}"
        return "(" + self.op + "".join(" " + a.render() for a in self.args) + ")"


@dataclass(frozen=True)
class AssertAction:
    template: str
    slots: tuple[tuple[str, Expr], ...]

    def render(self) -> str:
        inner = " ".join(f"({slot} {e.render()})" for slot, e in self.slots)
        body = f"({self.template} {inner})" if inner else f"({self.template})"
        return f"(assert {body})"


@dataclass(frozen=True)
class RetractAction:
    var: str

    def render(self) -> str:
        return f"(retract ?{self.var})"


@dataclass(frozen=True)
class BindAction:
    var: str
    expr: Expr

    def render(self) -> str:
        return f"(bind ?{self.var} {self.expr.render()})"


@dataclass(frozen=True)
class PrintoutAction:
    # parts: raw strings, Exprs, or the newline marker Symbol('crlf')
    parts: tuple[object, ...]

    def render(self) -> str:
        rendered = []
        for p in self.parts:
            if isinstance(p, Expr):
                rendered.append(p.render())
            elif isinstance(p, Symbol):
                rendered.append(p.name)
            else:
                rendered.append(render_value(p))
        return "(printout t " + " ".join(rendered) + ")"


@dataclass(frozen=True)
class HaltAction:
    def render(self) -> str:
        return "(halt)"


@dataclass(frozen=True)
class SetResultAction:
    status: Symbol

    def render(self) -> str:
        return f"(set-result {self.status.name})"


Action = AssertAction | RetractAction | BindAction | PrintoutAction | HaltAction | SetResultAction


@dataclass(frozen=True)
class Rule:
    name: str
    salience: int
    patterns: tuple[Pattern, ...]
    actions: tuple[Action, ...]

    def render(self) -> str:
        parts = [f"(defrule {self.name}"]
        if self.salience:
            parts.append(f"  (declare (salience {self.salience}))")
        for p in self.patterns:
            parts.append("  " + p.render())
        parts.append("  =>")
        for a in self.actions:
            parts.append("  " + a.render())
        return "\n".join(parts) + ")"


@dataclass(frozen=True)
class FactSpec:
    """A literal fact as it appears in deffacts / fact files."""
    template: str
    slots: tuple[tuple[str, Value], ...]

    @classmethod
    def from_values(cls, template: Template, values: tuple) -> "FactSpec":
        return cls(template.name, tuple(zip(template.slots, values)))

    def render(self) -> str:
        inner = " ".join(f"({slot} {render_value(v)})" for slot, v in self.slots)
        return f"({self.template} {inner})" if inner else f"({self.template})"

    def render_compact(self) -> str:
        """Space-lean form used for fact batches shipped inside messages."""
        inner = "".join(f"({slot} {render_value(v)})" for slot, v in self.slots)
        return f"({self.template}{inner})"


@dataclass(frozen=True)
class Deffacts:
    name: str
    facts: tuple[FactSpec, ...]

    def render(self) -> str:
        body = "".join("\n  " + f.render() for f in self.facts)
        return f"(deffacts {self.name}{body})"


@dataclass
class Program:
    """Constructs of one source text, in source order."""
    templates: list[Template] = field(default_factory=list)
    rules: list[Rule] = field(default_factory=list)
    deffacts: list[Deffacts] = field(default_factory=list)
    ordered: list[object] = field(default_factory=list)

    def add(self, construct) -> None:
        self.ordered.append(construct)
        if isinstance(construct, Template):
            self.templates.append(construct)
        elif isinstance(construct, Rule):
            self.rules.append(construct)
        elif isinstance(construct, Deffacts):
            self.deffacts.append(construct)
        else:
            raise TypeError(type(construct).__name__)

    def render(self) -> str:
        return "\n".join(c.render() for c in self.ordered) + ("\n" if self.ordered else "")
