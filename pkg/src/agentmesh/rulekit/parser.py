"""Reader for the CLIPS-subset rule language.

Source form: s-expressions, `;` line comments, UTF-8. Constructs:

    (deftemplate <name> (slot <slot>)*)
    (defrule <name> [(declare (salience <int>))] <pattern>* => <action>*)
    (deffacts <name> (<template> (<slot> <value>)*)*)

Patterns support per-slot literals, variables `?x`, the wildcard `?`,
comparison tests `(<op> <literal-or-var>)` with op in = != < <= > >=,
and fact-address binding `?f <- (pattern ...)`.

Actions: assert, retract, bind, printout, halt, set-result. Arithmetic
expressions use (+ - * /), variadic, with nesting.
"""

from __future__ import annotations

from dataclasses import dataclass

from .constructs import (TEST_OPS, AssertAction, BindAction, Constraint,
                         Deffacts, Expr, FactSpec, HaltAction, Pattern,
                         PrintoutAction, Program, RetractAction, Rule,
                         SetResultAction, Template)
from .values import Symbol, Value

ARITH_OPS = ("+", "-", "*", "/")


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0, token: str = ""):
        self.line = line
        self.col = col
        self.token = token
        at = f" at line {line}, column {col}" if line else ""
        tok = f" near {token!r}" if token else ""
        super().__init__(f"{message}{at}{tok}")


@dataclass(frozen=True)
class Tok:
    kind: str  # '(' ')' 'atom' 'string' 'var'
    value: object
    line: int
    col: int
    text: str


def tokenize(text: str) -> list[Tok]:
    toks: list[Tok] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch in "()":
            toks.append(Tok(ch, ch, line, col, ch))
            i += 1
            col += 1
            continue
        if ch == '"':
            start_line, start_col = line, col
            i += 1
            col += 1
            buf = []
            while True:
                if i >= n:
                    raise ParseError("unterminated string", start_line, start_col)
                c = text[i]
                if c == '"':
                    i += 1
                    col += 1
                    break
                if c == "\\":
                    if i + 1 >= n:
                        raise ParseError("unterminated string escape", line, col)
                    esc = text[i + 1]
                    buf.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc, esc))
                    i += 2
                    col += 2
                    continue
                if c == "\n":
                    line += 1
                    col = 1
                else:
                    col += 1
                buf.append(c)
                i += 1
            s = "".join(buf)
            toks.append(Tok("string", s, start_line, start_col, f'"{s}"'))
            continue
        # bare token up to whitespace / paren / quote / comment
        start = i
        start_col = col
        while i < n and text[i] not in ' \t\r\n();"':
            i += 1
            col += 1
        word = text[start:i]
        if word.startswith("?"):
            toks.append(Tok("var", word[1:], line, start_col, word))
        else:
            toks.append(Tok("atom", _atom(word), line, start_col, word))
    return toks


def _atom(word: str) -> Value:
    try:
        return int(word)
    except ValueError:
        pass
    try:
        f = float(word)
    except ValueError:
        return Symbol(word)
    # 'inf'/'nan' spellings stay symbols; only digit-looking words are numbers
    if any(c.isdigit() for c in word):
        return f
    return Symbol(word)


# ---------------------------------------------------------------------------
# s-expression reader

@dataclass(frozen=True)
class Node:
    """Nested list node; leaves are Toks."""
    items: tuple
    line: int
    col: int


def read_forms(text: str) -> list[Node | Tok]:
    """All top-level forms of `text`."""
    toks = tokenize(text)
    forms: list[Node | Tok] = []
    pos = 0
    while pos < len(toks):
        form, pos = _read(toks, pos)
        forms.append(form)
    return forms


def _read(toks: list[Tok], pos: int):
    t = toks[pos]
    if t.kind == "(":
        items = []
        pos += 1
        while True:
            if pos >= len(toks):
                raise ParseError("unbalanced '('", t.line, t.col)
            if toks[pos].kind == ")":
                return Node(tuple(items), t.line, t.col), pos + 1
            item, pos = _read(toks, pos)
            items.append(item)
    if t.kind == ")":
        raise ParseError("unexpected ')'", t.line, t.col)
    return t, pos + 1


def _is_sym(form, name: str | None = None) -> bool:
    return (isinstance(form, Tok) and form.kind == "atom"
            and isinstance(form.value, Symbol)
            and (name is None or form.value.name == name))


def _head(node: Node) -> str | None:
    if node.items and _is_sym(node.items[0]):
        return node.items[0].value.name
    return None


def _expect_name(form, what: str) -> str:
    if not _is_sym(form):
        raise ParseError(f"expected {what} name",
                         getattr(form, "line", 0), getattr(form, "col", 0),
                         getattr(form, "text", ""))
    return form.value.name


# ---------------------------------------------------------------------------
# construct builders

def parse_program(text: str) -> Program:
    """Parse a full source text into constructs (no engine mutation)."""
    program = Program()
    seen: set[tuple[str, str]] = set()
    for form in read_forms(text):
        construct = _build_construct(form)
        kind = "template" if isinstance(construct, Template) else (
            "rule" if isinstance(construct, Rule) else "deffacts")
        key = (kind, construct.name)
        if key in seen:
            raise ParseError(f"duplicate {kind} name {construct.name!r}",
                             form.line, form.col)
        seen.add(key)
        program.add(construct)
    return program


def _build_construct(form):
    if not isinstance(form, Node):
        raise ParseError("expected a construct form",
                         form.line, form.col, form.text)
    head = _head(form)
    if head == "deftemplate":
        return _build_template(form)
    if head == "defrule":
        return _build_rule(form)
    if head == "deffacts":
        return _build_deffacts(form)
    raise ParseError(f"unknown construct {head!r}", form.line, form.col)


def _build_template(node: Node) -> Template:
    if len(node.items) < 2:
        raise ParseError("deftemplate needs a name", node.line, node.col)
    name = _expect_name(node.items[1], "template")
    slots = []
    for slot_form in node.items[2:]:
        if not (isinstance(slot_form, Node) and _head(slot_form) == "slot"
                and len(slot_form.items) == 2):
            raise ParseError("expected (slot <name>)", getattr(slot_form, "line", node.line),
                             getattr(slot_form, "col", node.col))
        slot = _expect_name(slot_form.items[1], "slot")
        if slot in slots:
            raise ParseError(f"duplicate slot {slot!r} in template {name!r}",
                             slot_form.line, slot_form.col)
        slots.append(slot)
    return Template(name, tuple(slots))


def _build_rule(node: Node) -> Rule:
    if len(node.items) < 2:
        raise ParseError("defrule needs a name", node.line, node.col)
    name = _expect_name(node.items[1], "rule")
    rest = list(node.items[2:])
    salience = 0
    if rest and isinstance(rest[0], Node) and _head(rest[0]) == "declare":
        decl = rest.pop(0)
        for d in decl.items[1:]:
            if (isinstance(d, Node) and _head(d) == "salience"
                    and len(d.items) == 2 and isinstance(d.items[1], Tok)
                    and isinstance(d.items[1].value, int)):
                salience = d.items[1].value
            else:
                raise ParseError("bad declare clause", decl.line, decl.col)
    # split on =>
    arrow = None
    for i, f in enumerate(rest):
        if _is_sym(f, "=>"):
            arrow = i
            break
    if arrow is None:
        raise ParseError(f"rule {name!r} has no =>", node.line, node.col)
    patterns = _build_patterns(rest[:arrow], name)
    actions = tuple(_build_action(f, name) for f in rest[arrow + 1:])
    return Rule(name, salience, patterns, actions)


def _build_patterns(forms: list, rule: str) -> tuple[Pattern, ...]:
    patterns = []
    i = 0
    while i < len(forms):
        f = forms[i]
        addr = None
        if isinstance(f, Tok) and f.kind == "var":
            if f.value == "":
                raise ParseError("wildcard cannot bind a fact address", f.line, f.col)
            if not (i + 2 < len(forms) + 1 and i + 1 < len(forms) and _is_sym(forms[i + 1], "<-")):
                raise ParseError("expected <- after fact-address variable", f.line, f.col)
            if i + 2 >= len(forms):
                raise ParseError("expected pattern after <-", f.line, f.col)
            addr = f.value
            f = forms[i + 2]
            i += 3
        else:
            i += 1
        if not isinstance(f, Node):
            raise ParseError("expected a pattern", f.line, f.col, getattr(f, "text", ""))
        template = _expect_name(f.items[0] if f.items else f, "pattern template")
        constraints = []
        seen_slots = set()
        for sf in f.items[1:]:
            if not (isinstance(sf, Node) and len(sf.items) == 2 and _is_sym(sf.items[0])):
                raise ParseError("expected (slot constraint)", getattr(sf, "line", f.line),
                                 getattr(sf, "col", f.col))
            slot = sf.items[0].value.name
            if slot in seen_slots:
                raise ParseError(f"slot {slot!r} constrained twice", sf.line, sf.col)
            seen_slots.add(slot)
            constraints.append((slot, _build_constraint(sf.items[1])))
        patterns.append(Pattern(template, tuple(constraints), addr))
    return tuple(patterns)


def _build_constraint(form) -> Constraint:
    if isinstance(form, Tok):
        if form.kind == "var":
            return Constraint("wild") if form.value == "" else Constraint("var", var=form.value)
        return Constraint("lit", value=form.value)
    # (op operand)
    if (isinstance(form, Node) and len(form.items) == 2 and _is_sym(form.items[0])
            and form.items[0].value.name in TEST_OPS):
        op = form.items[0].value.name
        operand = form.items[1]
        if isinstance(operand, Tok) and operand.kind == "var":
            if operand.value == "":
                raise ParseError("test operand cannot be the wildcard",
                                 operand.line, operand.col)
            return Constraint("test", op=op, operand_var=operand.value)
        if isinstance(operand, Tok):
            return Constraint("test", op=op, value=operand.value)
    raise ParseError("bad slot constraint", getattr(form, "line", 0), getattr(form, "col", 0))


def _build_expr(form) -> Expr:
    if isinstance(form, Tok):
        if form.kind == "var":
            if form.value == "":
                raise ParseError("wildcard is not an expression", form.line, form.col)
            return Expr("var", var=form.value)
        return Expr("lit", value=form.value)
    if isinstance(form, Node) and form.items and _is_sym(form.items[0]) \
            and form.items[0].value.name in ARITH_OPS:
        op = form.items[0].value.name
        args = tuple(_build_expr(a) for a in form.items[1:])
        if len(args) < 2:
            raise ParseError(f"({op} ...) needs at least two operands", form.line, form.col)
        return Expr("arith", op=op, args=args)
    raise ParseError("bad expression", getattr(form, "line", 0), getattr(form, "col", 0))


def _build_action(form, rule: str):
    if not isinstance(form, Node) or not form.items or not _is_sym(form.items[0]):
        raise ParseError("expected an action form", getattr(form, "line", 0),
                         getattr(form, "col", 0))
    head = form.items[0].value.name
    if head == "assert":
        if len(form.items) != 2 or not isinstance(form.items[1], Node):
            raise ParseError("assert takes one fact form", form.line, form.col)
        template, slots = _build_fact_slots(form.items[1], exprs=True)
        return AssertAction(template, slots)
    if head == "retract":
        if len(form.items) != 2 or not (isinstance(form.items[1], Tok)
                                        and form.items[1].kind == "var"
                                        and form.items[1].value):
            raise ParseError("retract takes a fact-address variable", form.line, form.col)
        return RetractAction(form.items[1].value)
    if head == "bind":
        if len(form.items) != 3 or not (isinstance(form.items[1], Tok)
                                        and form.items[1].kind == "var"
                                        and form.items[1].value):
            raise ParseError("bind takes a variable and an expression", form.line, form.col)
        return BindAction(form.items[1].value, _build_expr(form.items[2]))
    if head == "printout":
        parts = []
        for p in form.items[1:]:
            if _is_sym(p, "t"):
                continue  # destination marker
            if _is_sym(p, "crlf"):
                parts.append(Symbol("crlf"))
            elif isinstance(p, Tok) and p.kind == "string":
                parts.append(Expr("lit", value=p.value))
            else:
                parts.append(_build_expr(p))
        return PrintoutAction(tuple(parts))
    if head == "halt":
        if len(form.items) != 1:
            raise ParseError("halt takes no arguments", form.line, form.col)
        return HaltAction()
    if head == "set-result":
        if len(form.items) != 2 or not _is_sym(form.items[1]):
            raise ParseError("set-result takes a status symbol", form.line, form.col)
        return SetResultAction(form.items[1].value)
    raise ParseError(f"unknown action {head!r}", form.line, form.col)


def _build_fact_slots(node: Node, exprs: bool):
    """(template (slot v)...) -> (template, ((slot, Expr|Value), ...))."""
    template = _expect_name(node.items[0] if node.items else node, "fact template")
    slots = []
    for sf in node.items[1:]:
        if not (isinstance(sf, Node) and len(sf.items) == 2 and _is_sym(sf.items[0])):
            raise ParseError("expected (slot value)", getattr(sf, "line", node.line),
                             getattr(sf, "col", node.col))
        slot = sf.items[0].value.name
        if exprs:
            slots.append((slot, _build_expr(sf.items[1])))
        else:
            vf = sf.items[1]
            if not isinstance(vf, Tok) or vf.kind == "var":
                raise ParseError("fact slots take literal values only",
                                 getattr(vf, "line", sf.line), getattr(vf, "col", sf.col))
            slots.append((slot, vf.value))
    return template, tuple(slots)


def _build_deffacts(node: Node) -> Deffacts:
    if len(node.items) < 2:
        raise ParseError("deffacts needs a name", node.line, node.col)
    name = _expect_name(node.items[1], "deffacts")
    facts = []
    for f in node.items[2:]:
        if not isinstance(f, Node):
            raise ParseError("expected a fact form", getattr(f, "line", node.line),
                             getattr(f, "col", node.col))
        template, slots = _build_fact_slots(f, exprs=False)
        facts.append(FactSpec(template, slots))
    return Deffacts(name, tuple(facts))


def parse_fact(text: str) -> FactSpec:
    """One literal fact, e.g. '(pkt (src "10.0.0.1") (dport 23))'.

    Accepts an optional (assert ...) wrapper so dump files load directly.
    """
    forms = read_forms(text)
    if len(forms) != 1 or not isinstance(forms[0], Node):
        raise ParseError("expected exactly one fact form")
    node = forms[0]
    if _head(node) == "assert":
        if len(node.items) != 2 or not isinstance(node.items[1], Node):
            raise ParseError("assert wrapper takes one fact form", node.line, node.col)
        node = node.items[1]
    template, slots = _build_fact_slots(node, exprs=False)
    return FactSpec(template, slots)


def parse_facts(text: str) -> list[FactSpec]:
    """All fact forms in a fact-file text; (assert ...) wrappers allowed."""
    specs = []
    for node in read_forms(text):
        if not isinstance(node, Node):
            raise ParseError("expected fact forms", node.line, node.col, node.text)
        if _head(node) == "assert":
            if len(node.items) != 2 or not isinstance(node.items[1], Node):
                raise ParseError("assert wrapper takes one fact form", node.line, node.col)
            node = node.items[1]
        template, slots = _build_fact_slots(node, exprs=False)
        specs.append(FactSpec(template, slots))
    return specs
