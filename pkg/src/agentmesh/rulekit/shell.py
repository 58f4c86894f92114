"""Command shell over an Engine: the REPL the agents expose remotely.

eval_command() maps one parenthesized command to its printed output and
never raises; failures come back as a line starting with "ERROR:".
append_input() feeds the engine's streaming input buffer: text arrives
in arbitrary chunks, complete forms are peeled off the front and
evaluated immediately, the incomplete tail stays pending.
"""

from __future__ import annotations

from .constructs import FactSpec
from .engine import Engine, EngineError, RuleRuntimeError
from .parser import (Node, ParseError, Tok, _build_construct, _build_expr,
                     _build_fact_slots, _head, read_forms)
from .engine import _eval
from .values import Symbol, render_value

ARITH_HEADS = ("+", "-", "*", "/")


def eval_command(engine: Engine, text: str) -> str:
    try:
        return _eval_command(engine, text)
    except RuleRuntimeError as exc:
        return f"ERROR: {exc} (after {exc.fired} firings)"
    except (EngineError, ParseError) as exc:
        return f"ERROR: {exc}"
    except RecursionError:
        return "ERROR: expression too deeply nested"


def _eval_command(engine: Engine, text: str) -> str:
    forms = read_forms(text)
    if len(forms) != 1:
        raise EngineError("expected exactly one command form")
    form = forms[0]
    if isinstance(form, Tok):
        raise EngineError(f"expected a command form, got {form.text!r}")
    head = _head(form)
    args = form.items[1:]

    if head in ("deftemplate", "defrule", "deffacts"):
        _install(engine, form)
        return ""
    if head in ARITH_HEADS:
        value = _eval(_build_expr(form), {})
        return render_value(value)

    if head == "assert":
        if len(args) != 1 or not isinstance(args[0], Node):
            raise EngineError("assert takes one fact form")
        template, slots = _build_fact_slots(args[0], exprs=False)
        fid = engine.assert_spec(FactSpec(template, slots))
        return _with_trace(engine, "FALSE" if fid is None else f"f-{fid}")
    if head == "retract":
        fid = _int_arg(args, "retract")
        engine.retract(fid)
        return _with_trace(engine, "")
    if head == "run":
        if len(args) not in (0, 1):
            raise EngineError("run takes at most one count")
        limit = _int_arg(args, "run") if args else None
        fired = engine.run(limit)
        return _with_trace(engine, f"{fired} rules fired")
    if head == "reset":
        _no_args(args, "reset")
        engine.reset()
        return _with_trace(engine, "")
    if head == "clear":
        _no_args(args, "clear")
        engine.clear_all()
        return ""
    if head == "facts":
        _no_args(args, "facts")
        lines = engine.facts_lines()
        if not lines:
            return "0 facts"
        return "\n".join(lines) + f"\n{len(lines)} facts"
    if head == "rules":
        _no_args(args, "rules")
        names = engine.rule_names()
        tail = f"{len(names)} rules"
        return "\n".join(names) + ("\n" + tail if names else tail)
    if head == "agenda":
        _no_args(args, "agenda")
        lines = engine.agenda_lines()
        tail = f"{len(lines)} activations"
        return "\n".join(lines) + ("\n" + tail if lines else tail)
    if head == "watch":
        engine.watch(_sym_arg(args, "watch"))
        return ""
    if head == "unwatch":
        engine.unwatch(_sym_arg(args, "unwatch"))
        return ""
    if head == "strategy":
        engine.set_strategy(_sym_arg(args, "strategy"))
        return ""
    if head == "get-result":
        _no_args(args, "get-result")
        return engine.result.name
    if head == "build":
        if len(args) != 1 or not (isinstance(args[0], Tok)
                                  and args[0].kind == "string"):
            raise EngineError("build takes one source string")
        engine.load_source(args[0].value)
        return "TRUE"
    if head == "load":
        if len(args) != 1 or not (isinstance(args[0], Tok)
                                  and args[0].kind == "string"):
            raise EngineError("load takes one path string")
        try:
            with open(args[0].value, "r", encoding="utf-8") as fh:
                source = fh.read()
        except OSError as exc:
            raise EngineError(f"cannot load {args[0].value!r}: {exc}") from None
        n = engine.load_source(source)
        return _with_trace(engine, f"{n} forms")
    if head == "dump":
        _no_args(args, "dump")
        return engine.dump_text()
    raise EngineError(f"unknown command {head!r}")


def _install(engine: Engine, form: Node):
    try:
        construct = _build_construct(form)
    except ParseError as exc:
        raise EngineError(str(exc)) from None
    from .constructs import Rule, Template
    if isinstance(construct, Template):
        engine.install_template(construct)
    elif isinstance(construct, Rule):
        engine.install_rule(construct)
    else:
        engine.install_deffacts(construct)


def _with_trace(engine: Engine, tail: str) -> str:
    """Prefix watch/printout output accumulated by the command."""
    parts = engine.take_trace()
    printed = engine.take_output()
    if printed:
        parts.append(printed.rstrip("\n"))
    if tail:
        parts.append(tail)
    return "\n".join(parts)


def _no_args(args, name: str):
    if args:
        raise EngineError(f"{name} takes no arguments")


def _int_arg(args, name: str) -> int:
    if len(args) != 1 or not (isinstance(args[0], Tok)
                              and isinstance(args[0].value, int)):
        raise EngineError(f"{name} takes one integer")
    return args[0].value


def _sym_arg(args, name: str) -> str:
    if len(args) != 1 or not (isinstance(args[0], Tok)
                              and isinstance(args[0].value, Symbol)):
        raise EngineError(f"{name} takes one symbol")
    return args[0].value.name


# ---------------------------------------------------------------------------
# streaming input buffer

def split_complete(buffer: str) -> tuple[list[str], str]:
    """Peel complete top-level forms off `buffer`.

    Returns (complete_form_texts, remainder). Junk at top level (a bare
    atom or stray ')') is cut as its own chunk so evaluation can report
    it without wedging the buffer.
    """
    forms: list[str] = []
    i = 0
    n = len(buffer)
    while i < n:
        ch = buffer[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch == ";":
            j = buffer.find("\n", i)
            if j < 0:
                break  # maybe more of the comment is still in flight
            i = j + 1
            continue
        if ch == "(":
            end = _form_end(buffer, i)
            if end < 0:
                break
            forms.append(buffer[i:end])
            i = end
            continue
        if ch == ")":
            forms.append(")")
            i += 1
            continue
        j = i
        while j < n and buffer[j] not in ' \t\r\n();"':
            j += 1
        if j == n:
            break  # token may continue in the next chunk
        forms.append(buffer[i:j])
        i = j
    return forms, buffer[i:]


def _form_end(buffer: str, start: int) -> int:
    depth = 0
    in_str = False
    esc = False
    for i in range(start, len(buffer)):
        ch = buffer[i]
        if in_str:
            if esc:
                esc = False
            elif ch == "\\":
                esc = True
            elif ch == '"':
                in_str = False
            continue
        if ch == '"':
            in_str = True
        elif ch == ";":
            j = buffer.find("\n", i)
            if j < 0:
                return -1
            # skip comment body; the for loop cannot jump, so recurse
            return _form_end(buffer[:i] + " " * (j - i) + buffer[j:], start)
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                return i + 1
    return -1


def append_input(engine: Engine, chunk: str) -> str:
    """Append to the engine input buffer, evaluating completed forms.

    Returns the combined output of whatever became evaluable; an empty
    string means the buffer is still waiting for more input.
    """
    engine.input_buffer += chunk
    return drain_input(engine)


def drain_input(engine: Engine) -> str:
    forms, engine.input_buffer = split_complete(engine.input_buffer)
    outputs = []
    for text in forms:
        out = eval_command(engine, text)
        if out:
            outputs.append(out)
    return "\n".join(outputs)


def input_count(engine: Engine) -> int:
    return len(engine.input_buffer)
