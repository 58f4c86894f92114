"""Join kernel: compiled rules and the fact-matching inner loop.

Rules compile to flat check lists; matching then walks the fact store
pattern by pattern with backtracking. This is the hot path, so two
interchangeable backends exist: this pure-Python one and a compiled
twin in `_native` (built from _native.pyx). The compiled backend is
preferred at import unless AGENTMESH_PURE is set or the build was
skipped. Both return identical results; see the equivalence tests.

Check encoding, one tuple per constrained slot:

    (slot_index, opcode, cmp, operand)

    opcode 0 LIT   operand is a literal; slot value must equal it
    opcode 1 BIND  operand is a variable index; first occurrence, binds
    opcode 2 VEQ   operand is a variable index; must equal bound value
    opcode 3 TLIT  cmp-compare slot value against literal operand
    opcode 4 TVAR  cmp-compare slot value against bound variable

    cmp 0 '='  1 '!='  2 '<'  3 '<='  4 '>'  5 '>='

Ordering comparisons are numeric-only; a non-numeric operand side makes
the check fail rather than raise.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .constructs import Rule, Template

OP_LIT, OP_BIND, OP_VEQ, OP_TLIT, OP_TVAR = 0, 1, 2, 3, 4
CMP_CODE = {"=": 0, "!=": 1, "<": 2, "<=": 3, ">": 4, ">=": 5}


class CompileError(Exception):
    pass


@dataclass(frozen=True)
class CompiledRule:
    name: str
    salience: int
    # ((template_name, checks), ...) -- plain tuples, shared with _native
    patterns: tuple
    nvars: int
    var_names: tuple  # kernel variable index -> source name
    addr_vars: tuple  # ((pattern_index, name), ...)


def compile_rule(rule: Rule, templates: dict[str, Template]) -> CompiledRule:
    var_ix: dict[str, int] = {}
    var_names: list[str] = []
    addr_vars: list[tuple[int, str]] = []
    addr_names: set[str] = set()
    pats = []
    for pi, pat in enumerate(rule.patterns):
        tmpl = templates.get(pat.template)
        if tmpl is None:
            raise CompileError(
                f"rule {rule.name!r}: unknown template {pat.template!r}")
        if pat.addr_var is not None:
            if pat.addr_var in addr_names or pat.addr_var in var_ix:
                raise CompileError(
                    f"rule {rule.name!r}: variable ?{pat.addr_var} bound twice")
            addr_names.add(pat.addr_var)
            addr_vars.append((pi, pat.addr_var))
        checks = []
        for slot, c in pat.constraints:
            try:
                si = tmpl.slot_index(slot)
            except KeyError:
                raise CompileError(
                    f"rule {rule.name!r}: template {pat.template!r} "
                    f"has no slot {slot!r}") from None
            if c.kind == "wild":
                continue
            if c.kind == "lit":
                checks.append((si, OP_LIT, 0, c.value))
            elif c.kind == "var":
                if c.var in addr_names:
                    raise CompileError(
                        f"rule {rule.name!r}: variable ?{c.var} bound twice")
                if c.var in var_ix:
                    checks.append((si, OP_VEQ, 0, var_ix[c.var]))
                else:
                    var_ix[c.var] = len(var_names)
                    var_names.append(c.var)
                    checks.append((si, OP_BIND, 0, var_ix[c.var]))
            else:  # test
                cmp = CMP_CODE[c.op]
                if c.operand_var is not None:
                    if c.operand_var not in var_ix:
                        raise CompileError(
                            f"rule {rule.name!r}: test references "
                            f"?{c.operand_var} before it is bound")
                    checks.append((si, OP_TVAR, cmp, var_ix[c.operand_var]))
                else:
                    checks.append((si, OP_TLIT, cmp, c.value))
        pats.append((pat.template, tuple(checks)))
    return CompiledRule(rule.name, rule.salience, tuple(pats),
                        len(var_names), tuple(var_names), tuple(addr_vars))


_UNBOUND = object()


def _numeric(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _cmp(code: int, v, w) -> bool:
    if code == 0:
        return v == w
    if code == 1:
        return v != w
    if not (_numeric(v) and _numeric(w)):
        return False
    if code == 2:
        return v < w
    if code == 3:
        return v <= w
    if code == 4:
        return v > w
    return v >= w


def py_match_all(crule: CompiledRule, store: dict) -> list:
    """All joins of `crule` over `store`.

    store maps template name -> {fact_id: value_tuple}. Returns
    [(fids, binds), ...]; fids aligns with patterns, binds with
    crule.var_names.
    """
    return _match(crule, store, -1, -1, None)


def py_match_with_pinned(crule: CompiledRule, store: dict,
                         pos: int, fid: int, vals: tuple) -> list:
    """Joins where pattern `pos` matches exactly the given fact.

    Patterns before `pos` refuse fact `fid` so that a fresh fact able to
    match several patterns yields each new join once (keyed by its first
    occurrence). Positions after `pos` may reuse it.
    """
    return _match(crule, store, pos, fid, vals)


def _match(crule, store, pin_pos, pin_fid, pin_vals):
    patterns = crule.patterns
    npat = len(patterns)
    binds = [_UNBOUND] * crule.nvars
    fids = [0] * npat
    out = []

    def rec(i: int):
        if i == npat:
            out.append((tuple(fids), tuple(binds)))
            return
        template, checks = patterns[i]
        if i == pin_pos:
            if pin_vals is None:
                return
            candidates = ((pin_fid, pin_vals),)
        else:
            facts = store.get(template)
            if not facts:
                return
            candidates = facts.items()
        skip = pin_fid if i < pin_pos else -1
        for fid, vals in candidates:
            if fid == skip:
                continue
            undo = []
            ok = True
            for slot, opc, cmp, operand in checks:
                v = vals[slot]
                if opc == OP_LIT:
                    if v != operand:
                        ok = False
                        break
                elif opc == OP_BIND:
                    binds[operand] = v
                    undo.append(operand)
                elif opc == OP_VEQ:
                    if v != binds[operand]:
                        ok = False
                        break
                elif opc == OP_TLIT:
                    if not _cmp(cmp, v, operand):
                        ok = False
                        break
                else:  # OP_TVAR
                    if not _cmp(cmp, v, binds[operand]):
                        ok = False
                        break
            if ok:
                fids[i] = fid
                rec(i + 1)
            for u in undo:
                binds[u] = _UNBOUND
        return

    rec(0)
    return out


# ---------------------------------------------------------------------------
# backend selection

BACKEND = "pure"
match_all = py_match_all
match_with_pinned = py_match_with_pinned

if not os.environ.get("AGENTMESH_PURE"):
    try:
        from . import _native  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        match_all = _native.match_all
        match_with_pinned = _native.match_with_pinned
        BACKEND = "native"
