"""Slot values of the rule language.

A value is one of: symbol (interned, case-sensitive), string, 64-bit
integer, 64-bit float. Python ints are unbounded; we keep them as-is
and rely on the parser to reject nothing (overflow is not a practical
concern for this engine's workloads).

Comparison semantics: int/float compare numerically with exact equality
(Python's native behaviour), symbols compare by identity/name, strings
by content. A symbol never equals a string of the same spelling.
"""

from __future__ import annotations


class Symbol:
    """Interned bare identifier. `Symbol("x") is Symbol("x")` holds."""

    __slots__ = ("name",)
    _interned: dict[str, "Symbol"] = {}

    def __new__(cls, name: str) -> "Symbol":
        sym = cls._interned.get(name)
        if sym is None:
            sym = object.__new__(cls)
            sym.name = name
            cls._interned[name] = sym
        return sym

    def __eq__(self, other):
        return self is other or (isinstance(other, Symbol) and other.name == self.name)

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash(self.name)

    def __repr__(self):
        return self.name

    def __reduce__(self):  # keep interning across pickle round-trips
        return (Symbol, (self.name,))


NIL = Symbol("nil")

Value = Symbol | str | int | float


def is_numeric(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def render_value(v: Value) -> str:
    """Canonical text form, re-parseable by the rule-language reader."""
    if isinstance(v, Symbol):
        return v.name
    if isinstance(v, str):
        escaped = v.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(v, bool):
        raise TypeError("booleans are not rule-language values")
    if isinstance(v, (int, float)):
        return repr(v)
    raise TypeError(f"not a rule-language value: {v!r}")
