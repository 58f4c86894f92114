"""Embedded forward-chaining rule engine (CLIPS-subset language)."""

from .constructs import (Deffacts, FactSpec, Pattern, Program, Rule,
                         Template)
from .engine import DUMP_MAGIC, Engine, EngineError, RuleRuntimeError
from .kernel import BACKEND, CompileError
from .parser import ParseError, parse_fact, parse_facts, parse_program
from .shell import (append_input, drain_input, eval_command, input_count,
                    split_complete)
from .values import NIL, Symbol, Value, render_value

__all__ = [
    "BACKEND", "CompileError", "Deffacts", "DUMP_MAGIC", "Engine",
    "EngineError", "FactSpec", "NIL", "ParseError", "Pattern", "Program",
    "Rule", "RuleRuntimeError", "Symbol", "Template", "Value",
    "append_input", "drain_input", "eval_command", "input_count",
    "parse_fact", "parse_facts", "parse_program", "render_value",
    "split_complete",
]
