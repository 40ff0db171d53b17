"""Expression language: parsing, symbolic calculus, simplification, evaluation."""

from .calculus import differentiate, evaluate, gradient, rpow
from .codegen import compile_scalar, compile_vector
from .expr import (
    DomainError,
    Expr,
    ExprError,
    add,
    call,
    const,
    inp,
    mul,
    neg,
    power,
    raw_add,
    raw_call,
    raw_mul,
    raw_pow,
    simplify,
    state,
    sub,
    substitute_inputs,
)
from .parser import ParseError, SystemDefinitionError, parse_expression, parse_system
from .printer import to_text
from .system import ControlAffineSystem

__all__ = [
    "ControlAffineSystem",
    "DomainError",
    "Expr",
    "ExprError",
    "ParseError",
    "SystemDefinitionError",
    "add",
    "call",
    "compile_scalar",
    "compile_vector",
    "const",
    "differentiate",
    "evaluate",
    "gradient",
    "inp",
    "mul",
    "neg",
    "parse_expression",
    "parse_system",
    "power",
    "raw_add",
    "raw_call",
    "raw_mul",
    "raw_pow",
    "rpow",
    "simplify",
    "state",
    "sub",
    "substitute_inputs",
    "to_text",
]
