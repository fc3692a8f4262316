"""Pretty-printers for predicates: surface syntax and SQL.

``render_text`` emits the same syntax ``predparse`` accepts, with minimal
parentheses.  ``render_sql`` emits a SQL boolean expression; every non-atom
operand is parenthesised, so grouping never depends on the reader knowing
SQL precedence.
"""

from __future__ import annotations

from .fundeps import render_fds
from .predicates import (
    Const, If, Op, Predicate, PredicateError, Project, Term, Var,
)


class UnsupportedTermError(PredicateError):
    pass


# precedence levels for the surface grammar
_PREC = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<": 3, ">": 3, "<=": 3, ">=": 3,
         "+": 4, "-": 4, "*": 5, "!": 6}
_ATOM_PREC = 7
_CMP_OPS = ("==", "!=", "<", ">", "<=", ">=")


def _text(term: Term, binder: str, parent_prec: int) -> str:
    if isinstance(term, Const):
        if isinstance(term.value, bool):
            return "true" if term.value else "false"
        if isinstance(term.value, int):
            return str(term.value)
        escaped = term.value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(term, Project) and isinstance(term.subject, Var) \
            and term.subject.name == binder:
        return term.label
    if isinstance(term, If):
        s = (f"if {_text(term.cond, binder, 0)} "
             f"then {_text(term.then, binder, 0)} "
             f"else {_text(term.orelse, binder, 0)}")
        return f"({s})" if parent_prec > 0 else s
    if isinstance(term, Op):
        if term.op == "!":
            return f"!{_text(term.args[0], binder, _PREC['!'])}"
        prec = _PREC[term.op]
        a, b = term.args
        # comparisons do not chain, so a comparison operand needs parens
        left = _text(a, binder, prec if term.op not in _CMP_OPS else prec)
        right = _text(b, binder, prec + 1)
        s = f"{left} {term.op} {right}"
        return f"({s})" if prec < parent_prec else s
    raise UnsupportedTermError(f"cannot render term {term!r}")


def render_text(pred: Predicate) -> str:
    """Surface-syntax rendering; parses back to an equal predicate."""
    return _text(pred.body, pred.binder, 0)


def render_const(value) -> str:
    """A constant in surface syntax."""
    return _text(Const(value), "", 0)


def render_fds_inline(fds) -> str:
    """Dependency list for sort lines; '-' when there are none."""
    return render_fds(fds) if fds.deps else "-"


_SQL_OPS = {"==": "=", "!=": "<>", "<": "<", ">": ">", "<=": "<=", ">=": ">=",
            "&&": "AND", "||": "OR", "+": "+", "-": "-", "*": "*"}


def sql_quote_ident(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


def _sql_const(value) -> str:
    if isinstance(value, bool):
        return "TRUE" if value else "FALSE"
    if isinstance(value, int):
        return str(value)
    return "'" + value.replace("'", "''") + "'"


def _sql(term: Term, binder: str) -> str:
    if isinstance(term, Const):
        return _sql_const(term.value)
    if isinstance(term, Project) and isinstance(term.subject, Var) \
            and term.subject.name == binder:
        return sql_quote_ident(term.label)
    if isinstance(term, If):
        return (f"CASE WHEN {_sql(term.cond, binder)} "
                f"THEN {_sql(term.then, binder)} "
                f"ELSE {_sql(term.orelse, binder)} END")
    if isinstance(term, Op):
        if term.op == "!":
            return f"NOT {_sql_operand(term.args[0], binder)}"
        a, b = term.args
        return (f"{_sql_operand(a, binder)} {_SQL_OPS[term.op]} "
                f"{_sql_operand(b, binder)}")
    raise UnsupportedTermError(f"term {term!r} is not in renderable normal form")


def _sql_operand(term: Term, binder: str) -> str:
    s = _sql(term, binder)
    if isinstance(term, (Const, Project)) or isinstance(term, If):
        return s  # atoms; CASE..END is self-delimiting
    return f"({s})"


def render_sql(pred: Predicate) -> str:
    """SQL boolean expression for a normalised predicate body."""
    return _sql(pred.body, pred.binder)
