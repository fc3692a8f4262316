"""Parser for the predicate surface syntax.

Grammar (loosest binding first)::

    expr  := or
    or    := and ("||" and)*
    and   := cmp ("&&" cmp)*
    cmp   := add (("==" | "!=" | "<" | ">" | "<=" | ">=") add)?
    add   := mul (("+" | "-") mul)*
    mul   := unary ("*" unary)*
    unary := "!" unary | atom
    atom  := INT | STRING | "true" | "false" | IDENT | "$" IDENT
           | "if" expr "then" expr "else" expr | "(" expr ")"

Bare identifiers are row fields and desugar to projections on an internal
binder.  ``$name`` placeholders are typed by unification against their use
sites and replaced by the supplied constants before typechecking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

from .predicates import (
    BOOL, INT, STRING, Base, Record, Term, Const, If, Op, Project, Var,
    Predicate, PredicateError, TypeCheckError, CANONICAL_BINDER,
    make_predicate, typecheck_term,
)


class PredicateSyntaxError(PredicateError):
    def __init__(self, message: str, pos: int, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.pos = pos
        self.line = line
        self.col = col


class UnboundParamError(PredicateError):
    def __init__(self, name: str):
        super().__init__(f"no value supplied for parameter ${name}")
        self.name = name


@dataclass(frozen=True)
class _Param:
    """Placeholder for a late-bound constant; never escapes this module."""
    name: str


_KEYWORDS = ("true", "false", "if", "then", "else")
_PUNCT = ("==", "!=", "<=", ">=", "&&", "||", "<", ">", "+", "-", "*", "!", "(", ")", "$")


@dataclass(frozen=True)
class _Token:
    kind: str      # 'int' | 'string' | 'ident' | keyword or punct literal | 'eof'
    value: object
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(_Token("int", int(text[i:j]), i))
            i = j
            continue
        if c == '"':
            j = i + 1
            chars = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    esc = text[j + 1]
                    if esc not in ('"', "\\"):
                        raise _err(text, j, f"unknown escape \\{esc}")
                    chars.append(esc)
                    j += 2
                else:
                    chars.append(text[j])
                    j += 1
            if j >= n:
                raise _err(text, i, "unterminated string literal")
            tokens.append(_Token("string", "".join(chars), i))
            i = j + 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            tokens.append(_Token(word if word in _KEYWORDS else "ident", word, i))
            i = j
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                tokens.append(_Token(p, p, i))
                i += len(p)
                break
        else:
            raise _err(text, i, f"unexpected character {c!r}")
    tokens.append(_Token("eof", None, n))
    return tokens


def _line_col(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


def _err(text: str, pos: int, message: str) -> PredicateSyntaxError:
    line, col = _line_col(text, pos)
    return PredicateSyntaxError(message, pos, line, col)


class _Parser:
    def __init__(self, text: str, binder: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.binder = binder
        self.params_seen: set[str] = set()

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def take(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise _err(self.text, tok.pos,
                       f"expected {kind!r}, found {tok.kind!r}")
        self.i += 1
        return tok

    def parse(self) -> Term:
        t = self.expr()
        tok = self.peek()
        if tok.kind != "eof":
            raise _err(self.text, tok.pos,
                       f"unexpected trailing input {tok.kind!r}")
        return t

    def expr(self) -> Term:
        return self.or_()

    def or_(self) -> Term:
        t = self.and_()
        while self.peek().kind == "||":
            self.take("||")
            t = Op("||", (t, self.and_()))
        return t

    def and_(self) -> Term:
        t = self.cmp()
        while self.peek().kind == "&&":
            self.take("&&")
            t = Op("&&", (t, self.cmp()))
        return t

    def cmp(self) -> Term:
        t = self.add()
        if self.peek().kind in ("==", "!=", "<", ">", "<=", ">="):
            op = self.take(self.peek().kind)
            return Op(op.kind, (t, self.add()))
        return t

    def add(self) -> Term:
        t = self.mul()
        while self.peek().kind in ("+", "-"):
            op = self.take(self.peek().kind)
            t = Op(op.kind, (t, self.mul()))
        return t

    def mul(self) -> Term:
        t = self.unary()
        while self.peek().kind == "*":
            self.take("*")
            t = Op("*", (t, self.unary()))
        return t

    def unary(self) -> Term:
        if self.peek().kind == "!":
            self.take("!")
            return Op("!", (self.unary(),))
        return self.atom()

    def atom(self) -> Term:
        tok = self.peek()
        if tok.kind == "int":
            self.take("int")
            return Const(tok.value)
        if tok.kind == "string":
            self.take("string")
            return Const(tok.value)
        if tok.kind == "true":
            self.take("true")
            return Const(True)
        if tok.kind == "false":
            self.take("false")
            return Const(False)
        if tok.kind == "ident":
            self.take("ident")
            return Project(Var(self.binder), tok.value)
        if tok.kind == "$":
            self.take("$")
            name = self.take("ident")
            self.params_seen.add(name.value)
            return _Param(name.value)
        if tok.kind == "if":
            self.take("if")
            cond = self.expr()
            self.take("then")
            then = self.expr()
            self.take("else")
            return If(cond, then, self.expr())
        if tok.kind == "(":
            self.take("(")
            t = self.expr()
            self.take(")")
            return t
        raise _err(self.text, tok.pos,
                   "expected a literal, field, parameter, 'if' or '(', "
                   f"found {tok.kind!r}")


# ---------------------------------------------------------------------------
# Parameter typing and substitution
# ---------------------------------------------------------------------------

def _infer_param_types(term: Term, row_type: Record) -> dict[str, Base]:
    """Unify parameter occurrences against their use sites."""
    bindings: dict[str, Base] = {}

    def known(t: Term) -> Base | None:
        if isinstance(t, _Param):
            return bindings.get(t.name)
        if isinstance(t, Const):
            from .predicates import const_type
            return const_type(t.value)
        if isinstance(t, Project):
            return row_type.get(t.label) if row_type.has(t.label) else None
        if isinstance(t, Op):
            return INT if t.op in ("+", "-", "*") else BOOL
        if isinstance(t, If):
            return known(t.then) or known(t.orelse)
        return None

    def constrain(t: Term, ty: Base):
        if isinstance(t, _Param):
            prev = bindings.get(t.name)
            if prev is not None and prev != ty:
                raise TypeCheckError(
                    f"parameter ${t.name} used at both {prev} and {ty}")
            bindings[t.name] = ty
        elif isinstance(t, If):
            constrain(t.then, ty)
            constrain(t.orelse, ty)

    def walk(t: Term):
        if isinstance(t, Op):
            for a in t.args:
                walk(a)
            if t.op in ("+", "-", "*"):
                for a in t.args:
                    constrain(a, INT)
            elif t.op in ("&&", "||", "!"):
                for a in t.args:
                    constrain(a, BOOL)
            else:  # comparison: propagate the known side to the other
                a, b = t.args
                ta, tb = known(a), known(b)
                if ta is not None:
                    constrain(b, ta)
                if tb is not None:
                    constrain(a, tb)
        elif isinstance(t, If):
            constrain(t.cond, BOOL)
            walk(t.cond)
            walk(t.then)
            walk(t.orelse)
            ty = known(t.then) or known(t.orelse)
            if ty is not None:
                constrain(t.then, ty)
                constrain(t.orelse, ty)

    before = None
    while before != bindings:
        before = dict(bindings)
        walk(term)
    return bindings


def _coerce(name: str, value, ty: Base):
    if ty == STRING:
        if isinstance(value, str):
            return value
    elif ty == INT:
        if isinstance(value, bool):
            pass
        elif isinstance(value, int):
            return value
        elif isinstance(value, str):
            try:
                return int(value)
            except ValueError:
                pass
    elif ty == BOOL:
        if isinstance(value, bool):
            return value
        if value in ("true", "false"):
            return value == "true"
    raise TypeCheckError(
        f"parameter ${name} is used as {ty} but was given {value!r}")


def _substitute_params(term: Term, values: Mapping[str, Union[bool, int, str]]) -> Term:
    if isinstance(term, _Param):
        return Const(values[term.name])
    if isinstance(term, Op):
        return Op(term.op, tuple(_substitute_params(a, values) for a in term.args))
    if isinstance(term, If):
        return If(_substitute_params(term.cond, values),
                  _substitute_params(term.then, values),
                  _substitute_params(term.orelse, values))
    return term


def parse_predicate(text: str, row_type: Record,
                    params: Mapping[str, Union[bool, int, str]] | None = None
                    ) -> Predicate:
    """Parse, resolve parameters, typecheck and normalise a predicate."""
    params = params or {}
    parser = _Parser(text, CANONICAL_BINDER)
    ast = parser.parse()
    dynamic = bool(parser.params_seen)
    if dynamic:
        missing = parser.params_seen - set(params)
        if missing:
            raise UnboundParamError(sorted(missing)[0])
        types = _infer_param_types(ast, row_type)
        untyped = parser.params_seen - set(types)
        if untyped:
            raise TypeCheckError(
                f"cannot infer a type for parameter ${sorted(untyped)[0]}")
        values = {n: _coerce(n, params[n], types[n]) for n in parser.params_seen}
        ast = _substitute_params(ast, values)
    # surfaces field typos and operator misuse with the row type in hand
    typecheck_term({CANONICAL_BINDER: row_type}, ast)
    return make_predicate(CANONICAL_BINDER, ast, row_type, dynamic)
