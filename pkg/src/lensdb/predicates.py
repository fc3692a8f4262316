"""Simply-typed predicate language over flat records.

Terms are a small lambda calculus with records, conditionals and n-ary
operators on base types (bool, int, string).  A ``Predicate`` packages a
single binder, a boolean body and the record type of the rows it ranges
over.  Rewriting (``normalize``) reduces any well-typed boolean body to a
flat conditional/operator form that is directly renderable as SQL and easy
to analyse for the lens typechecker.

All values are immutable; every function here is pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Union


class PredicateError(Exception):
    """Base class for predicate-language failures."""


class TypeCheckError(PredicateError):
    pass


class UnboundVarError(TypeCheckError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable {name!r}")
        self.name = name


class MissingFieldError(TypeCheckError):
    def __init__(self, label: str, record: "Record"):
        super().__init__(f"record {record} has no field {label!r}")
        self.label = label


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Base:
    kind: str  # 'bool' | 'int' | 'string'

    def __str__(self) -> str:
        return self.kind


BOOL = Base("bool")
INT = Base("int")
STRING = Base("string")
BASE_TYPES = {"bool": BOOL, "int": INT, "string": STRING}


@dataclass(frozen=True)
class Record:
    """Ordered record type; labels are pairwise distinct."""

    fields: tuple[tuple[str, "PredType"], ...]

    def __post_init__(self):
        labels = [l for l, _ in self.fields]
        if len(set(labels)) != len(labels):
            raise PredicateError(f"duplicate record labels in {labels}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(l for l, _ in self.fields)

    @property
    def label_set(self) -> frozenset[str]:
        return frozenset(l for l, _ in self.fields)

    def get(self, label: str) -> "PredType":
        for l, t in self.fields:
            if l == label:
                return t
        raise MissingFieldError(label, self)

    def has(self, label: str) -> bool:
        return any(l == label for l, _ in self.fields)

    def minus(self, label: str) -> "Record":
        return Record(tuple((l, t) for l, t in self.fields if l != label))

    def restrict(self, labels) -> "Record":
        keep = set(labels)
        return Record(tuple((l, t) for l, t in self.fields if l in keep))

    def is_base_record(self) -> bool:
        return all(isinstance(t, Base) for _, t in self.fields)

    def __str__(self) -> str:
        inner = ", ".join(f"{l}: {t}" for l, t in self.fields)
        return f"({inner})"


@dataclass(frozen=True)
class Function:
    arg: "PredType"
    result: "PredType"

    def __str__(self) -> str:
        return f"{self.arg} -> {self.result}"


PredType = Union[Base, Record, Function]


def record_type(*pairs: tuple[str, PredType]) -> Record:
    return Record(tuple(pairs))


def concat_record_types(a: Record, b: Record) -> Record:
    """Concatenation of record types; shared labels must agree on type."""
    fields = list(a.fields)
    for l, t in b.fields:
        if a.has(l):
            if a.get(l) != t:
                raise TypeCheckError(
                    f"field {l!r} has conflicting types {a.get(l)} and {t}")
        else:
            fields.append((l, t))
    return Record(tuple(fields))


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    value: Union[bool, int, str]


@dataclass(frozen=True)
class Abs:
    param: str
    body: "Term"
    param_type: PredType | None = None


@dataclass(frozen=True)
class App:
    fn: "Term"
    arg: "Term"


@dataclass(frozen=True)
class RecordLit:
    fields: tuple[tuple[str, "Term"], ...]

    def __post_init__(self):
        labels = [l for l, _ in self.fields]
        if len(set(labels)) != len(labels):
            raise PredicateError(f"duplicate record labels in {labels}")


@dataclass(frozen=True)
class Project:
    subject: "Term"
    label: str


@dataclass(frozen=True)
class If:
    cond: "Term"
    then: "Term"
    orelse: "Term"


@dataclass(frozen=True)
class Op:
    op: str
    args: tuple["Term", ...]


Term = Union[Var, Const, Abs, App, RecordLit, Project, If, Op]


def const_type(value) -> Base:
    # bool is a subclass of int, so test it first
    if isinstance(value, bool):
        return BOOL
    if isinstance(value, int):
        return INT
    if isinstance(value, str):
        return STRING
    raise TypeCheckError(f"unsupported constant {value!r}")


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

EQUALITY_OPS = ("==", "!=")
ORDER_OPS = ("<", "<=", ">", ">=")
BOOL_BINOPS = ("&&", "||")
ARITH_OPS = ("+", "-", "*")
ALL_OPS = EQUALITY_OPS + ORDER_OPS + BOOL_BINOPS + ("!",) + ARITH_OPS


def op_signature(op: str, arg_types: tuple[PredType, ...]) -> Base:
    """Result type of ``op`` at the given argument types, or raise."""
    for t in arg_types:
        if not isinstance(t, Base):
            raise TypeCheckError(f"operator {op!r} applied to non-base type {t}")
    if op in EQUALITY_OPS or op in ORDER_OPS:
        if len(arg_types) != 2 or arg_types[0] != arg_types[1]:
            raise TypeCheckError(
                f"operator {op!r} needs two operands of the same base type, "
                f"got {tuple(map(str, arg_types))}")
        if op in ORDER_OPS and arg_types[0] == BOOL:
            raise TypeCheckError(f"operator {op!r} is not defined on bool")
        return BOOL
    if op in BOOL_BINOPS:
        if len(arg_types) != 2 or arg_types != (BOOL, BOOL):
            raise TypeCheckError(f"operator {op!r} needs two bool operands")
        return BOOL
    if op == "!":
        if arg_types != (BOOL,):
            raise TypeCheckError("operator '!' needs one bool operand")
        return BOOL
    if op in ARITH_OPS:
        if len(arg_types) != 2 or arg_types != (INT, INT):
            raise TypeCheckError(f"operator {op!r} needs two int operands")
        return INT
    raise TypeCheckError(f"unknown operator {op!r}")


_DENOTATIONS = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "&&": lambda a, b: a and b,
    "||": lambda a, b: a or b,
    "!": lambda a: not a,
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
}


def denote(op: str, values) -> Union[bool, int, str]:
    return _DENOTATIONS[op](*values)


# ---------------------------------------------------------------------------
# Typechecking
# ---------------------------------------------------------------------------

def typecheck_term(env: Mapping[str, PredType], term: Term) -> PredType:
    """Infer the unique type of ``term`` under ``env`` or raise TypeCheckError."""
    if isinstance(term, Var):
        if term.name not in env:
            raise UnboundVarError(term.name)
        return env[term.name]
    if isinstance(term, Const):
        return const_type(term.value)
    if isinstance(term, Abs):
        if term.param_type is None:
            raise TypeCheckError(
                f"lambda parameter {term.param!r} needs a type annotation")
        inner = dict(env)
        inner[term.param] = term.param_type
        return Function(term.param_type, typecheck_term(inner, term.body))
    if isinstance(term, App):
        fn_ty = typecheck_term(env, term.fn)
        if not isinstance(fn_ty, Function):
            raise TypeCheckError(f"applying non-function of type {fn_ty}")
        arg_ty = typecheck_term(env, term.arg)
        if arg_ty != fn_ty.arg:
            raise TypeCheckError(
                f"argument type {arg_ty} does not match parameter type {fn_ty.arg}")
        return fn_ty.result
    if isinstance(term, RecordLit):
        return Record(tuple((l, typecheck_term(env, t)) for l, t in term.fields))
    if isinstance(term, Project):
        subj_ty = typecheck_term(env, term.subject)
        if not isinstance(subj_ty, Record):
            raise TypeCheckError(f"projecting {term.label!r} from non-record type {subj_ty}")
        return subj_ty.get(term.label)
    if isinstance(term, If):
        cond_ty = typecheck_term(env, term.cond)
        if cond_ty != BOOL:
            raise TypeCheckError(f"condition has type {cond_ty}, expected bool")
        then_ty = typecheck_term(env, term.then)
        else_ty = typecheck_term(env, term.orelse)
        if then_ty != else_ty:
            raise TypeCheckError(
                f"branches have different types {then_ty} and {else_ty}")
        return then_ty
    if isinstance(term, Op):
        return op_signature(term.op, tuple(typecheck_term(env, a) for a in term.args))
    raise TypeCheckError(f"unknown term {term!r}")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Closure:
    param: str
    body: Term
    env: tuple[tuple[str, "Value"], ...]


Value = Union[bool, int, str, dict, Closure]


def evaluate(term: Term, env: Mapping[str, Value] | None = None) -> Value:
    """Big-step evaluation; total on well-typed closed terms."""
    env = env or {}
    if isinstance(term, Var):
        if term.name not in env:
            raise UnboundVarError(term.name)
        return env[term.name]
    if isinstance(term, Const):
        return term.value
    if isinstance(term, Abs):
        return Closure(term.param, term.body, tuple(env.items()))
    if isinstance(term, App):
        fn = evaluate(term.fn, env)
        if not isinstance(fn, Closure):
            raise PredicateError(f"applying non-closure {fn!r}")
        arg = evaluate(term.arg, env)
        inner = dict(fn.env)
        inner[fn.param] = arg
        return evaluate(fn.body, inner)
    if isinstance(term, RecordLit):
        return {l: evaluate(t, env) for l, t in term.fields}
    if isinstance(term, Project):
        subject = evaluate(term.subject, env)
        if not isinstance(subject, dict) or term.label not in subject:
            raise PredicateError(f"projection {term.label!r} from {subject!r}")
        return subject[term.label]
    if isinstance(term, If):
        if evaluate(term.cond, env) is True:
            return evaluate(term.then, env)
        return evaluate(term.orelse, env)
    if isinstance(term, Op):
        return denote(term.op, [evaluate(a, env) for a in term.args])
    raise PredicateError(f"unknown term {term!r}")


# ---------------------------------------------------------------------------
# Substitution and normalisation
# ---------------------------------------------------------------------------

def free_vars(term: Term) -> frozenset[str]:
    if isinstance(term, Var):
        return frozenset((term.name,))
    if isinstance(term, Const):
        return frozenset()
    if isinstance(term, Abs):
        return free_vars(term.body) - {term.param}
    if isinstance(term, App):
        return free_vars(term.fn) | free_vars(term.arg)
    if isinstance(term, RecordLit):
        out: frozenset[str] = frozenset()
        for _, t in term.fields:
            out |= free_vars(t)
        return out
    if isinstance(term, Project):
        return free_vars(term.subject)
    if isinstance(term, If):
        return free_vars(term.cond) | free_vars(term.then) | free_vars(term.orelse)
    if isinstance(term, Op):
        out = frozenset()
        for a in term.args:
            out |= free_vars(a)
        return out
    raise PredicateError(f"unknown term {term!r}")


def _fresh(base: str, avoid: frozenset[str]) -> str:
    if base not in avoid:
        return base
    i = 0
    while f"{base}_{i}" in avoid:
        i += 1
    return f"{base}_{i}"


def substitute(term: Term, name: str, repl: Term) -> Term:
    """Capture-avoiding substitution of ``repl`` for free ``name``."""
    if isinstance(term, Var):
        return repl if term.name == name else term
    if isinstance(term, Const):
        return term
    if isinstance(term, Abs):
        if term.param == name:
            return term
        if term.param in free_vars(repl) and name in free_vars(term.body):
            renamed = _fresh(term.param, free_vars(repl) | free_vars(term.body))
            body = substitute(term.body, term.param, Var(renamed))
            return Abs(renamed, substitute(body, name, repl), term.param_type)
        return Abs(term.param, substitute(term.body, name, repl), term.param_type)
    if isinstance(term, App):
        return App(substitute(term.fn, name, repl), substitute(term.arg, name, repl))
    if isinstance(term, RecordLit):
        return RecordLit(tuple((l, substitute(t, name, repl)) for l, t in term.fields))
    if isinstance(term, Project):
        return Project(substitute(term.subject, name, repl), term.label)
    if isinstance(term, If):
        return If(substitute(term.cond, name, repl),
                  substitute(term.then, name, repl),
                  substitute(term.orelse, name, repl))
    if isinstance(term, Op):
        return Op(term.op, tuple(substitute(a, name, repl) for a in term.args))
    raise PredicateError(f"unknown term {term!r}")


def _type_of(term: Term, env: Mapping[str, PredType]) -> PredType | None:
    try:
        return typecheck_term(env, term)
    except TypeCheckError:
        return None


def _contract(term: Term, env: Mapping[str, PredType]) -> Term | None:
    """One root-level rewrite step, or None if the root is not a redex.

    The rewrite rules are: beta reduction, projection from a record
    literal, conditionals on constant tests, pushing application inside a
    conditional, pushing a record-typed conditional into a record of
    conditionals, and folding of operators applied to constants only.
    """
    if isinstance(term, App):
        if isinstance(term.fn, Abs):
            return substitute(term.fn.body, term.fn.param, term.arg)
        if isinstance(term.fn, If):
            return If(term.fn.cond,
                      App(term.fn.then, term.arg),
                      App(term.fn.orelse, term.arg))
    if isinstance(term, Project) and isinstance(term.subject, RecordLit):
        for l, t in term.subject.fields:
            if l == term.label:
                return t
        raise PredicateError(f"projection {term.label!r} missing from record literal")
    if isinstance(term, If):
        if isinstance(term.cond, Const):
            return term.then if term.cond.value is True else term.orelse
        branch_ty = _type_of(term.then, env)
        if isinstance(branch_ty, Record):
            return RecordLit(tuple(
                (l, If(term.cond, Project(term.then, l), Project(term.orelse, l)))
                for l, _ in branch_ty.fields))
    if isinstance(term, Op):
        if all(isinstance(a, Const) for a in term.args):
            return Const(denote(term.op, [a.value for a in term.args]))
        # boolean identities; sound because evaluation is total and pure
        if term.op in ("&&", "||"):
            a, b = term.args
            unit = term.op == "&&"
            for this, other in ((a, b), (b, a)):
                if isinstance(this, Const):
                    return other if this.value is unit else Const(not unit)
    return None


def _norm(term: Term, env: dict[str, PredType]) -> Term:
    if isinstance(term, (Var, Const)):
        pass
    elif isinstance(term, Abs):
        inner = env
        if term.param_type is not None:
            inner = dict(env)
            inner[term.param] = term.param_type
        term = Abs(term.param, _norm(term.body, inner), term.param_type)
    elif isinstance(term, App):
        term = App(_norm(term.fn, env), _norm(term.arg, env))
    elif isinstance(term, RecordLit):
        term = RecordLit(tuple((l, _norm(t, env)) for l, t in term.fields))
    elif isinstance(term, Project):
        term = Project(_norm(term.subject, env), term.label)
    elif isinstance(term, If):
        term = If(_norm(term.cond, env), _norm(term.then, env), _norm(term.orelse, env))
    elif isinstance(term, Op):
        term = Op(term.op, tuple(_norm(a, env) for a in term.args))
    reduced = _contract(term, env)
    if reduced is None:
        return term
    return _norm(reduced, env)


def normalize(term: Term, env: Mapping[str, PredType] | None = None) -> Term:
    """Exhaustively rewrite ``term``; terminates on well-typed input.

    ``env`` supplies types for free variables, which the record-splitting
    rule needs in order to recognise record-typed conditionals.
    """
    return _norm(term, dict(env or {}))


def is_pnf(term: Term) -> bool:
    """Membership in the boolean normal-form fragment: conditionals,
    operators, projections from a variable, and constants."""
    if isinstance(term, Const):
        return True
    if isinstance(term, Project):
        return isinstance(term.subject, Var)
    if isinstance(term, If):
        return is_pnf(term.cond) and is_pnf(term.then) and is_pnf(term.orelse)
    if isinstance(term, Op):
        return all(is_pnf(a) for a in term.args)
    return False


def is_normal_form(term: Term) -> bool:
    """Membership in the full normal-form grammar (superset of is_pnf)."""
    if isinstance(term, (Var, Const)):
        return True
    if isinstance(term, Abs):
        return is_normal_form(term.body)
    if isinstance(term, RecordLit):
        return all(is_normal_form(t) for _, t in term.fields)
    if isinstance(term, Project):
        return isinstance(term.subject, Var)
    if isinstance(term, If):
        return all(is_normal_form(t) for t in (term.cond, term.then, term.orelse))
    if isinstance(term, Op):
        return all(is_normal_form(a) for a in term.args)
    return False


# ---------------------------------------------------------------------------
# Predicates
# ---------------------------------------------------------------------------

CANONICAL_BINDER = "x"


@dataclass(frozen=True)
class Predicate:
    """A single-binder boolean function over a flat record row.

    ``dynamic`` marks predicates whose text mentioned late-bound
    parameters; such lenses must pass through a check lens before use.
    """

    binder: str
    body: Term
    row_type: Record
    dynamic: bool = field(default=False, compare=False)


def make_predicate(binder: str, body: Term, row_type: Record,
                   dynamic: bool = False) -> Predicate:
    """Typecheck, normalise and package a predicate body."""
    if not row_type.is_base_record():
        raise TypeCheckError(f"row type {row_type} is not a flat base record")
    ty = typecheck_term({binder: row_type}, body)
    if ty != BOOL:
        raise TypeCheckError(f"predicate body has type {ty}, expected bool")
    norm = normalize(body, {binder: row_type})
    if not is_pnf(norm):
        raise PredicateError(f"normalisation produced a non-flat body: {norm!r}")
    return Predicate(binder, norm, row_type, dynamic)


def true_predicate(row_type: Record) -> Predicate:
    return make_predicate(CANONICAL_BINDER, Const(True), row_type)


def rename_binder(pred: Predicate, new: str) -> Predicate:
    if pred.binder == new:
        return pred
    body = substitute(pred.body, pred.binder, Var(new))
    return Predicate(new, body, pred.row_type, pred.dynamic)


def alpha_equal(p: Predicate, q: Predicate) -> bool:
    """Syntactic equality after normalisation, up to binder renaming."""
    if p.row_type != q.row_type:
        return False
    return rename_binder(p, CANONICAL_BINDER).body == rename_binder(q, CANONICAL_BINDER).body


def satisfies(pred: Predicate, row: Mapping[str, Union[bool, int, str]]) -> bool:
    """True iff the row makes the predicate body evaluate to true."""
    missing = pred.row_type.label_set - set(row)
    if missing:
        raise PredicateError(f"row is missing fields {sorted(missing)}")
    return evaluate(pred.body, {pred.binder: dict(row)}) is True


def projected_labels(term: Term, binder: str) -> frozenset[str]:
    """Labels projected from ``binder`` anywhere in ``term``."""
    out: set[str] = set()

    def walk(t: Term):
        if isinstance(t, Project) and isinstance(t.subject, Var) \
                and t.subject.name == binder:
            out.add(t.label)
            return
        if isinstance(t, If):
            walk(t.cond); walk(t.then); walk(t.orelse)
        elif isinstance(t, Op):
            for a in t.args:
                walk(a)
        elif isinstance(t, Project):
            walk(t.subject)
        elif isinstance(t, RecordLit):
            for _, f in t.fields:
                walk(f)
        elif isinstance(t, App):
            walk(t.fn); walk(t.arg)
        elif isinstance(t, Abs):
            walk(t.body)

    walk(term)
    return frozenset(out)


def referenced_fields(pred: Predicate) -> frozenset[str]:
    """Labels projected from the binder anywhere in the (normalised) body."""
    return projected_labels(pred.body, pred.binder)


def ignores(pred: Predicate, labels) -> bool:
    """True iff no label in ``labels`` is referenced by the predicate."""
    return not (referenced_fields(pred) & frozenset(labels))


def substitute_projection(pred: Predicate, label: str, value) -> Predicate:
    """Replace every ``binder.label`` by the constant and drop the column."""
    if pred.row_type.has(label):
        expected = pred.row_type.get(label)
        if const_type(value) != expected:
            raise TypeCheckError(
                f"default {value!r} has type {const_type(value)}, "
                f"column {label!r} has type {expected}")

    def walk(t: Term) -> Term:
        if isinstance(t, Project) and isinstance(t.subject, Var) \
                and t.subject.name == pred.binder and t.label == label:
            return Const(value)
        if isinstance(t, If):
            return If(walk(t.cond), walk(t.then), walk(t.orelse))
        if isinstance(t, Op):
            return Op(t.op, tuple(walk(a) for a in t.args))
        return t

    return make_predicate(pred.binder, walk(pred.body),
                          pred.row_type.minus(label), pred.dynamic)


def conjoin(p: Predicate, q: Predicate) -> Predicate:
    """Conjunction of two predicates over the concatenated row type.

    A literally-true side is dropped so that sorts stay readable.
    """
    row_type = concat_record_types(p.row_type, q.row_type)
    dynamic = p.dynamic or q.dynamic
    pb = rename_binder(p, CANONICAL_BINDER).body
    qb = rename_binder(q, CANONICAL_BINDER).body
    if pb == Const(True):
        body = qb
    elif qb == Const(True):
        body = pb
    else:
        body = Op("&&", (pb, qb))
    return make_predicate(CANONICAL_BINDER, body, row_type, dynamic)


def conjuncts(body: Term) -> list[Term]:
    """Flatten nested top-level '&&' into a conjunct list."""
    if isinstance(body, Op) and body.op == "&&":
        return conjuncts(body.args[0]) + conjuncts(body.args[1])
    return [body]


# ---------------------------------------------------------------------------
# Finite value domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Domain:
    """Finite inhabitants per base type, for brute-force enumeration."""

    ints: tuple[int, ...] = (0, 1, 2)
    strings: tuple[str, ...] = ("a", "b")
    bools: tuple[bool, ...] = (False, True)

    def values(self, ty: Base):
        if ty == INT:
            return self.ints
        if ty == STRING:
            return self.strings
        if ty == BOOL:
            return self.bools
        raise PredicateError(f"no domain for type {ty}")

    def count(self, row_type: Record) -> int:
        n = 1
        for _, t in row_type.fields:
            n *= len(self.values(t))
        return n


def inhabitants(row_type: Record, domain: Domain) -> Iterator[dict]:
    """All rows of ``row_type`` with field values drawn from ``domain``."""
    labels = row_type.labels
    pools = [domain.values(row_type.get(l)) for l in labels]

    def rec(i: int, acc: dict):
        if i == len(labels):
            yield dict(acc)
            return
        for v in pools[i]:
            acc[labels[i]] = v
            yield from rec(i + 1, acc)

    yield from rec(0, {})


def semantically_equal(p: Predicate, q: Predicate, domain: Domain | None = None) -> bool:
    """Extensional equality over all rows in a finite domain."""
    if p.row_type.label_set != q.row_type.label_set:
        return False
    domain = domain or Domain()
    return all(satisfies(p, row) == satisfies(q, row)
               for row in inhabitants(p.row_type, domain))
