"""Compositional lens language and its typechecker.

A lens expression is a tree of combinators over named tables: a primitive
lens with declared functional dependencies, selection by predicate,
delete-left join, a column drop with a default value, and a check marker
for lenses built from late-bound parameters.  ``typecheck_lens`` computes
the sort (schema, row type, restriction predicate, dependencies) or raises
``LensTypeError`` naming the premise that failed.

The drop combinator's finer predicate conditions come in two forms: fast
syntactic approximations over top-level conjunctions (sound, incomplete)
and brute-force finite-domain oracles used to validate them in tests.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Mapping, Union

from .fundeps import (
    FunDep, FunDeps, closure, equivalent, is_tree_form, outputs, remove_output,
)
from .predicates import (
    Domain, Predicate, Record, concat_record_types, conjoin, conjuncts,
    const_type, evaluate, ignores, inhabitants, projected_labels,
    referenced_fields, satisfies, substitute_projection, true_predicate,
)

Scalar = Union[bool, int, str]


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Table:
    """Handle to a named base table."""
    name: str
    row_type: Record
    keys: tuple[frozenset[str], ...] = ()


@dataclass(frozen=True)
class Prim:
    """Primitive lens over a table, with declared functional dependencies."""
    table: Table
    fds: FunDeps


@dataclass(frozen=True)
class Select:
    underlying: "LensExpr"
    pred: Predicate


@dataclass(frozen=True)
class JoinDeleteLeft:
    left: "LensExpr"
    right: "LensExpr"
    on: frozenset[str] | None = None  # surface annotation, validated only


@dataclass(frozen=True)
class Drop:
    label: str
    determined_by: frozenset[str]
    default: Scalar
    underlying: "LensExpr"


@dataclass(frozen=True)
class Check:
    underlying: "LensExpr"


@dataclass(frozen=True)
class UnsupportedJoin:
    """Reserved join variants; parsed but rejected by the typechecker."""
    left: "LensExpr"
    right: "LensExpr"
    variant: str
    on: frozenset[str] | None = None


LensExpr = Union[Table, Prim, Select, JoinDeleteLeft, Drop, Check, UnsupportedJoin]


@dataclass(frozen=True)
class LensSort:
    """Schema names, row type, restriction predicate and dependencies."""
    schema: frozenset[str]
    row_type: Record
    pred: Predicate
    fds: FunDeps
    needs_check: bool = False


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

NOT_TREE_FORM = "NotTreeForm"
IGNORES_VIOLATION = "IgnoresViolation"
JOIN_FD_VIOLATION = "JoinFdViolation"
DROP_FD_VIOLATION = "DropFdViolation"
SCHEMA_OVERLAP = "SchemaOverlap"
LJD_FAILURE = "LjdFailure"
DEFAULT_VALUE_FAILURE = "DefaultValueFailure"
UNKNOWN_COLUMN = "UnknownColumn"
TYPE_MISMATCH = "TypeMismatch"
UNIMPLEMENTED_VARIANT = "UnimplementedVariant"


class LensTypeError(Exception):
    def __init__(self, kind: str, site: str, detail: str,
                 labels: frozenset[str] = frozenset()):
        super().__init__(f"{kind} at {site}: {detail}")
        self.kind = kind
        self.site = site
        self.detail = detail
        self.labels = labels


class DomainTooLargeError(Exception):
    pass


def oracle_bound() -> int:
    value = os.environ.get("LENSDB_ORACLE_BOUND")
    return int(value) if value else 10 ** 6


# ---------------------------------------------------------------------------
# Syntactic drop-lens checks and their brute-force oracles
# ---------------------------------------------------------------------------

def ljd_syntactic(pred: Predicate, r1: Record, r2: Record) -> bool:
    """Each top-level conjunct must live entirely on one side of the split."""
    left, right = r1.label_set, r2.label_set
    for part in conjuncts(pred.body):
        refs = projected_labels(part, pred.binder)
        if not (refs <= left or refs <= right):
            return False
    return True


def dv_syntactic(pred: Predicate, default_record: Mapping[str, Scalar]) -> bool:
    """Conjuncts on the dropped side must hold at the default value."""
    dropped = frozenset(default_record)
    for part in conjuncts(pred.body):
        refs = projected_labels(part, pred.binder)
        if not refs & dropped:
            continue
        if not refs <= dropped:
            return False
        if evaluate(part, {pred.binder: dict(default_record)}) is not True:
            return False
    return True


def ljd_oracle(pred: Predicate, r1: Record, r2: Record,
               domain: Domain | None = None, bound: int | None = None) -> bool:
    """Exhaustive lossless-split check over a finite domain.

    The split is lossless exactly when the satisfying set is a full
    cartesian product of its side projections.
    """
    domain = domain or Domain()
    bound = bound if bound is not None else oracle_bound()
    if domain.count(r1) * domain.count(r2) > bound:
        raise DomainTooLargeError(
            f"{domain.count(r1)} x {domain.count(r2)} rows exceed bound {bound}")
    labels1, labels2 = r1.labels, r2.labels
    sat_pairs = set()
    for left in inhabitants(r1, domain):
        for right in inhabitants(r2, domain):
            if satisfies(pred, {**left, **right}):
                sat_pairs.add((tuple(left[l] for l in labels1),
                               tuple(right[l] for l in labels2)))
    lefts = {a for a, _ in sat_pairs}
    rights = {b for _, b in sat_pairs}
    return len(sat_pairs) == len(lefts) * len(rights)


def dv_oracle(pred: Predicate, kept: Record, default_record: Mapping[str, Scalar],
              domain: Domain | None = None, bound: int | None = None) -> bool:
    """True iff the predicate is satisfiable and some kept-side row
    combines with the default into a satisfying row."""
    domain = domain or Domain()
    bound = bound if bound is not None else oracle_bound()
    if domain.count(pred.row_type) > bound:
        raise DomainTooLargeError(
            f"{domain.count(pred.row_type)} rows exceed bound {bound}")
    nonempty = any(satisfies(pred, row) for row in inhabitants(pred.row_type, domain))
    if not nonempty:
        return False
    return any(satisfies(pred, {**row, **default_record})
               for row in inhabitants(kept, domain))


# ---------------------------------------------------------------------------
# Typechecking
# ---------------------------------------------------------------------------

def table_env(expr: LensExpr) -> dict[str, Record]:
    """Row types of every table mentioned in the expression."""
    env: dict[str, Record] = {}

    def walk(e: LensExpr):
        if isinstance(e, Table):
            env.setdefault(e.name, e.row_type)
        elif isinstance(e, Prim):
            walk(e.table)
        elif isinstance(e, Select):
            walk(e.underlying)
        elif isinstance(e, (JoinDeleteLeft, UnsupportedJoin)):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, (Drop, Check)):
            walk(e.underlying)

    walk(expr)
    return env


def prim_nodes(expr: LensExpr) -> list[Prim]:
    """Primitive lens leaves in left-to-right order."""
    out: list[Prim] = []

    def walk(e: LensExpr):
        if isinstance(e, Prim):
            out.append(e)
        elif isinstance(e, Select):
            walk(e.underlying)
        elif isinstance(e, (JoinDeleteLeft, UnsupportedJoin)):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, (Drop, Check)):
            walk(e.underlying)

    walk(expr)
    return out


def typecheck_lens(expr: LensExpr,
                   schema_env: Mapping[str, Record] | None = None) -> LensSort:
    """Compute the sort of a lens expression or raise ``LensTypeError``."""
    env = dict(schema_env) if schema_env is not None else table_env(expr)
    return _typecheck(expr, env, "lens")


def _typecheck(expr: LensExpr, env: Mapping[str, Record], site: str) -> LensSort:
    if isinstance(expr, Table):
        raise LensTypeError(
            TYPE_MISMATCH, site,
            f"table {expr.name!r} must be wrapped in a lens primitive")

    if isinstance(expr, Prim):
        table = expr.table
        if table.name not in env:
            raise LensTypeError(UNKNOWN_COLUMN, site,
                                f"table {table.name!r} is not declared")
        if env[table.name] != table.row_type:
            raise LensTypeError(
                TYPE_MISMATCH, site,
                f"table {table.name!r} is used at a row type that does not "
                f"match its declaration")
        labels = table.row_type.label_set
        stray = {a for d in expr.fds.deps for a in d.attrs} - labels
        if stray:
            raise LensTypeError(
                UNKNOWN_COLUMN, site,
                f"dependencies mention columns {sorted(stray)} missing from "
                f"table {table.name!r}")
        fds = FunDeps(expr.fds.deps, labels)
        return LensSort(frozenset((table.name,)), table.row_type,
                        true_predicate(table.row_type), fds)

    if isinstance(expr, Select):
        sub = _typecheck(expr.underlying, env, site + ".select")
        if expr.pred.row_type != sub.row_type:
            raise LensTypeError(
                TYPE_MISMATCH, site,
                f"selection predicate is typed over {expr.pred.row_type}, "
                f"the underlying lens has rows {sub.row_type}")
        if not is_tree_form(sub.fds):
            raise LensTypeError(NOT_TREE_FORM, site,
                                f"dependencies {sub.fds} are not in tree form")
        outs = outputs(sub.fds)
        if not ignores(sub.pred, outs):
            bad = referenced_fields(sub.pred) & outs
            raise LensTypeError(
                IGNORES_VIOLATION, site,
                "select predicate constrains outputs "
                f"{{{', '.join(sorted(bad))}}}", labels=frozenset(bad))
        return LensSort(sub.schema, sub.row_type, conjoin(sub.pred, expr.pred),
                        sub.fds, sub.needs_check or expr.pred.dynamic)

    if isinstance(expr, JoinDeleteLeft):
        left = _typecheck(expr.left, env, site + ".join.left")
        right = _typecheck(expr.right, env, site + ".join.right")
        shared = left.row_type.label_set & right.row_type.label_set
        for l in sorted(shared):
            if left.row_type.get(l) != right.row_type.get(l):
                raise LensTypeError(
                    TYPE_MISMATCH, site,
                    f"join column {l!r} has type {left.row_type.get(l)} on the "
                    f"left and {right.row_type.get(l)} on the right")
        if expr.on is not None:
            stray = expr.on - (left.row_type.label_set | right.row_type.label_set)
            if stray:
                raise LensTypeError(UNKNOWN_COLUMN, site,
                                    f"unknown join columns {sorted(stray)}")
            if expr.on != shared:
                raise LensTypeError(
                    TYPE_MISMATCH, site,
                    f"'on' names {sorted(expr.on)} but the shared columns are "
                    f"{sorted(shared)}")
        if not right.row_type.label_set <= closure(right.fds, shared):
            raise LensTypeError(
                JOIN_FD_VIOLATION, site,
                f"join key {{{', '.join(sorted(shared))}}} does not determine "
                f"the right-hand columns under {right.fds or '(no dependencies)'}")
        if not is_tree_form(left.fds):
            raise LensTypeError(NOT_TREE_FORM, site,
                                f"left dependencies {left.fds} are not in tree form")
        if not is_tree_form(right.fds):
            raise LensTypeError(NOT_TREE_FORM, site,
                                f"right dependencies {right.fds} are not in tree form")
        for which, sort in (("left", left), ("right", right)):
            outs = outputs(sort.fds)
            if not ignores(sort.pred, outs):
                bad = referenced_fields(sort.pred) & outs
                raise LensTypeError(
                    IGNORES_VIOLATION, site,
                    f"{which} predicate constrains outputs "
                    f"{{{', '.join(sorted(bad))}}}", labels=frozenset(bad))
        if left.schema & right.schema:
            raise LensTypeError(
                SCHEMA_OVERLAP, site,
                f"tables {sorted(left.schema & right.schema)} appear on both "
                f"sides of the join")
        row_type = concat_record_types(left.row_type, right.row_type)
        fds = FunDeps(left.fds.deps | right.fds.deps, row_type.label_set)
        return LensSort(left.schema | right.schema, row_type,
                        conjoin(left.pred, right.pred), fds,
                        left.needs_check or right.needs_check)

    if isinstance(expr, Drop):
        sub = _typecheck(expr.underlying, env, site + ".drop")
        label = expr.label
        if not sub.row_type.has(label):
            raise LensTypeError(UNKNOWN_COLUMN, site,
                                f"dropped column {label!r} is not in the view")
        if not expr.determined_by:
            raise LensTypeError(DROP_FD_VIOLATION, site,
                                "'determined by' needs at least one column")
        kept = sub.row_type.minus(label)
        reduced = remove_output(sub.fds, label)
        if reduced is None:
            raise LensTypeError(
                DROP_FD_VIOLATION, site,
                f"column {label!r} appears on the left of a dependency")
        target = FunDeps(
            reduced.deps | {FunDep(expr.determined_by, frozenset((label,)))},
            sub.fds.universe | expr.determined_by | {label})
        if not equivalent(sub.fds, target):
            raise LensTypeError(
                DROP_FD_VIOLATION, site,
                f"dependencies do not prove {' '.join(sorted(expr.determined_by))} "
                f"-> {label}")
        stray = expr.determined_by - kept.label_set
        if stray:
            raise LensTypeError(
                UNKNOWN_COLUMN, site,
                f"determining columns {sorted(stray)} are not kept view columns")
        col_type = sub.row_type.get(label)
        if const_type(expr.default) != col_type:
            raise LensTypeError(
                TYPE_MISMATCH, site,
                f"default {expr.default!r} has type {const_type(expr.default)}, "
                f"column {label!r} has type {col_type}")
        dropped = Record(((label, col_type),))
        if not ljd_syntactic(sub.pred, kept, dropped):
            raise LensTypeError(
                LJD_FAILURE, site,
                f"predicate links {label!r} with the kept columns; no "
                f"lossless split exists syntactically")
        if not dv_syntactic(sub.pred, {label: expr.default}):
            raise LensTypeError(
                DEFAULT_VALUE_FAILURE, site,
                f"default {expr.default!r} for {label!r} does not satisfy the "
                f"predicate")
        new_pred = substitute_projection(sub.pred, label, expr.default)
        return LensSort(sub.schema, kept, new_pred,
                        FunDeps(reduced.deps, kept.label_set), sub.needs_check)

    if isinstance(expr, Check):
        sub = _typecheck(expr.underlying, env, site + ".check")
        return LensSort(sub.schema, sub.row_type, sub.pred, sub.fds,
                        needs_check=False)

    if isinstance(expr, UnsupportedJoin):
        raise LensTypeError(
            UNIMPLEMENTED_VARIANT, site,
            f"join variant {expr.variant!r} is reserved but not implemented; "
            f"use delete_left")

    raise LensTypeError(TYPE_MISMATCH, site, f"unknown lens expression {expr!r}")
