"""Forward and backward evaluation of lens expressions over a store.

``get`` is structural: filter for select, natural join for the join lens,
projection for drop.  ``put`` pushes an updated view back down the tree,
revising rows the view no longer constrains so that functional
dependencies keep holding.  Every recursion level re-checks the incoming
view against that lens's sort; any violation aborts with the input store
untouched (puts are snapshot-in, snapshot-out).
"""

from __future__ import annotations

from typing import Mapping

from .lenses import (
    Check, Drop, JoinDeleteLeft, LensExpr, LensSort, Prim, Select, Table,
    typecheck_lens,
)
from .predicates import Record, satisfies
from .relations import (
    EngineError, Relation, Store, Violation, check_constraints, difference,
    natural_join, relation, restrict, revise, union_rows,
)


class ConstraintViolationError(EngineError):
    def __init__(self, site: str, violations: list[Violation]):
        lines = "; ".join(v.detail for v in violations[:3])
        super().__init__(f"constraint violation at {site}: {lines}")
        self.site = site
        self.violations = violations


def get(expr: LensExpr, store: Store) -> Relation:
    """Evaluate the view defined by ``expr`` against ``store``."""
    if isinstance(expr, Prim):
        rel = store.get_table(expr.table.name)
        if rel.row_type.label_set != expr.table.row_type.label_set:
            raise EngineError(
                f"table {expr.table.name!r} columns {sorted(rel.labels)} do not "
                f"match the declared {sorted(expr.table.row_type.labels)}")
        return rel
    if isinstance(expr, Select):
        sub = get(expr.underlying, store)
        labels = sub.labels
        keep = frozenset(row for row in sub.rows
                         if satisfies(expr.pred, dict(zip(labels, row))))
        return Relation(sub.row_type, keep)
    if isinstance(expr, JoinDeleteLeft):
        return natural_join(get(expr.left, store), get(expr.right, store))
    if isinstance(expr, Drop):
        sub = get(expr.underlying, store)
        return restrict(sub, set(sub.labels) - {expr.label})
    if isinstance(expr, Check):
        return get(expr.underlying, store)
    raise EngineError(f"cannot evaluate lens expression {expr!r}")


def put(expr: LensExpr, store: Store, view: Relation,
        schema_env: Mapping[str, Record] | None = None) -> Store:
    """Push ``view`` back through ``expr``, returning the updated store."""
    return prepare(expr, schema_env).put(store, view)


class PreparedLens:
    """A typechecked lens expression ready for repeated get/put calls."""

    def __init__(self, expr: LensExpr, sorts: dict[int, "LensSort"]):
        self.expr = expr
        self.sorts = sorts
        self.sort = sorts[id(expr)]

    def get(self, store: Store) -> Relation:
        return get(self.expr, store)

    def put(self, store: Store, view: Relation) -> Store:
        return _put(self.expr, store, view, self.sorts, "lens")


def prepare(expr: LensExpr,
            schema_env: Mapping[str, Record] | None = None) -> PreparedLens:
    sorts: dict[int, LensSort] = {}
    _sort_tree(expr, schema_env, sorts)
    return PreparedLens(expr, sorts)


def _sort_tree(expr: LensExpr, schema_env, sorts: dict[int, "LensSort"]) -> None:
    """Typecheck once and index every subexpression's sort by identity."""
    sorts[id(expr)] = typecheck_lens(expr, schema_env)
    if isinstance(expr, Select):
        _sort_tree(expr.underlying, schema_env, sorts)
    elif isinstance(expr, JoinDeleteLeft):
        _sort_tree(expr.left, schema_env, sorts)
        _sort_tree(expr.right, schema_env, sorts)
    elif isinstance(expr, (Drop, Check)):
        _sort_tree(expr.underlying, schema_env, sorts)


def _check_view(view: Relation, sort: LensSort, site: str) -> None:
    if view.row_type.label_set != sort.row_type.label_set:
        raise EngineError(
            f"view columns {sorted(view.labels)} do not match the lens rows "
            f"{sorted(sort.row_type.labels)}")
    violations = check_constraints(view, sort.pred, sort.fds)
    if violations:
        raise ConstraintViolationError(site, violations)


def _put(expr: LensExpr, store: Store, view: Relation,
         sorts: dict[int, LensSort], site: str) -> Store:
    sort = sorts[id(expr)]
    _check_view(view, sort, site)

    if isinstance(expr, Prim):
        aligned = Relation(expr.table.row_type, _align(view, expr.table.row_type))
        return store.with_table(expr.table.name, aligned)

    if isinstance(expr, Select):
        old = get(expr.underlying, store)
        labels = old.labels
        unselected = Relation(old.row_type, frozenset(
            row for row in old.rows
            if not satisfies(expr.pred, dict(zip(labels, row)))))
        revised = revise(unselected, view, sort.fds)
        kept = Relation(old.row_type, frozenset(
            row for row in revised.rows
            if not satisfies(expr.pred, dict(zip(labels, row)))))
        return _put(expr.underlying, store, union_rows(view, kept),
                    sorts, site + ".select")

    if isinstance(expr, JoinDeleteLeft):
        left_sort = sorts[id(expr.left)]
        right_sort = sorts[id(expr.right)]
        old_left = get(expr.left, store)
        old_right = get(expr.right, store)
        view_left = restrict(view, old_left.row_type.label_set)
        view_right = restrict(view, old_right.row_type.label_set)
        left0 = union_rows(view_left, revise(old_left, view_left, left_sort.fds))
        right0 = union_rows(view_right, revise(old_right, view_right, right_sort.fds))
        excess = difference(natural_join(left0, right0), view)
        left1 = difference(left0, restrict(excess, old_left.row_type.label_set))
        store = _put(expr.left, store, left1, sorts, site + ".join.left")
        return _put(expr.right, store, right0, sorts, site + ".join.right")

    if isinstance(expr, Drop):
        old = get(expr.underlying, store)
        sub_type = old.row_type
        drop_idx = list(sub_type.labels).index(expr.label)
        key_labels = sorted(expr.determined_by)
        key_idx = [list(sub_type.labels).index(l) for l in key_labels]
        old_value = {}
        for row in old.rows:
            old_value[tuple(row[i] for i in key_idx)] = row[drop_idx]
        extended = []
        for row in view.as_dicts():
            key = tuple(row[l] for l in key_labels)
            row[expr.label] = old_value.get(key, expr.default)
            extended.append(row)
        return _put(expr.underlying, store, relation(sub_type, extended),
                    sorts, site + ".drop")

    if isinstance(expr, Check):
        return _put(expr.underlying, store, view, sorts, site + ".check")

    raise EngineError(f"cannot put through lens expression {expr!r}")


def _align(view: Relation, row_type: Record) -> frozenset:
    if view.labels == row_type.labels:
        return view.rows
    idx = [view.labels.index(l) for l in row_type.labels]
    return frozenset(tuple(row[i] for i in idx) for row in view.rows)
