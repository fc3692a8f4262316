"""Flattening of composite lenses into named-view pipelines.

A composite lens tree is translated into a sequence of primitive stages,
each reading named relations and producing a fresh intermediate view
(``_v0``, ``_v1``, ... in left-to-right order).  The pipeline has its own
typechecker over relation sorts; ``verify_translation`` runs both
checkers and reports any divergence, which would indicate a bug rather
than a user error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

from .fundeps import (
    FunDep, FunDeps, closure, equivalent, is_tree_form, outputs, remove_output,
)
from .lenses import (
    Check, DEFAULT_VALUE_FAILURE, DROP_FD_VIOLATION, Drop, IGNORES_VIOLATION,
    JOIN_FD_VIOLATION, JoinDeleteLeft, LensExpr, LensSort, LensTypeError,
    LJD_FAILURE, NOT_TREE_FORM, Prim, SCHEMA_OVERLAP, Select, Table,
    TYPE_MISMATCH, UNIMPLEMENTED_VARIANT, UNKNOWN_COLUMN, UnsupportedJoin,
    dv_syntactic, ljd_syntactic, typecheck_lens,
)
from .predicates import (
    Domain, Predicate, Record, alpha_equal, concat_record_types, conjoin,
    const_type, referenced_fields, semantically_equal, substitute_projection,
    true_predicate, TypeCheckError,
)
from .render import render_const, render_fds_inline, render_text

Scalar = Union[bool, int, str]


# ---------------------------------------------------------------------------
# Pipeline syntax
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Id:
    pass


@dataclass(frozen=True)
class Compose:
    first: "SeqLens"
    second: "SeqLens"


@dataclass(frozen=True)
class SelectAs:
    src: str
    pred: Predicate
    dst: str


@dataclass(frozen=True)
class JoinDlAs:
    left: str
    right: str
    dst: str


@dataclass(frozen=True)
class DropAs:
    label: str
    determined_by: frozenset[str]
    default: Scalar
    src: str
    dst: str


SeqLens = Union[Id, Compose, SelectAs, JoinDlAs, DropAs]


@dataclass(frozen=True)
class RelSort:
    """Attribute set, restriction predicate and dependencies of a view."""
    attrs: frozenset[str]
    pred: Predicate
    fds: FunDeps


def stages(lens: SeqLens) -> list[SeqLens]:
    if isinstance(lens, Compose):
        return stages(lens.first) + stages(lens.second)
    return [lens]


# ---------------------------------------------------------------------------
# Flattening
# ---------------------------------------------------------------------------

class _Fresh:
    def __init__(self):
        self.n = 0

    def __call__(self) -> str:
        name = f"_v{self.n}"
        self.n += 1
        return name


def _trace(expr: LensExpr, fresh: _Fresh):
    """Returns (schema, seq lens, trace, view); trace pairs each stage with
    its source names and destination for rendering."""
    if isinstance(expr, Prim):
        name = expr.table.name
        return [name], Id(), [(Id(), (name,), name)], name
    if isinstance(expr, Select):
        schema, inner, trace, src = _trace(expr.underlying, fresh)
        dst = fresh()
        stage = SelectAs(src, expr.pred, dst)
        return schema, Compose(inner, stage), trace + [(stage, (src,), dst)], dst
    if isinstance(expr, JoinDeleteLeft):
        lschema, li, ltrace, lview = _trace(expr.left, fresh)
        rschema, ri, rtrace, rview = _trace(expr.right, fresh)
        dst = fresh()
        stage = JoinDlAs(lview, rview, dst)
        return (lschema + rschema, Compose(Compose(li, ri), stage),
                ltrace + rtrace + [(stage, (lview, rview), dst)], dst)
    if isinstance(expr, Drop):
        schema, inner, trace, src = _trace(expr.underlying, fresh)
        dst = fresh()
        stage = DropAs(expr.label, expr.determined_by, expr.default, src, dst)
        return schema, Compose(inner, stage), trace + [(stage, (src,), dst)], dst
    if isinstance(expr, Check):
        return _trace(expr.underlying, fresh)
    if isinstance(expr, UnsupportedJoin):
        raise LensTypeError(UNIMPLEMENTED_VARIANT, "flatten",
                            f"join variant {expr.variant!r} is not implemented")
    if isinstance(expr, Table):
        raise LensTypeError(TYPE_MISMATCH, "flatten",
                            f"table {expr.name!r} must be wrapped in a lens primitive")
    raise LensTypeError(TYPE_MISMATCH, "flatten", f"unknown expression {expr!r}")


def flatten(expr: LensExpr) -> tuple[tuple[str, ...], SeqLens, str]:
    """Translate a lens tree into (source schema, pipeline, view name)."""
    schema, lens, _, view = _trace(expr, _Fresh())
    return tuple(schema), lens, view


def source_sorts(expr: LensExpr) -> dict[str, RelSort]:
    """Initial relation sorts for every base table under ``expr``."""
    sorts: dict[str, RelSort] = {}

    def walk(e: LensExpr):
        if isinstance(e, Prim):
            labels = e.table.row_type.label_set
            stray = {a for d in e.fds.deps for a in d.attrs} - labels
            if stray:
                raise LensTypeError(
                    UNKNOWN_COLUMN, "flatten",
                    f"dependencies mention columns {sorted(stray)} missing "
                    f"from table {e.table.name!r}")
            sorts.setdefault(e.table.name, RelSort(
                labels, true_predicate(e.table.row_type),
                FunDeps(e.fds.deps, labels)))
        elif isinstance(e, Select):
            walk(e.underlying)
        elif isinstance(e, (JoinDeleteLeft, UnsupportedJoin)):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, (Drop, Check)):
            walk(e.underlying)

    walk(expr)
    return sorts


# ---------------------------------------------------------------------------
# Pipeline typechecking
# ---------------------------------------------------------------------------

def typecheck_sequential(lens: SeqLens, sorts: Mapping[str, RelSort],
                         schema: tuple[str, ...] | None = None
                         ) -> tuple[dict[str, RelSort], tuple[frozenset[str], frozenset[str]]]:
    """Check a pipeline stage by stage.

    Returns the sort of every produced view plus the judgement
    (source schema, final schema).  ``schema`` lists the source relations
    (with multiplicity, so an illegally shared table is caught here).
    """
    if schema is None:
        schema = tuple(sorted(sorts))
    if len(set(schema)) != len(schema):
        dup = sorted({n for n in schema if schema.count(n) > 1})
        raise LensTypeError(SCHEMA_OVERLAP, "pipeline",
                            f"tables {dup} are used more than once")
    current: dict[str, RelSort] = {}
    for name in schema:
        if name not in sorts:
            raise LensTypeError(UNKNOWN_COLUMN, "pipeline",
                                f"no sort known for source relation {name!r}")
        current[name] = sorts[name]
    produced: dict[str, RelSort] = {}
    taken = set(schema)

    def consume(name: str, site: str) -> RelSort:
        if name not in current:
            raise LensTypeError(UNKNOWN_COLUMN, site,
                                f"relation {name!r} is not available here")
        return current.pop(name)

    def emit(name: str, sort: RelSort, site: str):
        if name in taken:
            raise LensTypeError(SCHEMA_OVERLAP, site,
                                f"view name {name!r} is not fresh")
        taken.add(name)
        current[name] = sort
        produced[name] = sort

    for i, stage in enumerate(stages(lens)):
        site = f"stage[{i}]"
        if isinstance(stage, Id):
            continue
        if isinstance(stage, SelectAs):
            s = consume(stage.src, site)
            if stage.pred.row_type != s.pred.row_type:
                raise LensTypeError(
                    TYPE_MISMATCH, site,
                    f"selection predicate is typed over {stage.pred.row_type}, "
                    f"the source rows are {s.pred.row_type}")
            if not is_tree_form(s.fds):
                raise LensTypeError(NOT_TREE_FORM, site,
                                    f"dependencies {s.fds} are not in tree form")
            outs = outputs(s.fds)
            bad = referenced_fields(s.pred) & outs
            if bad:
                raise LensTypeError(
                    IGNORES_VIOLATION, site,
                    "select predicate constrains outputs "
                    f"{{{', '.join(sorted(bad))}}}", labels=frozenset(bad))
            emit(stage.dst, RelSort(s.attrs, conjoin(s.pred, stage.pred), s.fds),
                 site)
            continue
        if isinstance(stage, JoinDlAs):
            sl = consume(stage.left, site)
            sr = consume(stage.right, site)
            try:
                row_type = concat_record_types(sl.pred.row_type, sr.pred.row_type)
            except TypeCheckError as e:
                raise LensTypeError(TYPE_MISMATCH, site, str(e))
            shared = sl.attrs & sr.attrs
            if not sr.attrs <= closure(sr.fds, shared):
                raise LensTypeError(
                    JOIN_FD_VIOLATION, site,
                    f"join key {{{', '.join(sorted(shared))}}} does not "
                    f"determine the right-hand columns under "
                    f"{sr.fds or '(no dependencies)'}")
            if not is_tree_form(sl.fds):
                raise LensTypeError(NOT_TREE_FORM, site,
                                    f"left dependencies {sl.fds} are not in tree form")
            if not is_tree_form(sr.fds):
                raise LensTypeError(NOT_TREE_FORM, site,
                                    f"right dependencies {sr.fds} are not in tree form")
            for which, s in (("left", sl), ("right", sr)):
                bad = referenced_fields(s.pred) & outputs(s.fds)
                if bad:
                    raise LensTypeError(
                        IGNORES_VIOLATION, site,
                        f"{which} predicate constrains outputs "
                        f"{{{', '.join(sorted(bad))}}}", labels=frozenset(bad))
            emit(stage.dst, RelSort(
                sl.attrs | sr.attrs, conjoin(sl.pred, sr.pred),
                FunDeps(sl.fds.deps | sr.fds.deps, row_type.label_set)), site)
            continue
        if isinstance(stage, DropAs):
            s = consume(stage.src, site)
            label = stage.label
            if label not in s.attrs:
                raise LensTypeError(UNKNOWN_COLUMN, site,
                                    f"dropped column {label!r} is not in the view")
            if not stage.determined_by:
                raise LensTypeError(DROP_FD_VIOLATION, site,
                                    "'determined by' needs at least one column")
            kept = s.pred.row_type.minus(label)
            reduced = remove_output(s.fds, label)
            if reduced is None:
                raise LensTypeError(
                    DROP_FD_VIOLATION, site,
                    f"column {label!r} appears on the left of a dependency")
            target = FunDeps(
                reduced.deps | {FunDep(stage.determined_by, frozenset((label,)))},
                s.fds.universe | stage.determined_by | {label})
            if not equivalent(s.fds, target):
                raise LensTypeError(
                    DROP_FD_VIOLATION, site,
                    f"dependencies do not prove "
                    f"{' '.join(sorted(stage.determined_by))} -> {label}")
            stray = stage.determined_by - kept.label_set
            if stray:
                raise LensTypeError(
                    UNKNOWN_COLUMN, site,
                    f"determining columns {sorted(stray)} are not kept view columns")
            col_type = s.pred.row_type.get(label)
            if const_type(stage.default) != col_type:
                raise LensTypeError(
                    TYPE_MISMATCH, site,
                    f"default {stage.default!r} has type "
                    f"{const_type(stage.default)}, column {label!r} has type "
                    f"{col_type}")
            dropped = Record(((label, col_type),))
            if not ljd_syntactic(s.pred, kept, dropped):
                raise LensTypeError(
                    LJD_FAILURE, site,
                    f"predicate links {label!r} with the kept columns; no "
                    f"lossless split exists syntactically")
            if not dv_syntactic(s.pred, {label: stage.default}):
                raise LensTypeError(
                    DEFAULT_VALUE_FAILURE, site,
                    f"default {stage.default!r} for {label!r} does not satisfy "
                    f"the predicate")
            emit(stage.dst, RelSort(
                kept.label_set, substitute_projection(s.pred, label, stage.default),
                FunDeps(reduced.deps, kept.label_set)), site)
            continue
        raise LensTypeError(TYPE_MISMATCH, site, f"unknown stage {stage!r}")

    return produced, (frozenset(schema), frozenset(current))


# ---------------------------------------------------------------------------
# Differential verification
# ---------------------------------------------------------------------------

@dataclass
class TranslationReport:
    functional_sort: LensSort | None
    functional_error: LensTypeError | None
    sequential_sort: RelSort | None
    sequential_error: LensTypeError | None
    divergence: str | None

    @property
    def agreed(self) -> bool:
        return self.divergence is None


def verify_translation(expr: LensExpr, schema_env: Mapping[str, Record] | None = None,
                       domain: Domain | None = None) -> TranslationReport:
    """Run both typecheckers and compare accept/reject and the final sorts."""
    f_sort = f_err = None
    try:
        f_sort = typecheck_lens(expr, schema_env)
    except LensTypeError as e:
        f_err = e

    s_sort = s_err = None
    try:
        schema, lens, view = flatten(expr)
        sources = source_sorts(expr)
        produced, (_, final) = typecheck_sequential(lens, sources, schema)
        s_sort = produced.get(view) or sources[view]
        if final != frozenset((view,)):
            s_err = LensTypeError(SCHEMA_OVERLAP, "pipeline",
                                  f"pipeline leaves extra views {sorted(final)}")
            s_sort = None
    except LensTypeError as e:
        s_err = e

    divergence = None
    if (f_sort is None) != (s_sort is None):
        side = "functional" if f_sort is None else "sequential"
        err = f_err or s_err
        divergence = f"only the {side} checker rejected: {err}"
    elif f_sort is not None and s_sort is not None:
        if frozenset(f_sort.row_type.labels) != s_sort.attrs:
            divergence = (f"attribute sets differ: "
                          f"{sorted(f_sort.row_type.labels)} vs {sorted(s_sort.attrs)}")
        elif not (equivalent(f_sort.fds, s_sort.fds)):
            divergence = f"dependencies differ: {f_sort.fds} vs {s_sort.fds}"
        elif not alpha_equal(f_sort.pred, s_sort.pred) \
                and not semantically_equal(f_sort.pred, s_sort.pred, domain):
            divergence = (f"predicates differ: {render_text(f_sort.pred)} vs "
                          f"{render_text(s_sort.pred)}")
    return TranslationReport(f_sort, f_err, s_sort, s_err, divergence)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def _sort_text(sort: RelSort) -> str:
    fds = render_fds_inline(sort.fds)
    return f"({', '.join(sorted(sort.attrs))}; {render_text(sort.pred)}; {fds})"


def explain(expr: LensExpr, schema_env: Mapping[str, Record] | None = None) -> list[str]:
    """One line per pipeline stage with the produced view's sort."""
    typecheck_lens(expr, schema_env)  # surface user-facing errors first
    all_schema, lens, trace, view = _trace(expr, _Fresh())
    sorts = source_sorts(expr)
    produced, _ = typecheck_sequential(lens, sorts, tuple(all_schema))
    lines = []
    for stage, srcs, dst in trace:
        sort = produced.get(dst) or sorts[dst]
        if isinstance(stage, Id):
            op = "id"
        elif isinstance(stage, SelectAs):
            op = f"select {render_text(stage.pred)}"
        elif isinstance(stage, JoinDlAs):
            op = "join_dl"
        else:
            op = (f"drop {stage.label} by "
                  f"{' '.join(sorted(stage.determined_by))} default "
                  f"{render_const(stage.default)}")
        lines.append(f"{', '.join(srcs)} --[{op}]--> {dst} : {_sort_text(sort)}")
    return lines
