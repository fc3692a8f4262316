"""Command-line front end.

Exit codes: 0 success, 1 type error, 2 runtime constraint violation,
3 parse or I/O error.  Output is deterministic: rows print in canonical
order and intermediate view names are assigned left to right.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .dsl import (
    BuiltLens, DslSyntaxError, LensDefError, Workspace, build_workspace,
    parse_workspace,
)
from .engine import ConstraintViolationError, get, put
from .lenses import LensTypeError, prim_nodes, table_env
from .predicates import PredicateError, TypeCheckError
from .predparse import PredicateSyntaxError, UnboundParamError
from .relations import (
    DataFormatError, EngineError, MissingTableError, Relation, Store,
    check_constraints, dump_relation, encode_row, parse_relation, save_tables,
)
from .render import render_fds_inline, render_sql, render_text, sql_quote_ident
from .sequential import explain, flatten, verify_translation

OK, TYPE_ERROR, CONSTRAINT_ERROR, IO_ERROR = 0, 1, 2, 3


class _Exit(Exception):
    def __init__(self, code: int, message: str | None = None):
        super().__init__(message or "")
        self.code = code
        self.message = message


def _classify(e: Exception) -> int:
    if isinstance(e, LensDefError):
        return _classify(e.cause)
    if isinstance(e, (DslSyntaxError, PredicateSyntaxError, DataFormatError,
                      MissingTableError, OSError)):
        return IO_ERROR
    if isinstance(e, ConstraintViolationError):
        return CONSTRAINT_ERROR
    if isinstance(e, (LensTypeError, UnboundParamError, TypeCheckError,
                      PredicateError)):
        return TYPE_ERROR
    if isinstance(e, EngineError):
        return CONSTRAINT_ERROR
    return IO_ERROR


def _parse_params(pairs: list[str]) -> dict[str, str]:
    params = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise _Exit(IO_ERROR, f"bad --param {pair!r}, expected name=value")
        k, v = pair.split("=", 1)
        params[k] = v
    return params


def _load_workspace(defs_path: str) -> Workspace:
    try:
        text = Path(defs_path).read_text()
    except OSError as e:
        raise _Exit(IO_ERROR, f"cannot read {defs_path}: {e}")
    return parse_workspace(text, defs_path)


def _sort_line(built: BuiltLens) -> str:
    sort = built.sort
    cols = ", ".join(f"{l}: {t}" for l, t in sort.row_type.fields)
    tables = ", ".join(sorted(sort.schema))
    return (f"{built.name} : lens(({cols}); {render_text(sort.pred)}; "
            f"{render_fds_inline(sort.fds)}) with {{{tables}}}")


def _build_named(ws: Workspace, name: str | None, params) -> BuiltLens:
    if name is None:
        raise _Exit(IO_ERROR, "this command needs --lens NAME")
    if name not in ws.lens_names():
        raise _Exit(TYPE_ERROR, f"no lens named {name!r} in {ws.source}")
    target = None
    for built in build_workspace(ws, params):
        if built.name == name:
            target = built
            break
    assert target is not None
    if target.sort.needs_check:
        raise _Exit(TYPE_ERROR,
                    f"lens {name!r} uses parameters; wrap it in a check lens "
                    f"before get/put")
    return target


def _load_data(ws: Workspace, built: BuiltLens, data_dir: str | None) -> Store:
    if data_dir is None:
        raise _Exit(IO_ERROR, "this command needs --data DIR")
    env = table_env(built.expr)
    tables = {}
    for name in sorted(env):
        path = Path(data_dir) / f"{name}.jsonl"
        if not path.exists():
            raise _Exit(IO_ERROR, f"missing data file {path}")
        tables[name] = parse_relation(path.read_text(), env[name], str(path))
    return Store(tables)


def _check_sources(built: BuiltLens, store: Store) -> None:
    from .predicates import true_predicate
    for prim in prim_nodes(built.expr):
        rel = store.get_table(prim.table.name)
        violations = check_constraints(rel, true_predicate(prim.table.row_type),
                                       prim.fds)
        if violations:
            details = "\n".join(f"  {v.detail}" for v in violations)
            raise _Exit(CONSTRAINT_ERROR,
                        f"table {prim.table.name!r} violates its declared "
                        f"constraints:\n{details}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_check(args) -> int:
    ws = _load_workspace(args.defs)
    params = _parse_params(args.param)
    built_all: list[BuiltLens] = []
    try:
        for built in build_workspace(ws, params):
            print(_sort_line(built))
            built_all.append(built)
    except LensDefError as e:
        print(f"{e.name} : error: {e.cause}")
        return _classify(e)
    failed = False
    for built in built_all:
        report = verify_translation(built.expr, ws.schema_env)
        if not report.agreed:
            print(f"{built.name} : internal divergence between checkers: "
                  f"{report.divergence}")
            failed = True
    used = ws.referenced_lenses()
    for built in built_all:
        if built.name not in used and built.sort.needs_check:
            print(f"{built.name} : error: parameterized lens must be wrapped "
                  f"in check")
            failed = True
    return TYPE_ERROR if failed else OK


def cmd_get(args) -> int:
    ws = _load_workspace(args.defs)
    built = _build_named(ws, args.lens, _parse_params(args.param))
    store = _load_data(ws, built, args.data)
    _check_sources(built, store)
    view = get(built.expr, store)
    for row in view.canonical_rows():
        print(encode_row(row, view.labels))
    return OK


def cmd_put(args) -> int:
    ws = _load_workspace(args.defs)
    built = _build_named(ws, args.lens, _parse_params(args.param))
    store = _load_data(ws, built, args.data)
    _check_sources(built, store)
    if args.view is None:
        raise _Exit(IO_ERROR, "put needs --view FILE")
    try:
        view_text = Path(args.view).read_text()
    except OSError as e:
        raise _Exit(IO_ERROR, f"cannot read {args.view}: {e}")
    view = parse_relation(view_text, built.sort.row_type, args.view)
    new_store = put(built.expr, store, view, ws.schema_env)
    changed = []
    for name in sorted(table_env(built.expr)):
        old_rows = store.get_table(name).rows
        new_rows = new_store.get_table(name).rows
        added = len(new_rows - old_rows)
        removed = len(old_rows - new_rows)
        print(f"{name}: +{added} -{removed}")
        if old_rows != new_rows:
            changed.append(name)
    if args.dry_run:
        for name in sorted(table_env(built.expr)):
            print(f"-- {name}")
            sys.stdout.write(dump_relation(new_store.get_table(name)))
    else:
        save_tables(Path(args.data), new_store, changed)
    return OK


def cmd_explain(args) -> int:
    ws = _load_workspace(args.defs)
    built = _build_named(ws, args.lens, _parse_params(args.param))
    for line in explain(built.expr, ws.schema_env):
        print(line)
    return OK


def cmd_sql(args) -> int:
    ws = _load_workspace(args.defs)
    built = _build_named(ws, args.lens, _parse_params(args.param))
    schema, _, _ = flatten(built.expr)
    cols = ", ".join(sql_quote_ident(l) for l in built.sort.row_type.labels)
    tables = " NATURAL JOIN ".join(sql_quote_ident(t) for t in schema)
    print(f"SELECT {cols} FROM {tables} WHERE {render_sql(built.sort.pred)}")
    return OK


# ---------------------------------------------------------------------------

def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="lensdb",
        description="Typecheck and run composable updatable views over "
                    "JSON-lines tables.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, needs in (
            ("check", cmd_check, ()),
            ("get", cmd_get, ("lens", "data")),
            ("put", cmd_put, ("lens", "data", "view", "dry_run")),
            ("explain", cmd_explain, ("lens",)),
            ("sql", cmd_sql, ("lens",))):
        p = sub.add_parser(name)
        p.add_argument("--defs", required=True, help="lens definition file")
        p.add_argument("--param", action="append", default=[],
                       metavar="NAME=VALUE", help="late-bound parameter")
        if "lens" in needs:
            p.add_argument("--lens", help="lens name to operate on")
        if "data" in needs:
            p.add_argument("--data", help="directory of <table>.jsonl files")
        if "view" in needs:
            p.add_argument("--view", help="JSON-lines file with the new view")
        if "dry_run" in needs:
            p.add_argument("--dry-run", action="store_true", dest="dry_run",
                           help="print resulting tables instead of writing")
        p.set_defaults(fn=fn)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _Exit as e:
        if e.message:
            print(e.message, file=sys.stderr)
        return e.code
    except (LensDefError, DslSyntaxError, PredicateSyntaxError, DataFormatError,
            MissingTableError, ConstraintViolationError, LensTypeError,
            UnboundParamError, TypeCheckError, PredicateError, EngineError) as e:
        print(str(e), file=sys.stderr)
        return _classify(e)
    except OSError as e:
        print(str(e), file=sys.stderr)
        return IO_ERROR


if __name__ == "__main__":
    sys.exit(main())
