"""Line-oriented definition files: tables and named lens pipelines.

Statement forms (one per line, ``#`` starts a comment)::

    table NAME (col: type, ...) keys (col ...) ...
    lens NAME = lens TABLE with { a b -> c; ... }
    lens NAME = lens TABLE default
    lens NAME = select from L where PRED
    lens NAME = join L with M [on COL | on (COLS)] delete_left
    lens NAME = drop COL determined by (COLS) default CONST from L
    lens NAME = check L

Every name must be defined before it is used.  Building a workspace
resolves definitions in order, parsing each predicate against the row
type of the lens it filters and typechecking as it goes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

from .fundeps import FunDep, FunDeps, parse_fds
from .lenses import (
    Check, Drop, JoinDeleteLeft, LensExpr, LensSort, Prim, Select, Table,
    UnsupportedJoin, typecheck_lens,
)
from .predicates import BASE_TYPES, Record
from .predparse import parse_predicate

Scalar = Union[bool, int, str]


class DslSyntaxError(Exception):
    def __init__(self, source: str, lineno: int, message: str):
        super().__init__(f"{source}:{lineno}: {message}")
        self.source = source
        self.lineno = lineno


class LensDefError(Exception):
    """A definition failed to build or typecheck."""

    def __init__(self, name: str, lineno: int, cause: Exception):
        super().__init__(f"lens {name!r} (line {lineno}): {cause}")
        self.name = name
        self.lineno = lineno
        self.cause = cause


@dataclass(frozen=True)
class LensStmt:
    name: str
    lineno: int
    form: str            # 'prim' | 'select' | 'join' | 'drop' | 'check'
    args: tuple


@dataclass
class Workspace:
    source: str
    tables: dict[str, Table]
    defs: list[LensStmt]

    @property
    def schema_env(self) -> dict[str, Record]:
        return {name: t.row_type for name, t in self.tables.items()}

    def lens_names(self) -> list[str]:
        return [d.name for d in self.defs]

    def referenced_lenses(self) -> set[str]:
        """Lens names used as an input of some other definition."""
        used: set[str] = set()
        for d in self.defs:
            if d.form == "select":
                used.add(d.args[0])
            elif d.form == "join":
                used.update((d.args[0], d.args[1]))
            elif d.form == "drop":
                used.add(d.args[3])
            elif d.form == "check":
                used.add(d.args[0])
        return used

    def roots(self) -> list[str]:
        used = self.referenced_lenses()
        return [d.name for d in self.defs if d.name not in used]


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_CONST_RE = r'(?:-?\d+|"(?:[^"\\]|\\.)*"|true|false)'

_TABLE_RE = re.compile(r"table\s+(\w+)\s*\(([^)]*)\)\s*(?:keys\s+(.+))?$")
_LENS_RE = re.compile(r"lens\s+(\w+)\s*=\s*(.+)$")
_PRIM_RE = re.compile(r"lens\s+(\w+)\s+with\s*\{(.*)\}$")
_DEFAULT_RE = re.compile(r"lens\s+(\w+)\s+default$")
_SELECT_RE = re.compile(r"select\s+from\s+(\w+)\s+where\s+(.+)$")
_JOIN_RE = re.compile(
    r"join\s+(\w+)\s+with\s+(\w+)"
    r"(?:\s+on\s+(\((?:[^)]*)\)|\w+))?"
    r"\s+(delete_left|delete_right|delete_both)$")
_DROP_RE = re.compile(
    r"drop\s+(\w+)\s+determined\s+by\s*\(([^)]*)\)\s+default\s+"
    rf"({_CONST_RE})\s+from\s+(\w+)$")
_CHECK_RE = re.compile(r"check\s+(\w+)$")


def _strip_comment(line: str) -> str:
    in_string = False
    i = 0
    while i < len(line):
        c = line[i]
        if in_string:
            if c == "\\":
                i += 1
            elif c == '"':
                in_string = False
        elif c == '"':
            in_string = True
        elif c == "#":
            return line[:i]
        i += 1
    return line


def _parse_const(text: str) -> Scalar:
    if text == "true":
        return True
    if text == "false":
        return False
    if text.startswith('"'):
        return text[1:-1].replace('\\"', '"').replace("\\\\", "\\")
    return int(text)


def parse_workspace(text: str, source: str = "<defs>") -> Workspace:
    tables: dict[str, Table] = {}
    defs: list[LensStmt] = []
    names: set[str] = set()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue

        m = _TABLE_RE.match(line)
        if m:
            name, cols_text, keys_text = m.groups()
            if name in tables:
                raise DslSyntaxError(source, lineno, f"table {name!r} is already defined")
            fields = []
            for part in cols_text.split(","):
                part = part.strip()
                if not part:
                    continue
                if ":" not in part:
                    raise DslSyntaxError(source, lineno,
                                         f"expected 'col: type', found {part!r}")
                col, ty = (s.strip() for s in part.split(":", 1))
                if ty not in BASE_TYPES:
                    raise DslSyntaxError(
                        source, lineno,
                        f"unknown type {ty!r} (expected bool, int or string)")
                fields.append((col, BASE_TYPES[ty]))
            if not fields:
                raise DslSyntaxError(source, lineno, "table needs at least one column")
            try:
                row_type = Record(tuple(fields))
            except Exception as e:
                raise DslSyntaxError(source, lineno, str(e))
            keys: list[frozenset[str]] = []
            if keys_text:
                groups = re.findall(r"\(([^)]*)\)", keys_text)
                if not groups or re.sub(r"\([^)]*\)|\s", "", keys_text):
                    raise DslSyntaxError(source, lineno,
                                         "keys must be parenthesised column groups")
                for g in groups:
                    cols = g.split()
                    stray = set(cols) - set(row_type.labels)
                    if stray or not cols:
                        raise DslSyntaxError(source, lineno,
                                             f"bad key columns {g!r}")
                    keys.append(frozenset(cols))
            tables[name] = Table(name, row_type, tuple(keys))
            continue

        m = _LENS_RE.match(line)
        if m:
            name, rhs = m.groups()
            if name in names:
                raise DslSyntaxError(source, lineno, f"lens {name!r} is already defined")

            def _need_lens(n: str) -> str:
                if n not in names:
                    raise DslSyntaxError(source, lineno,
                                         f"lens {n!r} is not defined yet")
                return n

            if (pm := _PRIM_RE.match(rhs)) is not None:
                table, fd_text = pm.groups()
                if table not in tables:
                    raise DslSyntaxError(source, lineno, f"unknown table {table!r}")
                defs.append(LensStmt(name, lineno, "prim", (table, fd_text)))
            elif (pm := _DEFAULT_RE.match(rhs)) is not None:
                table = pm.group(1)
                if table not in tables:
                    raise DslSyntaxError(source, lineno, f"unknown table {table!r}")
                if not tables[table].keys:
                    raise DslSyntaxError(
                        source, lineno,
                        f"table {table!r} declares no keys; spell the "
                        f"dependencies out with 'with {{ ... }}'")
                defs.append(LensStmt(name, lineno, "prim", (table, None)))
            elif (pm := _SELECT_RE.match(rhs)) is not None:
                defs.append(LensStmt(name, lineno, "select",
                                     (_need_lens(pm.group(1)), pm.group(2))))
            elif (pm := _JOIN_RE.match(rhs)) is not None:
                left, right, on_text, variant = pm.groups()
                on = None
                if on_text:
                    cols = on_text.strip("()").split()
                    if not cols:
                        raise DslSyntaxError(source, lineno, "empty 'on' clause")
                    on = frozenset(cols)
                defs.append(LensStmt(name, lineno, "join",
                                     (_need_lens(left), _need_lens(right), on, variant)))
            elif (pm := _DROP_RE.match(rhs)) is not None:
                col, by_text, const_text, src = pm.groups()
                by_cols = frozenset(by_text.split())
                if not by_cols:
                    raise DslSyntaxError(source, lineno,
                                         "'determined by' needs at least one column")
                defs.append(LensStmt(name, lineno, "drop",
                                     (col, by_cols, _parse_const(const_text),
                                      _need_lens(src))))
            elif (pm := _CHECK_RE.match(rhs)) is not None:
                defs.append(LensStmt(name, lineno, "check", (_need_lens(pm.group(1)),)))
            else:
                raise DslSyntaxError(source, lineno,
                                     f"unrecognised lens form {rhs!r}")
            names.add(name)
            continue

        raise DslSyntaxError(source, lineno, f"unrecognised statement {line!r}")

    return Workspace(source, tables, defs)


# ---------------------------------------------------------------------------
# Building
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BuiltLens:
    name: str
    expr: LensExpr
    sort: LensSort


def _default_fds(table: Table) -> FunDeps:
    labels = table.row_type.label_set
    deps = set()
    for key in table.keys:
        rest = labels - key
        if rest:
            deps.add(FunDep(key, rest))
    return FunDeps(frozenset(deps), labels)


def build_workspace(ws: Workspace, params: Mapping[str, Scalar] | None = None):
    """Yield ``BuiltLens`` per definition; raise ``LensDefError`` on failure."""
    params = params or {}
    built: dict[str, BuiltLens] = {}
    env = ws.schema_env
    for stmt in ws.defs:
        try:
            expr = _build_expr(ws, stmt, built, params)
            sort = typecheck_lens(expr, env)
        except Exception as e:
            raise LensDefError(stmt.name, stmt.lineno, e) from e
        result = BuiltLens(stmt.name, expr, sort)
        built[stmt.name] = result
        yield result


def build_all(ws: Workspace, params: Mapping[str, Scalar] | None = None
              ) -> dict[str, BuiltLens]:
    return {b.name: b for b in build_workspace(ws, params)}


def _build_expr(ws: Workspace, stmt: LensStmt, built: dict[str, BuiltLens],
                params: Mapping[str, Scalar]) -> LensExpr:
    if stmt.form == "prim":
        table_name, fd_text = stmt.args
        table = ws.tables[table_name]
        if fd_text is None:
            fds = _default_fds(table)
        else:
            fds = parse_fds(fd_text, table.row_type.label_set)
        return Prim(table, fds)
    if stmt.form == "select":
        src, pred_text = stmt.args
        sub = built[src]
        pred = parse_predicate(pred_text, sub.sort.row_type, params)
        return Select(sub.expr, pred)
    if stmt.form == "join":
        left, right, on, variant = stmt.args
        if variant != "delete_left":
            return UnsupportedJoin(built[left].expr, built[right].expr, variant, on)
        return JoinDeleteLeft(built[left].expr, built[right].expr, on)
    if stmt.form == "drop":
        col, by_cols, default, src = stmt.args
        return Drop(col, by_cols, default, built[src].expr)
    if stmt.form == "check":
        return Check(built[stmt.args[0]].expr)
    raise ValueError(f"unknown statement form {stmt.form!r}")
