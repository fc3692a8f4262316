"""Set-semantics relations and the stores they live in.

Rows are stored as value tuples aligned with the row type's declared
column order; duplicates collapse.  Canonical iteration sorts rows by
their values taken in alphabetical column order, which keeps every
serialisation byte-stable.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Union

from .fundeps import FunDeps, tree_order
from .predicates import Base, Predicate, Record, satisfies, true_predicate

Scalar = Union[bool, int, str]
Row = tuple  # values aligned with Relation.row_type.labels


class EngineError(Exception):
    pass


class UnknownColumnError(EngineError):
    pass


class MissingTableError(EngineError):
    def __init__(self, name: str):
        super().__init__(f"table {name!r} is not present in the store")
        self.name = name


class AmbiguousAuthorityError(EngineError):
    pass


class DataFormatError(EngineError):
    """Malformed data file contents (bad JSON or values off-schema)."""


@dataclass(frozen=True)
class Relation:
    row_type: Record
    rows: frozenset[Row]

    @property
    def labels(self) -> tuple[str, ...]:
        return self.row_type.labels

    def as_dicts(self) -> list[dict]:
        labels = self.labels
        return [dict(zip(labels, row)) for row in self.rows]

    def canonical_rows(self) -> list[dict]:
        """Rows as dicts, sorted by values in alphabetical column order."""
        order = sorted(self.labels)
        return sorted(self.as_dicts(), key=lambda r: tuple(r[l] for l in order))

    def __len__(self) -> int:
        return len(self.rows)


def relation(row_type: Record, rows: Iterable[Mapping[str, Scalar]]) -> Relation:
    """Build a relation from row mappings, validating shape and types."""
    labels = row_type.labels
    packed = set()
    for row in rows:
        extra = set(row) - set(labels)
        missing = set(labels) - set(row)
        if extra or missing:
            raise UnknownColumnError(
                f"row keys {sorted(row)} do not match columns {list(labels)}")
        for l in labels:
            _check_value(l, row[l], row_type.get(l))
        packed.add(tuple(row[l] for l in labels))
    return Relation(row_type, frozenset(packed))


def empty_relation(row_type: Record) -> Relation:
    return Relation(row_type, frozenset())


def _check_value(label: str, value, expected: Base):
    ok = (isinstance(value, bool) if expected.kind == "bool"
          else isinstance(value, int) and not isinstance(value, bool)
          if expected.kind == "int" else isinstance(value, str))
    if not ok:
        raise DataFormatError(
            f"column {label!r} expects {expected}, got {value!r}")


def natural_join(a: Relation, b: Relation) -> Relation:
    """Rows over the union columns whose projections appear in both sides."""
    shared = [l for l in a.labels if l in b.row_type.label_set]
    for l in shared:
        if a.row_type.get(l) != b.row_type.get(l):
            raise EngineError(
                f"shared column {l!r} has type {a.row_type.get(l)} on one "
                f"side and {b.row_type.get(l)} on the other")
    out_type = Record(a.row_type.fields
                      + tuple(f for f in b.row_type.fields if f[0] not in a.row_type.label_set))
    a_key = [a.labels.index(l) for l in shared]
    b_key = [b.labels.index(l) for l in shared]
    b_extra = [i for i, l in enumerate(b.labels) if l not in a.row_type.label_set]
    by_key: dict[tuple, list[Row]] = {}
    for row in b.rows:
        by_key.setdefault(tuple(row[i] for i in b_key), []).append(row)
    rows = set()
    for row in a.rows:
        for match in by_key.get(tuple(row[i] for i in a_key), ()):
            rows.add(row + tuple(match[i] for i in b_extra))
    return Relation(out_type, frozenset(rows))


def restrict(rel: Relation, labels: Iterable[str]) -> Relation:
    """Project to ``labels`` (kept in the relation's order), as a set."""
    keep = set(labels)
    unknown = keep - rel.row_type.label_set
    if unknown:
        raise UnknownColumnError(f"unknown columns {sorted(unknown)}")
    idx = [i for i, l in enumerate(rel.labels) if l in keep]
    out_type = rel.row_type.restrict(keep)
    return Relation(out_type, frozenset(tuple(row[i] for i in idx)
                                        for row in rel.rows))


# ---------------------------------------------------------------------------
# Constraint checking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str  # 'predicate' | 'fundep'
    detail: str


def check_constraints(rel: Relation, pred: Predicate, fds: FunDeps) -> list[Violation]:
    """Collect predicate failures and dependency-violating row pairs."""
    out: list[Violation] = []
    for row in rel.canonical_rows():
        if not satisfies(pred, row):
            out.append(Violation("predicate", f"row {_fmt_row(row)} fails the predicate"))
    labels = rel.labels
    for dep in sorted(fds.deps, key=str):
        lhs_idx = [labels.index(l) for l in sorted(dep.lhs)]
        rhs_idx = [labels.index(l) for l in sorted(dep.rhs)]
        seen: dict[tuple, tuple] = {}
        for row in sorted(rel.rows):
            key = tuple(row[i] for i in lhs_idx)
            val = tuple(row[i] for i in rhs_idx)
            if key in seen and seen[key] != val:
                out.append(Violation(
                    "fundep",
                    f"rows agree on {' '.join(sorted(dep.lhs))} but differ on "
                    f"{' '.join(sorted(dep.rhs))}: {val} vs {seen[key]}"))
            else:
                seen[key] = val
    return out


def _fmt_row(row: Mapping[str, Scalar]) -> str:
    return "{" + ", ".join(f"{k}={row[k]!r}" for k in sorted(row)) + "}"


# ---------------------------------------------------------------------------
# Relational revision
# ---------------------------------------------------------------------------

def revise(target: Relation, authority: Relation, fds: FunDeps) -> Relation:
    """Overwrite dependency outputs of target rows to agree with authority.

    Dependencies are processed root-to-leaf so chained rewrites cascade;
    an authority that itself violates the dependencies is rejected.
    """
    if not authority.row_type.label_set <= target.row_type.label_set:
        raise EngineError("authority columns must be a subset of the target's")
    for a in authority.labels:
        if authority.row_type.get(a) != target.row_type.get(a):
            raise EngineError(f"authority column {a!r} type mismatch")
    bad = check_constraints(authority, true_predicate(authority.row_type), fds)
    if bad:
        raise AmbiguousAuthorityError(
            "authority violates its own dependencies: " + bad[0].detail)

    labels = target.labels
    rows = [list(r) for r in target.rows]
    for lhs, rhs in tree_order(fds):
        lhs_sorted = sorted(lhs)
        rhs_sorted = sorted(rhs)
        lhs_t = [labels.index(l) for l in lhs_sorted]
        rhs_t = [labels.index(l) for l in rhs_sorted]
        lhs_a = [authority.labels.index(l) for l in lhs_sorted]
        rhs_a = [authority.labels.index(l) for l in rhs_sorted]
        lookup = {}
        for arow in authority.rows:
            lookup[tuple(arow[i] for i in lhs_a)] = [arow[i] for i in rhs_a]
        for row in rows:
            hit = lookup.get(tuple(row[i] for i in lhs_t))
            if hit is not None:
                for i, v in zip(rhs_t, hit):
                    row[i] = v
    return Relation(target.row_type, frozenset(tuple(r) for r in rows))


def union_rows(a: Relation, b: Relation) -> Relation:
    if a.row_type.label_set != b.row_type.label_set:
        raise EngineError("union of relations with different columns")
    if a.labels == b.labels:
        return Relation(a.row_type, a.rows | b.rows)
    idx = [b.labels.index(l) for l in a.labels]
    return Relation(a.row_type,
                    a.rows | {tuple(row[i] for i in idx) for row in b.rows})


def difference(a: Relation, b: Relation) -> Relation:
    if a.row_type.label_set != b.row_type.label_set:
        raise EngineError("difference of relations with different columns")
    if a.labels == b.labels:
        return Relation(a.row_type, a.rows - b.rows)
    idx = [b.labels.index(l) for l in a.labels]
    return Relation(a.row_type,
                    a.rows - {tuple(row[i] for i in idx) for row in b.rows})


# ---------------------------------------------------------------------------
# Stores and their JSON-lines serialisation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Store:
    tables: Mapping[str, Relation]

    def __post_init__(self):
        object.__setattr__(self, "tables", dict(self.tables))

    def get_table(self, name: str) -> Relation:
        if name not in self.tables:
            raise MissingTableError(name)
        return self.tables[name]

    def with_table(self, name: str, rel: Relation) -> "Store":
        tables = dict(self.tables)
        tables[name] = rel
        return Store(tables)

    def __eq__(self, other) -> bool:
        return isinstance(other, Store) and dict(self.tables) == dict(other.tables)


def encode_row(row: Mapping[str, Scalar], labels: Iterable[str]) -> str:
    return json.dumps({l: row[l] for l in labels}, separators=(",", ":"))


def dump_relation(rel: Relation) -> str:
    """Canonical JSON-lines text for a relation (one object per line)."""
    lines = [encode_row(row, rel.labels) for row in rel.canonical_rows()]
    return "".join(line + "\n" for line in lines)


def parse_relation(text: str, row_type: Record, source: str = "<data>") -> Relation:
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise DataFormatError(f"{source}:{lineno}: bad JSON ({e.msg})") from e
        if not isinstance(obj, dict):
            raise DataFormatError(f"{source}:{lineno}: expected an object")
        rows.append(obj)
    try:
        return relation(row_type, rows)
    except EngineError as e:
        raise DataFormatError(f"{source}: {e}") from e


def load_store(data_dir: Path, schemas: Mapping[str, Record]) -> Store:
    """Read ``<table>.jsonl`` for every schema entry."""
    tables = {}
    for name in sorted(schemas):
        path = Path(data_dir) / f"{name}.jsonl"
        if not path.exists():
            raise MissingTableError(name)
        tables[name] = parse_relation(path.read_text(), schemas[name], str(path))
    return Store(tables)


def save_tables(data_dir: Path, store: Store, names: Iterable[str]) -> None:
    """Atomically rewrite the named tables (write temp, then rename)."""
    for name in sorted(names):
        rel = store.get_table(name)
        path = Path(data_dir) / f"{name}.jsonl"
        tmp = path.with_suffix(".jsonl.tmp")
        tmp.write_text(dump_relation(rel))
        os.replace(tmp, path)
