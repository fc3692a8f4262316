"""Composable, statically checked updatable views over in-memory relations.

The pieces, bottom up: a typed predicate calculus with normalisation
(`predicates`, `predparse`, `render`), functional-dependency reasoning
(`fundeps`), the lens combinators and their typechecker (`lenses`), a
flatt→pipeline cross-checking translation (`sequential`), the runtime
get/put engine over JSON-lines stores (`relations`, `engine`), a small
definition-file language (`dsl`), and the ``lensdb`` command (`cli`).
"""

from .predicates import (
    BOOL, INT, STRING, Base, Record, Function,
    Var, Const, Abs, App, RecordLit, Project, If, Op, Term,
    Predicate, Domain, make_predicate, true_predicate, typecheck_term,
    evaluate, normalize, is_pnf, satisfies, referenced_fields, ignores,
    substitute_projection, conjoin, inhabitants, semantically_equal,
    PredicateError, TypeCheckError,
)
from .predparse import parse_predicate, PredicateSyntaxError, UnboundParamError
from .render import render_sql, render_text
from .fundeps import (
    FunDep, FunDeps, fundeps, empty_fds, closure, derives, outputs,
    is_tree_form, equivalent, parse_fds, render_fds,
)
from .lenses import (
    Table, Prim, Select, JoinDeleteLeft, Drop, Check, LensExpr, LensSort,
    LensTypeError, typecheck_lens, ljd_syntactic, dv_syntactic, ljd_oracle,
    dv_oracle, DomainTooLargeError,
)
from .sequential import (
    Id, Compose, SelectAs, JoinDlAs, DropAs, SeqLens, RelSort,
    flatten, typecheck_sequential, verify_translation, explain,
)
from .relations import (
    Relation, Store, relation, empty_relation, natural_join, restrict,
    check_constraints, revise, Violation, load_store, dump_relation,
)
from .engine import get, put, prepare, PreparedLens, ConstraintViolationError
from .dsl import parse_workspace, build_all, Workspace

__version__ = "0.1.0"
