"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
"""

import itertools
import random
import subprocess
import sys
import time
from pathlib import Path

import pytest

from lensdb.dsl import LensDefError, build_all, parse_workspace
from lensdb.engine import get, prepare
from lensdb.fundeps import FunDep, FunDeps, derives, fundeps
from lensdb.lenses import (
    Drop, JoinDeleteLeft, LensTypeError, Prim, Select, Table, dv_oracle,
    dv_syntactic, ljd_oracle, ljd_syntactic, typecheck_lens,
)
from lensdb.predicates import (
    BOOL, INT, STRING, Const, Domain, Op, Project, Record, Var, inhabitants,
    is_pnf, make_predicate, normalize, satisfies, true_predicate,
    typecheck_term, evaluate,
)
from lensdb.predparse import parse_predicate
from lensdb.relations import Relation, Store, check_constraints, relation
from lensdb.sequential import verify_translation

from fuzzers import LensFuzzer, TermFuzzer, result_type, split_predicate
from oracles import mask_of, saturate

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


def _music():
    ws = parse_workspace((FIXTURES / "music.lens").read_text(), "music.lens")
    tables = {}
    for name, table in ws.tables.items():
        from lensdb.relations import parse_relation
        path = FIXTURES / "data" / f"{name}.jsonl"
        tables[name] = parse_relation(path.read_text(), table.row_type, str(path))
    return ws, Store(tables)


# ---------------------------------------------------------------------------
# Criterion 1: the music-database worked examples
# ---------------------------------------------------------------------------

def test_criterion_1_music_examples():
    start = time.perf_counter()
    ws, store = _music()
    albums_prim = build_all(ws, {"albumName": "Galore"})["albumsLens"].expr

    galore = Select(albums_prim, parse_predicate('album == "Galore"',
                                                 ws.tables["albums"].row_type))
    view = get(galore, store)
    assert view.as_dicts() == [{"album": "Galore", "quantity": 1}]

    tracks_prim = build_all(ws)["tracksLens"].expr
    recent_or = Select(tracks_prim, parse_predicate(
        "year > 1990 || rating > 4", ws.tables["tracks"].row_type))
    dropped = get(Drop("year", frozenset({"track"}), 1990, recent_or), store)
    assert dropped.labels == ("track", "rating", "album")
    assert sorted(dropped.as_dicts(), key=str) == sorted([
        {"track": "Lovesong", "rating": 5, "album": "Galore"},
        {"track": "Lovesong", "rating": 5, "album": "Paris"},
        {"track": "Trust", "rating": 4, "album": "Wish"}], key=str)

    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    print(f"\nACCEPTANCE 1 PASS: music-db select and drop views exact "
          f"({elapsed:.2f}s)")


# ---------------------------------------------------------------------------
# Criterion 2: the ill-formed compositions are rejected by kind
# ---------------------------------------------------------------------------

def test_criterion_2_counterexample_rejection():
    start = time.perf_counter()
    ws, _ = _music()
    built = build_all(ws)
    albums_prim = built["albumsLens"].expr
    tracks_prim = built["tracksLens"].expr
    reviews_prim = built["reviewsLens"].expr
    joined = JoinDeleteLeft(tracks_prim, albums_prim)
    joined_rt = typecheck_lens(joined).row_type

    low = Select(joined, parse_predicate("quantity < rating", joined_rt))
    bad_select = Select(low, parse_predicate('album == "Galore"', joined_rt))
    with pytest.raises(LensTypeError) as exc:
        typecheck_lens(bad_select)
    assert exc.value.kind == "IgnoresViolation"

    with pytest.raises(LensTypeError) as exc:
        typecheck_lens(JoinDeleteLeft(reviews_prim, tracks_prim))
    assert exc.value.kind == "JoinFdViolation"

    recent_or = Select(tracks_prim, parse_predicate(
        "year > 1990 || rating > 4", ws.tables["tracks"].row_type))
    with pytest.raises(LensTypeError) as exc:
        typecheck_lens(Drop("year", frozenset({"track"}), 1990, recent_or))
    assert exc.value.kind == "LjdFailure"

    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    print(f"\nACCEPTANCE 2 PASS: all three ill-formed compositions rejected "
          f"with their named kinds ({elapsed:.2f}s)")


# ---------------------------------------------------------------------------
# Criterion 3: exhaustive round-tripping laws
# ---------------------------------------------------------------------------

T_TABLE = Table("t", Record((("k", INT), ("v", INT))))
S_TABLE = Table("s", Record((("k", INT), ("w", INT))))
LAW_DOMAIN = Domain(ints=(0, 1))


def _law_prims():
    t = Prim(T_TABLE, fundeps([FunDep(frozenset("k"), frozenset("v"))], ("k", "v")))
    s = Prim(S_TABLE, fundeps([FunDep(frozenset("k"), frozenset("w"))], ("k", "w")))
    return t, s


def _pred_pool(row_type: Record):
    pool = []
    for label in row_type.labels:
        pool.append(make_predicate("x", Op("==", (Project(Var("x"), label),
                                                  Const(0))), row_type))
    if {"v", "w"} <= set(row_type.labels):
        pool.append(make_predicate("x", Op("==", (Project(Var("x"), "v"),
                                                  Project(Var("x"), "w"))),
                                   row_type))
    return pool


def _law_pipelines(max_depth: int):
    """Every well-typed pipeline of the given depth over the two tables."""
    t, s = _law_prims()
    by_depth: list[list] = [[t, s]]
    seen = {t, s}

    def well_typed(expr):
        try:
            typecheck_lens(expr)
            return True
        except LensTypeError:
            return False

    for depth in range(1, max_depth + 1):
        layer = []
        for sub in by_depth[depth - 1]:
            row_type = typecheck_lens(sub).row_type
            for pred in _pred_pool(row_type):
                layer.append(Select(sub, pred))
            for label in row_type.labels:
                if label == "k":
                    continue
                for default in (0, 1):
                    layer.append(Drop(label, frozenset("k"), default, sub))
        for dl, dr in ((depth - 1, depth - 1), (depth - 1, 0), (0, depth - 1)):
            for a in by_depth[dl]:
                for b in by_depth[dr]:
                    layer.append(JoinDeleteLeft(a, b))
        fresh = [e for e in layer if e not in seen and well_typed(e)]
        seen.update(fresh)
        by_depth.append(fresh)
    return [e for layer in by_depth for e in layer]


def _valid_relations(row_type: Record, fds: FunDeps, pred, max_rows: int):
    rows = [row for row in inhabitants(row_type, LAW_DOMAIN)
            if satisfies(pred, row)]
    out = []
    for n in range(0, max_rows + 1):
        for combo in itertools.combinations(range(len(rows)), n):
            rel = relation(row_type, [rows[i] for i in combo])
            if not check_constraints(rel, pred, fds):
                out.append(rel)
    return out


def test_criterion_3_round_tripping_laws():
    start = time.perf_counter()
    t, s = _law_prims()
    t_sort, s_sort = typecheck_lens(t), typecheck_lens(s)
    t_states = _valid_relations(t_sort.row_type, t_sort.fds, t_sort.pred, 2)
    s_states = _valid_relations(s_sort.row_type, s_sort.fds, s_sort.pred, 2)
    stores = [Store({"t": rt, "s": rs})
              for rt in t_states for rs in s_states
              if len(rt) + len(rs) <= 4]
    pipelines = _law_pipelines(3)

    getput = putget = 0
    for expr in pipelines:
        lens = prepare(expr)
        views = _valid_relations(lens.sort.row_type, lens.sort.fds,
                                 lens.sort.pred, 3)
        needed = {name for name in ("t", "s")
                  if name in typecheck_lens(expr).schema}
        relevant = stores if needed == {"t", "s"} else [
            st for st in stores
          if all(len(st.get_table(n)) == 0 for n in {"t", "s"} - needed)]
        for store in relevant:
            view = lens.get(store)
            assert lens.put(store, view) == store, (expr, store)
            getput += 1
            for new_view in views:
                new_store = lens.put(store, new_view)
                assert lens.get(new_store) == new_view, (expr, store, new_view)
                putget += 1

    elapsed = time.perf_counter() - start
    assert elapsed < 300
    print(f"\nACCEPTANCE 3 PASS: {len(pipelines)} pipelines, "
          f"{getput} GetPut and {putget} PutGet instances, zero violations "
          f"({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# Criterion 4: normalisation at scale
# ---------------------------------------------------------------------------

def test_criterion_4_normalization_suite():
    start = time.perf_counter()
    row = Record((("i", INT), ("s", STRING), ("b", BOOL)))
    domain = Domain(ints=(0, 1, 2), strings=("a", "b"), bools=(False, True))
    envs = [dict(r) for r in inhabitants(row, domain)]
    rng = random.Random(20240811)
    checked = pnf_checked = 0
    for _ in range(10_000):
        fz = TermFuzzer(rng, row)
        ty = result_type(rng, row)
        term = fz.term(ty, rng.randint(0, 8))
        norm = normalize(term, {"x": row})  # strong normalisation: terminates
        if ty == BOOL:
            assert is_pnf(norm), term
            pnf_checked += 1
        for env in envs:
            assert evaluate(term, {"x": env}) == evaluate(norm, {"x": env}), term
        checked += 1
    elapsed = time.perf_counter() - start
    assert checked == 10_000
    assert elapsed < 120
    print(f"\nACCEPTANCE 4 PASS: 10000 fuzzed terms normalised "
          f"({pnf_checked} boolean, all in predicate normal form), evaluation "
          f"preserved on {len(envs)} environments each ({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# Criterion 5: derivability against exhaustive rule saturation
# ---------------------------------------------------------------------------

def _perm_tables(universe):
    n = len(universe)
    perms = list(itertools.permutations(range(n)))
    tables = []
    for perm in perms:
        table = [0] * (1 << n)
        for mask in range(1 << n):
            out = 0
            for i in range(n):
                if mask & (1 << i):
                    out |= 1 << perm[i]
            table[mask] = out
        tables.append(table)
    return tables


def _check_fd_family(universe, dep_masks, max_deps, cache):
    """derives() must match rule saturation for every F over this dep pool."""
    n = len(universe)
    perms = _perm_tables(universe)
    queries = [(l, r) for l in range(1, 1 << n) for r in range(1, 1 << n)]
    checked = 0
    for size in range(0, max_deps + 1):
        for combo in itertools.combinations(dep_masks, size):
            best = None
            for table in perms:
                key = frozenset((table[l], table[r]) for l, r in combo)
                if best is None or sorted(key) < sorted(best[0]):
                    best = (key, table)
            key, table = best
            if key not in cache:
                cache[key] = saturate(key, n)
            sat = cache[key]
            f = fundeps([FunDep(_attrs(l, universe), _attrs(r, universe))
                         for l, r in combo], universe)
            for lm, rm in queries:
                got = derives(f, FunDep(_attrs(lm, universe), _attrs(rm, universe)))
                assert got == ((table[lm], table[rm]) in sat), (combo, lm, rm)
                checked += 1
    return checked


def _attrs(mask, universe):
    return frozenset(universe[i] for i in range(len(universe))
                     if mask & (1 << i))


def test_criterion_5_armstrong_closure_vs_oracle():
    start = time.perf_counter()
    cache = {}

    # every dependency shape over three attributes
    u3 = ("a", "b", "c")
    deps3 = [(l, r) for l in range(1, 8) for r in range(1, 8)]
    checked3 = _check_fd_family(u3, deps3, 3, cache)

    # single-output dependencies over four attributes
    u4 = ("a", "b", "c", "d")
    deps4 = [(l, 1 << i) for l in range(1, 16) for i in range(4)
             if not l & (1 << i)]
    checked4 = _check_fd_family(u4, deps4, 3, cache)

    elapsed = time.perf_counter() - start
    assert elapsed < 60
    print(f"\nACCEPTANCE 5 PASS: derivability matched rule saturation on "
          f"{checked3 + checked4} queries "
          f"(3-attr full space + 4-attr single-output space, <=3 deps) "
          f"({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# Criterion 6: LJD/DV syntactic checks are sound against the oracles
# ---------------------------------------------------------------------------

def test_criterion_6_ljd_dv_soundness():
    start = time.perf_counter()
    rng = random.Random(20240812)
    domain = Domain()
    ljd_accepted = dv_accepted = 0
    for _ in range(5_000):
        pred, left, right = split_predicate(rng)
        if ljd_syntactic(pred, left, right):
            ljd_accepted += 1
            assert ljd_oracle(pred, left, right, domain), pred
        default = {l: rng.choice(domain.values(right.get(l)))
                   for l in right.labels}
        if dv_syntactic(pred, default):
            if any(satisfies(pred, row)
                   for row in inhabitants(pred.row_type, domain)):
                dv_accepted += 1
                assert dv_oracle(pred, left, default, domain), (pred, default)
    elapsed = time.perf_counter() - start
    assert elapsed < 120
    assert ljd_accepted > 500 and dv_accepted > 500  # the check is not vacuous
    print(f"\nACCEPTANCE 6 PASS: 5000 fuzzed predicates; "
          f"{ljd_accepted} lossless-split and {dv_accepted} default-value "
          f"acceptances all confirmed by the oracles ({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# Criterion 7: translation soundness by differential testing
# ---------------------------------------------------------------------------

def test_criterion_7_translation_soundness():
    start = time.perf_counter()
    rng = random.Random(20240813)
    accepted = rejected = 0
    for _ in range(500):
        expr = LensFuzzer(rng).expr(rng.randint(0, 3))
        report = verify_translation(expr)
        assert report.agreed, report.divergence
        if report.functional_sort is not None:
            accepted += 1
        else:
            rejected += 1
    elapsed = time.perf_counter() - start
    assert elapsed < 60
    assert accepted > 50 and rejected > 50
    print(f"\nACCEPTANCE 7 PASS: 500 fuzzed lens expressions, zero checker "
          f"divergences ({accepted} accepted / {rejected} rejected) "
          f"({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# Criterion 8: CLI golden outputs
# ---------------------------------------------------------------------------

GOLDEN_COMMANDS = {
    "check_music.txt": (0, ["check", "--defs", "music.lens",
                            "--param", "albumName=Galore"]),
    "check_bad_select.txt": (1, ["check", "--defs", "bad_select.lens"]),
    "check_bad_join.txt": (1, ["check", "--defs", "bad_join.lens"]),
    "check_bad_drop.txt": (1, ["check", "--defs", "bad_drop.lens"]),
    "get_byname.txt": (0, ["get", "--defs", "music.lens", "--lens", "byName",
                           "--data", "data", "--param", "albumName=Galore"]),
    "get_lowstock.txt": (0, ["get", "--defs", "music.lens", "--lens",
                             "lowStock", "--data", "data"]),
    "put_dryrun.txt": (0, ["put", "--defs", "music.lens", "--lens",
                           "galoreJoined", "--data", "data", "--view",
                           "galore_edited.jsonl", "--dry-run"]),
    "explain_recentnoyear.txt": (0, ["explain", "--defs", "music.lens",
                                     "--lens", "recentNoYear"]),
    "explain_lowstock.txt": (0, ["explain", "--defs", "music.lens",
                                 "--lens", "lowStock"]),
    "sql_byname.txt": (0, ["sql", "--defs", "music.lens", "--lens", "byName",
                           "--param", "albumName=Galore"]),
    "sql_lowstock.txt": (0, ["sql", "--defs", "music.lens",
                             "--lens", "lowStock"]),
    "sql_albums.txt": (0, ["sql", "--defs", "music.lens",
                           "--lens", "albumsLens"]),
}


def _run_cli(argv):
    return subprocess.run([sys.executable, "-m", "lensdb"] + argv,
                          cwd=FIXTURES, capture_output=True)


def test_criterion_8_cli_golden():
    start = time.perf_counter()
    data_before = {p.name: p.read_bytes() for p in (FIXTURES / "data").iterdir()}
    for name, (want_code, argv) in sorted(GOLDEN_COMMANDS.items()):
        expected = (GOLDEN / name).read_bytes()
        outputs = set()
        for _ in range(2):
            proc = _run_cli(argv)
            assert proc.returncode == want_code, (name, proc.stderr)
            outputs.add(proc.stdout)
        assert len(outputs) == 1, f"{name}: output varied between runs"
        assert outputs.pop() == expected, f"{name}: output differs from golden"
    data_after = {p.name: p.read_bytes() for p in (FIXTURES / "data").iterdir()}
    assert data_before == data_after  # dry-run and reads never write
    elapsed = time.perf_counter() - start
    print(f"\nACCEPTANCE 8 PASS: {len(GOLDEN_COMMANDS)} CLI invocations "
          f"byte-identical across runs and to the committed goldens "
          f"({elapsed:.1f}s)")
