import pytest

from lensdb.engine import ConstraintViolationError, get, put
from lensdb.fundeps import FunDep, FunDeps
from lensdb.lenses import Check, Drop, JoinDeleteLeft, Prim, Select, Table
from lensdb.predicates import INT, STRING, Record
from lensdb.predparse import parse_predicate
from lensdb.relations import MissingTableError, Store, empty_relation, relation

ALBUMS = Table("albums", Record((("album", STRING), ("quantity", INT))))
TRACKS = Table("tracks", Record((("track", STRING), ("year", INT),
                                 ("rating", INT), ("album", STRING))))


def fds(universe, *deps):
    return FunDeps(frozenset(FunDep(frozenset(l.split()), frozenset(r.split()))
                             for l, r in deps), frozenset(universe.split()))


ALBUMS_PRIM = Prim(ALBUMS, fds("album quantity", ("album", "quantity")))
TRACKS_PRIM = Prim(TRACKS, fds("track year rating album", ("track", "year rating")))
JOINED = JoinDeleteLeft(TRACKS_PRIM, ALBUMS_PRIM)


def music_store():
    albums = relation(ALBUMS.row_type, [
        {"album": "Disintegration", "quantity": 6},
        {"album": "Show", "quantity": 3}, {"album": "Galore", "quantity": 1},
        {"album": "Paris", "quantity": 4}, {"album": "Wish", "quantity": 5}])
    tracks = relation(TRACKS.row_type, [
        {"track": "Lullaby", "year": 1989, "rating": 3, "album": "Galore"},
        {"track": "Lullaby", "year": 1989, "rating": 3, "album": "Show"},
        {"track": "Lovesong", "year": 1989, "rating": 5, "album": "Galore"},
        {"track": "Lovesong", "year": 1989, "rating": 5, "album": "Paris"},
        {"track": "Trust", "year": 1992, "rating": 4, "album": "Wish"}])
    return Store({"albums": albums, "tracks": tracks})


# ---------------------------------------------------------------------------
# get
# ---------------------------------------------------------------------------

def test_get_select_galore():
    pred = parse_predicate('album == "Galore"', ALBUMS.row_type)
    view = get(Select(ALBUMS_PRIM, pred), music_store())
    assert view.as_dicts() == [{"album": "Galore", "quantity": 1}]


def test_get_join_then_select():
    joined_rt = Record(TRACKS.row_type.fields + (("quantity", INT),))
    pred = parse_predicate("quantity < rating", joined_rt)
    view = get(Select(JOINED, pred), music_store())
    assert sorted(view.as_dicts(), key=str) == sorted([
        {"track": "Lullaby", "year": 1989, "rating": 3,
         "album": "Galore", "quantity": 1},
        {"track": "Lovesong", "year": 1989, "rating": 5,
         "album": "Galore", "quantity": 1},
        {"track": "Lovesong", "year": 1989, "rating": 5,
         "album": "Paris", "quantity": 4}], key=str)


def test_get_drop_projects_away_column():
    recent = Select(TRACKS_PRIM, parse_predicate(
        "year > 1990 || rating > 4", TRACKS.row_type))
    view = get(Drop("year", frozenset({"track"}), 1990, recent), music_store())
    assert view.labels == ("track", "rating", "album")
    assert sorted(view.as_dicts(), key=str) == sorted([
        {"track": "Lovesong", "rating": 5, "album": "Galore"},
        {"track": "Lovesong", "rating": 5, "album": "Paris"},
        {"track": "Trust", "rating": 4, "album": "Wish"}], key=str)


def test_get_missing_table():
    with pytest.raises(MissingTableError):
        get(ALBUMS_PRIM, Store({}))


# ---------------------------------------------------------------------------
# put
# ---------------------------------------------------------------------------

def test_put_prim_replaces_table():
    view = relation(ALBUMS.row_type, [{"album": "Solo", "quantity": 1}])
    new = put(ALBUMS_PRIM, music_store(), view)
    assert new.get_table("albums") == view


def test_put_rejects_constraint_violations():
    view = relation(ALBUMS.row_type, [{"album": "Solo", "quantity": 1},
                                      {"album": "Solo", "quantity": 2}])
    store = music_store()
    with pytest.raises(ConstraintViolationError):
        put(ALBUMS_PRIM, store, view)
    assert store == music_store()  # untouched


def test_put_select_update_propagates_via_revision():
    pred = parse_predicate('album == "Galore"', typeof_joined())
    lens = Select(JOINED, pred)
    store = music_store()
    view = get(lens, store)
    edited = [dict(r) for r in view.as_dicts()]
    for r in edited:
        if r["track"] == "Lovesong":
            r["rating"] = 4
    new = put(lens, store, relation(view.row_type, edited))
    ratings = {(r["track"], r["album"]): r["rating"]
               for r in new.get_table("tracks").as_dicts()}
    assert ratings[("Lovesong", "Galore")] == 4
    assert ratings[("Lovesong", "Paris")] == 4
    assert new.get_table("albums") == store.get_table("albums")


def typeof_joined():
    return Record(TRACKS.row_type.fields + (("quantity", INT),))


def test_put_select_insert_and_delete():
    pred = parse_predicate('album == "Galore"', ALBUMS.row_type)
    lens = Select(ALBUMS_PRIM, pred)
    store = music_store()
    new_view = relation(ALBUMS.row_type, [{"album": "Galore", "quantity": 2}])
    new = put(lens, store, new_view)
    albums = {r["album"]: r["quantity"] for r in new.get_table("albums").as_dicts()}
    assert albums["Galore"] == 2
    assert len(albums) == 5
    emptied = put(lens, store, empty_relation(ALBUMS.row_type))
    assert "Galore" not in {r["album"]
                            for r in emptied.get_table("albums").as_dicts()}


def test_put_join_delete_removes_left_row_only():
    store = music_store()
    view = get(JOINED, store)
    kept = [r for r in view.as_dicts()
            if not (r["track"] == "Lullaby" and r["album"] == "Show")]
    new = put(JOINED, store, relation(view.row_type, kept))
    tracks_left = {(r["track"], r["album"])
                   for r in new.get_table("tracks").as_dicts()}
    assert ("Lullaby", "Show") not in tracks_left
    assert len(tracks_left) == 4
    assert new.get_table("albums") == store.get_table("albums")


def test_put_join_insert_creates_both_sides():
    store = music_store()
    view = get(JOINED, store)
    rows = view.as_dicts() + [{"track": "Plainsong", "year": 1989, "rating": 5,
                               "album": "Disintegration", "quantity": 6}]
    new = put(JOINED, store, relation(view.row_type, rows))
    assert {"track": "Plainsong", "year": 1989, "rating": 5,
            "album": "Disintegration"} in new.get_table("tracks").as_dicts()
    assert get(JOINED, new) == relation(view.row_type, rows)


def test_put_drop_restores_old_column_values():
    recent = Select(TRACKS_PRIM, parse_predicate(
        "year > 1990 && rating >= 4", TRACKS.row_type))
    lens = Drop("year", frozenset({"track"}), 1991, recent)
    store = music_store()
    view = get(lens, store)
    assert view.as_dicts() == [{"track": "Trust", "rating": 4, "album": "Wish"}]
    rows = view.as_dicts() + [{"track": "Trust", "rating": 4, "album": "Show"}]
    new = put(lens, store, relation(view.row_type, rows))
    added = [r for r in new.get_table("tracks").as_dicts()
             if r["track"] == "Trust" and r["album"] == "Show"]
    assert added == [{"track": "Trust", "year": 1992, "rating": 4,
                      "album": "Show"}]  # year taken from the matching old row


def test_put_drop_uses_default_for_new_keys():
    recent = Select(TRACKS_PRIM, parse_predicate(
        "year > 1990 && rating >= 4", TRACKS.row_type))
    lens = Drop("year", frozenset({"track"}), 1991, recent)
    store = music_store()
    view = get(lens, store)
    rows = view.as_dicts() + [{"track": "New", "rating": 5, "album": "Wish"}]
    new = put(lens, store, relation(view.row_type, rows))
    added = [r for r in new.get_table("tracks").as_dicts() if r["track"] == "New"]
    assert added == [{"track": "New", "year": 1991, "rating": 5, "album": "Wish"}]


def test_put_through_check_recurses():
    pred = parse_predicate('album == "Galore"', ALBUMS.row_type)
    lens = Check(Select(ALBUMS_PRIM, pred))
    store = music_store()
    assert put(lens, store, get(lens, store)) == store


def test_put_is_transactional_on_deep_violation():
    # a view that satisfies the outer sort but violates a source constraint
    # cannot exist for these lenses, so force a shape mismatch instead
    store = music_store()
    with pytest.raises(Exception):
        put(ALBUMS_PRIM, store, relation(TRACKS.row_type, []))
    assert store == music_store()
