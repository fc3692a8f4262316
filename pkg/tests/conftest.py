from pathlib import Path

import pytest

from lensdb.dsl import build_all, parse_workspace
from lensdb.relations import Store, parse_relation

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def music_workspace():
    text = (FIXTURES / "music.lens").read_text()
    return parse_workspace(text, "music.lens")


@pytest.fixture(scope="session")
def music_lenses(music_workspace):
    return build_all(music_workspace, {"albumName": "Galore"})


@pytest.fixture(scope="session")
def music_store(music_workspace):
    tables = {}
    for name, table in music_workspace.tables.items():
        path = FIXTURES / "data" / f"{name}.jsonl"
        tables[name] = parse_relation(path.read_text(), table.row_type, str(path))
    return Store(tables)
