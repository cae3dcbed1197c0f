import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).resolve().parent
FIXTURES = TESTS_DIR / "fixtures"

sys.path.insert(0, str(TESTS_DIR))

from rfscope.dsl import parse_dsl  # noqa: E402


@pytest.fixture(scope="session")
def load_fixture():
    cache = {}

    def load(name: str):
        if name not in cache:
            cache[name] = parse_dsl((FIXTURES / f"{name}.rfa").read_text(encoding="utf-8"))
        return cache[name]

    return load


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES
