from pathlib import Path

import pytest

from helpers import make_world

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture
def world():
    return make_world()


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES
