import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pathfx import fixtures  # noqa: E402

FIXTURE_PATHS = {
    "f1": ["A", "M", "Y"],
    "f2": ["T", "Y"],
    "f3": ["X", "A", "Y"],
    "f4": ["A", "M", "Y"],
}


@pytest.fixture(scope="session")
def models():
    return {name: fixtures.load(name) for name in fixtures.NAMES}


@pytest.fixture
def report(capsys):
    """Print one line straight to the terminal, bypassing capture."""

    def emit(line: str):
        with capsys.disabled():
            print(line)

    return emit
