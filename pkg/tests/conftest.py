import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).parent
if str(TESTS_DIR) not in sys.path:
    sys.path.insert(0, str(TESTS_DIR))

FIXTURES = TESTS_DIR / "fixtures"
GOLDEN = TESTS_DIR / "golden"


@pytest.fixture(scope="session")
def miniproj_root() -> Path:
    return FIXTURES / "miniproj"


@pytest.fixture(scope="session")
def miniproj_index(miniproj_root):
    from ctxsum.java_index import scan_project

    return scan_project(miniproj_root)


@pytest.fixture(scope="session")
def mock_backend():
    from ctxsum.backend import Backend, builtin_mock_config

    return Backend(builtin_mock_config())


@pytest.fixture(scope="session")
def bpe_fixture_paths() -> tuple[Path, Path]:
    return FIXTURES / "bpe" / "vocab.json", FIXTURES / "bpe" / "merges.txt"
