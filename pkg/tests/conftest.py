import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).parent
sys.path.insert(0, str(TESTS_DIR))

FIXTURES = TESTS_DIR / "fixtures"
GOLDEN = TESTS_DIR / "golden"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def controller_spec() -> Path:
    return FIXTURES / "controller-spec.vcl"


@pytest.fixture
def controller_net() -> Path:
    return FIXTURES / "controller.vnet"


@pytest.fixture
def controller_zero_net() -> Path:
    return FIXTURES / "controller-zero.vnet"
