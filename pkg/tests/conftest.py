import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import helpers  # noqa: E402


@pytest.fixture
def braess():
    return helpers.braess()


@pytest.fixture
def two_route_bpr():
    return helpers.two_route_bpr()


@pytest.fixture
def two_route_lp():
    return helpers.two_route_lp()
