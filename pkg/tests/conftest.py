from __future__ import annotations

import pytest

from lowdeg.fixtures import c6 as _c6
from lowdeg.fixtures import db1 as _db1


@pytest.fixture
def db1():
    return _db1()


@pytest.fixture
def c6():
    return _c6()
