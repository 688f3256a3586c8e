import pytest

from helpers import make_afm11


@pytest.fixture(scope="session")
def afm11():
    return make_afm11()
