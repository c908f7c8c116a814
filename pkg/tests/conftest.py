import random

import pytest

from reuseguard import similarity
from reuseguard.groups import enumerable_group


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)


@pytest.fixture
def tg101():
    return enumerable_group(101)


@pytest.fixture
def cheap_hash():
    return similarity.CHEAP_HASH_PARAMS
