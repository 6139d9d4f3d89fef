import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from capsearch.analysis import PLAIN_ANALYZER
from capsearch.index import build_index


@pytest.fixture
def fruit_corpus():
    return {"d1": "red apple", "d2": "green apple apple", "d3": "banana"}


@pytest.fixture
def fruit_index(fruit_corpus):
    return build_index(fruit_corpus.items(), PLAIN_ANALYZER)
