import pytest

from chime.llm import HashedBagOfWordsProvider

import replay


@pytest.fixture(scope="session")
def embed():
    return HashedBagOfWordsProvider()


@pytest.fixture()
def store():
    corpus = replay.new_store()
    yield corpus
    corpus.close()


@pytest.fixture(scope="session")
def fixture_raws():
    return replay.fixture_raws()
