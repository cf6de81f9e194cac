import numpy as np
import pytest

from dnavault.codec import NUCLEOTIDES
from dnavault.keystore import KeySequence, build_index

MBASE = 1 << 20


def random_bases(length, seed):
    return np.random.default_rng(seed).integers(0, 4, length).astype(np.uint8)


def random_text(length, rng):
    return "".join(rng.choice(list(NUCLEOTIDES), size=length))


@pytest.fixture(scope="session")
def mbase_index():
    """1 Mbase uniform random key, key_id 7."""
    return build_index(KeySequence(7, random_bases(MBASE, 20240601), "random-1M"))


@pytest.fixture(scope="session")
def small_index():
    """64 kbase key: complete, min multiplicity well above 100."""
    return build_index(KeySequence(3, random_bases(1 << 16, 99), "random-64k"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def gradient(width, height):
    """Horizontal ramp 0..255 repeated on every row."""
    row = np.round(np.linspace(0, 255, width)).astype(np.uint8)
    return np.tile(row, (height, 1))
