import numpy as np
import pytest

from alphacoh.states import substream


@pytest.fixture
def rng():
    # per-test stream named after the test, so reordering tests never
    # silently changes another test's draws
    def make(*key: int) -> np.random.Generator:
        return substream(2026, *key)

    return make


def random_hermitian(d: int, gen: np.random.Generator) -> np.ndarray:
    g = gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))
    return (g + g.conj().T) / 2.0
