import numpy as np
import pytest

from ttergodic import tt_random, tt_to_dense


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_tt_corpus(n, rng, max_order=4, max_mode=6, max_rank=4):
    """Seeded corpus of random small TT tensors plus their dense values."""
    out = []
    for _ in range(n):
        d = int(rng.integers(2, max_order + 1))
        modes = tuple(int(m) for m in rng.integers(2, max_mode + 1, size=d))
        ranks = tuple(int(r) for r in rng.integers(1, max_rank + 1, size=d - 1))
        t = tt_random(modes, ranks, rng)
        out.append((t, tt_to_dense(t).values))
    return out
