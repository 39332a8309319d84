import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def random_constellation(rng, m_h, m_l, scale=1.0):
    from hmdesign.constellation import new_natural

    M = 2 ** (m_h + m_l)
    return new_natural(m_h, m_l, scale * (rng.standard_normal(M) + 1j * rng.standard_normal(M)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
