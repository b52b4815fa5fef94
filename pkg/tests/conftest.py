import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

CAT = np.array([1, 0, 0, 1]) / math.sqrt(2)
SINGLET = np.array([0, 1, -1, 0]) / math.sqrt(2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def cat_rho():
    return np.outer(CAT, CAT).astype(complex)


@pytest.fixture
def singlet_rho():
    return np.outer(SINGLET, SINGLET).astype(complex)
