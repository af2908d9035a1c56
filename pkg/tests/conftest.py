from functools import lru_cache

import numpy as np
import pytest

from whitney_dirac.mesh import Lattice
from whitney_dirac.whitney import assemble_complex


@lru_cache(maxsize=None)
def complex_for(n: int, m: int, lengths: tuple[float, ...] | None = None):
    lat = Lattice(n, lengths or (1.0,) * n, (m,) * n)
    return assemble_complex(lat)


@pytest.fixture
def cx():
    return complex_for


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
