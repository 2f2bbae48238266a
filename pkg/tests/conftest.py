import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import numpy as np
import pytest

from flagseq.apmm import solve_symmetric
from flagseq.curtain import CurtainSet, SetKind, build_curtain
from flagseq.objective import DesignConfig, random_peaks
from flagseq.seqcore import Zone


@pytest.fixture(scope="session")
def flag127():
    """Symmetric periodic Flag design, N=127, zone (15, 10), xi=1."""
    zone = Zone(15, 10)
    cs = CurtainSet((build_curtain(127, 1, 1, zone),), SetKind.SINGLE, zone)
    d = random_peaks(cs, np.random.default_rng(1))
    res = solve_symmetric(d, DesignConfig(1, zone, varrho=10, symmetric=True), t_max=300, rel_tol=1e-9)
    return res.design
