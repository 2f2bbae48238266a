import math

import numpy as np
import pytest

from flagseq.ambiguity import af_grid
from flagseq.curtain import (
    CurtainSet,
    HeisenbergClass,
    SetKind,
    build_curtain,
    build_near_zero_set,
    build_zero_set,
    capacity,
    classify_heisenberg,
    greedy_coprime_xis,
    zero_set_qs,
)
from flagseq.errors import ClassificationError, FeasibilityError
from flagseq.seqcore import Case, ChirpParams, ComplexSeq, Zone, make_chirp


def _line_split(grid, xi):
    T, W = np.meshgrid(grid.taus, grid.omegas, indexing="ij")
    on = W == xi * T
    return grid.values[on], grid.values[~on]


@pytest.mark.parametrize("case", [Case.PERIODIC, Case.APERIODIC])
def test_single_curtain_is_ideal(case):
    zone = Zone(5, 5, case)
    c = build_curtain(64, 3, 0, zone)
    g = af_grid(c.tx, c.rx, zone, 64)
    on, off = _line_split(g, 3)
    assert np.allclose(on, 1.0, atol=1e-9)
    assert off.max() <= 1e-9


def test_parity_violation_is_reported():
    with pytest.raises(FeasibilityError) as e:
        build_curtain(64, 1, 1, Zone(2, 2))
    assert e.value.rule == "parity"


def test_zone_violation_is_reported():
    with pytest.raises(FeasibilityError) as e:
        build_curtain(37, 4, 0, Zone(8, 6))
    assert e.value.rule == "zone"
    assert "< N = 37" in str(e.value)


def test_extension_rules():
    with pytest.raises(FeasibilityError) as e:
        build_curtain(64, 1, 0, Zone(5, 2, Case.APERIODIC), tau_ext=3)
    assert e.value.rule == "extension"


def test_near_zero_caf_constant():
    N = 101
    zone = Zone(4, 4)
    cs = build_near_zero_set(N, [-1, 2, 1], [1, 0, 1], zone)
    full = Zone(50, 50)
    for a in range(3):
        for b in range(3):
            if a != b:
                g = af_grid(cs.members[a].tx, cs.members[b].rx, full, N)
                assert np.allclose(g.values, 1 / math.sqrt(N), atol=1e-9)


def test_near_zero_requires_coprime():
    with pytest.raises(FeasibilityError) as e:
        build_near_zero_set(64, [1, 3], [0, 0], Zone(2, 2))
    assert e.value.rule == "coprime"


@pytest.mark.parametrize("case", [Case.PERIODIC, Case.APERIODIC])
def test_zero_caf_set(case):
    N = 128
    zone = Zone(3, 3, case)
    qs = zero_set_qs(N, 1, zone, count=4)
    cs = build_zero_set(N, 1, qs, zone)
    for a in range(4):
        for b in range(4):
            if a != b:
                assert af_grid(cs.members[a].tx, cs.members[b].rx, zone, N).values.max() <= 1e-9


def test_zero_gap_violation():
    with pytest.raises(FeasibilityError) as e:
        build_zero_set(64, 1, [0, 8], Zone(2, 2))
    assert e.value.rule == "gap"


def test_capacity_arithmetic():
    assert capacity(1021, 1, Zone(10, 10)) == 92
    assert capacity(64, 2, Zone(3, 7)) == min(64 // 8, 64 // 8)
    # the placement helper is a constructive lower bound
    assert len(zero_set_qs(1021, 1, Zone(10, 10))) <= capacity(1021, 1, Zone(10, 10))


def test_greedy_xis_pairwise_coprime():
    xs = greedy_coprime_xis(30, range(-10, 11))
    assert all(math.gcd(abs(a - b), 30) == 1 for i, a in enumerate(xs) for b in xs[i + 1:])


def test_set_roundtrip():
    cs = build_near_zero_set(37, [1, 2], [1, 0], Zone(3, 3))
    assert CurtainSet.from_dict(cs.to_dict()) == cs
    assert cs.kind is SetKind.NEAR_ZERO_CAF


def test_classify_heisenberg():
    N = 37
    cls, _ = classify_heisenberg(N, ComplexSeq(np.eye(N)[4].astype(complex), 0))
    assert cls is HeisenbergClass.DELTA
    cls, p = classify_heisenberg(N, make_chirp(ChirpParams(N, 3, 1)).scaled(2j))
    assert cls is HeisenbergClass.IDEAL_CHIRP and (p.xi, p.q) == (3, 1)
    cls, _ = classify_heisenberg(N, make_chirp(ChirpParams(N, 3, 2)))
    assert cls is HeisenbergClass.NON_IDEAL_CHIRP
    with pytest.raises(ClassificationError):
        rng = np.random.default_rng(0)
        classify_heisenberg(N, ComplexSeq(np.exp(2j * np.pi * rng.random(N)), 0))
