import math

import numpy as np
import pytest

from flagseq.ambiguity import AfGrid
from flagseq.curtain import CurtainSet, SetKind, build_curtain
from flagseq.errors import DomainError
from flagseq.metrics import (
    PMMSR_CAP_DB,
    MetricReport,
    build_report,
    flag_template,
    nwimsl,
    nwimsl_series,
    pmmsr,
    pmmsr_grid,
)
from flagseq.apmm import solve_asymmetric, solve_symmetric
from flagseq.curtain import build_zero_set
from flagseq.objective import DesignConfig, random_peaks
from flagseq.seqcore import ComplexSeq, Zone


def test_nwimsl_modes():
    vals, mode = nwimsl_series([4.0, 2.0, 1.0])
    assert mode == "iteration0"
    assert vals == pytest.approx([0.0, 10 * math.log10(0.5), 10 * math.log10(0.25)])
    vals, mode = nwimsl_series([4.0, 2.0], g_ref=8.0)
    assert mode == "reference" and vals[0] == pytest.approx(-3.0103, abs=1e-4)
    assert nwimsl(0.0, 1.0) == -math.inf
    with pytest.raises(DomainError):
        nwimsl(1.0, 0.0)


def test_template_shape():
    t = flag_template(Zone(2, 3), 1)
    assert t[2, 3] == 1.0
    assert t[3, 4] == 0.5 and t[0, 1] == 0.5
    assert t[0, 0] == 0.0


def test_pmmsr_ideal_and_deviation():
    zone = Zone(2, 2)
    ideal = AfGrid(flag_template(zone, 1), zone)
    assert pmmsr_grid(ideal, 1) == PMMSR_CAP_DB
    vals = flag_template(zone, 1).copy()
    vals[0, 4] = 0.1
    assert pmmsr_grid(AfGrid(vals, zone), 1) == pytest.approx(20.0)
    with pytest.raises(DomainError):
        pmmsr_grid(AfGrid(np.zeros((5, 5)), zone), 1)


def test_report_fields_and_markdown():
    zone = Zone(2, 2)
    cs = CurtainSet((build_curtain(32, 1, 0, zone),), SetKind.SINGLE, zone)
    d = random_peaks(cs, np.random.default_rng(0))
    cfg = DesignConfig(1, zone, epsilon=0.894)
    rep = build_report(d, cfg, history=[2.0], label="init")
    assert rep.lpg_theory_db == pytest.approx(10 * math.log10(0.894))
    assert len(rep.papr_db) == 1 and rep.papr_db[0] > 0
    out = rep.to_dict()
    assert set(out) >= {"nwimsl_db", "pmmsr_db", "papr_db", "lpg_db", "delta_db"}
    md = MetricReport.markdown([rep])
    assert md.count("\n") == 3 and "| init |" in md


def test_pmmsr_global_phase_invariant():
    zone = Zone(3, 2)
    cs = CurtainSet((build_curtain(31, 1, 1, zone),), SetKind.SINGLE, zone)
    d = random_peaks(cs, np.random.default_rng(4))
    s, r = d.flag_tx(0), d.flag_rx(0)
    rotated = ComplexSeq(s.samples * np.exp(0.7j), s.start_index)
    assert pmmsr(rotated, r, zone, 1, 31) == pytest.approx(pmmsr(s, r, zone, 1, 31), abs=1e-9)


@pytest.fixture(scope="module")
def ordering_runs():
    zone = Zone(4, 4)
    init = random_peaks(build_zero_set(64, 1, [0], zone), np.random.default_rng(0))
    asym = solve_asymmetric(init, DesignConfig(1, zone, epsilon=1.0), t_max=500).design
    sym = solve_symmetric(init, DesignConfig(1, zone, symmetric=True), t_max=500).design
    score = lambda d: pmmsr(d.flag_tx(0), d.flag_rx(0), zone, 1, 64)
    return score(asym), score(sym), score(init)


@pytest.mark.slow
def test_optimized_designs_beat_unoptimized_pmmsr(ordering_runs):
    asym, sym, base = ordering_runs
    assert asym > base and sym > base


@pytest.mark.slow
def test_pmmsr_ordering_asymmetric_over_symmetric(ordering_runs):
    asym, sym, _ = ordering_runs
    assert asym >= sym, f"asymmetric {asym:.2f} dB < symmetric {sym:.2f} dB"
