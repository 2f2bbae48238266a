import numpy as np
import pytest

from flagseq.ambiguity import af_point, count_lines
from flagseq.channel import echo
from flagseq.errors import ParameterError
from flagseq.estimator import (
    CfarConfig,
    Detection,
    cfar_threshold,
    curtain_cut,
    curtains_overlap,
    detections_to_csv,
    flag_search,
    noise_sigma_z2,
    refine_fractional,
)
from flagseq.seqcore import Case

# nominal 20 dB floor used to calibrate CFAR in noiseless runs
FLOOR = 1e-2


def _cfg(r, p_fa=1e-3, sigma2=FLOOR):
    return CfarConfig(p_fa, noise_sigma_z2(sigma2, r))


def test_threshold_formula():
    cfg = CfarConfig(1e-2, 0.5)
    assert cfar_threshold(cfg) == pytest.approx(-np.log(1e-2))
    with pytest.raises(ParameterError):
        CfarConfig(0.0, 1.0)


def test_statistic_is_reversed_af(flag127):
    s, r = flag127.flag_tx(0), flag127.flag_rx(0)
    y = echo(s, [(4, -3, 1.0)], 0.0, None, Case.PERIODIC, 127)
    cut = curtain_cut(y, r, flag127.zone, 1, _cfg(r), 127)
    w = 7
    j = int(np.flatnonzero(cut.omegas == w)[0])
    assert cut.power[j] == pytest.approx(af_point(y, r, 0, -w, Case.PERIODIC, 127) ** 2, rel=1e-9)


@pytest.mark.parametrize("tau0,om0", [(0, 0), (-15, 10), (15, -10), (7, 3), (-4, -9)])
def test_noiseless_exact(flag127, tau0, om0):
    s, r = flag127.flag_tx(0), flag127.flag_rx(0)
    y = echo(s, [(tau0, om0, 0.8 * np.exp(0.3j))], 0.0, None, Case.PERIODIC, 127)
    hits = []
    with count_lines() as c:
        dets = flag_search(y, r, 1, flag127.zone, _cfg(r), 127, hits=hits)
    assert [(d.tau_hat, d.omega_hat) for d in dets] == [(tau0, om0)]
    assert (om0 - tau0) in hits
    assert c.ffts == 1 and c.lines == 1 + len(hits)


def test_refinement_recovers_fractional(flag127):
    s, r = flag127.flag_tx(0), flag127.flag_rx(0)
    y = echo(s, [(3.5, 2.25, 1.0)], 0.0, None, Case.PERIODIC, 127)
    d = flag_search(y, r, 1, flag127.zone, _cfg(r), 127)[0]
    ref = refine_fractional(d, y, r, flag127.zone, 16, 16, 127)
    assert (ref.tau_hat, ref.omega_hat) == (3.5, 2.25)


def test_refinement_clamps_at_zone_edge(flag127, caplog):
    s, r = flag127.flag_tx(0), flag127.flag_rx(0)
    y = echo(s, [(15, 10, 1.0)], 0.0, None, Case.PERIODIC, 127)
    d = Detection(15.0, 10.0, 1.0, (0, 0))
    ref = refine_fractional(d, y, r, flag127.zone, 4, 4, 127)
    assert ref.tau_hat <= 15 and ref.omega_hat <= 10
    assert "clamping" in caplog.text


def test_csv_and_overlap():
    text = detections_to_csv([Detection(1.0, -2.0, 0.5, (0, 3))])
    assert text.splitlines()[0] == "tau_hat,omega_hat,peak,curtain_tau,curtain_omega"
    assert curtains_overlap((0, 0), (2, 2), 1)
    assert not curtains_overlap((0, 0), (2, 3), 1)
