import numpy as np
import pytest

from flagseq.channel import (
    ScenarioConfig,
    delay_matrices,
    echo,
    fim_crlb,
    false_alarm_rate,
    sampling_bounds,
    scenario_sigma2,
    _run_sharded,
)
from flagseq.errors import DomainError, ParameterError
from flagseq.seqcore import Case, ComplexSeq


def test_echo_integer_shift_and_doppler():
    x = np.exp(2j * np.pi * np.arange(8) / 5)
    s = ComplexSeq(x, 0)
    y = echo(s, [(2, 1, 1.0)], 0.0, None, Case.PERIODIC, 8)
    m = np.arange(8)
    assert np.allclose(y.samples, np.roll(x, 2) * np.exp(2j * np.pi * (m - 2 + 1) / 8))


def test_echo_noise_statistics():
    s = ComplexSeq(np.zeros(20000, complex), 0)
    y = echo(s, [], 0.5, np.random.default_rng(0), Case.PERIODIC, 20000)
    assert np.mean(np.abs(y.samples) ** 2) == pytest.approx(0.5, rel=0.03)


def test_sigma2_from_snr():
    assert scenario_sigma2([(0, 0, 2.0)], 20) == pytest.approx(0.04)


def test_delay_matrix_entries():
    D, H, T = delay_matrices(-1, 1)
    assert np.allclose(np.diag(D), [-1, 0, 1])
    assert H[0, 0] == pytest.approx(np.pi ** 2 / 3)
    assert H[0, 1] == pytest.approx(-2.0) and H[0, 2] == pytest.approx(0.5)
    assert T[1, 0] == pytest.approx(-1.0) and T[0, 0] == 0


def test_fim_matches_finite_differences():
    """CRLB in bins against a numerically differentiated band-limited echo model."""
    N = 31
    rng = np.random.default_rng(0)
    x = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    x /= np.linalg.norm(x)
    N1, N2 = -8 * N, 9 * N
    m = np.arange(N1, N2 + 1)
    n = np.arange(N)

    def mu(tau, om):
        return (np.sinc(m[:, None] - n[None, :] - tau) @ x) * np.exp(2j * np.pi * om * m / N)

    h = 1e-5
    D = np.stack([(mu(h, 0) - mu(-h, 0)) / (2 * h), (mu(0, h) - mu(0, -h)) / (2 * h)], 1)
    m0 = mu(0, 0)
    P = np.eye(m.size) - np.outer(m0, m0.conj()) / np.vdot(m0, m0)
    snr = 100.0
    ref = np.linalg.inv(2 * snr * np.real(D.conj().T @ P @ D))
    got = fim_crlb(ComplexSeq(x, 0), 1e6, 1e9, snr, N=N, N1=N1, N2=N2).crlb_bins
    assert np.allclose(got, ref, rtol=1e-2, atol=0)


def test_fim_singular_direction():
    s = ComplexSeq(np.eye(16)[3].astype(complex), 0)
    with pytest.raises(DomainError, match="degenerate"):
        fim_crlb(s, 1e6, 1e9, 10.0, N=16)


def test_sampling_bound_in_bins():
    B, f, N, k = 1e6, 1e9, 127, 16
    r, v = sampling_bounds(B, f, N, k, k, c=2.0)
    assert r * (2 * B / 2.0) ** 2 == pytest.approx(1 / (12 * k * k))
    assert v * (2 * f * N / (2.0 * B)) ** 2 == pytest.approx(1 / (12 * k * k))


def test_scenario_bins_and_missing_field():
    sc = ScenarioConfig.from_dict({"f_cr": 1e9, "B": 1e6, "snr_db": 10,
                                   "targets": [{"range": 150.0, "velocity": 0.0}]})
    tau, om, rho = sc.bins(64)[0]
    assert tau == pytest.approx(2 * 150.0 * 1e6 / sc.c)
    with pytest.raises(ParameterError, match="snr_db"):
        ScenarioConfig.from_dict({"f_cr": 1e9, "B": 1e6, "targets": []})


def test_sharded_runs_are_thread_independent():
    def fn(n, rng):
        return float(rng.standard_normal(n).sum())

    a = _run_sharded(fn, 1000, 7, threads=1, shard_size=100)
    b = _run_sharded(fn, 1000, 7, threads=4, shard_size=100)
    assert a == b


def test_false_alarm_rate_is_deterministic(flag127):
    s, r = flag127.flag_tx(0), flag127.flag_rx(0)
    a = false_alarm_rate(s, r, 1, flag127.zone, 1e-2, 50, 3, 127)
    b = false_alarm_rate(s, r, 1, flag127.zone, 1e-2, 50, 3, 127, threads=2)
    assert a == b
