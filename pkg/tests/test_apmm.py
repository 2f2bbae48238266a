import numpy as np
import pytest

from flagseq.apmm import (
    Problem,
    apply_omega,
    lambda_bound,
    lambda_exact,
    lambda_tilde,
    lambda_tilde_gershgorin,
    rx_map,
    solve_asymmetric,
    solve_symmetric,
    surrogate,
    sym_map,
    tx_map,
)
from flagseq.curtain import build_near_zero_set, build_zero_set
from flagseq.errors import ParameterError
from flagseq.objective import DesignConfig, random_peaks
from flagseq.seqcore import Case, Zone
from oracles import dense_lambda, dense_omega, stack, u_matrix, dense_blocks, pair_weights


def _instance(case, seed=1):
    rng = np.random.default_rng(seed)
    zone = Zone(1, 1, case)
    cs = build_zero_set(8, 1, [0, 6], zone)
    cfg = DesignConfig(M=2, zone=zone, varrho=1.5, alpha=0.3, beta=0.2, epsilon=0.8)
    d = random_peaks(cs, rng)
    Ps, Pr, _, _ = d.arrays()
    Pr = Pr * np.exp(1j * rng.random(Pr.shape))
    return d.with_peaks(Ps, Pr), cfg, rng


@pytest.mark.parametrize("case", [Case.PERIODIC, Case.APERIODIC])
def test_omega_matches_dense(case):
    d, cfg, rng = _instance(case)
    prob = Problem.build(d, cfg)
    op = prob.op
    Ps, Pr, Cs, Cr = d.arrays()
    Om = dense_omega(op, 2, cfg, Ps, Pr, Cs, Cr)
    probe = rng.standard_normal((2, 2, op.L)) + 1j * rng.standard_normal((2, 2, op.L))
    probe[:, 0, ~op.peak_support] = 0
    fast = apply_omega(prob, Ps, Pr, probe)
    assert np.max(np.abs(Om @ probe.reshape(-1) - fast.reshape(-1))) <= 1e-9 * np.abs(Om).max()


@pytest.mark.parametrize("case", [Case.PERIODIC, Case.APERIODIC])
def test_lambda_exact_matches_dense(case):
    d, cfg, _ = _instance(case)
    op = Problem.build(d, cfg).op
    dense = dense_lambda(op, 2, cfg)
    assert lambda_exact(op, 2, cfg.alpha, cfg.beta_prime, cfg.varrho) == pytest.approx(dense, rel=1e-9)


def test_solver_lambda_dominates_exact():
    d, cfg, _ = _instance(Case.APERIODIC)
    prob = Problem.build(d, cfg)
    exact = lambda_exact(prob.op, 2, cfg.alpha, cfg.beta_prime, cfg.varrho)
    assert prob.lam >= exact
    assert prob.lam >= lambda_bound(cfg.alpha, cfg.beta_prime, prob.op.L, cfg.zone)


@pytest.mark.parametrize("case", [Case.PERIODIC, Case.APERIODIC])
def test_block_maps_descend_and_keep_constraints(case):
    d, cfg, _ = _instance(case)
    prob = Problem.build(d, cfg)
    Ps, Pr, _, _ = d.arrays()
    f0 = prob.of(Ps, Pr)
    Pr1 = rx_map(prob, Ps, Pr)
    f1 = prob.of(Ps, Pr1)
    Ps1 = tx_map(prob, Ps, Pr1)
    f2 = prob.of(Ps1, Pr1)
    assert f1 <= f0 + 1e-12 and f2 <= f1 + 1e-12
    sup = prob.op.peak_support
    assert np.allclose(np.abs(Ps1[:, sup]) * np.sqrt(d.N), 1.0, atol=1e-12)
    assert np.all(Ps1[:, ~sup] == 0)
    assert np.allclose(np.linalg.norm(Pr1, axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("case", [Case.PERIODIC, Case.APERIODIC])
def test_symmetric_gershgorin_dominates_eigenvalue(case):
    d, _, _ = _instance(case)
    cfg = DesignConfig(M=2, zone=d.zone, varrho=1.5, alpha=0.3, symmetric=True)
    prob = Problem.build(d, cfg)
    Ps, _, Cs, Cr = d.arrays()
    coeffs = prob.coefficients(Ps, Ps)
    op = prob.op
    L = op.L
    x1, x2 = stack(Ps, Cs), stack(Ps, Cr)
    w = pair_weights(cfg.alpha, 2)
    Om = sum(w[k, l] * np.conj(x2.conj() @ B @ x1) * B for (k, l), B in dense_blocks(op, 2, cfg.varrho))
    idx = np.concatenate([2 * m * L + np.arange(L)[op.peak_support] for m in range(2)])
    sub = Om[np.ix_(idx, idx)]
    top = np.linalg.eigvalsh(sub + sub.conj().T).max()
    assert lambda_tilde_gershgorin(prob, coeffs) >= top - 1e-12
    assert lambda_tilde(prob, coeffs) >= top - 1e-12
    g0 = prob.of(Ps, Ps)
    P1 = sym_map(prob, Ps)
    assert prob.of(P1, P1) <= g0 + 1e-12


@pytest.mark.parametrize("case", [Case.PERIODIC, Case.APERIODIC])
def test_surrogate_touches_at_expansion_point(case):
    d, cfg, rng = _instance(case, seed=3)
    prob = Problem.build(d, cfg)
    Ps, Pr, _, _ = d.arrays()
    assert surrogate(prob, Ps, Pr, Ps, Pr) == pytest.approx(prob.of(Ps, Pr), abs=1e-9)


def test_solvers_monotone_short_run():
    zone = Zone(2, 2)
    cs = build_near_zero_set(32, [1, 2], [0, 0], zone)
    d = random_peaks(cs, np.random.default_rng(0))
    ra = solve_asymmetric(d, DesignConfig(2, zone, epsilon=0.9), t_max=40)
    rs = solve_symmetric(d, DesignConfig(2, zone, symmetric=True), t_max=40)
    for r in (ra, rs):
        of = np.array(r.of_history)
        assert np.all(np.diff(of) <= 1e-12 * of[:-1])
    assert all(np.allclose(a.samples, b.samples) for a, b in zip(rs.design.peaks_tx, rs.design.peaks_rx))


def test_history_records_serialize():
    zone = Zone(1, 1)
    cs = build_zero_set(16, 1, [0], zone)
    d = random_peaks(cs, np.random.default_rng(2))
    seen = []
    solve_asymmetric(d, DesignConfig(1, zone), t_max=3, callback=seen.append)
    keys = set(seen[-1].to_dict())
    assert {"t", "OF", "WImSL", "NWImSL_dB", "step_alpha", "wall_ms"} <= keys


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_wimsl_drops_hundredfold_in_500_iterations(seed):
    zone = Zone(3, 3)
    d = random_peaks(build_zero_set(64, 1, [0], zone), np.random.default_rng(seed))
    for res in (solve_asymmetric(d, DesignConfig(1, zone), t_max=500),
                solve_symmetric(d, DesignConfig(1, zone, symmetric=True), t_max=500)):
        assert res.history[-1].wimsl <= res.history[0].wimsl / 100
