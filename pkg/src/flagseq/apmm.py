"""Accelerated parallel partially majorization-minimization (AP-MM) solvers.

Stacked variables: x1 = [p_1^s; c_1^s; ...; p_M^s; c_M^s] (transmit side) and
x2 = [p_1^r; c_1^r; ...] (receive side).  The objective is a sum of squared
bilinear forms |x2' B_k x1|^2, i.e. a Hermitian quadratic form in
y = vec(x2 x1').  With lambda above the top eigenvalue of that form (Lambda)
the quadratic is majorized by a linear function of y, which gives

* receive update   p_m^r = -iota_m / ||iota_m||,
  kappa = (Omega - lambda x2 x1' - beta' eps V) x1,  iota_m = p-slot m of kappa
* transmit update  p_m^s = -exp(j arg gamma_m)/sqrt(N),
  gamma = (Omega - lambda x2 x1' - beta' eps V)' x2   (column-vector form)
* symmetric update p_m = -exp(j arg sigma_m)/sqrt(N),
  sigma = (Omega + Omega' - 2 lambda x x' - lambda_tilde I) x   (p-slots)

Omega is never formed: each of its blocks is sum_zone coef * U_{tau,omega}
applied through ``ZoneOperator``.  Every MM image is followed by the
two-point (squared-extrapolation) acceleration with backtracking.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .errors import ParameterError, SolverError
from .objective import (
    DesignConfig,
    FlagDesign,
    ZoneOperator,
    mask_arrays,
    pair_coefficients,
    wimsl_from_coefficients,
    _pair_weights,
)
from .seqcore import Case, Zone

log = logging.getLogger(__name__)

__all__ = [
    "lambda_bound",
    "lambda_exact",
    "lambda_tilde",
    "lambda_tilde_gershgorin",
    "Problem",
    "MmState",
    "IterRecord",
    "SolveResult",
    "accelerate",
    "surrogate",
    "apply_omega",
    "solve_asymmetric",
    "solve_symmetric",
]

LAMBDA_MARGIN = 1e-6


# majorization constants -----------------------------------------------------
def lambda_bound(alpha: float, beta_prime: float, L: int, zone: Zone) -> float:
    """Closed-form constant max{alpha*2L, (1-alpha)*2L, beta'*L} * (1 + 1e-6).

    max_tau (2L - 2|tau|) over the zone is reached at tau = 0, i.e. 2L.
    """
    top = 2.0 * L
    return max(alpha * top, (1.0 - alpha) * top, beta_prime * L) * (1.0 + LAMBDA_MARGIN)


def _trace_table(op: ZoneOperator) -> np.ndarray:
    """t[i, a, b] = <U_{tau_i, w_a}, U_{tau_i, w_b}>_F (Frobenius, conj on the left)."""
    L = op.L
    out = np.empty((op.taus.size, op.omegas.size, op.omegas.size), dtype=np.complex128)
    for i, tau in enumerate(op.taus):
        if op.periodic:
            cols = np.ones(L, dtype=bool)
        else:
            n = np.arange(L)
            cols = (n + tau >= 0) & (n + tau < L)
        Hs = op.H[:, cols]
        out[i] = np.conj(Hs) @ Hs.T
    return out


def lambda_exact(op: ZoneOperator, M: int, alpha: float, beta_prime: float, varrho: float) -> float:
    """Largest eigenvalue of Lambda, computed from small per-delay Gram matrices.

    Different delays, different user pairs and auto/cross blocks are
    mutually orthogonal, so the spectrum splits into (2*omega_max+1)-sized
    problems (plus one penalty direction coupled at tau = 0).
    """
    t = _trace_table(op)
    w_same, wb_same, _ = mask_arrays(op.zone, True, varrho)
    top = 0.0
    i0 = int(np.where(op.taus == 0)[0][0])
    for i in range(op.taus.size):
        W = w_same[i]
        Wb = wb_same[i]
        G = alpha * (np.outer(W, W) + 2.0 * np.outer(Wb, Wb)) * t[i]
        if i == i0 and beta_prime > 0:
            # penalty direction: identity on the peak support of the (p, p) slot
            uI = np.sum(np.conj(op.H[:, op.peak_support]), axis=1)
            cross = math.sqrt(alpha * beta_prime) * W * uI
            G = np.block([[G, cross[:, None]], [np.conj(cross)[None, :], np.array([[beta_prime * op.N]])]])
        top = max(top, float(np.linalg.eigvalsh(G).max()))
        if M > 1 and alpha < 1.0:
            Gc = (1.0 - alpha) * 4.0 * t[i]
            top = max(top, float(np.linalg.eigvalsh(Gc).max()))
    if beta_prime > 0 and alpha == 0.0:
        top = max(top, beta_prime * op.N)
    return top


@dataclass
class Problem:
    """Fixed data for one solve: operator, curtains, weights and constants."""

    op: ZoneOperator
    config: DesignConfig
    Cs: np.ndarray
    Cr: np.ndarray
    lam: float
    support: np.ndarray
    cc_cache: dict = field(default_factory=dict)

    @classmethod
    def build(cls, design: FlagDesign, config: DesignConfig, lam: Optional[float] = None) -> "Problem":
        op = ZoneOperator(design.N, design.zone)
        _, _, Cs, Cr = design.arrays()
        if lam is None:
            bp = config.beta_prime
            exact = lambda_exact(op, design.M, config.alpha, bp, config.varrho)
            lam = max(lambda_bound(config.alpha, bp, op.L, design.zone), exact * (1.0 + LAMBDA_MARGIN))
        return cls(op, config, Cs, Cr, float(lam), op.peak_support.copy())

    @property
    def M(self) -> int:
        return self.Cs.shape[0]

    @property
    def N(self) -> int:
        return self.op.N

    def coefficients(self, Ps: np.ndarray, Pr: np.ndarray) -> np.ndarray:
        return pair_coefficients(self.op, Ps, Pr, self.Cs, self.Cr, self.config.varrho, self.cc_cache)

    def wimsl(self, Ps, Pr, coeffs=None) -> float:
        if coeffs is None:
            coeffs = self.coefficients(Ps, Pr)
        return wimsl_from_coefficients(coeffs, self.config.alpha)

    def penalty(self, Ps, Pr) -> float:
        inner = np.sum(np.conj(Ps) * Pr, axis=1)
        return float(np.sum(np.abs(inner - self.config.epsilon) ** 2))

    def of(self, Ps, Pr) -> float:
        g = self.wimsl(Ps, Pr)
        if self.config.symmetric:
            return g
        b = self.config.beta
        return b * g + (1.0 - b) * self.penalty(Ps, Pr)

    # Omega blocks ----------------------------------------------------------
    def kernels(self, coeffs: np.ndarray):
        """Per-pair kernels g for the (p,p), (p,c)/(c,p) and (c,c) blocks of Omega."""
        M = self.M
        op = self.op
        wts = _pair_weights(M, self.config.alpha)
        kp, kb, kc = {}, {}, {}
        for k in range(M):
            for l in range(M):
                w, wb, wt = mask_arrays(op.zone, k == l, self.config.varrho)
                base = wts[k, l] * np.conj(coeffs[k, l])
                kp[k, l] = op.kernel(base * w)
                kb[k, l] = op.kernel(base * wb)
                kc[k, l] = op.kernel(base * wt) if wt else None
        return kp, kb, kc

    def pen_inner(self, Ps, Pr) -> np.ndarray:
        """x2' M^i x1 = p_i^r' p_i^s for each user."""
        return np.sum(np.conj(Pr) * Ps, axis=1)

    def omega_rows_p(self, kern, pen, Ps_in, Cs_in) -> np.ndarray:
        """Receive-peak rows of Omega applied to a transmit stack [Ps_in; Cs_in]."""
        kp, kb, _ = kern
        op = self.op
        out = np.zeros_like(Ps_in)
        bp = self.config.beta_prime
        for k in range(self.M):
            acc = np.zeros(op.L, dtype=np.complex128)
            for l in range(self.M):
                acc += op.apply(None, Ps_in[l], g=kp[k, l])
                acc += op.apply(None, Cs_in[l], g=kb[k, l])
            if bp:
                acc += bp * np.conj(pen[k]) * Ps_in[k]
            out[k] = acc
        return out

    def omega_adj_cols_p(self, kern, pen, Pr_in, Cr_in) -> np.ndarray:
        """Transmit-peak rows of Omega' applied to a receive stack [Pr_in; Cr_in]."""
        kp, kb, _ = kern
        op = self.op
        out = np.zeros_like(Pr_in)
        bp = self.config.beta_prime
        for l in range(self.M):
            acc = np.zeros(op.L, dtype=np.complex128)
            for k in range(self.M):
                acc += op.apply_adj(None, Pr_in[k], g=kp[k, l])
                acc += op.apply_adj(None, Cr_in[k], g=kb[k, l])
            if bp:
                acc += bp * pen[l] * Pr_in[l]
            out[l] = acc
        return out


def apply_omega(problem: Problem, Ps_t, Pr_t, probe: np.ndarray) -> np.ndarray:
    """Full Omega_{x1,x2} applied to a probe stack shaped (M, 2, L) = [p; c] per user."""
    coeffs = problem.coefficients(Ps_t, Pr_t)
    kp, kb, kc = problem.kernels(coeffs)
    op = problem.op
    M = problem.M
    pen = problem.pen_inner(Ps_t, Pr_t)
    bp = problem.config.beta_prime
    out = np.zeros((M, 2, op.L), dtype=np.complex128)
    for k in range(M):
        for l in range(M):
            vp, vc = probe[l, 0], probe[l, 1]
            out[k, 0] += op.apply(None, vp, g=kp[k, l]) + op.apply(None, vc, g=kb[k, l])
            out[k, 1] += op.apply(None, vp, g=kb[k, l])
            if kc[k, l] is not None:
                out[k, 1] += op.apply(None, vc, g=kc[k, l])
        if bp:
            out[k, 0] += bp * np.conj(pen[k]) * probe[k, 0]
    return out


def _diag_entries(op: ZoneOperator, g: Optional[np.ndarray]) -> np.ndarray:
    """Entries of sum coef*U on its delay diagonals: E[i, n] = matrix[n + tau_i, n]."""
    if g is None:
        return np.zeros((op.taus.size, op.L), dtype=np.complex128)
    return g * op.mask_pos


def _hermitian_part_diagonals(op: ZoneOperator, Ekl: np.ndarray, Elk: np.ndarray) -> np.ndarray:
    """Diagonals of X + Y' where X has diagonals Ekl and Y has diagonals Elk.

    (X + Y')[n+tau, n] = X[n+tau, n] + conj(Y[n, n+tau]); Y[n, n+tau] sits on
    diagonal -tau at column n+tau.
    """
    rev = Elk[::-1]  # diagonal -tau
    shifted = rev[op.rows, op.idx_pos] * op.mask_pos  # value at column n + tau
    return Ekl + np.conj(shifted)


def lambda_tilde_gershgorin(problem: Problem, coeffs: np.ndarray) -> float:
    """Gershgorin bound on lambda_max(Omega_pp + Omega_pp') over the peak slots.

    Subtracting 2*lambda*x x' only lowers the spectrum, so this bounds the
    matrix the symmetric update needs to dominate.
    """
    op = problem.op
    kp, _, _ = problem.kernels(coeffs)
    M = problem.M
    best = 0.0
    for k in range(M):
        row = np.zeros(op.L)
        for l in range(M):
            D = _hermitian_part_diagonals(op, _diag_entries(op, kp[k, l]), _diag_entries(op, kp[l, k]))
            row += np.sum(np.abs(D)[op.rows, op.idx_neg] * op.mask_neg, axis=0)
        best = max(best, float(row[problem.support].max()))
    return best * (1.0 + LAMBDA_MARGIN)


def lambda_tilde(problem: Problem, coeffs: np.ndarray) -> float:
    """4*M*L * max |(Omega + Omega')[a, b]| over the full stacked operator."""
    op = problem.op
    kp, kb, kc = problem.kernels(coeffs)
    M = problem.M
    blocks = {}
    for k in range(M):
        for l in range(M):
            blocks[(k, 0), (l, 0)] = _diag_entries(op, kp[k, l])
            blocks[(k, 0), (l, 1)] = _diag_entries(op, kb[k, l])
            blocks[(k, 1), (l, 0)] = _diag_entries(op, kb[k, l])
            blocks[(k, 1), (l, 1)] = _diag_entries(op, kc[k, l])
    top = 0.0
    for (a, b), E in blocks.items():
        D = _hermitian_part_diagonals(op, E, blocks[b, a])
        top = max(top, float(np.abs(D).max()))
    return 4.0 * M * op.L * top


def surrogate(problem: Problem, Ps, Pr, Ps_t, Pr_t) -> float:
    """Quadratic majorizer of the objective around (Ps_t, Pr_t), on the OF scale.

    The quadratic part q(y) = y' Lambda y (WImSL plus the squared penalty
    inner products) is replaced by
    q(y_t) + 2 Re{y_t' Lambda (y - y_t)} + lambda ||y - y_t||^2,
    which is >= q(y) whenever lambda >= lambda_max(Lambda); the linear and
    constant penalty terms are kept exactly.
    """
    cfg = problem.config
    bp, eps = cfg.beta_prime, cfg.epsilon
    M = problem.M
    wts = _pair_weights(M, cfg.alpha)[:, :, None, None]
    a = problem.coefficients(Ps, Pr)
    a_t = problem.coefficients(Ps_t, Pr_t)
    pen = problem.pen_inner(Ps, Pr)
    pen_t = problem.pen_inner(Ps_t, Pr_t)
    q_t = float(np.sum(wts * np.abs(a_t) ** 2)) + bp * float(np.sum(np.abs(pen_t) ** 2))
    lin = np.sum(wts * np.conj(a_t) * (a - a_t)) + bp * np.sum(np.conj(pen_t) * (pen - pen_t))
    Cs, Cr = problem.Cs, problem.Cr
    n1, n2 = _norm2(Ps, Cs), _norm2(Pr, Cr)
    n1t, n2t = _norm2(Ps_t, Cs), _norm2(Pr_t, Cr)
    cross = (np.vdot(Pr_t, Pr) + np.vdot(Cr, Cr)) * (np.vdot(Ps, Ps_t) + np.vdot(Cs, Cs))
    dist = n1 * n2 + n1t * n2t - 2.0 * float(np.real(cross))
    upper = q_t + 2.0 * float(np.real(lin)) + problem.lam * max(dist, 0.0)
    rest = -2.0 * bp * eps * float(np.sum(np.real(pen))) + bp * M * eps * eps
    total = upper + rest
    if cfg.symmetric:
        return total
    return cfg.beta * total


# acceleration ---------------------------------------------------------------
def accelerate(prev: np.ndarray, ya: np.ndarray, yb: np.ndarray,
               project: Callable[[np.ndarray], np.ndarray],
               of: Callable[[np.ndarray], float], of_prev: float,
               max_backtracks: int = 30):
    """Two-point extrapolation with backtracking.

    alpha = -sum||v_a||^2 / sum||v_b||^2 (capped at -1), candidate
    project(prev - 2 alpha v_a + alpha^2 v_b); while the objective goes up,
    alpha <- (alpha - 1)/2.  alpha = -1 reproduces y_b, which is accepted
    unconditionally (two MM steps never increase the objective).
    Returns (candidate, alpha, objective at candidate).
    """
    va = ya - prev
    vb = yb - ya - va
    nb = float(np.sum(np.abs(vb) ** 2))
    na = float(np.sum(np.abs(va) ** 2))
    if nb == 0.0 or na == 0.0:
        return yb, -1.0, of(yb)
    alpha = min(-na / nb, -1.0)
    for _ in range(max_backtracks):
        if alpha >= -1.0 - 1e-9:
            break
        cand = project(prev - 2.0 * alpha * va + alpha * alpha * vb)
        f = of(cand)
        if np.isfinite(f) and f <= of_prev:
            return cand, alpha, f
        alpha = (alpha - 1.0) / 2.0
    return yb, -1.0, of(yb)


# projections ----------------------------------------------------------------
def _project_unit(P: np.ndarray, support: np.ndarray, fallback: Optional[np.ndarray] = None) -> np.ndarray:
    """Rows scaled to unit norm on the support; a zero row takes the fallback row (or a flat vector)."""
    out = np.zeros_like(P)
    for m in range(P.shape[0]):
        v = P[m, support]
        nrm = np.linalg.norm(v)
        if nrm > 0:
            out[m, support] = v / nrm
        elif fallback is not None and np.linalg.norm(fallback[m, support]) > 0:
            out[m, support] = fallback[m, support] / np.linalg.norm(fallback[m, support])
        else:
            out[m, support] = 1.0 / math.sqrt(v.size)
    return out


def _project_modulus(P: np.ndarray, support: np.ndarray, N: int, fallback: Optional[np.ndarray] = None) -> np.ndarray:
    out = np.zeros_like(P)
    v = P[:, support]
    ang = np.angle(v)
    if fallback is not None:
        zero = np.abs(v) == 0
        if np.any(zero):
            ang = np.where(zero, np.angle(fallback[:, support]), ang)
    out[:, support] = np.exp(1j * ang) / math.sqrt(N)
    return out


# MM maps --------------------------------------------------------------------
def _norm2(*arrs) -> float:
    return float(sum(np.sum(np.abs(a) ** 2) for a in arrs))


def rx_map(problem: Problem, Ps: np.ndarray, Pr: np.ndarray) -> np.ndarray:
    """One MM image of the receive peaks with the transmit side fixed."""
    coeffs = problem.coefficients(Ps, Pr)
    kern = problem.kernels(coeffs)
    pen = problem.pen_inner(Ps, Pr)
    bp, eps = problem.config.beta_prime, problem.config.epsilon
    kappa = problem.omega_rows_p(kern, pen, Ps, problem.Cs)
    kappa -= problem.lam * _norm2(Ps, problem.Cs) * Pr
    if bp:
        kappa -= bp * eps * Ps
    out = np.zeros_like(Pr)
    sup = problem.support
    for m in range(problem.M):
        iota = kappa[m, sup]
        nrm = np.linalg.norm(iota)
        if nrm == 0.0:
            log.warning("receive update for user %d has a zero direction; keeping previous", m)
            out[m] = Pr[m]
        else:
            out[m, sup] = -iota / nrm
    return out


def tx_map(problem: Problem, Ps: np.ndarray, Pr: np.ndarray) -> np.ndarray:
    """One MM image of the transmit peaks with the receive side fixed."""
    coeffs = problem.coefficients(Ps, Pr)
    kern = problem.kernels(coeffs)
    pen = problem.pen_inner(Ps, Pr)
    bp, eps = problem.config.beta_prime, problem.config.epsilon
    gamma = problem.omega_adj_cols_p(kern, pen, Pr, problem.Cr)
    gamma -= problem.lam * _norm2(Pr, problem.Cr) * Ps
    if bp:
        gamma -= bp * eps * Pr
    return _project_modulus(-gamma, problem.support, problem.N, fallback=Ps)


def sym_map(problem: Problem, P: np.ndarray, tilde_rule: str = "gershgorin") -> np.ndarray:
    """One MM image of the shared peaks (p^s = p^r = p)."""
    coeffs = problem.coefficients(P, P)
    kern = problem.kernels(coeffs)
    pen = problem.pen_inner(P, P)
    if tilde_rule == "gershgorin":
        lt = lambda_tilde_gershgorin(problem, coeffs)
    elif tilde_rule == "max_entry":
        lt = lambda_tilde(problem, coeffs)
    else:
        raise ParameterError(f"tilde_rule must be 'gershgorin' or 'max_entry', got {tilde_rule!r}")
    sigma = problem.omega_rows_p(kern, pen, P, problem.Cs)
    sigma += problem.omega_adj_cols_p(kern, pen, P, problem.Cr)
    sigma -= problem.lam * (2.0 * _norm2(P) + _norm2(problem.Cs) + _norm2(problem.Cr)) * P
    sigma -= lt * P
    return _project_modulus(-sigma, problem.support, problem.N, fallback=P)


# drivers --------------------------------------------------------------------
def constraint_drift(Ps: np.ndarray, Pr: Optional[np.ndarray], support: np.ndarray, N: int) -> float:
    """max of | |p_s[n]|*sqrt(N) - 1 | on the support, |p_s| off it, and | ||p_r|| - 1 |."""
    mod = np.abs(Ps)
    d = float(np.max(np.abs(mod[:, support] * math.sqrt(N) - 1.0)))
    if not np.all(support):
        d = max(d, float(np.max(mod[:, ~support])))
    if Pr is not None:
        d = max(d, float(np.max(np.abs(np.linalg.norm(Pr, axis=1) - 1.0))))
        if not np.all(support):
            d = max(d, float(np.max(np.abs(Pr[:, ~support]))))
    return d


@dataclass
class IterRecord:
    t: int
    of: float
    wimsl: float
    nwimsl_db: float
    step_alpha: float
    step_alpha_tx: Optional[float]
    wall_ms: float
    drift: float = 0.0  # largest constraint violation of the iterate

    def to_dict(self) -> dict:
        d = {
            "t": self.t,
            "OF": self.of,
            "WImSL": self.wimsl,
            "NWImSL_dB": self.nwimsl_db,
            "step_alpha": self.step_alpha,
            "wall_ms": self.wall_ms,
            "constraint_drift": self.drift,
        }
        if self.step_alpha_tx is not None:
            d["step_alpha_tx"] = self.step_alpha_tx
        return d


@dataclass
class MmState:
    t: int
    Ps: np.ndarray
    Pr: np.ndarray
    lam: float
    history: List[IterRecord] = field(default_factory=list)


@dataclass
class SolveResult:
    design: FlagDesign
    history: List[IterRecord]
    lam: float
    converged: bool

    @property
    def of_history(self) -> np.ndarray:
        return np.array([h.of for h in self.history])

    @property
    def wimsl_history(self) -> np.ndarray:
        return np.array([h.wimsl for h in self.history])


def _nwimsl(g: float, g0: float) -> float:
    if g0 <= 0:
        return 0.0
    if g <= 0:
        return -300.0
    return 10.0 * math.log10(g / g0)


def _check_finite(f: float, state: MmState, where: str) -> None:
    if not np.isfinite(f):
        raise SolverError(f"non-finite objective during {where} at t={state.t}",
                          state={"t": state.t, "Ps": state.Ps, "Pr": state.Pr, "lambda": state.lam})


def _stop(prev: float, cur: float, rel_tol: float) -> bool:
    return abs(cur - prev) / max(prev, 1e-300) < rel_tol


def solve_asymmetric(init: FlagDesign, config: DesignConfig, t_max: int = 500, rel_tol: float = 1e-8,
                     callback: Optional[Callable[[IterRecord], None]] = None,
                     lam: Optional[float] = None) -> SolveResult:
    """Alternating MM: accelerated receive block, then accelerated transmit block."""
    if config.symmetric:
        raise ValueError("config is symmetric; use solve_symmetric")
    problem = Problem.build(init, config, lam)
    Ps, Pr, _, _ = init.arrays()
    sup, N = problem.support, problem.N
    Ps = _project_modulus(Ps, sup, N)
    Pr = _project_unit(Pr, sup)
    state = MmState(0, Ps, Pr, problem.lam)
    f = problem.of(Ps, Pr)
    g0 = problem.wimsl(Ps, Pr)
    _check_finite(f, state, "initialization")
    rec = IterRecord(0, f, g0, 0.0, 0.0, 0.0, 0.0)
    state.history.append(rec)
    if callback:
        callback(rec)
    start = time.perf_counter()
    converged = False
    for t in range(1, t_max + 1):
        state.t = t
        # receive block
        ya = rx_map(problem, Ps, Pr)
        yb = rx_map(problem, Ps, ya)
        Pr, a_rx, f_rx = accelerate(Pr, ya, yb, lambda X: _project_unit(X, sup, fallback=Pr),
                                    lambda X: problem.of(Ps, X), f)
        _check_finite(f_rx, state, "receive update")
        # transmit block
        ya = tx_map(problem, Ps, Pr)
        yb = tx_map(problem, ya, Pr)
        Ps, a_tx, f_new = accelerate(Ps, ya, yb, lambda X: _project_modulus(X, sup, N, fallback=Ps),
                                     lambda X: problem.of(X, Pr), f_rx)
        _check_finite(f_new, state, "transmit update")
        state.Ps, state.Pr = Ps, Pr
        g = problem.wimsl(Ps, Pr)
        rec = IterRecord(t, f_new, g, _nwimsl(g, g0), a_rx, a_tx, (time.perf_counter() - start) * 1e3,
                         constraint_drift(Ps, Pr, sup, N))
        state.history.append(rec)
        if callback:
            callback(rec)
        done = _stop(f, f_new, rel_tol)
        f = f_new
        if done:
            converged = True
            break
    return SolveResult(init.with_peaks(Ps, Pr), state.history, problem.lam, converged)


def solve_symmetric(init: FlagDesign, config: DesignConfig, t_max: int = 500, rel_tol: float = 1e-8,
                    callback: Optional[Callable[[IterRecord], None]] = None,
                    lam: Optional[float] = None, tilde_rule: str = "gershgorin") -> SolveResult:
    """Accelerated MM on shared peaks p^s = p^r with constant modulus."""
    if not config.symmetric:
        config = DesignConfig(**{**config.__dict__, "symmetric": True})
    problem = Problem.build(init, config, lam)
    P, _, _, _ = init.arrays()
    sup, N = problem.support, problem.N
    P = _project_modulus(P, sup, N)
    state = MmState(0, P, P, problem.lam)
    f = problem.of(P, P)
    _check_finite(f, state, "initialization")
    g0 = f
    rec = IterRecord(0, f, f, 0.0, 0.0, None, 0.0)
    state.history.append(rec)
    if callback:
        callback(rec)
    start = time.perf_counter()
    converged = False
    for t in range(1, t_max + 1):
        state.t = t
        ya = sym_map(problem, P, tilde_rule)
        yb = sym_map(problem, ya, tilde_rule)
        P, a_s, f_new = accelerate(P, ya, yb, lambda X: _project_modulus(X, sup, N, fallback=P),
                                   lambda X: problem.of(X, X), f)
        _check_finite(f_new, state, "symmetric update")
        state.Ps = state.Pr = P
        rec = IterRecord(t, f_new, f_new, _nwimsl(f_new, g0), a_s, None, (time.perf_counter() - start) * 1e3,
                         constraint_drift(P, None, sup, N))
        state.history.append(rec)
        if callback:
            callback(rec)
        done = _stop(f, f_new, rel_tol)
        f = f_new
        if done:
            converged = True
            break
    return SolveResult(init.with_peaks(P, P), state.history, problem.lam, converged)
