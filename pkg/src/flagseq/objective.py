"""WImSL objective, masks and constraint bookkeeping for Flag sequence sets.

A Flag sequence is f = (c + p)/sqrt(2): a fixed curtain c plus an optimized
peak sequence p.  For user pair (k = receive side, l = transmit side) and a
zone point (tau, omega) the masked AF term is

    a_kl = W  * p_k^r' U p_l^s
         + Wb * (p_k^r' U c_l^s + c_k^r' U p_l^s)
         + Wt * c_k^r' U c_l^s,          U = J_tau Diag(h(omega))

(' is the conjugate transpose).  The objective sums |a_kl|^2 over the zone,
weighting auto terms (k = l) by alpha and cross terms by 1 - alpha.  The
literal pair form with the transmit side on the left, ``wimsl_pair``, has the
same magnitude sum over a symmetric zone; the tests check both routes agree.

All vectors live on one index window: [0, N) in the periodic case and
[-tau_max, N + tau_max) in the aperiodic case, where peak sequences are zero
outside [0, N).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .curtain import CurtainSet
from .errors import DomainError, ParameterError
from .seqcore import Case, ComplexSeq, Zone

__all__ = [
    "DesignConfig",
    "FlagDesign",
    "ZoneOperator",
    "masks",
    "mask_arrays",
    "random_peaks",
    "pair_coefficients",
    "wimsl_pair",
    "wimsl_total",
    "penalty",
    "objective_value",
    "lpg",
    "orthogonality_delta",
]

DESIGN_FIELDS = ("M", "zone", "varrho", "alpha", "beta", "epsilon", "symmetric")


@dataclass(frozen=True)
class DesignConfig:
    M: int
    zone: Zone
    varrho: float = 1.0
    alpha: float = 0.5
    beta: float = 0.01
    epsilon: float = 1.0
    symmetric: bool = False

    def __post_init__(self):
        if self.M < 1:
            raise ParameterError("M must be at least 1")
        if not self.varrho >= 1.0:
            raise ParameterError(f"varrho must be >= 1, got {self.varrho}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 < self.beta <= 1.0:
            raise ParameterError(f"beta must be in (0, 1], got {self.beta}")
        if not 0.0 < self.epsilon <= 1.0:
            raise ParameterError(f"epsilon must be in (0, 1], got {self.epsilon}")

    @property
    def beta_prime(self) -> float:
        """(1 - beta)/beta; zero for symmetric designs (no penalty term)."""
        if self.symmetric:
            return 0.0
        return (1.0 - self.beta) / self.beta

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "zone": self.zone.to_dict(),
            "varrho": self.varrho,
            "alpha": self.alpha,
            "beta": self.beta,
            "epsilon": self.epsilon,
            "symmetric": self.symmetric,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DesignConfig":
        missing = [k for k in DESIGN_FIELDS if k not in data]
        if missing:
            raise ParameterError(f"design config is missing field {missing[0]!r}")
        return cls(
            M=int(data["M"]),
            zone=Zone.from_dict(data["zone"]),
            varrho=float(data["varrho"]),
            alpha=float(data["alpha"]),
            beta=float(data["beta"]),
            epsilon=float(data["epsilon"]),
            symmetric=bool(data["symmetric"]),
        )


def masks(m1: int, m2: int, tau: int, omega: int, varrho: float) -> Tuple[float, float, float]:
    """(W, Wbar, Wtilde) for transmit user m1, receive user m2 at (tau, omega)."""
    origin = tau == 0 and omega == 0
    same = m1 == m2
    w = 0.0 if (origin and same) else 1.0
    wb = varrho if (origin and same) else 1.0
    wt = 0.0 if same else 1.0
    return w, wb, wt


def mask_arrays(zone: Zone, same_user: bool, varrho: float):
    """Masks over the zone grid as arrays shaped (2*tau_max+1, 2*omega_max+1)."""
    shape = (2 * zone.tau_max + 1, 2 * zone.omega_max + 1)
    w = np.ones(shape)
    wb = np.ones(shape)
    wt = 0.0 if same_user else 1.0
    if same_user:
        w[zone.tau_max, zone.omega_max] = 0.0
        wb[zone.tau_max, zone.omega_max] = varrho
    return w, wb, wt


class ZoneOperator:
    """Matrix-free access to U_{tau,omega} = J_tau Diag(h(omega)) over a zone.

    ``bilinear(u, v)`` returns u' U v for every zone point; ``apply(coef, v)``
    returns sum coef*U v and ``apply_adj(coef, u)`` returns sum conj(coef)*U' u.
    None of them forms an L x L matrix.
    """

    def __init__(self, N: int, zone: Zone):
        self.N = int(N)
        self.zone = zone
        self.periodic = zone.case is Case.PERIODIC
        self.pad = 0 if self.periodic else zone.tau_max
        self.lo = -self.pad
        self.L = self.N + 2 * self.pad
        if zone.tau_max > self.N - 1 or zone.omega_max > self.N - 1:
            raise ParameterError("zone exceeds N-1")
        self.taus = zone.taus
        self.omegas = zone.omegas
        n_abs = self.lo + np.arange(self.L)
        # H[w, n] = h_omega[n]
        self.H = np.exp(2j * np.pi * np.outer(self.omegas, n_abs + 1) / self.N)
        self.HT = np.ascontiguousarray(self.H.T)
        idx = np.arange(self.L)[None, :] + self.taus[:, None]
        neg = np.arange(self.L)[None, :] - self.taus[:, None]
        if self.periodic:
            self.idx_pos = np.mod(idx, self.L)
            self.mask_pos = np.ones(idx.shape)
            self.idx_neg = np.mod(neg, self.L)
            self.mask_neg = np.ones(neg.shape)
        else:
            self.mask_pos = ((idx >= 0) & (idx < self.L)).astype(float)
            self.idx_pos = np.clip(idx, 0, self.L - 1)
            self.mask_neg = ((neg >= 0) & (neg < self.L)).astype(float)
            self.idx_neg = np.clip(neg, 0, self.L - 1)
        self.rows = np.arange(self.taus.size)[:, None]
        support = np.zeros(self.L, dtype=bool)
        support[self.pad:self.pad + self.N] = True
        self.peak_support = support

    def shifted(self, u: np.ndarray) -> np.ndarray:
        """S[i, n] = u[n + taus[i]] (zero outside the window when aperiodic)."""
        return u[self.idx_pos] * self.mask_pos

    def bilinear(self, u: np.ndarray, v: np.ndarray, u_shifted: Optional[np.ndarray] = None) -> np.ndarray:
        S = self.shifted(u) if u_shifted is None else u_shifted
        return (np.conj(S) * v[None, :]) @ self.HT

    def kernel(self, coef: np.ndarray) -> np.ndarray:
        """g[i, n] = sum_w coef[i, w] h_w[n]."""
        return coef @ self.H

    def apply(self, coef: np.ndarray, v: np.ndarray, g: Optional[np.ndarray] = None) -> np.ndarray:
        g = self.kernel(coef) if g is None else g
        Y = g * v[None, :]
        return np.sum(Y[self.rows, self.idx_neg] * self.mask_neg, axis=0)

    def apply_adj(self, coef: np.ndarray, u: np.ndarray, g: Optional[np.ndarray] = None) -> np.ndarray:
        g = self.kernel(coef) if g is None else g
        return np.sum(np.conj(g) * self.shifted(u), axis=0)


@dataclass(frozen=True, eq=False)
class FlagDesign:
    """Fixed curtains plus transmit/receive peak sequences for M users.

    Peak sequences are stored on the operator window (see module docstring).
    """

    curtains: CurtainSet
    peaks_tx: tuple
    peaks_rx: tuple

    def __post_init__(self):
        M = len(self.curtains)
        if len(self.peaks_tx) != M or len(self.peaks_rx) != M:
            raise ParameterError("need one transmit and one receive peak per curtain")
        lo, L = self.window
        for p in list(self.peaks_tx) + list(self.peaks_rx):
            if p.start_index != lo or len(p) != L:
                raise ParameterError(
                    f"peak support [{p.start_index}, {p.stop_index}) differs from window [{lo}, {lo + L})"
                )

    @property
    def M(self) -> int:
        return len(self.curtains)

    @property
    def N(self) -> int:
        return self.curtains.N

    @property
    def zone(self) -> Zone:
        return self.curtains.zone

    @property
    def window(self) -> Tuple[int, int]:
        pad = 0 if self.zone.case is Case.PERIODIC else self.zone.tau_max
        return -pad, self.N + 2 * pad

    def curtain_tx(self, m: int) -> ComplexSeq:
        lo, L = self.window
        return _fit(self.curtains.members[m].tx, lo, L)

    def curtain_rx(self, m: int) -> ComplexSeq:
        lo, L = self.window
        return _fit(self.curtains.members[m].rx, lo, L)

    def flag_tx(self, m: int) -> ComplexSeq:
        c = self.curtain_tx(m)
        return ComplexSeq((c.samples + self.peaks_tx[m].samples) / math.sqrt(2), c.start_index)

    def flag_rx(self, m: int) -> ComplexSeq:
        c = self.curtain_rx(m)
        return ComplexSeq((c.samples + self.peaks_rx[m].samples) / math.sqrt(2), c.start_index)

    def arrays(self):
        """(Ps, Pr, Cs, Cr) as M x L complex arrays."""
        Ps = np.stack([p.samples for p in self.peaks_tx])
        Pr = np.stack([p.samples for p in self.peaks_rx])
        Cs = np.stack([self.curtain_tx(m).samples for m in range(self.M)])
        Cr = np.stack([self.curtain_rx(m).samples for m in range(self.M)])
        return Ps, Pr, Cs, Cr

    def with_peaks(self, Ps: np.ndarray, Pr: np.ndarray) -> "FlagDesign":
        lo, _ = self.window
        return FlagDesign(
            self.curtains,
            tuple(ComplexSeq(p, lo) for p in Ps),
            tuple(ComplexSeq(p, lo) for p in Pr),
        )

    def to_dict(self) -> dict:
        return {
            "curtains": self.curtains.to_dict(),
            "peaks_tx": [p.to_dict() for p in self.peaks_tx],
            "peaks_rx": [p.to_dict() for p in self.peaks_rx],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FlagDesign":
        for key in ("curtains", "peaks_tx", "peaks_rx"):
            if key not in data:
                raise ParameterError(f"design file is missing field {key!r}")
        return cls(
            CurtainSet.from_dict(data["curtains"]),
            tuple(ComplexSeq.from_dict(p) for p in data["peaks_tx"]),
            tuple(ComplexSeq.from_dict(p) for p in data["peaks_rx"]),
        )


def _fit(seq: ComplexSeq, lo: int, L: int) -> ComplexSeq:
    return ComplexSeq(seq.on_window(lo, lo + L), lo)


def random_peaks(curtains: CurtainSet, rng: np.random.Generator) -> FlagDesign:
    """Initial design: i.i.d. uniform phases at modulus 1/sqrt(N); p^r = p^s."""
    N = curtains.N
    pad = 0 if curtains.zone.case is Case.PERIODIC else curtains.zone.tau_max
    L = N + 2 * pad
    Ps = np.zeros((len(curtains), L), dtype=np.complex128)
    Ps[:, pad:pad + N] = np.exp(2j * np.pi * rng.random((len(curtains), N))) / math.sqrt(N)
    lo = -pad
    peaks = tuple(ComplexSeq(p, lo) for p in Ps)
    return FlagDesign(curtains, peaks, peaks)


# objective ---------------------------------------------------------------
def pair_coefficients(op: ZoneOperator, Ps, Pr, Cs, Cr, varrho: float,
                      cc_cache: Optional[dict] = None) -> np.ndarray:
    """a[k, l] over the zone (receive user k on the left, transmit user l)."""
    M = Ps.shape[0]
    T, Wn = op.taus.size, op.omegas.size
    out = np.empty((M, M, T, Wn), dtype=np.complex128)
    Sp = [op.shifted(Pr[k]) for k in range(M)]
    Sc = [op.shifted(Cr[k]) for k in range(M)]
    for k in range(M):
        for l in range(M):
            same = k == l
            w, wb, wt = mask_arrays(op.zone, same, varrho)
            a = w * op.bilinear(Pr[k], Ps[l], Sp[k])
            a = a + wb * (op.bilinear(Pr[k], Cs[l], Sp[k]) + op.bilinear(Cr[k], Ps[l], Sc[k]))
            if not same:
                key = (k, l)
                if cc_cache is not None and key in cc_cache:
                    cc = cc_cache[key]
                else:
                    cc = op.bilinear(Cr[k], Cs[l], Sc[k])
                    if cc_cache is not None:
                        cc_cache[key] = cc
                a = a + wt * cc
            out[k, l] = a
    return out


def _pair_weights(M: int, alpha: float) -> np.ndarray:
    w = np.full((M, M), 1.0 - alpha)
    np.fill_diagonal(w, alpha)
    return w


def wimsl_from_coefficients(coeffs: np.ndarray, alpha: float) -> float:
    M = coeffs.shape[0]
    per_pair = np.sum(np.abs(coeffs) ** 2, axis=(2, 3))
    return float(np.sum(_pair_weights(M, alpha) * per_pair))


def wimsl_pair(p1s: np.ndarray, c1s: np.ndarray, p2r: np.ndarray, c2r: np.ndarray,
               op: ZoneOperator, same_user: bool, varrho: float) -> float:
    """Masked sum for one (transmit m1, receive m2) pair, transmit side on the left.

    sum_zone |W p1s' U p2r + Wb (p1s' U c2r + c1s' U p2r) + Wt c1s' U c2r|^2
    """
    w, wb, wt = mask_arrays(op.zone, same_user, varrho)
    term = w * op.bilinear(p1s, p2r) + wb * (op.bilinear(p1s, c2r) + op.bilinear(c1s, p2r))
    if wt:
        term = term + wt * op.bilinear(c1s, c2r)
    return float(np.sum(np.abs(term) ** 2))


def wimsl_total(design: FlagDesign, config: DesignConfig, op: Optional[ZoneOperator] = None) -> float:
    """alpha * sum_m S(m, m) + (1 - alpha) * sum_{m1 != m2} S(m1, m2)."""
    op = op or ZoneOperator(design.N, design.zone)
    Ps, Pr, Cs, Cr = design.arrays()
    coeffs = pair_coefficients(op, Ps, Pr, Cs, Cr, config.varrho)
    return wimsl_from_coefficients(coeffs, config.alpha)


def penalty(design: FlagDesign, epsilon: float) -> float:
    """sum_m |p_m^s' p_m^r - epsilon|^2."""
    Ps, Pr, _, _ = design.arrays()
    inner = np.sum(np.conj(Ps) * Pr, axis=1)
    return float(np.sum(np.abs(inner - epsilon) ** 2))


def objective_value(design: FlagDesign, config: DesignConfig, op: Optional[ZoneOperator] = None) -> float:
    """beta*G + (1-beta)*penalty for asymmetric designs, G for symmetric ones."""
    g = wimsl_total(design, config, op)
    if config.symmetric:
        return g
    return config.beta * g + (1.0 - config.beta) * penalty(design, config.epsilon)


def lpg(f_s: ComplexSeq, f_r: ComplexSeq) -> float:
    """10*log10(|f_r' f_s|^2 / (||f_s||^2 ||f_r||^2)) on the common index window."""
    es, er = f_s.energy(), f_r.energy()
    if es <= 0 or er <= 0:
        raise DomainError("LPG needs nonzero energies")
    lo = min(f_s.start_index, f_r.start_index)
    hi = max(f_s.stop_index, f_r.stop_index)
    inner = np.vdot(f_r.on_window(lo, hi), f_s.on_window(lo, hi))
    val = abs(inner) ** 2 / (es * er)
    if val <= 0:
        return -math.inf
    return 10.0 * math.log10(val)


def orthogonality_delta(design: FlagDesign, floor_db: float = -300.0) -> float:
    """max_m max(|p_m^s' c_m^s|, |c_m^r' p_m^r|) in dB (20*log10), floored."""
    Ps, Pr, Cs, Cr = design.arrays()
    a = np.abs(np.sum(np.conj(Ps) * Cs, axis=1))
    b = np.abs(np.sum(np.conj(Cr) * Pr, axis=1))
    top = float(max(a.max(), b.max()))
    if top <= 10 ** (floor_db / 20):
        return floor_db
    return 20.0 * math.log10(top)
