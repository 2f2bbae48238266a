"""Two-step Flag search for delay-Doppler estimation.

For a receive reference r the test statistic at a hypothesis (tau, omega) is

    chi(tau, omega) = |(U_{tau,omega} r)' y|^2,     U = J_tau Diag(h(omega)),

which for an echo y = rho * U_{tau0,omega0} s equals |rho|^2 A_{s,r}(tau0 - tau,
omega0 - omega)^2.  A Flag reference therefore puts a peak at (tau0, omega0)
and a half-amplitude curtain on omega - omega0 = xi*(tau - tau0).

Step 1 takes the Doppler cut at tau = 0 (one FFT).  It is transversal to
every finite-slope curtain and meets the curtain of a target at
omega' = omega0 - xi*tau0.  Step 2 walks the curtain line through each
crossing over the zone delays and tests its largest cell against the CFAR
threshold plus the mean of the rest of the line.

Thresholds are on the power statistic: with complex white noise of variance
sigma^2 per sample, (U r)' z has per-quadrature variance
sigma_z2 = sigma^2 ||r||^2 / 2, and P(chi > -2 sigma_z2 ln P_FA) = P_FA.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

from .ambiguity import af_line, doppler_cut
from .errors import ParameterError
from .seqcore import Case, ComplexSeq, Zone

log = logging.getLogger(__name__)

__all__ = [
    "Detection",
    "CfarConfig",
    "CurtainCut",
    "cfar_threshold",
    "noise_sigma_z2",
    "curtain_cut",
    "flag_search",
    "refine_fractional",
    "detections_to_csv",
    "curtains_overlap",
]


@dataclass(frozen=True)
class Detection:
    tau_hat: float
    omega_hat: float
    peak_value: float
    curtain_hit: tuple

    def to_row(self) -> list:
        return [self.tau_hat, self.omega_hat, self.peak_value, self.curtain_hit[0], self.curtain_hit[1]]


@dataclass(frozen=True)
class CfarConfig:
    p_fa: float
    sigma_z2: float

    def __post_init__(self):
        if not 0.0 < self.p_fa <= 1.0:
            raise ParameterError(f"p_fa must be in (0, 1], got {self.p_fa}")
        if not self.sigma_z2 > 0.0:
            raise ParameterError(f"sigma_z2 must be positive, got {self.sigma_z2}")


def cfar_threshold(cfg: CfarConfig) -> float:
    """Fixed threshold -2*sigma_z2*ln(P_FA) on the power statistic."""
    return -2.0 * cfg.sigma_z2 * math.log(cfg.p_fa)


def noise_sigma_z2(sigma2: float, ref: ComplexSeq) -> float:
    """Per-quadrature matched-filter noise variance for per-sample variance sigma2."""
    return sigma2 * ref.energy() / 2.0


def _wrap(omega: np.ndarray, N: int) -> np.ndarray:
    """Map Doppler bins to the symmetric range (-N/2, N/2]."""
    w = np.mod(omega, N)
    return np.where(w > N // 2, w - N, w)


@dataclass
class CurtainCut:
    """Step-1 result: tested Doppler bins, their powers and the threshold."""

    omegas: np.ndarray
    power: np.ndarray
    threshold: float

    @property
    def above(self) -> np.ndarray:
        return self.power > self.threshold

    @property
    def cells(self) -> int:
        return int(self.omegas.size)


def _step1_bins(zone: Zone, xi: int, N: int) -> np.ndarray:
    reach = zone.omega_max + abs(xi) * zone.tau_max
    if 2 * reach + 1 >= N:
        return np.sort(_wrap(np.arange(N), N))
    return np.arange(-reach, reach + 1)


def curtain_cut(echo: ComplexSeq, ref: ComplexSeq, zone: Zone, xi: int, cfg: CfarConfig,
                N: Optional[int] = None) -> CurtainCut:
    """Step 1: power along the tau = 0 Doppler cut over the bins a curtain can cross."""
    N = _length(echo, zone, N)
    cut = doppler_cut(echo, ref, 0, zone.case, N, complex_out=True)
    bins = _step1_bins(zone, xi, N)
    # chi(0, w) = |A_{y,r}(0, -w)|^2
    power = np.abs(cut[np.mod(-bins, N)]) ** 2
    return CurtainCut(bins, power, cfar_threshold(cfg))


def _length(echo: ComplexSeq, zone: Zone, N: Optional[int]) -> int:
    if N is not None:
        return int(N)
    pad = 0 if zone.case is Case.PERIODIC else zone.tau_max
    return len(echo) - 2 * pad


def _clusters(mask: np.ndarray) -> List[np.ndarray]:
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1) + 1
    return np.split(idx, breaks)


def flag_search(echo: ComplexSeq, ref: ComplexSeq, xi: int, zone: Zone, cfg: CfarConfig,
                N: Optional[int] = None, guard: int = 1, hits: Optional[list] = None) -> List[Detection]:
    """Two-step search; one FFT line plus one curtain walk per crossing cluster.

    Detections are merged within one bin and sorted by descending power.  The
    Doppler bin of every walked crossing is appended to ``hits`` when given.
    """
    N = _length(echo, zone, N)
    step1 = curtain_cut(echo, ref, zone, xi, cfg, N)
    thr = step1.threshold
    found: List[Detection] = []
    taus = zone.taus
    for cl in _clusters(step1.above):
        j = cl[np.argmax(step1.power[cl])]
        w_cross = int(step1.omegas[j])
        if hits is not None:
            hits.append(w_cross)
        # chi(tau, w' + xi*tau) = |A_{y,r}(-tau, -w' - xi*tau)|^2 with tau = k
        line = af_line(echo, ref, (0, -w_cross), (-1, -xi), (-zone.tau_max, zone.tau_max + 1), zone.case, N) ** 2
        i = int(np.argmax(line))
        keep = np.ones(line.size, dtype=bool)
        keep[max(0, i - guard):i + guard + 1] = False
        rest = float(line[keep].mean()) if np.any(keep) else 0.0
        if line[i] <= thr + rest:
            continue
        tau = int(taus[i])
        omega = int(_wrap(np.array([w_cross + xi * tau]), N)[0])
        if abs(omega) > zone.omega_max:
            continue
        found.append(Detection(float(tau), float(omega), float(line[i]), (0, w_cross)))
    return _merge(found)


def _merge(dets: List[Detection]) -> List[Detection]:
    out: List[Detection] = []
    for d in sorted(dets, key=lambda d: -d.peak_value):
        if any(abs(d.tau_hat - o.tau_hat) <= 1 and abs(d.omega_hat - o.omega_hat) <= 1 for o in out):
            continue
        out.append(d)
    return out


def _frac_delay(x: np.ndarray, tau: float, periodic: bool) -> np.ndarray:
    """Band-limited delay x[m - tau] by a linear-phase multiply in frequency."""
    if tau == 0:
        return x.copy()
    if periodic:
        n = x.size
        k = np.fft.fftfreq(n) * n
        return np.fft.ifft(np.fft.fft(x) * np.exp(-2j * np.pi * k * tau / n))
    n = x.size
    size = 1 << int(math.ceil(math.log2(2 * n)))
    k = np.fft.fftfreq(size) * size
    y = np.fft.ifft(np.fft.fft(x, size) * np.exp(-2j * np.pi * k * tau / size))
    return y[:n]


def refine_fractional(det: Detection, echo: ComplexSeq, ref: ComplexSeq, zone: Zone,
                      k_tau: int = 16, k_omega: int = 16, N: Optional[int] = None) -> Detection:
    """Grid search on [tau-1, tau+1] x [omega-1, omega+1] at spacing 1/k.

    Fractional delays shift the reference with a band-limited (sinc) delay;
    fractional Doppler uses the continuous phase ramp.  The window is clamped
    to the zone.
    """
    if k_tau < 1 or k_omega < 1:
        raise ParameterError("oversampling factors must be >= 1")
    if k_tau == 1 and k_omega == 1:
        return det
    N = _length(echo, zone, N)
    periodic = zone.case is Case.PERIODIC
    if echo.start_index != ref.start_index or len(echo) != len(ref):
        raise ParameterError("echo and reference must share a support")
    t_lo, t_hi = det.tau_hat - 1.0, det.tau_hat + 1.0
    w_lo, w_hi = det.omega_hat - 1.0, det.omega_hat + 1.0
    if t_lo < -zone.tau_max or t_hi > zone.tau_max or w_lo < -zone.omega_max or w_hi > zone.omega_max:
        log.warning("refinement window around (%g, %g) leaves the zone; clamping", det.tau_hat, det.omega_hat)
        t_lo, t_hi = max(t_lo, -zone.tau_max), min(t_hi, zone.tau_max)
        w_lo, w_hi = max(w_lo, -zone.omega_max), min(w_hi, zone.omega_max)
    taus = _grid(t_lo, t_hi, det.tau_hat, k_tau)
    omegas = _grid(w_lo, w_hi, det.omega_hat, k_omega)
    y = echo.samples
    r = ref.samples
    m = echo.start_index + np.arange(y.size)
    best = (-1.0, det.tau_hat, det.omega_hat)
    for tau in taus:
        R = _frac_delay(r, tau, periodic)
        z = np.conj(R) * y
        E = np.exp(-2j * np.pi * np.outer(omegas, m - tau + 1) / N)
        vals = np.abs(E @ z) ** 2
        j = int(np.argmax(vals))
        if vals[j] > best[0]:
            best = (float(vals[j]), float(tau), float(omegas[j]))
    return replace(det, tau_hat=best[1], omega_hat=best[2], peak_value=best[0])


def _grid(lo: float, hi: float, center: float, k: int) -> np.ndarray:
    if k == 1:
        return np.array([center])
    steps = np.arange(math.ceil((lo - center) * k - 1e-9), math.floor((hi - center) * k + 1e-9) + 1)
    return center + steps / k


def detections_to_csv(dets: Sequence[Detection]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau_hat", "omega_hat", "peak", "curtain_tau", "curtain_omega"])
    for d in dets:
        w.writerow([repr(d.tau_hat), repr(d.omega_hat), repr(d.peak_value), d.curtain_hit[0], d.curtain_hit[1]])
    return buf.getvalue()


def curtains_overlap(a: tuple, b: tuple, xi: int) -> bool:
    """True when omega_b - omega_a = xi*(tau_b - tau_a): the two curtains coincide."""
    return (b[1] - a[1]) == xi * (b[0] - a[0])
