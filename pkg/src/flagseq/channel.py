"""Delay-Doppler channel, Fisher information bounds and a Monte Carlo harness.

Echo model on the sample grid (bins of 1/B in delay, B/N in Doppler)::

    y[m] = sum_i rho_i * s(m - tau_i) * exp(j*2*pi*omega_i*(m - tau_i + 1)/N) + z[m]

s(m - tau) is the band-limited (sinc-interpolated) delay, applied as a
linear-phase multiply in frequency.  z is circular complex Gaussian with
variance sigma_z^2 = rho^2/SNR per sample.  The Doppler ramp follows the AF
convention used everywhere else so that a target at (tau0, omega0) peaks at
(tau0, omega0) in the estimator statistic.

Physical conversions: tau = 2*range*B/c and omega = 2*v*f_cr*N/(c*B).
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, ParameterError
from .estimator import (
    CfarConfig,
    Detection,
    curtain_cut,
    flag_search,
    noise_sigma_z2,
    refine_fractional,
)
from .seqcore import Case, ComplexSeq, Zone

log = logging.getLogger(__name__)

C_LIGHT = 299_792_458.0

__all__ = [
    "C_LIGHT",
    "Target",
    "ScenarioConfig",
    "FimResult",
    "delay_matrices",
    "echo",
    "synthesize_rx",
    "fim_crlb",
    "sampling_bounds",
    "SimPoint",
    "McResult",
    "monte_carlo",
    "false_alarm_rate",
]


@dataclass(frozen=True)
class Target:
    range_m: float
    velocity: float
    rho: complex = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    f_cr: float
    B: float
    targets: tuple
    snr_db: float
    seed: int = 0
    c: float = C_LIGHT

    def __post_init__(self):
        if self.f_cr <= 0 or self.B <= 0:
            raise ParameterError("carrier frequency and bandwidth must be positive")

    def bins(self, N: int) -> List[Tuple[float, float, complex]]:
        """(tau, omega, rho) per target in sample/Doppler bins."""
        out = []
        for t in self.targets:
            tau = 2.0 * t.range_m * self.B / self.c
            omega = 2.0 * t.velocity * self.f_cr * N / (self.c * self.B)
            out.append((tau, omega, complex(t.rho)))
        return out

    def check_zone(self, N: int, zone: Zone) -> List[int]:
        """Indices of targets outside the zone (a warning is logged for each)."""
        bad = []
        for i, (tau, omega, _) in enumerate(self.bins(N)):
            if not zone.contains(tau, omega):
                log.warning("target %d at (%.3f, %.3f) bins lies outside the zone", i, tau, omega)
                bad.append(i)
        return bad

    @property
    def snr(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    def to_dict(self) -> dict:
        return {
            "f_cr": self.f_cr,
            "B": self.B,
            "snr_db": self.snr_db,
            "seed": self.seed,
            "targets": [
                {"range": t.range_m, "velocity": t.velocity, "rho_re": complex(t.rho).real, "rho_im": complex(t.rho).imag}
                for t in self.targets
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        for key in ("f_cr", "B", "targets", "snr_db"):
            if key not in data:
                raise ParameterError(f"scenario is missing field {key!r}")
        targets = []
        for t in data["targets"]:
            rho = complex(float(t.get("rho_re", 1.0)), float(t.get("rho_im", 0.0)))
            targets.append(Target(float(t["range"]), float(t["velocity"]), rho))
        return cls(float(data["f_cr"]), float(data["B"]), tuple(targets), float(data["snr_db"]),
                   int(data.get("seed", 0)))


# synthesis ------------------------------------------------------------------
def _delay(x: np.ndarray, tau: float, periodic: bool) -> np.ndarray:
    n = x.size
    if periodic:
        if float(tau).is_integer():
            return np.roll(x, int(tau))
        k = np.fft.fftfreq(n) * n
        return np.fft.ifft(np.fft.fft(x) * np.exp(-2j * np.pi * k * tau / n))
    if float(tau).is_integer():
        out = np.zeros_like(x)
        t = int(tau)
        if t >= 0:
            out[t:] = x[:n - t] if t < n else 0
        else:
            out[:n + t] = x[-t:]
        return out
    size = 1 << int(math.ceil(math.log2(2 * n)))
    k = np.fft.fftfreq(size) * size
    return np.fft.ifft(np.fft.fft(x, size) * np.exp(-2j * np.pi * k * tau / size))[:n]


def echo(s: ComplexSeq, targets: Sequence[Tuple[float, float, complex]], sigma2: float,
         rng: Optional[np.random.Generator], case: Case, N: int) -> ComplexSeq:
    """Superpose delayed, Doppler-shifted copies of s plus CN(0, sigma2) noise."""
    periodic = Case(case) is Case.PERIODIC
    m = s.start_index + np.arange(len(s))
    y = np.zeros(len(s), dtype=np.complex128)
    for tau, omega, rho in targets:
        y += rho * _delay(s.samples, tau, periodic) * np.exp(2j * np.pi * omega * (m - tau + 1) / N)
    if sigma2 > 0:
        if rng is None:
            raise ParameterError("noise requested without an RNG")
        y += math.sqrt(sigma2 / 2.0) * (rng.standard_normal(y.size) + 1j * rng.standard_normal(y.size))
    return ComplexSeq(y, s.start_index)


def scenario_sigma2(targets: Sequence[Tuple[float, float, complex]], snr_db: float) -> float:
    """sigma_z^2 = rho^2/SNR with rho the strongest amplitude (1 when there are no targets)."""
    rho2 = max((abs(t[2]) ** 2 for t in targets), default=1.0)
    return rho2 / 10.0 ** (snr_db / 10.0)


def synthesize_rx(s: ComplexSeq, scenario: ScenarioConfig, N: int, case: Case = Case.PERIODIC,
                  rng: Optional[np.random.Generator] = None, noise: bool = True) -> ComplexSeq:
    targets = scenario.bins(N)
    sigma2 = scenario_sigma2(targets, scenario.snr_db) if noise else 0.0
    if rng is None:
        rng = np.random.default_rng(scenario.seed)
    return echo(s, targets, sigma2, rng, case, N)


# Fisher information ---------------------------------------------------------
def delay_matrices(N1: int, N2: int):
    """(D, H, T) on sample indices N1..N2.

    H[m, n] = pi^2/3 on the diagonal and (-1)^|m-n| * 2/(m-n)^2 off it;
    T[m, n] = (-1)^|m-n| / (m-n) off the diagonal and 0 on it.
    """
    idx = np.arange(N1, N2 + 1)
    diff = idx[:, None] - idx[None, :]
    sign = np.where(np.abs(diff) % 2 == 0, 1.0, -1.0)
    off = diff != 0
    safe = np.where(off, diff, 1)
    H = np.where(off, sign * 2.0 / safe.astype(float) ** 2, np.pi ** 2 / 3.0)
    T = np.where(off, sign / safe.astype(float), 0.0)
    D = np.diag(idx.astype(float))
    return D, H, T


@dataclass
class FimResult:
    phi: np.ndarray
    crlb: np.ndarray
    crlb_bins: np.ndarray

    def crlb_physical(self, c: float = C_LIGHT) -> Tuple[float, float]:
        """(range variance in m^2, speed variance in (m/s)^2)."""
        return float(c * c / 4.0 * self.crlb[0, 0]), float(c * c / 4.0 * self.crlb[1, 1])


def fim_crlb(s: ComplexSeq, B: float, f_cr: float, snr: float, N: Optional[int] = None,
             N1: Optional[int] = None, N2: Optional[int] = None) -> FimResult:
    """Re{Phi} for eta = [delay (s), Doppler ratio] and CRLB = Re{Phi}^-1 / (2 SNR).

    ``crlb_bins`` converts to squared delay bins (x B^2) and squared Doppler
    bins (x (f_cr*N/B)^2).  Sample indices of s are its absolute indices.
    """
    if snr <= 0:
        raise ParameterError("snr must be positive (linear scale)")
    n_abs = s.indices
    if N is None:
        N = int(n_abs.max()) + 1 if s.start_index >= 0 else len(s)
    N1 = -N if N1 is None else int(N1)
    N2 = 2 * N if N2 is None else int(N2)
    if N1 > n_abs.min() or N2 < n_abs.max():
        raise ParameterError(f"sample support [{N1}, {N2}] does not cover the sequence")
    vec = np.zeros(N2 - N1 + 1, dtype=np.complex128)
    vec[n_abs - N1] = s.samples
    D, H, T = delay_matrices(N1, N2)
    ss = np.vdot(vec, vec).real
    if ss <= 0:
        raise DomainError("zero-energy sequence has no Fisher information")
    sHs = np.vdot(vec, H @ vec).real
    sTs = np.vdot(vec, T @ vec)
    sDs = np.vdot(vec, D @ vec).real
    sD2s = np.vdot(vec, D @ (D @ vec)).real
    sDTs = np.vdot(vec, D @ (T @ vec))
    eps_c = 2.0 * np.pi * f_cr
    phi11 = B ** 2 * (sHs - abs(sTs) ** 2 / ss)
    # sign fixed by the delay derivative d/dtau s(m - tau) = -T s
    phi12 = -eps_c * np.imag(sDTs - sDs * sTs / ss)
    phi22 = eps_c ** 2 / B ** 2 * (sD2s - sDs ** 2 / ss)
    phi = np.array([[phi11, phi12], [phi12, phi22]])
    det = phi11 * phi22 - phi12 ** 2
    if not det > 1e-12 * max(phi11 * phi22, 1e-300):
        w, v = np.linalg.eigh(phi)
        raise DomainError(f"singular Fisher information; degenerate direction {v[:, 0].round(6).tolist()}")
    crlb = np.linalg.inv(phi) / (2.0 * snr)
    J = np.diag([B, f_cr * N / B])
    return FimResult(phi, crlb, J @ crlb @ J)


def sampling_bounds(B: float, f_cr: float, N: int, k_tau: int, k_omega: int, c: float = C_LIGHT):
    """(SB_range in m^2, SB_speed in (m/s)^2); both equal 1/(12 k^2) in squared bins."""
    if min(B, f_cr, N, k_tau, k_omega) <= 0:
        raise ParameterError("sampling bound parameters must be positive")
    sb_range = c ** 2 / (48.0 * B ** 2 * k_tau ** 2)
    sb_speed = c ** 2 * B ** 2 / (48.0 * f_cr ** 2 * N ** 2 * k_omega ** 2)
    return sb_range, sb_speed


# Monte Carlo ----------------------------------------------------------------
@dataclass(frozen=True)
class SimPoint:
    snr_db: float
    p_fa: float


@dataclass
class McResult:
    roc: List[dict] = field(default_factory=list)
    nmse: List[dict] = field(default_factory=list)

    def roc_csv(self) -> str:
        return _rows_csv(self.roc, ["snr_db", "p_fa", "p_d", "f_a_rate", "extra_per_trial"])

    def nmse_csv(self) -> str:
        return _rows_csv(self.nmse, ["snr_db", "nmse_range", "nmse_speed", "crlb_range", "crlb_speed",
                                     "sb_range", "sb_speed"])


def _rows_csv(rows: List[dict], cols: List[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([repr(float(r[c])) for c in cols])
    return buf.getvalue()


def _shards(trials: int, shard_size: int) -> List[int]:
    sizes = [shard_size] * (trials // shard_size)
    if trials % shard_size:
        sizes.append(trials % shard_size)
    return sizes


def _run_sharded(fn, trials: int, seed: int, threads: int, shard_size: int = 250):
    """Run fn(n, rng) on fixed-size shards with spawned seeds; order-stable results."""
    sizes = _shards(trials, shard_size)
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(n, np.random.default_rng(sq)) for n, sq in zip(sizes, seqs)]
    if threads <= 1 or len(jobs) <= 1:
        return [fn(n, rng) for n, rng in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def false_alarm_rate(s: ComplexSeq, r: ComplexSeq, xi: int, zone: Zone, p_fa: float, trials: int,
                     seed: int, N: int, sigma2: float = 1.0, threads: int = 1) -> Tuple[float, int]:
    """Fraction of Step-1 cells above threshold on noise-only echoes, and the cell count."""
    cfg = CfarConfig(p_fa, noise_sigma_z2(sigma2, r))

    def shard(n, rng):
        hits = cells = 0
        for _ in range(n):
            y = echo(s, [], sigma2, rng, zone.case, N)
            cut = curtain_cut(y, r, zone, xi, cfg, N)
            hits += int(cut.above.sum())
            cells += cut.cells
        return hits, cells

    parts = _run_sharded(shard, trials, seed, threads)
    hits = sum(p[0] for p in parts)
    cells = sum(p[1] for p in parts)
    return hits / cells, cells


def monte_carlo(s: ComplexSeq, r: ComplexSeq, xi: int, zone: Zone, points: Sequence[SimPoint],
                trials: int, seed: int, N: int, B: float = 10e6, f_cr: float = 77e9,
                k_tau: int = 16, k_omega: int = 16, margin: float = 1.0, threads: int = 1,
                refine: bool = True) -> McResult:
    """Detection rate, false-alarm rate and bin-normalized MSE per (SNR, P_FA) point.

    Each trial places one target at a uniformly random fractional position
    at least ``margin`` bins inside the zone.  Success means the strongest
    detection lies within one bin of the truth per axis; any further
    detections are counted in ``extra_per_trial``.  MSE is averaged over
    successful trials after fractional refinement of the strongest detection.
    """
    result = McResult()
    fim = fim_crlb(s, B, f_cr, 1.0, N=N, N1=min(-N, s.start_index), N2=max(2 * N, s.stop_index))
    sb_bins = 1.0 / (12.0 * k_tau ** 2), 1.0 / (12.0 * k_omega ** 2)
    for i, pt in enumerate(points):
        sigma2 = 10.0 ** (-pt.snr_db / 10.0)
        cfg = CfarConfig(pt.p_fa, noise_sigma_z2(sigma2, r))

        def shard(n, rng, cfg=cfg, sigma2=sigma2):
            ok = extra = 0
            err = np.zeros(2)
            fa_hits = fa_cells = 0
            for _ in range(n):
                tau0 = rng.uniform(-zone.tau_max + margin, zone.tau_max - margin)
                om0 = rng.uniform(-zone.omega_max + margin, zone.omega_max - margin)
                y = echo(s, [(tau0, om0, 1.0)], sigma2, rng, zone.case, N)
                dets = flag_search(y, r, xi, zone, cfg, N)
                if dets and abs(dets[0].tau_hat - tau0) <= 1 and abs(dets[0].omega_hat - om0) <= 1:
                    ok += 1
                    extra += len(dets) - 1
                    d = refine_fractional(dets[0], y, r, zone, k_tau, k_omega, N) if refine else dets[0]
                    err += [(d.tau_hat - tau0) ** 2, (d.omega_hat - om0) ** 2]
                z = echo(s, [], sigma2, rng, zone.case, N)
                cut = curtain_cut(z, r, zone, xi, cfg, N)
                fa_hits += int(cut.above.sum())
                fa_cells += cut.cells
            return ok, err, fa_hits, fa_cells, extra

        parts = _run_sharded(shard, trials, seed + i, threads)
        ok = sum(p[0] for p in parts)
        err = sum((p[1] for p in parts), np.zeros(2))
        fa = sum(p[2] for p in parts) / max(1, sum(p[3] for p in parts))
        result.roc.append({"snr_db": pt.snr_db, "p_fa": pt.p_fa, "p_d": ok / trials, "f_a_rate": fa,
                           "extra_per_trial": sum(p[4] for p in parts) / trials})
        snr = 10.0 ** (pt.snr_db / 10.0)
        nm = err / ok if ok else np.array([math.nan, math.nan])
        result.nmse.append({
            "snr_db": pt.snr_db,
            "nmse_range": nm[0],
            "nmse_speed": nm[1],
            "crlb_range": fim.crlb_bins[0, 0] / snr,
            "crlb_speed": fim.crlb_bins[1, 1] / snr,
            "sb_range": sb_bins[0],
            "sb_speed": sb_bins[1],
        })
    return result
