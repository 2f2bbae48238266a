"""Discrete periodic and aperiodic ambiguity functions.

Convention used throughout the package::

    A_{s,r}(tau, omega) = | r^H J_tau Diag(h(omega)) s |
    h(omega)[n]         = exp(j*2*pi*omega*(n+1)/N)
    (J_tau v)[m]        = v[m - tau]          (indices mod N when periodic)

``n`` is the absolute sample index, so zero-padded transmit sequences and
extended references (support starting at ``-tau_ext``) are aligned by index.
With this shift direction the curtain of a chirp c_{xi,q} lies on
omega = xi*tau in both the periodic and the aperiodic case.

Doppler cuts (fixed tau, every integer omega) cost one FFT.  A small
instrumentation hook counts line evaluations so callers can check the
complexity of search procedures.
"""
from __future__ import annotations

import contextlib
import contextvars
import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import ParameterError
from .seqcore import Case, ComplexSeq, Zone

__all__ = [
    "AfGrid",
    "LineCounter",
    "count_lines",
    "doppler_length",
    "af_point",
    "af_point_complex",
    "doppler_cut",
    "af_line",
    "af_grid",
]


# instrumentation ----------------------------------------------------------
@dataclass
class LineCounter:
    lines: int = 0
    ffts: int = 0


_COUNTER: contextvars.ContextVar[Optional[LineCounter]] = contextvars.ContextVar(
    "flagseq_line_counter", default=None
)


@contextlib.contextmanager
def count_lines() -> Iterator[LineCounter]:
    """Count AF line evaluations (and the FFTs among them) inside the block."""
    counter = LineCounter()
    token = _COUNTER.set(counter)
    try:
        yield counter
    finally:
        _COUNTER.reset(token)


def _tick(fft: bool) -> None:
    c = _COUNTER.get()
    if c is not None:
        c.lines += 1
        if fft:
            c.ffts += 1


# helpers ------------------------------------------------------------------
def doppler_length(s: ComplexSeq) -> int:
    """Default Doppler normalization length for a sequence.

    A sequence stored on ``-T .. N-1+T`` (zero-padded or extended) maps to N;
    a sequence starting at 0 maps to its own length.
    """
    pad = max(0, -s.start_index)
    n = len(s) - 2 * pad
    if n < 1:
        raise ParameterError("cannot infer the Doppler length; pass N explicitly")
    return n


def _check_case(s: ComplexSeq, r: ComplexSeq, case: Case) -> Case:
    case = Case(case)
    if case is Case.PERIODIC:
        if len(s) != len(r) or s.start_index != r.start_index:
            raise ParameterError(
                "periodic AF needs identical supports; got "
                f"[{s.start_index}, {s.stop_index}) and [{r.start_index}, {r.stop_index})"
            )
    elif len(s) != len(r):
        raise ParameterError(f"sequence lengths differ: {len(s)} vs {len(r)}")
    return case


def _window(s: ComplexSeq, r: ComplexSeq):
    lo = min(s.start_index, r.start_index)
    hi = max(s.stop_index, r.stop_index)
    return lo, s.on_window(lo, hi), r.on_window(lo, hi)


def _lag_product(sw: np.ndarray, rw: np.ndarray, tau: int, periodic: bool) -> np.ndarray:
    """z[k] = conj(r[k+tau]) * s[k] on the common window (zero when out of range)."""
    size = sw.size
    if periodic:
        return np.conj(np.roll(rw, -tau)) * sw
    z = np.zeros(size, dtype=np.complex128)
    if abs(tau) >= size:
        return z
    if tau >= 0:
        z[: size - tau] = np.conj(rw[tau:]) * sw[: size - tau]
    else:
        z[-tau:] = np.conj(rw[: size + tau]) * sw[-tau:]
    return z


# point / line / grid ------------------------------------------------------
def af_point_complex(
    s: ComplexSeq, r: ComplexSeq, tau: int, omega: float, case: Case, N: Optional[int] = None
) -> complex:
    """Complex value r^H J_tau Diag(h(omega)) s (omega may be fractional)."""
    case = _check_case(s, r, case)
    if int(tau) != tau:
        raise ParameterError("tau must be an integer at the AF level")
    N = doppler_length(s) if N is None else int(N)
    lo, sw, rw = _window(s, r)
    z = _lag_product(sw, rw, int(tau), case is Case.PERIODIC)
    n_abs = lo + np.arange(sw.size)
    return complex(np.sum(z * np.exp(2j * np.pi * omega * (n_abs + 1) / N)))


def af_point(
    s: ComplexSeq, r: ComplexSeq, tau: int, omega: float, case: Case, N: Optional[int] = None
) -> float:
    return abs(af_point_complex(s, r, tau, omega, case, N))


def doppler_cut(
    s: ComplexSeq,
    r: ComplexSeq,
    tau: int,
    case: Case,
    N: Optional[int] = None,
    omega_offset: float = 0.0,
    complex_out: bool = False,
) -> np.ndarray:
    """AF at fixed ``tau`` for omega = omega_offset + 0, 1, ..., N-1 (one FFT)."""
    case = _check_case(s, r, case)
    N = doppler_length(s) if N is None else int(N)
    lo, sw, rw = _window(s, r)
    z = _lag_product(sw, rw, int(tau), case is Case.PERIODIC)
    n_abs = lo + np.arange(z.size)
    if omega_offset:
        z = z * np.exp(2j * np.pi * omega_offset * (n_abs + 1) / N)
    # sum_k z[k] exp(j2pi w (n_k+1)/N): fold by (n_k+1) mod N, then one inverse FFT
    folded = np.zeros(N, dtype=np.complex128)
    np.add.at(folded, np.mod(n_abs + 1, N), z)
    vals = np.fft.ifft(folded) * N
    _tick(fft=True)
    return vals if complex_out else np.abs(vals)


def af_line(
    s: ComplexSeq,
    r: ComplexSeq,
    anchor: tuple,
    direction: tuple,
    k_range: tuple,
    case: Case,
    N: Optional[int] = None,
) -> np.ndarray:
    """AF at the lattice points anchor + k*direction for k in range(*k_range).

    A constant-tau direction (0, 1) is evaluated with one Doppler-cut FFT;
    any other direction is walked pointwise in a single vectorized pass.
    """
    dtau, domega = (int(direction[0]), direction[1])
    if dtau == 0 and domega == 0:
        raise ParameterError("line direction must be nonzero")
    tau0, omega0 = anchor
    if int(tau0) != tau0:
        raise ParameterError("line anchor tau must be an integer")
    tau0 = int(tau0)
    k = np.arange(int(k_range[0]), int(k_range[1]))
    case = _check_case(s, r, case)
    Nd = doppler_length(s) if N is None else int(N)
    if dtau == 0 and float(domega) == int(domega) and abs(int(domega)) == 1:
        cut = doppler_cut(s, r, tau0, case, Nd, omega_offset=float(omega0) % 1.0)
        idx = np.floor(omega0).astype(int) + int(domega) * k
        return cut[np.mod(idx, Nd)]
    lo, sw, rw = _window(s, r)
    n_abs = lo + np.arange(sw.size)
    taus = tau0 + dtau * k
    omegas = omega0 + domega * k
    periodic = case is Case.PERIODIC
    Z = np.stack([_lag_product(sw, rw, int(t), periodic) for t in taus]) if k.size else np.zeros((0, sw.size))
    phase = np.exp(2j * np.pi * np.outer(omegas, n_abs + 1) / Nd)
    _tick(fft=False)
    return np.abs(np.sum(Z * phase, axis=1))


@dataclass
class AfGrid:
    """|AF| over [-tau_max..tau_max] x [-omega_max..omega_max]."""

    values: np.ndarray  # shape (2*tau_max+1, 2*omega_max+1)
    zone: Zone
    meta: dict = field(default_factory=dict)

    @property
    def case(self) -> Case:
        return self.zone.case

    @property
    def taus(self) -> np.ndarray:
        return self.zone.taus

    @property
    def omegas(self) -> np.ndarray:
        return self.zone.omegas

    def at(self, tau: int, omega: int) -> float:
        return float(self.values[tau + self.zone.tau_max, omega + self.zone.omega_max])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tau", "omega", "value"])
        for i, t in enumerate(self.taus):
            for j, o in enumerate(self.omegas):
                w.writerow([int(t), int(o), repr(float(self.values[i, j]))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "zone": self.zone.to_dict(),
            "meta": self.meta,
            "taus": [int(t) for t in self.taus],
            "omegas": [int(o) for o in self.omegas],
            "values": [[float(v) for v in row] for row in self.values],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def af_grid(
    s: ComplexSeq, r: ComplexSeq, zone: Zone, N: Optional[int] = None, meta: Optional[dict] = None
) -> AfGrid:
    """Dense |AF| over a zone, one Doppler-cut FFT per delay."""
    case = _check_case(s, r, zone.case)
    Nd = doppler_length(s) if N is None else int(N)
    if zone.tau_max > Nd - 1 or zone.omega_max > Nd - 1:
        raise ParameterError(f"zone {zone.tau_max, zone.omega_max} exceeds N-1 = {Nd - 1}")
    vals = np.empty((2 * zone.tau_max + 1, 2 * zone.omega_max + 1))
    w_idx = np.mod(zone.omegas, Nd)
    for i, t in enumerate(zone.taus):
        vals[i] = doppler_cut(s, r, int(t), case, Nd)[w_idx]
    return AfGrid(vals, zone, dict(meta or {}))
