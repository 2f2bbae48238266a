"""Complex sequence containers, chirp constructors and amplitude bookkeeping.

Every sequence carries an explicit signed ``start_index`` so that zero-padded
transmit sequences and extended receive references (support
``-tau_ext .. N-1+tau_ext``) line up by absolute index without callers doing
offset arithmetic.  Nothing here normalizes implicitly: constructors state the
energy of what they return.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DomainError, ParameterError

__all__ = [
    "ComplexSeq",
    "ChirpParams",
    "Case",
    "Zone",
    "PaprResult",
    "make_chirp",
    "extend_chirp",
    "zero_pad",
    "papr",
]


@dataclass(frozen=True, eq=False)
class ComplexSeq:
    """Ordered complex samples indexed from ``start_index``.

    The sample array is copied and frozen on construction, so instances are
    safe to share between threads.
    """

    samples: np.ndarray
    start_index: int = 0

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.complex128).reshape(-1)
        if arr.size < 1:
            raise ParameterError("a sequence needs at least one sample")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("sequence samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "start_index", int(self.start_index))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def stop_index(self) -> int:
        """One past the last absolute index."""
        return self.start_index + self.samples.size

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.start_index, self.stop_index)

    def energy(self) -> float:
        return float(np.vdot(self.samples, self.samples).real)

    def restrict(self, start: int, stop: int) -> "ComplexSeq":
        """Samples on absolute indices ``start .. stop-1`` (must lie inside)."""
        if start < self.start_index or stop > self.stop_index or stop <= start:
            raise ParameterError(
                f"window [{start}, {stop}) is not inside [{self.start_index}, {self.stop_index})"
            )
        lo = start - self.start_index
        return ComplexSeq(self.samples[lo:lo + (stop - start)], start)

    def on_window(self, start: int, stop: int) -> np.ndarray:
        """Samples on ``start .. stop-1`` with zeros outside the stored support."""
        out = np.zeros(stop - start, dtype=np.complex128)
        lo = max(start, self.start_index)
        hi = min(stop, self.stop_index)
        if hi > lo:
            out[lo - start:hi - start] = self.samples[lo - self.start_index:hi - self.start_index]
        return out

    def scaled(self, factor: complex) -> "ComplexSeq":
        return ComplexSeq(self.samples * factor, self.start_index)

    def allclose(self, other: "ComplexSeq", atol: float = 1e-12) -> bool:
        return (
            self.start_index == other.start_index
            and len(self) == len(other)
            and bool(np.allclose(self.samples, other.samples, rtol=0.0, atol=atol))
        )

    # serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "start_index": self.start_index,
            "re": [float(v) for v in self.samples.real],
            "im": [float(v) for v in self.samples.imag],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ComplexSeq":
        try:
            re = np.asarray(data["re"], dtype=float)
            im = np.asarray(data["im"], dtype=float)
            start = int(data["start_index"])
        except KeyError as exc:
            raise ParameterError(f"sequence record is missing field {exc.args[0]!r}") from None
        if re.shape != im.shape:
            raise ParameterError("re and im arrays differ in length")
        return cls(re + 1j * im, start)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "re", "im"])
        for n, v in zip(self.indices, self.samples):
            writer.writerow([int(n), repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ComplexSeq":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ParameterError("empty sequence CSV")
        idx = np.array([int(r["n"]) for r in rows])
        if np.any(np.diff(idx) != 1):
            raise ParameterError("sequence CSV indices must be consecutive")
        vals = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
        return cls(vals, int(idx[0]))


class Case(str, enum.Enum):
    PERIODIC = "periodic"
    APERIODIC = "aperiodic"


@dataclass(frozen=True)
class Zone:
    """Delay-Doppler zone of operation |tau| <= tau_max, |omega| <= omega_max."""

    tau_max: int
    omega_max: int
    case: Case = Case.PERIODIC

    def __post_init__(self):
        if int(self.tau_max) != self.tau_max or int(self.omega_max) != self.omega_max:
            raise ParameterError("zone limits must be integers")
        if self.tau_max < 0 or self.omega_max < 0:
            raise ParameterError("zone limits must be nonnegative")
        object.__setattr__(self, "tau_max", int(self.tau_max))
        object.__setattr__(self, "omega_max", int(self.omega_max))
        object.__setattr__(self, "case", Case(self.case))

    def contains(self, tau: float, omega: float) -> bool:
        return abs(tau) <= self.tau_max and abs(omega) <= self.omega_max

    @property
    def taus(self) -> np.ndarray:
        return np.arange(-self.tau_max, self.tau_max + 1)

    @property
    def omegas(self) -> np.ndarray:
        return np.arange(-self.omega_max, self.omega_max + 1)

    @property
    def size(self) -> int:
        return (2 * self.tau_max + 1) * (2 * self.omega_max + 1)

    def to_dict(self) -> dict:
        return {"tau_max": self.tau_max, "omega_max": self.omega_max, "case": self.case.value}

    @classmethod
    def from_dict(cls, data: dict) -> "Zone":
        for key in ("tau_max", "omega_max", "case"):
            if key not in data:
                raise ParameterError(f"zone is missing field {key!r}")
        return cls(int(data["tau_max"]), int(data["omega_max"]), Case(data["case"]))


@dataclass(frozen=True)
class ChirpParams:
    """Discrete chirp (N, xi, q) with optional extension width ``tau_ext``."""

    N: int
    xi: int
    q: int
    tau_ext: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise ParameterError(f"N must be positive, got {self.N}")
        lo, hi = 1 - self.N, self.N - 1
        if not lo <= self.xi <= hi:
            raise ParameterError(f"xi={self.xi} outside [{lo}, {hi}]")
        if not lo <= self.q <= hi:
            raise ParameterError(f"q={self.q} outside [{lo}, {hi}]")
        if self.tau_ext < 0:
            raise ParameterError("tau_ext must be nonnegative")

    @property
    def parity_ok(self) -> bool:
        return (self.xi * self.N - self.q) % 2 == 0

    def to_dict(self) -> dict:
        return {"N": self.N, "xi": self.xi, "q": self.q, "tau_ext": self.tau_ext}


def _chirp_samples(N: int, xi: int, q: int, n: np.ndarray) -> np.ndarray:
    # n*(xi*n+q) is an exact integer; reduce mod 2N before scaling so the
    # phase stays accurate for large n.
    n = n.astype(np.int64)
    k = np.mod(n * (xi * n + q), 2 * N)
    return np.exp(1j * np.pi * k / N) / math.sqrt(N)


def make_chirp(p: ChirpParams) -> ComplexSeq:
    """c[n] = exp(j*pi*n*(xi*n+q)/N)/sqrt(N), n = 0..N-1.  Unit energy."""
    return ComplexSeq(_chirp_samples(p.N, p.xi, p.q, np.arange(p.N)), 0)


def extend_chirp(p: ChirpParams) -> ComplexSeq:
    """Same chirp formula evaluated on n = -tau_ext .. N-1+tau_ext.

    Energy is (N + 2*tau_ext)/N.
    """
    if p.tau_ext < 1:
        raise ParameterError("extend_chirp needs tau_ext >= 1; use make_chirp instead")
    n = np.arange(-p.tau_ext, p.N + p.tau_ext)
    return ComplexSeq(_chirp_samples(p.N, p.xi, p.q, n), -p.tau_ext)


def zero_pad(c: ComplexSeq, tau_ext: int) -> ComplexSeq:
    """[0]*tau_ext + c + [0]*tau_ext, starting at index -tau_ext."""
    if tau_ext < 0:
        raise ParameterError("tau_ext must be nonnegative")
    if c.start_index != 0:
        raise ParameterError("zero_pad expects a sequence starting at index 0")
    z = np.zeros(tau_ext, dtype=np.complex128)
    return ComplexSeq(np.concatenate([z, c.samples, z]), -tau_ext)


class PaprResult(NamedTuple):
    linear: float
    db: float


def papr(s: ComplexSeq) -> PaprResult:
    """Peak-to-average power ratio N*max|s|^2/||s||^2 over the stored samples."""
    e = s.energy()
    if e <= 0.0:
        raise DomainError("PAPR is undefined for a zero-energy sequence")
    lin = len(s) * float(np.max(np.abs(s.samples) ** 2)) / e
    return PaprResult(lin, 10.0 * math.log10(lin))
