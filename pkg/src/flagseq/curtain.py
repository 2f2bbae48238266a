"""Curtain sequences and Curtain sequence sets built from discrete chirps.

A chirp c_{xi,q} with (xi*N - q) even has a periodic auto-AF equal to 1 on
the line omega = xi*tau and 0 elsewhere in any zone with
|xi|*tau_max + omega_max < N.  For the aperiodic case the transmit chirp is
zero-padded and the receiver keeps an extended copy of the chirp
(tau_ext = tau_max by default).

Set constructions:

* near-zero CAF: pairwise |xi_a - xi_b| coprime to N gives |CAF| = 1/sqrt(N)
  everywhere (periodic) or for |tau| <= tau_ext (aperiodic);
* zero CAF: common xi, q of equal parity spaced by 2d with
  |xi|*tau_max + omega_max < d gives CAF = 0 inside the zone.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .errors import ClassificationError, FeasibilityError, ParameterError
from .seqcore import Case, ChirpParams, ComplexSeq, Zone, extend_chirp, make_chirp, zero_pad

__all__ = [
    "CurtainSpec",
    "CurtainSet",
    "SetKind",
    "HeisenbergClass",
    "build_curtain",
    "build_near_zero_set",
    "build_zero_set",
    "capacity",
    "zero_set_qs",
    "greedy_coprime_xis",
    "classify_heisenberg",
]


@dataclass(frozen=True)
class CurtainSpec:
    """A validated chirp curtain plus the sequences it implies for its zone.

    ``tx`` is what is transmitted (the chirp, zero-padded in the aperiodic
    case); ``rx`` is the receive reference (the chirp itself, or its
    extension).
    """

    params: ChirpParams
    zone: Zone

    @property
    def line_slope(self) -> int:
        return self.params.xi

    @property
    def tx(self) -> ComplexSeq:
        c = make_chirp(self.params)
        if self.zone.case is Case.APERIODIC:
            return zero_pad(c, self.params.tau_ext)
        return c

    @property
    def rx(self) -> ComplexSeq:
        if self.zone.case is Case.APERIODIC:
            return extend_chirp(self.params)
        return make_chirp(self.params)

    def to_dict(self) -> dict:
        return self.params.to_dict()


class SetKind(str, enum.Enum):
    NEAR_ZERO_CAF = "near_zero_caf"
    ZERO_CAF = "zero_caf"
    SINGLE = "single"


@dataclass(frozen=True)
class CurtainSet:
    members: tuple
    kind: SetKind
    zone: Zone

    def __len__(self) -> int:
        return len(self.members)

    @property
    def N(self) -> int:
        return self.members[0].params.N

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "zone": self.zone.to_dict(),
            "members": [m.to_dict() for m in self.members],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "CurtainSet":
        for key in ("kind", "zone", "members"):
            if key not in data:
                raise ParameterError(f"curtain set is missing field {key!r}")
        zone = Zone.from_dict(data["zone"])
        kind = SetKind(data["kind"])
        members = []
        for m in data["members"]:
            members.append(
                build_curtain(int(m["N"]), int(m["xi"]), int(m["q"]), zone, tau_ext=m.get("tau_ext"))
            )
        out = cls(tuple(members), kind, zone)
        if kind is SetKind.NEAR_ZERO_CAF:
            _check_coprime(out.N, [m.params.xi for m in members])
        elif kind is SetKind.ZERO_CAF:
            _check_zero_gap(out.N, members[0].params.xi, [m.params.q for m in members], zone)
        return out


def build_curtain(N: int, xi: int, q: int, zone: Zone, tau_ext: Optional[int] = None) -> CurtainSpec:
    """Check the parity, zone and extension conditions and return a curtain spec.

    Raises FeasibilityError with ``rule`` in {"parity", "zone", "extension"}.
    """
    aperiodic = zone.case is Case.APERIODIC
    if tau_ext is None:
        tau_ext = zone.tau_max if aperiodic else 0
    tau_ext = int(tau_ext)
    p = ChirpParams(int(N), int(xi), int(q), tau_ext if aperiodic else 0)
    if not p.parity_ok:
        raise FeasibilityError(
            "parity", f"[xi*N - q] mod 2 = [{xi}*{N} - {q}] mod 2 = 1, must be 0"
        )
    reach = abs(xi) * zone.tau_max + zone.omega_max
    if not reach < N:
        raise FeasibilityError(
            "zone", f"|xi|*tau_max + omega_max = {reach} is not < N = {N}"
        )
    if aperiodic:
        if zone.tau_max > tau_ext:
            raise FeasibilityError(
                "extension", f"tau_max = {zone.tau_max} exceeds tau_ext = {tau_ext}"
            )
        if tau_ext < 1:
            raise FeasibilityError("extension", "aperiodic curtains need tau_ext >= 1")
        if xi != 0 and not tau_ext < N // abs(xi):
            raise FeasibilityError(
                "extension", f"tau_ext = {tau_ext} is not < floor(N/|xi|) = {N // abs(xi)}"
            )
    return CurtainSpec(p, zone)


def _check_coprime(N: int, xis: Sequence[int]) -> None:
    for a in range(len(xis)):
        for b in range(a + 1, len(xis)):
            diff = abs(xis[a] - xis[b])
            if math.gcd(diff, N) != 1:
                raise FeasibilityError(
                    "coprime",
                    f"members {a} and {b}: |{xis[a]} - {xis[b]}| = {diff} shares factor "
                    f"{math.gcd(diff, N)} with N = {N}",
                )


def build_near_zero_set(N: int, xis: Sequence[int], qs: Sequence[int], zone: Zone,
                        tau_ext: Optional[int] = None) -> CurtainSet:
    """Set with pairwise |CAF| = 1/sqrt(N) (coprime chirp-rate differences)."""
    if len(xis) != len(qs) or not xis:
        raise ParameterError("xis and qs must be nonempty and of equal length")
    _check_coprime(N, list(xis))
    if zone.case is Case.APERIODIC and len(xis) > 1:
        t_ext = zone.tau_max if tau_ext is None else tau_ext
        top = max(abs(x) for x in xis)
        bound = N // (2 * top) if top else N
        if t_ext > bound:
            raise FeasibilityError(
                "extension", f"tau_ext = {t_ext} exceeds floor(N/(2*max|xi|)) = {bound}"
            )
    members = tuple(build_curtain(N, x, q, zone, tau_ext) for x, q in zip(xis, qs))
    return CurtainSet(members, SetKind.NEAR_ZERO_CAF, zone)


def capacity(N: int, xi: int, zone: Zone) -> int:
    """min{floor(N/(|xi|(tau_max+1))), floor(N/(omega_max+1))}."""
    a = N // (abs(xi) * (zone.tau_max + 1)) if xi != 0 else N
    return min(a, N // (zone.omega_max + 1))


def _check_zero_gap(N: int, xi: int, qs: Sequence[int], zone: Zone) -> None:
    if len({q % 2 for q in qs}) > 1:
        raise FeasibilityError("parity", f"q values {list(qs)} mix parities")
    reach = abs(xi) * zone.tau_max + zone.omega_max
    for a in range(len(qs)):
        for b in range(a + 1, len(qs)):
            d2 = abs(abs(qs[a]) - abs(qs[b]))
            d = d2 / 2
            if not reach < d:
                raise FeasibilityError(
                    "gap",
                    f"q = {qs[a]}, {qs[b]}: d = ||q_a|-|q_b||/2 = {d:g} but "
                    f"|xi|*tau_max + omega_max = {reach} must be < d",
                )


def build_zero_set(N: int, xi: int, qs: Sequence[int], zone: Zone,
                   tau_ext: Optional[int] = None) -> CurtainSet:
    """Set with zero CAF inside the zone (common xi, equal-parity q, gap 2d)."""
    if not qs:
        raise ParameterError("need at least one q")
    _check_zero_gap(N, xi, list(qs), zone)
    members = tuple(build_curtain(N, xi, q, zone, tau_ext) for q in qs)
    return CurtainSet(members, SetKind.ZERO_CAF, zone)


def zero_set_qs(N: int, xi: int, zone: Zone, count: Optional[int] = None) -> List[int]:
    """Nonnegative q values with the smallest feasible spacing 2d.

    d = |xi|*tau_max + omega_max + 1; the first q is the smallest nonnegative
    value with the right parity.  This is a placement rule, not a proof of
    maximal cardinality: it generally yields fewer members than capacity().
    """
    d = abs(xi) * zone.tau_max + zone.omega_max + 1
    q0 = (xi * N) % 2
    qs = list(range(q0, N, 2 * d))
    if count is not None:
        if count > len(qs):
            raise FeasibilityError(
                "gap", f"only {len(qs)} q values fit in [0, N-1] with spacing 2d = {2 * d}"
            )
        qs = qs[:count]
    return qs


def greedy_coprime_xis(N: int, candidates: Optional[Iterable[int]] = None) -> List[int]:
    """Greedy subset with pairwise differences coprime to N.

    Heuristic only: the result is a valid set, not necessarily a largest one.
    """
    if candidates is None:
        candidates = range(1 - N, N)
    chosen: List[int] = []
    for x in candidates:
        if all(math.gcd(abs(x - y), N) == 1 for y in chosen):
            chosen.append(int(x))
    return chosen


class HeisenbergClass(str, enum.Enum):
    DELTA = "Delta"
    NON_IDEAL_CHIRP = "NonIdealChirp"
    IDEAL_CHIRP = "IdealChirp"


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    for k in range(2, int(math.isqrt(n)) + 1):
        if n % k == 0:
            return False
    return True


def classify_heisenberg(N: int, seq: ComplexSeq, tol: float = 1e-9):
    """Sort a prime-length sequence into Delta / NonIdealChirp / IdealChirp.

    Returns (class, params) where params is None for a delta.  Chirp
    parameters are read off the phase differences: the second difference is
    2*pi*xi/N and the first is pi*(xi+q)/N (both mod 2*pi).  Global phase and
    amplitude are ignored.
    """
    if not _is_prime(N):
        raise ParameterError(f"N = {N} is not prime")
    x = np.asarray(seq.samples)
    if x.size != N:
        raise ParameterError(f"sequence length {x.size} differs from N = {N}")
    mag = np.abs(x)
    peak = mag.max()
    if peak == 0:
        raise ClassificationError("all-zero sequence")
    nz = mag > tol * peak
    if nz.sum() == 1:
        return HeisenbergClass.DELTA, None
    if np.max(np.abs(mag - mag.mean())) > tol * peak * 1e3:
        raise ClassificationError("not constant modulus and not a delta")
    u = x / x[0]
    d1 = np.angle(u[1] / u[0])
    d2 = np.angle(u[2] * u[0] / (u[1] * u[1])) if N > 2 else 0.0
    xi = int(round(d2 * N / (2 * np.pi))) % N
    q = (int(round(d1 * N / np.pi)) - xi) % (2 * N)
    if q > N - 1:
        q -= 2 * N
    if q < 1 - N:
        # same sequence: (xi, q) ~ (xi + N, q - N)
        q += N
        xi -= N
    try:
        p = ChirpParams(N, xi, q)
    except ParameterError:
        # fold (xi, q) -> (xi - N, q + N) which gives the same samples
        p = ChirpParams(N, xi - N, q + N)
    ref = make_chirp(p).samples
    ratio = x / ref
    if np.max(np.abs(ratio - ratio[0])) > 1e-6 * abs(ratio[0]):
        raise ClassificationError("sequence is neither a delta nor a discrete chirp")
    cls = HeisenbergClass.IDEAL_CHIRP if p.parity_ok else HeisenbergClass.NON_IDEAL_CHIRP
    return cls, p
