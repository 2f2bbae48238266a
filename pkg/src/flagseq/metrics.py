"""Scalar quality metrics for Flag sequence designs.

* NWImSL: 10*log10(G(t)/G(0)) along a solver history, or against a
  user-supplied reference WImSL.
* PMmSR: peak over maximum deviation from the ideal peak-curtain template
  (1 at the origin, 0.5 on the curtain line, 0 elsewhere), in dB (20*log10,
  amplitude ratio), capped at 300 dB.  Sets report the minimum over users.
* PAPR of the transmit Flag sequence on its N active samples, LPG between
  transmit and receive Flag sequences, and the peak/curtain orthogonality
  Delta.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .ambiguity import AfGrid, af_grid
from .errors import DomainError
from .objective import DesignConfig, FlagDesign, lpg, orthogonality_delta, wimsl_total
from .seqcore import ComplexSeq, Zone, papr

__all__ = [
    "PMMSR_CAP_DB",
    "nwimsl",
    "nwimsl_series",
    "flag_template",
    "pmmsr_grid",
    "pmmsr",
    "MetricReport",
    "build_report",
]

PMMSR_CAP_DB = 300.0


def nwimsl(g: float, g_ref: float) -> float:
    """10*log10(g/g_ref); -inf when g = 0."""
    if not g_ref > 0:
        raise DomainError("NWImSL needs a positive normalizing WImSL")
    if g <= 0:
        return -math.inf
    return 10.0 * math.log10(g / g_ref)


def nwimsl_series(history: Sequence[float], g_ref: Optional[float] = None):
    """NWImSL for every entry of a WImSL history.

    Returns (values, mode) with mode "iteration0" (normalized by G(0)) or
    "reference" (normalized by ``g_ref``).
    """
    if len(history) == 0:
        raise DomainError("empty history")
    mode = "iteration0" if g_ref is None else "reference"
    den = history[0] if g_ref is None else g_ref
    return [nwimsl(g, den) for g in history], mode


def flag_template(zone: Zone, xi: int) -> np.ndarray:
    """Ideal peak-curtain magnitude over the zone grid."""
    T, W = np.meshgrid(zone.taus, zone.omegas, indexing="ij")
    tmpl = np.where(W == xi * T, 0.5, 0.0)
    tmpl[zone.tau_max, zone.omega_max] = 1.0
    return tmpl


def pmmsr_grid(grid: AfGrid, xi: int) -> float:
    peak = grid.at(0, 0)
    if peak <= 0:
        raise DomainError("PMmSR is undefined for a zero peak")
    dev = float(np.max(np.abs(grid.values - flag_template(grid.zone, xi))))
    if dev <= peak * 10 ** (-PMMSR_CAP_DB / 20):
        return PMMSR_CAP_DB
    return 20.0 * math.log10(peak / dev)


def pmmsr(s: ComplexSeq, r: ComplexSeq, zone: Zone, xi: int, N: Optional[int] = None) -> float:
    return pmmsr_grid(af_grid(s, r, zone, N), xi)


@dataclass
class MetricReport:
    nwimsl_db: Dict[str, Optional[float]]
    pmmsr_db: float
    pmmsr_per_user: List[float]
    papr_db: List[float]
    lpg_db: List[float]
    lpg_theory_db: float
    delta_db: float
    label: str = ""
    meta: dict = field(default_factory=lambda: {"db_convention": "20log10 for amplitude ratios, 10log10 for power ratios"})

    def to_dict(self) -> dict:
        def clean(v):
            if v is None:
                return None
            if isinstance(v, float) and math.isinf(v):
                return "-inf" if v < 0 else "inf"
            return v

        return {
            "label": self.label,
            "nwimsl_db": {k: clean(v) for k, v in self.nwimsl_db.items()},
            "pmmsr_db": self.pmmsr_db,
            "pmmsr_per_user": self.pmmsr_per_user,
            "papr_db": self.papr_db,
            "lpg_db": [clean(v) for v in self.lpg_db],
            "lpg_theory_db": self.lpg_theory_db,
            "delta_db": self.delta_db,
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @staticmethod
    def markdown(reports: Sequence["MetricReport"]) -> str:
        head = "| design | NWImSL (dB) | PMmSR (dB) | PAPR (dB) | LPG (dB) | LPG theory (dB) | Delta (dB) |"
        rows = [head, "|---|---|---|---|---|---|---|"]
        for r in reports:
            nw = r.nwimsl_db.get("reference")
            if nw is None:
                nw = r.nwimsl_db.get("iteration0")
            rows.append(
                f"| {r.label} | {_fmt(nw)} | {_fmt(r.pmmsr_db)} | {_fmt(float(np.mean(r.papr_db)))} | "
                f"{_fmt(float(np.mean(r.lpg_db)))} | {_fmt(r.lpg_theory_db)} | {_fmt(r.delta_db)} |"
            )
        return "\n".join(rows) + "\n"


def _fmt(v: Optional[float]) -> str:
    if v is None:
        return "-"
    return f"{v:.3f}"


def build_report(design: FlagDesign, config: DesignConfig, history: Optional[Sequence[float]] = None,
                 g_ref: Optional[float] = None, label: str = "") -> MetricReport:
    """Metrics for a design; ``history`` is its WImSL trajectory (G(0) first)."""
    N = design.N
    zone = design.zone
    nw: Dict[str, Optional[float]] = {"iteration0": None, "reference": None}
    g_now = wimsl_total(design, config)
    if history is not None and len(history):
        nw["iteration0"] = nwimsl(g_now, history[0])
    if g_ref is not None:
        nw["reference"] = nwimsl(g_now, g_ref)
    per_user = []
    paprs = []
    lpgs = []
    for m in range(design.M):
        s = design.flag_tx(m)
        r = design.flag_rx(m)
        xi = design.curtains.members[m].params.xi
        per_user.append(pmmsr(s, r, zone, xi, N))
        paprs.append(papr(s.restrict(0, N)).db)
        lpgs.append(lpg(s, r))
    theory = 0.0 if config.symmetric else 10.0 * math.log10(config.epsilon)
    return MetricReport(nw, float(min(per_user)), per_user, paprs, lpgs, theory, orthogonality_delta(design), label)
