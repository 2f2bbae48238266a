"""flagseq command-line front end.

    flagseq design|verify|evaluate|estimate|bench --config FILE --out DIR
            [--seed S] [--threads T] [--emit-gnuplot]

Exit codes: 0 success, 1 invariant failure, 2 usage or configuration error.
Every run writes ``manifest.json`` listing each artifact with its sha256.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import math
import os
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from . import __version__
from .ambiguity import af_grid, af_point, count_lines, doppler_cut
from .apmm import solve_asymmetric, solve_symmetric
from .channel import ScenarioConfig, SimPoint, echo, false_alarm_rate, monte_carlo, scenario_sigma2
from .curtain import (
    CurtainSet,
    SetKind,
    build_curtain,
    build_near_zero_set,
    build_zero_set,
)
from .errors import FeasibilityError, FlagSeqError, ParameterError, SolverError
from .estimator import CfarConfig, flag_search, noise_sigma_z2, refine_fractional
from .metrics import MetricReport, build_report
from .objective import DesignConfig, FlagDesign, orthogonality_delta, random_peaks
from .seqcore import Case, ChirpParams, ComplexSeq, Zone, extend_chirp, make_chirp, zero_pad

log = logging.getLogger("flagseq")

EXIT_OK, EXIT_INVARIANT, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# helpers --------------------------------------------------------------------
def _require(data: dict, keys, where: str) -> None:
    for k in keys:
        if k not in data:
            raise ParameterError(f"{where} is missing field {k!r}")


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"{path} must hold a JSON object")
    return data


def _threads(arg: Optional[int]) -> int:
    if arg is not None:
        val = arg
    else:
        env = os.environ.get("FLAGSEQ_THREADS")
        if env is None:
            return 1
        try:
            val = int(env)
        except ValueError:
            raise UsageError(f"FLAGSEQ_THREADS must be an integer, got {env!r}") from None
    if val < 1:
        raise UsageError("thread count must be >= 1")
    return val


def _git_version() -> str:
    import subprocess

    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True,
                             timeout=5, cwd=Path(__file__).resolve().parent)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


class Outputs:
    """Artifact writer that remembers every file for the manifest."""

    def __init__(self, root: str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: List[str] = []

    def text(self, name: str, content: str) -> Path:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")
        self.files.append(name)
        return path

    def json(self, name: str, obj) -> Path:
        return self.text(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def manifest(self, command: str, config: dict, seed: int, threads: int, wall: float, extra: dict) -> None:
        entries = []
        for name in self.files:
            data = (self.root / name).read_bytes()
            entries.append({"path": name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})
        man = {
            "command": command,
            "version": _git_version(),
            "config": config,
            "seed": seed,
            "threads": threads,
            "wall_clock_s": wall,
            "finished_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "files": entries,
        }
        man.update(extra)
        (self.root / "manifest.json").write_text(json.dumps(man, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# configuration --------------------------------------------------------------
def curtains_from_config(N: int, zone: Zone, cur: dict) -> CurtainSet:
    _require(cur, ("kind", "xi", "q"), "curtains")
    kind = SetKind(cur["kind"])
    xis = cur["xi"] if isinstance(cur["xi"], list) else [cur["xi"]]
    qs = cur["q"] if isinstance(cur["q"], list) else [cur["q"]]
    tau_ext = cur.get("tau_ext")
    if kind is SetKind.ZERO_CAF:
        if len(set(xis)) != 1:
            raise ParameterError("zero_caf sets share one xi")
        return build_zero_set(N, int(xis[0]), [int(q) for q in qs], zone, tau_ext)
    if kind is SetKind.SINGLE:
        if len(xis) != 1 or len(qs) != 1:
            raise ParameterError("a single curtain takes one xi and one q")
        c = build_curtain(N, int(xis[0]), int(qs[0]), zone, tau_ext)
        return CurtainSet((c,), SetKind.SINGLE, zone)
    return build_near_zero_set(N, [int(x) for x in xis], [int(q) for q in qs], zone, tau_ext)


def design_config_from(cfg: dict, M: int, zone: Zone) -> DesignConfig:
    d = cfg["design"]
    _require(d, ("varrho", "alpha", "beta", "epsilon", "symmetric"), "design")
    return DesignConfig.from_dict({**d, "M": M, "zone": zone.to_dict()})


def _load_design_file(path: str):
    data = _load_json(path)
    if "design" in data and isinstance(data["design"], dict) and "curtains" in data["design"]:
        body = data["design"]
    else:
        body = data
    return data, body


# gnuplot companions ---------------------------------------------------------
def _gp_convergence(name: str) -> str:
    return (
        "set datafile separator ','\nset xlabel 'iteration'\nset ylabel 'NWImSL (dB)'\n"
        f"plot '{name}' using 1:2 with lines title 'NWImSL'\n"
    )


def _gp_grid(name: str) -> str:
    return (
        "set datafile separator ','\nset xlabel 'delay'\nset ylabel 'Doppler'\nset pm3d map\n"
        f"splot '{name}' using 1:2:3 every ::1 with pm3d notitle\n"
    )


# subcommands ----------------------------------------------------------------
def cmd_design(cfg: dict, out: Outputs, seed: int, threads: int, emit_gp: bool) -> int:
    _require(cfg, ("N", "zone", "curtains", "design"), "design config")
    N = int(cfg["N"])
    zone = Zone.from_dict(cfg["zone"])
    curtains = curtains_from_config(N, zone, cfg["curtains"])
    config = design_config_from(cfg, len(curtains), zone)
    solver = cfg.get("solver", {})
    t_max = int(solver.get("t_max", 500))
    rel_tol = float(solver.get("rel_tol", 1e-8))
    rng = np.random.default_rng(seed)
    init = random_peaks(curtains, rng)
    lines: List[str] = []
    conv_csv = ["t,NWImSL_dB,OF"]

    def record(rec):
        lines.append(json.dumps(rec.to_dict(), sort_keys=True))
        conv_csv.append(f"{rec.t},{rec.nwimsl_db!r},{rec.of!r}")

    solve = solve_symmetric if config.symmetric else solve_asymmetric
    result = solve(init, config, t_max=t_max, rel_tol=rel_tol, callback=record)
    design = result.design
    out.json("design.json", {"config": config.to_dict(), "seed": seed, "design": design.to_dict()})
    for m in range(design.M):
        out.text(f"flag_tx_{m}.csv", design.flag_tx(m).to_csv())
        out.text(f"flag_rx_{m}.csv", design.flag_rx(m).to_csv())
    out.text("convergence.jsonl", "\n".join(lines) + "\n")
    if emit_gp:
        out.text("convergence.csv", "\n".join(conv_csv) + "\n")
        out.text("convergence.gp", _gp_convergence("convergence.csv"))
    report = build_report(design, config, history=list(result.wimsl_history), label="design")
    out.json("metrics.json", report.to_dict())
    print(f"design: M={design.M} N={N} iterations={len(result.history) - 1} "
          f"NWImSL={result.history[-1].nwimsl_db:.3f} dB converged={result.converged}")
    return EXIT_OK


def _raw_curtains(body: dict):
    """Curtain parameters and zone without feasibility validation (verify inspects them)."""
    cur = body["curtains"]
    _require(cur, ("kind", "zone", "members"), "curtains")
    zone = Zone.from_dict(cur["zone"])
    members = []
    for m in cur["members"]:
        _require(m, ("N", "xi", "q"), "curtain member")
        members.append(ChirpParams(int(m["N"]), int(m["xi"]), int(m["q"]), int(m.get("tau_ext", 0))))
    return SetKind(cur["kind"]), zone, members


def _curtain_pair(p: ChirpParams, zone: Zone):
    c = make_chirp(p)
    if zone.case is Case.APERIODIC:
        return zero_pad(c, p.tau_ext), extend_chirp(p)
    return c, c


def cmd_verify(cfg: dict, out: Outputs, seed: int, threads: int, emit_gp: bool) -> int:
    body = cfg["design"] if isinstance(cfg.get("design"), dict) and "curtains" in cfg["design"] else cfg
    _require(body, ("curtains", "peaks_tx", "peaks_rx"), "design file")
    kind, zone, params = _raw_curtains(body)
    tol = float(cfg.get("tolerance", 1e-9))
    delta_max = float(cfg.get("delta_max_db", -10.0))
    checks = []

    def check(name: str, ok: bool, detail: str):
        checks.append({"check": name, "pass": bool(ok), "detail": detail})

    N = params[0].N
    for i, p in enumerate(params):
        s, r = _curtain_pair(p, zone)
        g = af_grid(s, r, zone, N).values
        T, W = np.meshgrid(zone.taus, zone.omegas, indexing="ij")
        line = W == p.xi * T
        on = float(np.max(np.abs(g[line] - 1.0))) if np.any(line) else 0.0
        off = float(np.max(g[~line])) if np.any(~line) else 0.0
        name = "curtain_ideality_periodic" if zone.case is Case.PERIODIC else "curtain_ideality_aperiodic"
        check(f"{name}[{i}]", on <= tol and off <= tol,
              f"xi={p.xi} q={p.q}: max|AAF-1| on curtain {on:.3e}, max AAF off curtain {off:.3e}")
    for a in range(len(params)):
        for b in range(len(params)):
            if a == b:
                continue
            sa, _ = _curtain_pair(params[a], zone)
            _, rb = _curtain_pair(params[b], zone)
            g = af_grid(sa, rb, zone, N).values
            if kind is SetKind.ZERO_CAF:
                top = float(g.max())
                check(f"zero_caf[{a},{b}]", top <= tol, f"max CAF {top:.3e}")
            elif kind is SetKind.NEAR_ZERO_CAF:
                dev = float(np.max(np.abs(g - 1.0 / math.sqrt(N))))
                check(f"near_zero_caf[{a},{b}]", dev <= tol, f"max |CAF - 1/sqrt(N)| {dev:.3e}")
    lo = -zone.tau_max if zone.case is Case.APERIODIC else 0
    for m, (ptx, prx) in enumerate(zip(body["peaks_tx"], body["peaks_rx"])):
        ps = ComplexSeq.from_dict(ptx)
        pr = ComplexSeq.from_dict(prx)
        mod = np.abs(ps.on_window(0, N)) * math.sqrt(N)
        drift = float(np.max(np.abs(mod - 1.0)))
        outside = float(np.max(np.abs(ps.samples[(ps.indices < 0) | (ps.indices >= N)]), initial=0.0))
        check(f"constant_modulus_tx[{m}]", drift <= tol and outside <= tol,
              f"max ||p_s[n]|*sqrt(N) - 1| {drift:.3e}, off-support {outside:.3e}")
        e = abs(math.sqrt(pr.energy()) - 1.0)
        check(f"unit_energy_rx[{m}]", e <= tol, f"| ||p_r|| - 1 | {e:.3e}")
        cs, cr = _curtain_pair(params[m], zone)
        d1 = abs(np.vdot(ps.on_window(lo, lo + len(ps)), cs.on_window(lo, lo + len(ps))))
        d2 = abs(np.vdot(cr.on_window(lo, lo + len(pr)), pr.on_window(lo, lo + len(pr))))
        top = max(d1, d2)
        db = 20 * math.log10(top) if top > 0 else -300.0
        check(f"orthogonality_delta[{m}]", db <= delta_max, f"Delta {db:.3f} dB (limit {delta_max} dB)")
    ok = all(c["pass"] for c in checks)
    out.json("verify.json", {"pass": ok, "checks": checks})
    for c in checks:
        print(f"{'PASS' if c['pass'] else 'FAIL'} {c['check']}: {c['detail']}")
    return EXIT_OK if ok else EXIT_INVARIANT


def cmd_evaluate(cfg: dict, out: Outputs, seed: int, threads: int, emit_gp: bool) -> int:
    if "design_file" in cfg:
        data, body = _load_design_file(cfg["design_file"])
    else:
        data, body = cfg, (cfg["design"] if "design" in cfg and "curtains" in cfg["design"] else cfg)
    design = FlagDesign.from_dict(body)
    zone = Zone.from_dict(cfg["zone"]) if "zone" in cfg else design.zone
    if zone.case is not design.zone.case:
        raise ParameterError("evaluation zone must use the design's case")
    if zone.tau_max > design.zone.tau_max and zone.case is Case.APERIODIC:
        raise ParameterError(f"aperiodic evaluation zone tau_max {zone.tau_max} exceeds the design's "
                             f"{design.zone.tau_max}")
    N = design.N
    for m1 in range(design.M):
        for m2 in range(design.M):
            g = af_grid(design.flag_tx(m1), design.flag_rx(m2), zone, N,
                        meta={"tx": m1, "rx": m2})
            name = f"af_{m1}_{m2}.csv"
            out.text(name, g.to_csv())
            if emit_gp:
                out.text(f"af_{m1}_{m2}.gp", _gp_grid(name))
    conf = data.get("config")
    config = DesignConfig.from_dict(conf) if conf else DesignConfig(design.M, design.zone, symmetric=True)
    report = build_report(design, config, label=cfg.get("label", "design"))
    out.json("metrics.json", report.to_dict())
    out.text("metrics.md", MetricReport.markdown([report]))
    print(MetricReport.markdown([report]), end="")
    return EXIT_OK


def cmd_estimate(cfg: dict, out: Outputs, seed: int, threads: int, emit_gp: bool) -> int:
    _require(cfg, ("design_file", "scenario"), "estimate config")
    _, body = _load_design_file(cfg["design_file"])
    design = FlagDesign.from_dict(body)
    user = int(cfg.get("user", 0))
    s, r = design.flag_tx(user), design.flag_rx(user)
    xi = design.curtains.members[user].params.xi
    zone, N = design.zone, design.N
    p_fa = float(cfg.get("p_fa", 1e-3))
    trials = int(cfg.get("trials", 1))
    refine = cfg.get("refine", {"k_tau": 16, "k_omega": 16})
    scen = dict(cfg["scenario"])
    noiseless = scen.get("snr_db") is None
    if noiseless:
        scen["snr_db"] = 0.0
    # targets may be given physically (range, velocity) or directly in bins (tau, omega)
    in_bins = []
    if "targets" in scen:
        in_bins = [tg for tg in scen["targets"] if "tau" in tg]
        scen["targets"] = [tg for tg in scen["targets"] if "tau" not in tg]
    scenario = ScenarioConfig.from_dict(scen)
    targets = scenario.bins(N)
    for tg in in_bins:
        _require(tg, ("tau", "omega"), "target")
        targets.append((float(tg["tau"]), float(tg["omega"]),
                        complex(float(tg.get("rho_re", 1.0)), float(tg.get("rho_im", 0.0)))))
    for i, (tau, omega, _) in enumerate(targets):
        if not zone.contains(tau, omega):
            log.warning("target %d at (%.3f, %.3f) bins lies outside the zone", i, tau, omega)
    sigma2 = scenario_sigma2(targets, scenario.snr_db)
    # noiseless runs calibrate the CFAR threshold at a nominal SNR
    floor = scenario_sigma2(targets, float(cfg.get("noiseless_snr_db", 20.0)))
    cfar = CfarConfig(p_fa, noise_sigma_z2(floor if noiseless else sigma2, r))
    rng = np.random.default_rng(seed)
    rows = ["trial,tau_hat,omega_hat,peak,curtain_tau,curtain_omega"]
    counts = []
    for t in range(trials):
        y = echo(s, targets, 0.0 if noiseless else sigma2, rng, zone.case, N)
        dets = flag_search(y, r, xi, zone, cfar, N)
        if refine:
            dets = [refine_fractional(d, y, r, zone, int(refine.get("k_tau", 16)), int(refine.get("k_omega", 16)), N)
                    for d in dets]
        counts.append(len(dets))
        for d in dets:
            rows.append(f"{t},{d.tau_hat!r},{d.omega_hat!r},{d.peak_value!r},{d.curtain_hit[0]},{d.curtain_hit[1]}")
    out.text("detections.csv", "\n".join(rows) + "\n")
    summary = {
        "trials": trials,
        "targets_bins": [[t[0], t[1]] for t in targets],
        "mean_detections": float(np.mean(counts)) if counts else 0.0,
        "p_fa": p_fa,
        "noiseless": noiseless,
    }
    if cfg.get("noise_only_trials"):
        rate, cells = false_alarm_rate(s, r, xi, zone, p_fa, int(cfg["noise_only_trials"]), seed + 1, N,
                                       threads=threads)
        summary["false_alarm_rate"] = rate
        summary["false_alarm_cells"] = cells
    if cfg.get("snr_sweep"):
        points = [SimPoint(float(v), p_fa) for v in cfg["snr_sweep"]]
        mc = monte_carlo(s, r, xi, zone, points, int(cfg.get("sweep_trials", 200)), seed + 2, N,
                         B=scenario.B, f_cr=scenario.f_cr, threads=threads)
        out.text("roc.csv", mc.roc_csv())
        out.text("nmse.csv", mc.nmse_csv())
        if emit_gp:
            out.text("roc.gp", "set datafile separator ','\nset xlabel 'SNR (dB)'\nset ylabel 'P_D'\n"
                               "plot 'roc.csv' using 1:3 every ::1 with linespoints title 'P_D'\n")
            out.text("nmse.gp", "set datafile separator ','\nset logscale y\nset xlabel 'SNR (dB)'\n"
                                "plot 'nmse.csv' using 1:2 every ::1 w lp t 'range', '' using 1:4 every ::1 w l t 'CRLB range'\n")
    out.json("summary.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_bench(cfg: dict, out: Outputs, seed: int, threads: int, emit_gp: bool) -> int:
    _require(cfg, ("sizes", "zone"), "bench config")
    zone = Zone.from_dict(cfg["zone"])
    xi = int(cfg.get("xi", 1))
    repeats = int(cfg.get("repeats", 3))
    rng = np.random.default_rng(seed)
    rows = ["N,exhaustive_lines,exhaustive_ms,flag_lines,flag_ffts,flag_ms,time_ratio"]
    for N in cfg["sizes"]:
        N = int(N)
        q = (xi * N) % 2
        cs = CurtainSet((build_curtain(N, xi, q, zone),), SetKind.SINGLE, zone)
        d = random_peaks(cs, rng)
        s, r = d.flag_tx(0), d.flag_rx(0)
        tau0 = int(rng.integers(-zone.tau_max, zone.tau_max + 1))
        om0 = int(rng.integers(-zone.omega_max, zone.omega_max + 1))
        y = echo(s, [(tau0, om0, 1.0)], 0.0, None, zone.case, N)
        cfar = CfarConfig(1e-5, noise_sigma_z2(1e-2, r))
        t_ex = t_fl = math.inf
        for _ in range(repeats):
            with count_lines() as ce:
                t0 = time.perf_counter()
                for tau in zone.taus:
                    doppler_cut(y, r, int(-tau), zone.case, N)
                t_ex = min(t_ex, time.perf_counter() - t0)
            with count_lines() as cf:
                t0 = time.perf_counter()
                flag_search(y, r, xi, zone, cfar, N)
                t_fl = min(t_fl, time.perf_counter() - t0)
        rows.append(f"{N},{ce.lines},{t_ex * 1e3:.4f},{cf.lines},{cf.ffts},{t_fl * 1e3:.4f},{t_fl / t_ex:.4f}")
    out.text("bench.csv", "\n".join(rows) + "\n")
    if emit_gp:
        out.text("bench.gp", "set datafile separator ','\nset logscale xy\nset xlabel 'N'\nset ylabel 'ms'\n"
                             "plot 'bench.csv' using 1:3 every ::1 w lp t 'exhaustive', '' using 1:6 every ::1 w lp t 'flag'\n")
    print("\n".join(rows))
    return EXIT_OK


COMMANDS: Dict[str, Callable[..., int]] = {
    "design": cmd_design,
    "verify": cmd_verify,
    "evaluate": cmd_evaluate,
    "estimate": cmd_estimate,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flagseq", description="Flag sequence design and delay-Doppler tools")
    ap.add_argument("--version", action="version", version=f"flagseq {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON configuration (or design file)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None, help="worker cap (env FLAGSEQ_THREADS)")
        p.add_argument("--emit-gnuplot", action="store_true", help="write companion gnuplot scripts")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    start = time.perf_counter()
    try:
        threads = _threads(args.threads)
        cfg = _load_json(args.config)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        out = Outputs(args.out)
        code = COMMANDS[args.command](cfg, out, seed, threads, args.emit_gnuplot)
        out.manifest(args.command, cfg, seed, threads, time.perf_counter() - start, {"exit_code": code})
        return code
    except FeasibilityError as exc:
        print(f"error: infeasible curtain ({exc.rule}): {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, ParameterError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"error: solver failed: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except FlagSeqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
