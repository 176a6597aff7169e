"""Command-line interface: ``largedam <command> CONFIG [options]``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure or a
failed validation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict
from typing import Any, Callable

import numpy as np

from . import __version__
from .asymptotics import (
    HeavyTrafficParams,
    asymp_p1_p2,
    asymp_q_profile,
    heavy_traffic_p1_p2,
    regime_of,
    solve_phi,
    solve_tau,
    takacs_limit,
)
from .busy_period import arrival_count_coeffs, busy_period_table
from .config import ConfigError, RunConfig, load_config
from .errors import ModelError, NumericalFailure
from .objective import ControlProblem, REFERENCE_J2, exact_objective, optimize_control, sweep
from .simulator import SimConfig, simulate
from .stationary import busy_time_parts, stationary

SCHEMA_VERSION = 1


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------


def _clean(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _json(command: str, result: Any) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, "command": command, "result": _clean(result)},
                      indent=2, allow_nan=True) + "\n"


def _csv(rows: list[dict[str, Any]]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if v is None else v) for k, v in r.items()})
    return buf.getvalue()


def _table(headers: list[str], rows: list[list[Any]]) -> str:
    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return f"{v:.9g}" if math.isfinite(v) else str(v)
        return str(v)

    cells = [[fmt(v) for v in r] for r in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(headers)]
    line = " | ".join(h.ljust(w) for h, w in zip(headers, widths))
    sep = "-+-".join("-" * w for w in widths)
    body = "\n".join(" | ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells)
    return f"{line}\n{sep}\n{body}\n"


# --------------------------------------------------------------------------
# commands; each returns (json payload, flat rows, pretty text)
# --------------------------------------------------------------------------


def cmd_exact(cfg: RunConfig, args) -> tuple[Any, list[dict], str]:
    m = cfg.model
    st = stationary(m)
    obj = exact_objective(m, st)
    rec = st.to_record()
    payload = {"stationary": rec, "objective": asdict(obj)}
    row = {"L": m.level, "rho1": m.rho1, "rho2": m.rho2, "p1": st.p1, "p2": st.p2}
    row.update({f"q{i}": float(x) for i, x in enumerate(st.q, start=1)})
    row.update({"objective": obj.total})
    lines = [
        f"L = {m.level}   rho1 = {m.rho1:.9g}   rho2 = {m.rho2:.9g}",
        f"p1 = {st.p1:.12g}",
        f"p2 = {st.p2:.12g}",
    ]
    lines += [f"q{i} = {x:.12g}" for i, x in enumerate(st.q, start=1)][:50]
    if m.level > 50:
        lines.append(f"... ({m.level - 50} more levels)")
    lines += [
        f"p1+p2+sum(q) = {st.total:.9f}",
        f"E nu1 = {st.nu1_L:.12g}   E nu2 = {st.nu2_L:.12g}   E T = {st.busy_mean:.12g}",
        f"Pr(L_t > L) = {st.prob_above:.12g}",
        f"J = {obj.total:.12g}  (p1 part {obj.damage_lower:.9g}, p2 part {obj.damage_upper:.9g}, water {obj.water:.9g})",
    ]
    return payload, [row], "\n".join(lines) + "\n"


def _ht_params(cfg: RunConfig) -> HeavyTrafficParams:
    m = cfg.model
    c = float(cfg.control.get("c", m.level * (m.rho1 - 1.0)))
    r12 = float(cfg.control.get("rho12_limit", m.rho12))
    return HeavyTrafficParams.from_moments(c, r12, m.e_sigma, m.batches.moment(2))


def cmd_asymptotic(cfg: RunConfig, args) -> tuple[Any, list[dict], str]:
    m = cfg.model
    reg = regime_of(m)
    out: dict[str, Any] = {"rho1": m.rho1, "rho2": m.rho2, "regime": reg, "kappa": m.kappa}
    lim = takacs_limit(m)
    out["takacs"] = {"regime": lim.regime, "value": lim.value, "phi": lim.phi}
    if reg == "above":
        out["phi"] = asdict(solve_phi(m))
    elif reg == "below":
        try:
            out["tau"] = asdict(solve_tau(m))
        except NumericalFailure as exc:
            out["tau"] = {"error": str(exc)}
    a = asymp_p1_p2(m)
    out["fixed_load"] = asdict(a)
    ht = _ht_params(cfg)
    lp1, lp2 = heavy_traffic_p1_p2(ht, m.rho2)
    js = sorted({0, m.level // 4, m.level // 2, m.level - 1})
    profile = [{"j": j, "Lq": asymp_q_profile(ht, j, m.level)} for j in js]
    out["heavy_traffic"] = {"C": ht.c_param, "kappa": ht.kappa, "Lp1": lp1, "Lp2": lp2, "q_profile": profile}
    row = {"rho1": m.rho1, "regime": reg, "C": ht.c_param, "Lp1": lp1, "Lp2": lp2,
           "p1_limit": a.p1, "p2_limit": a.p2}
    text = [f"rho1 = {m.rho1:.9g} ({reg})   rho2 = {m.rho2:.9g}   kappa = {m.kappa:.9g}",
            f"recurrence: {lim.describe()}"]
    if "phi" in out:
        text.append(f"phi = {out['phi']['root']:.15g}  (residual {out['phi']['residual']:.2e})")
    if "tau" in out and "root" in out["tau"]:
        text.append(f"tau = {out['tau']['root']:.15g}  (residual {out['tau']['residual']:.2e})")
    if reg == "below":
        text.append(f"p1 -> {a.p1:.9g}, p2 -> {a.p2:.9g}")
    elif reg == "critical":
        text.append(f"L p1 -> {a.p1:.9g}, L p2 -> {a.p2:.9g}")
    else:
        text.append(f"p1 ~ {a.p1_amplitude:.9g} * phi^L, p2 -> {a.p2:.9g}")
    text.append(f"heavy traffic C = {ht.c_param:.9g}: L p1 = {lp1:.9g}, L p2 = {lp2:.9g}")
    text += [f"  L q_(L-{p['j']}) = {p['Lq']:.9g}" for p in profile]
    return out, [row], "\n".join(text) + "\n"


def cmd_simulate(cfg: RunConfig, args) -> tuple[Any, list[dict], str]:
    m = cfg.model
    est = simulate(SimConfig(m, events=args.events, seed=args.seed, warmup=args.warmup, batches=args.batches))
    rec = est.to_record()
    exact = None
    if m.level <= 5000:
        try:
            exact = stationary(m)
        except NumericalFailure:
            exact = None
    payload = {"simulation": rec, "exact": exact.to_record() if exact else None}
    names = ["p1", "p2"] + [f"q{i}" for i in range(1, m.level + 1)] + ["nu1", "nu2"]
    sim_v = [est.p1.value, est.p2.value, *est.q, est.busy_stats.nu1.value, est.busy_stats.nu2.value]
    sim_s = [est.p1.se, est.p2.se, *est.q_se, est.busy_stats.nu1.se, est.busy_stats.nu2.se]
    ex_v = ([exact.p1, exact.p2, *exact.q, exact.nu1_L, exact.nu2_L] if exact else [None] * len(names))
    rows = []
    for n, v, s, e in zip(names, sim_v, sim_s, ex_v):
        z = (e - v) / s if (e is not None and s and s > 0) else None
        rows.append({"quantity": n, "estimate": float(v), "se": float(s),
                     "exact": None if e is None else float(e), "z": z})
    head = f"events = {est.events}   seed = {est.seed}   busy periods = {est.busy_stats.count}\n"
    text = head + _table(["quantity", "estimate", "se", "exact", "z"],
                         [list(r.values()) for r in rows[:60]])
    text += f"p1+p2+sum(q) = {est.total:.12f}\n"
    return payload, rows, text


def _problem(cfg: RunConfig) -> ControlProblem:
    m = cfg.model
    r12 = cfg.control.get("rho12_limit")
    return ControlProblem.from_model(m, None if r12 is None else float(r12))


def _bracket(cfg: RunConfig, args) -> tuple[float, float, float]:
    c_min = args.c_min if args.c_min is not None else float(cfg.control.get("c_min", -10.0))
    c_max = args.c_max if args.c_max is not None else float(cfg.control.get("c_max", 10.0))
    tol = args.tol if args.tol is not None else float(cfg.control.get("tol", 1e-6))
    return c_min, c_max, tol


def cmd_optimize(cfg: RunConfig, args) -> tuple[Any, list[dict], str]:
    p = _problem(cfg)
    sol = optimize_control(p, *_bracket(cfg, args))
    rec = sol.to_record()
    row = {"c_opt": sol.c_opt, "regime": sol.regime, "objective": sol.objective, "kappa": p.kappa}
    text = (f"kappa = {p.kappa:.9g}   rho2 = {p.rho2:.9g}   j1 = {p.j1:.9g}   j2 = {p.j2:.9g}\n"
            f"C_opt = {sol.c_opt:.9g}  ({sol.regime})\nG(C_opt) = {sol.objective:.12g}\n")
    return rec, [row], text


def _grid(args) -> list[float]:
    if args.values:
        return [float(x) for x in args.values.split(",")]
    if args.start is None:
        if args.param != "j2":
            raise ConfigError("sweep needs --values or --start/--stop/--step for this parameter")
        return list(REFERENCE_J2)
    if args.stop is None or args.step is None or args.step <= 0:
        raise ConfigError("sweep needs --stop and a positive --step with --start")
    n = int(math.floor((args.stop - args.start) / args.step + 1e-9)) + 1
    return [round(args.start + i * args.step, 12) for i in range(n)]


def cmd_sweep(cfg: RunConfig, args) -> tuple[Any, list[dict], str]:
    p = _problem(cfg)
    c_min, c_max, tol = _bracket(cfg, args)
    rows = sweep(p, args.param, _grid(args), c_min, c_max, tol, workers=args.workers)
    flat = [{args.param: r.value, "c_opt": r.c_opt, "objective": r.objective,
             "regime": r.regime, "diff": r.diff} for r in rows]
    if args.plot:
        with open(args.plot, "w") as fh:
            fh.write(f"# {args.param} c_opt\n")
            for r in rows:
                fh.write(f"{r.value:.12g} {r.c_opt:.12g}\n")
    text = _table([f"parameter {args.param}", "argmin C", "difference"],
                  [[r.value, round(r.c_opt, 3), None if r.diff is None else round(r.diff, 3)] for r in rows])
    return {"param": args.param, "rows": flat}, flat, text


def _validation_checks(cfg: RunConfig, args) -> list[tuple[str, bool, str]]:
    m = cfg.model
    checks = []
    bp = busy_period_table(m)
    st = stationary(m, bp)
    checks.append(("normalization", abs(st.total - 1.0) < 1e-9, f"sum = {st.total:.15f}"))
    f = arrival_count_coeffs(m, "B1", n_max=m.level + 2)
    checks.append(("arrivals per B1 service", abs(f.mean() - m.rho1) < 1e-9,
                   f"sum i f_i = {f.mean():.12g}, rho1 = {m.rho1:.12g}"))
    checks.append(("first-departure mean", abs(bp.zeta1_mean - (m.rho1 - 1 + m.e_sigma)) < 1e-9,
                   f"E zeta1 = {bp.zeta1_mean:.12g}"))
    inc = bool(np.all(np.diff(bp.nu1_tilde) > -1e-13 * bp.nu1_tilde[1:]))
    checks.append(("busy-period table increasing", inc, ""))
    t1, t2 = busy_time_parts(m, st.nu1_L)
    renewal = (1.0 / m.lam) / (1.0 / m.lam + t1 + t2)
    checks.append(("renewal empty fraction", abs(renewal / st.p1 - 1.0) < 1e-9,
                   f"1/lam / (1/lam + E T) = {renewal:.12g}"))
    checks.append(("level-crossing empty fraction", abs(st.occupancy[0] - st.p1) < 1e-9,
                   f"Pr(L_t = 0) = {st.occupancy[0]:.12g}"))
    if args.events > 0:
        # regenerative estimates: busy periods are i.i.d., so their SEs stay honest near criticality
        b = simulate(SimConfig(m, events=args.events, seed=args.seed)).busy_stats
        pairs = [(st.p1, b.renewal_p1), (st.nu1_L, b.nu1), (st.nu2_L, b.nu2)]
        zs = [abs(e - est.value) / est.se for e, est in pairs if est.se > 0]
        ok = b.count >= 30 and bool(zs)
        zmax = max(zs) if zs else math.inf
        checks.append(("simulation agreement", ok and zmax < 4.0,
                       f"max |z| = {zmax:.2f} over {b.count} busy periods"))
    return checks


def cmd_validate(cfg: RunConfig, args) -> tuple[Any, list[dict], str]:
    checks = _validation_checks(cfg, args)
    rows = [{"check": n, "status": "PASS" if ok else "FAIL", "detail": d} for n, ok, d in checks]
    text = "".join(f"{r['status']}  {r['check']}  {r['detail']}\n" for r in rows)
    return {"checks": rows, "passed": all(ok for _, ok, _ in checks)}, rows, text


COMMANDS: dict[str, Callable] = {
    "exact": cmd_exact,
    "asymptotic": cmd_asymptotic,
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="largedam", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", help="TOML model file")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field, e.g. control.level=20")
        sp.add_argument("--format", choices=("pretty", "json", "csv"), default="pretty")
        sp.add_argument("--output", "-o", help="write to this file instead of stdout")
        if name in ("simulate", "validate"):
            sp.add_argument("--events", type=int, default=1_000_000 if name == "simulate" else 200_000)
            sp.add_argument("--seed", type=int, default=0)
        if name == "simulate":
            sp.add_argument("--warmup", type=float, default=0.1)
            sp.add_argument("--batches", type=int, default=32)
        if name in ("optimize", "sweep"):
            sp.add_argument("--c-min", type=float, default=None)
            sp.add_argument("--c-max", type=float, default=None)
            sp.add_argument("--tol", type=float, default=None)
        if name == "sweep":
            sp.add_argument("--param", default="j2", help="scalar to vary (j1, j2, rho2, rho12_limit)")
            sp.add_argument("--values", help="comma-separated grid")
            sp.add_argument("--start", type=float)
            sp.add_argument("--stop", type=float)
            sp.add_argument("--step", type=float)
            sp.add_argument("--workers", type=int, default=1)
            sp.add_argument("--plot", metavar="PATH", help="also write x/y data for the C curve")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        payload, rows, text = COMMANDS[args.command](cfg, args)
    except (ConfigError, ModelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"numerical error in {exc.module}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    out = {"json": lambda: _json(args.command, payload), "csv": lambda: _csv(rows),
           "pretty": lambda: text}[args.format]()
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    if args.command == "validate" and not payload["passed"]:
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
