"""Command-line experiment runner.

Subcommands: critical, dispersion, simulate, volterra, fit, sweep, selfcheck.
Exit codes: 0 ok, 1 error, 2 marginal verdict.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from . import dispersion as disp
from . import dynamics as dyn
from . import volterra as vt
from .errors import ActiveMixError, ConfigurationError, DivergedRunError, InsufficientDataError

log = logging.getLogger("activemix")

EXIT_OK, EXIT_ERROR, EXIT_MARGINAL = 0, 1, 2
REFERENCE_BC = disp.REFERENCE_BC
SELFCHECK_TOL = 1e-3


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def _write_json(path, obj) -> None:
    Path(path).write_text(_dump(obj) + "\n")


def load_config(path) -> dict:
    """Read a JSON experiment file."""
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


def resolve_mode_config(cfg: dict) -> dyn.ModeConfig:
    """``ModeConfig`` from a JSON dict; ``lmax`` may be omitted to use the resolution floor."""
    cfg = dict(cfg)
    if "lmax" not in cfg or cfg["lmax"] is None:
        cfg["lmax"] = int(math.ceil(dyn.resolution_floor(float(cfg.get("t_end", 10.0)), float(cfg.get("nu", 0.0)))))
    return dyn.ModeConfig.from_dict(cfg)


def make_datum(spec, lmax: int, mmax: int, seed: int):
    """``"default"`` or ``"random"`` (seeded) initial datum."""
    if spec in (None, "default"):
        return dyn.default_datum(lmax, mmax)
    if spec == "random":
        return dyn.random_datum(lmax, mmax, seed)
    raise ConfigurationError(f"unknown datum {spec!r}; use 'default' or 'random'")


PLOT_STUB = '''"""Plot stub for {data}; edit freely."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{data}"
with open(path) as fh:
    rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
head, rows = rows[0], rows[1:]
cols = {{h: [float(r[i]) for r in rows] for i, h in enumerate(head)}}
plt.plot(cols["{x}"], cols["{y}"])
plt.xlabel("{x}")
plt.ylabel("{y}")
plt.{scale}
plt.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
'''


def write_plot_stub(path, data: str, x: str, y: str, loglog: bool = False) -> None:
    scale = 'xscale("log"); plt.yscale("log")' if loglog else 'grid(True)'
    Path(path).write_text(PLOT_STUB.format(data=data, x=x, y=y, scale=scale))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_critical(args) -> int:
    c = disp.find_bc()
    out = {"b_c": c.b_c, "gamma_c": c.gamma_c, "reference_b_c": REFERENCE_BC,
           "deviation": c.b_c - REFERENCE_BC}
    if args.json:
        print(_dump(out))
    else:
        print(f"b_c = {c.b_c:.10f}")
        print(f"gamma_c = {c.gamma_c:.10f}")
    if args.selfcheck and abs(c.b_c - REFERENCE_BC) > SELFCHECK_TOL:
        print(f"self-check failed: |b_c - {REFERENCE_BC}| > {SELFCHECK_TOL}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_dispersion(args) -> int:
    verdict, scan = disp.spectral_condition(args.gamma, args.eps)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    disp.write_curve_csv(out / "curve.csv", scan)
    report = {"gamma": args.gamma, "swimmer_sign": args.eps, "verdict": verdict,
              "winding_number": scan.winding_number, "distance": scan.distance,
              "n_samples": int(scan.b_samples.size)}
    if verdict == "unstable" and args.eps == -1:
        lam = disp.find_unstable_root(args.gamma, args.eps)
        report["root"] = [lam.real, lam.imag]
    _write_json(out / "verdict.json", report)
    write_plot_stub(out / "plot_curve.py", "curve.csv", "reF", "imF")
    print(_dump(report))
    return EXIT_MARGINAL if verdict == "marginal" else EXIT_OK


def _growth_report(trace) -> dict:
    u = trace.u_abs
    t = trace.t
    if t.size < 16:
        return {}
    t0 = t[-1] * 0.5
    try:
        fit = dg.fit_exponential(t, u, (t0, t[-1]), channel="u")
    except InsufficientDataError:
        return {}
    return {"growth_rate": -fit.exponent_or_rate, "fit": fit.to_dict()}


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    seed = int(cfg.pop("seed", 0))
    datum_spec = cfg.pop("datum", "default")
    mc = resolve_mode_config(cfg)
    psi = make_datum(datum_spec, mc.lmax, mc.mmax, seed)
    meta_extra = {"seed": seed, "datum": datum_spec}
    try:
        trace = dyn.evolve_coupled(mc, psi)
        status = EXIT_OK
        report = {"status": "ok"}
    except DivergedRunError as exc:
        trace = exc.trace
        status = EXIT_ERROR
        report = {"status": "diverged", "diverged_at": exc.time, **_growth_report(trace)}
    trace.meta.update(meta_extra)
    trace.to_csv(args.out)
    write_plot_stub(Path(args.out).with_suffix(".plot.py"), Path(args.out).name, "t", "l2", loglog=True)
    report.update({"config": mc.to_dict(), **meta_extra, "out": str(args.out)})
    print(_dump(report))
    return status


def cmd_volterra(args) -> int:
    cfg = load_config(args.config)
    seed = int(cfg.pop("seed", 0))
    datum_spec = cfg.pop("datum", "default")
    weight = vt.WeightSpec(**cfg.pop("weight", {}))
    mc = resolve_mode_config(cfg)
    psi = make_datum(datum_spec, mc.lmax, mc.mmax, seed)
    t, K = dyn.build_kernel(mc)
    _, U = dyn.build_source(mc, psi)
    u = vt.solve(vt.VolterraProblem(mc.sample_dt, K, U))
    vt.write_series_csv(args.out, t, u)
    rep = vt.check_weighted_decay(u, U, weight, mc.sample_dt)
    report = {"config": mc.to_dict(), "seed": seed, "datum": datum_spec,
              "weight": {"kind": weight.kind, "alpha": weight.alpha},
              "ratio": rep.ratio, "ratio_half": rep.ratio_half, "horizon_stable": rep.horizon_stable,
              "kernel_at_zero": K[0, 0, 0].real, "out": str(args.out)}
    print(_dump(report))
    return EXIT_OK


def cmd_fit(args) -> int:
    trace = dyn.Trace.from_csv(args.trace)
    y = trace.channel(args.channel)
    window = (args.window[0], args.window[1])
    if args.model == "exponential":
        rep = dg.fit_exponential(trace.t, y, window, envelope=args.envelope, channel=args.channel)
    else:
        rep = dg.fit_power_law(trace.t, y, window, envelope=args.envelope,
                               log_correction=args.model == "power_log", channel=args.channel)
    print(rep.to_json())
    return EXIT_OK


def dissipation_point(nu: float, dt: float = 0.05, horizon: float = 6.0, seed: int = 0,
                      datum: str = "default") -> dict:
    """Free viscous run (no coupling) to ``horizon / sqrt(nu)``.

    Reports the first time ``||psi||`` halves and the tail-rate half-life
    ``ln 2 / eta`` with ``eta`` fitted on ``[2, horizon] / sqrt(nu)``.
    """
    t_end = horizon / math.sqrt(nu)
    mc = resolve_mode_config({"gamma": 0.0, "nu": nu, "swimmer_sign": -1, "dt": dt, "t_end": t_end,
                              "output_stride": max(1, int(round(1.0 / dt)))})
    psi = make_datum(datum, mc.lmax, mc.mmax, seed)
    tr = dyn.evolve_free(mc, psi)
    fit = dg.fit_exponential(tr.t, tr.l2, (2.0 / math.sqrt(nu), t_end), channel="l2")
    return {"nu": nu, "lmax": mc.lmax, "dt": dt, "t_end": t_end,
            "half_life_first_crossing": dg.half_life(tr.t, tr.l2),
            "tail_rate": fit.exponent_or_rate, "tail_rate_over_sqrt_nu": fit.exponent_or_rate / math.sqrt(nu),
            "half_life_tail": math.log(2.0) / fit.exponent_or_rate, "tail_fit_residual": fit.residual}


def _run_point(kw):
    try:
        return dissipation_point(**kw)
    except ActiveMixError as exc:
        raise ActiveMixError(f"sweep point {kw}: {exc}") from exc


def run_sweep(nus, workers: int = 1, **kw) -> dict:
    points = [dict(nu=float(nu), **kw) for nu in nus]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_point, points))
    else:
        results = [_run_point(p) for p in points]
    nu = [r["nu"] for r in results]
    return {
        "settings": kw,
        "points": results,
        "slope_half_life_tail": dg.scaling_slope(nu, [r["half_life_tail"] for r in results]),
        "slope_half_life_first_crossing": dg.scaling_slope(nu, [r["half_life_first_crossing"] for r in results]),
    }


def cmd_sweep(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    nus = cfg.pop("nu", args.nu)
    kw = {k: cfg[k] for k in ("dt", "horizon", "seed", "datum") if k in cfg}
    report = run_sweep(nus, workers=args.workers, **kw)
    text = _dump(report)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def selfcheck() -> list:
    """Fast internal consistency checks; list of ``(name, ok, detail)``."""
    checks = []
    c = disp.find_bc()
    checks.append(("critical b_c", abs(c.b_c - REFERENCE_BC) <= SELFCHECK_TOL, f"b_c={c.b_c:.8f}"))
    v1, _ = disp.spectral_condition(1.0, -1)
    v2, _ = disp.spectral_condition(2.5, -1)
    checks.append(("verdicts", (v1, v2) == ("stable", "unstable"), f"{v1}, {v2}"))
    dt = 1e-2
    t = dt * np.arange(501)
    u = vt.solve(vt.VolterraProblem(dt, np.exp(-t), np.ones_like(t)))[:, 0]
    err = float(np.abs(u - 0.5 * (1 + np.exp(-2 * t))).max())
    checks.append(("volterra oracle", err < 1e-4, f"max error {err:.2e}"))
    mc = dyn.ModeConfig(gamma=1.0, nu=0.0, swimmer_sign=-1, lmax=40, dt=1e-2, t_end=0.05)
    _, K = dyn.build_kernel(mc)
    dev = abs(K[0, 0, 0] - (-0.2))
    checks.append(("kernel at zero", dev < 1e-8, f"deviation {dev:.2e}"))
    return checks


def cmd_selfcheck(args) -> int:
    checks = selfcheck()
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="activemix", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("critical", help="critical frequency and coupling")
    s.add_argument("--json", action="store_true")
    s.add_argument("--selfcheck", action="store_true")
    s.set_defaults(func=cmd_critical)

    s = sub.add_parser("dispersion", help="boundary curve and stability verdict")
    s.add_argument("--gamma", type=float, required=True)
    s.add_argument("--eps", type=int, choices=(-1, 1), default=-1)
    s.add_argument("--out", default="dispersion_out")
    s.set_defaults(func=cmd_dispersion)

    s = sub.add_parser("simulate", help="direct IMEX run to a trace CSV")
    s.add_argument("config")
    s.add_argument("--out", default="trace.csv")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("volterra", help="velocity from the Volterra route")
    s.add_argument("config")
    s.add_argument("--out", default="u.csv")
    s.set_defaults(func=cmd_volterra)

    s = sub.add_parser("fit", help="decay fit on a trace channel")
    s.add_argument("trace")
    s.add_argument("--channel", default="u")
    s.add_argument("--window", type=float, nargs=2, required=True, metavar=("T0", "T1"))
    s.add_argument("--model", choices=("power", "power_log", "exponential"), default="power")
    s.add_argument("--envelope", action="store_true", help="fit windowed maxima (period 2 pi)")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("sweep", help="enhanced-dissipation sweep over nu")
    s.add_argument("config", nargs="?")
    s.add_argument("--nu", type=float, nargs="+", default=[1e-3, 3e-4, 1e-4, 3e-5])
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("selfcheck", help="quick internal checks")
    s.set_defaults(func=cmd_selfcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ActiveMixError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
