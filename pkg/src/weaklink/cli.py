"""Command-line entry point.

Every flag can also be set through an environment variable with the
``WEAKLINK_`` prefix (``WEAKLINK_CONFIG``, ``WEAKLINK_OUT``,
``WEAKLINK_SEED``, ``WEAKLINK_FORMAT``, ``WEAKLINK_THREADS``); explicit
flags win.  Exit codes: 0 success, 2 configuration error, 3 numerical
failure, 4 I/O error.  Errors are reported as one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .errors import ConfigError, WeakLinkError

log = logging.getLogger("weaklink")

ENV_PREFIX = "WEAKLINK_"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _env(name, default=None, cast=str):
    v = os.environ.get(ENV_PREFIX + name)
    if v is None:
        return default
    try:
        return cast(v)
    except ValueError as exc:
        raise ConfigError(ENV_PREFIX + name, f"cannot parse {v!r}") from exc


def _common(p, config_required=True):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--format", choices=io_formats(), help="output format")
    p.add_argument("--threads", type=int, help="BLAS thread limit")
    p.set_defaults(config_required=config_required)


def io_formats():
    return ("csv", "svg", "both")


def build_parser():
    p = _Parser(prog="weaklink", description="Weak-link RF-SQUID modelling and data reduction.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cpr", help="energy, current and curvature of the weak link")
    _common(c)
    c.add_argument("--phi-min", type=float)
    c.add_argument("--phi-max", type=float)
    c.add_argument("--points", type=int)

    c = sub.add_parser("sweep", help="resonance versus flux with jumps")
    _common(c)

    c = sub.add_parser("spectrum", help="single-loop spectra of both circuit variants")
    _common(c)

    c = sub.add_parser("fit", help="fit model parameters to a resonance curve")
    _common(c)
    c.add_argument("--data", required=True, help="CSV with columns flux_phi0,f_ghz")

    c = sub.add_parser("calibrate", help="voltage-to-flux calibration from jump data")
    _common(c, config_required=False)
    c.add_argument("data", nargs="+", help="CSV files with columns voltage_v,f_ghz, one per sweep")
    c.add_argument("--min-step", type=float, help="smallest upward step counted as a jump (GHz)")

    c = sub.add_parser("lifetimes", help="decay detection and lifetime histogram")
    _common(c)
    c.add_argument("traces", help="glob of trace CSVs with columns time_s,s21_mag")
    c.add_argument("--bins", type=int)

    c = sub.add_parser("synth-traces", help="write synthetic single-shot traces")
    _common(c, config_required=False)
    c.add_argument("--rate", type=float, required=True, help="decay rate (1/s)")
    c.add_argument("--window", type=float, required=True, help="trace length (s)")
    c.add_argument("--count", type=int, default=100)
    c.add_argument("--dt", type=float, default=1.0)
    c.add_argument("--noise", type=float, default=0.02)
    return p


class Context:
    """Resolved options shared by all commands."""

    def __init__(self, args):
        from .config import load_config

        self.args = args
        cfg_path = args.config or _env("CONFIG")
        if cfg_path:
            self.config = load_config(cfg_path)
            self.raw = self.config.raw
        elif args.config_required:
            raise ConfigError("--config", "a configuration file is required")
        else:
            self.config = None
            self.raw = {}
        output = (self.config.output if self.config else None) or {}
        self.out = Path(args.out or _env("OUT") or output.get("dir") or ".")
        self.format = args.format or _env("FORMAT") or output.get("format") or "csv"
        if self.format not in io_formats():
            raise ConfigError("format", f"expected one of {list(io_formats())}")
        self.seed = args.seed if args.seed is not None else _env("SEED", 0, int)
        self.threads = args.threads if args.threads is not None else _env("THREADS", None, int)
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads", "must be at least 1")
        self.digest = io.config_hash({"config": self.raw, "command": args.command,
                                      "options": _options(args), "seed": self.seed})
        self.written = []

    @property
    def want_csv(self):
        return self.format in ("csv", "both")

    @property
    def want_svg(self):
        return self.format in ("svg", "both")

    def csv(self, name, header, rows, footer=None):
        self.written.append(str(io.write_csv(self.out / name, header, rows, self.digest, footer)))

    def svg_lines(self, name, series, xlabel, ylabel):
        self.written.append(str(io.line_plot(series, xlabel, ylabel, self.out / name, self.digest)))

    def json(self, name, payload):
        self.written.append(str(io.write_json(self.out / name, payload, self.digest)))


def _options(args):
    skip = {"config", "out", "format", "threads", "verbose", "config_required", "func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# commands --------------------------------------------------------------------


def cmd_cpr(ctx):
    from .circuit import cpr_current, cpr_curvature, cpr_energy

    cfg = ctx.config.require("circuit")
    if not cfg.circuit.is_jj:
        raise ConfigError("circuit.weak_link.type", "the cpr command needs a junction weak link")
    block = cfg.cpr or {"phi_min": -2 * np.pi, "phi_max": 2 * np.pi, "n_points": 801, "chi_values": None}
    a = ctx.args
    lo = a.phi_min if a.phi_min is not None else block["phi_min"]
    hi = a.phi_max if a.phi_max is not None else block["phi_max"]
    n = a.points if a.points is not None else block["n_points"]
    if not (hi > lo and n >= 2):
        raise UsageError("empty phase range: need phi-max > phi-min and at least 2 points")
    link = cfg.circuit.weak_link
    chis = block["chi_values"] or [link.chi]
    phi = np.linspace(lo, hi, n)
    rows, series_i = [], {}
    for chi in chis:
        e = cpr_energy(phi, link.e0, chi)
        cur = np.array([_safe(cpr_current, p, link.e0, chi) for p in phi])
        curv = np.array([_safe(cpr_curvature, p, link.e0, chi) for p in phi])
        rows += list(zip(phi, [chi] * n, e, cur, curv))
        series_i[f"chi={chi:g}"] = (phi, cur)
    if ctx.want_csv:
        ctx.csv("cpr.csv", "phi_rad,chi,energy_ghz,current_ghz_per_rad,curvature_ghz_per_rad2", rows)
    if ctx.want_svg:
        ctx.svg_lines("cpr.svg", series_i, "phase (rad)", "dE/dphi (GHz/rad)")


def _safe(fn, *args):
    from .errors import SingularPointError

    try:
        return fn(*args)
    except SingularPointError:
        return np.nan


def _resonance_curves(cfg, sw):
    from .cavity import dressed_branch
    from .qps import qps_resonance_curve
    from .sweep import SweepPlan, run_sweep

    lo, hi = sw["start"], sw["stop"]
    directions = ["up", "down"] if sw["direction"] == "both" else [sw["direction"]]
    curves = {}
    for d in directions:
        a, b = (min(lo, hi), max(lo, hi)) if d == "up" else (max(lo, hi), min(lo, hi))
        plan = SweepPlan.ramp(cfg.circuit, a, b, sw["step"], sw["initial_well"])
        if cfg.circuit.is_jj:
            curve = run_sweep(plan)
        else:
            q = cfg.qps or {"ramp_rate": 1e4, "factor": 1.0, "levels": "both"}
            iw = 0 if sw["initial_well"] == "global-minimum" else sw["initial_well"]
            if sw["initial_well"] == "global-minimum":
                iw = int(np.round(plan.flux_values[0]))
            curve = qps_resonance_curve(cfg.circuit, plan.flux_values, iw, q["levels"],
                                        q["ramp_rate"], q["factor"])
        if cfg.cavity is not None:
            curve = dressed_branch(curve, cfg.cavity, sw["branch"])
        curves[d] = curve
    return curves


def cmd_sweep(ctx):
    cfg = ctx.config.require("circuit", "sweep")
    curves = _resonance_curves(cfg, cfg.sweep)
    summary = {}
    for d, c in curves.items():
        if ctx.want_csv:
            ctx.csv(f"sweep_{d}.csv", io.CURVE_HEADER, io.curve_rows(c))
        summary[d] = {"jump_fluxes": c.jump_fluxes.tolist()}
    if ctx.want_svg:
        key = "hybridized" if cfg.cavity is not None else "bare"
        series = {d: (c.flux, c.f_hybridized if cfg.cavity is not None else c.f_bare)
                  for d, c in curves.items()}
        ctx.svg_lines("sweep.svg", series, "flux (Phi0)", f"{key} frequency (GHz)")
    ctx.json("sweep_summary.json", summary)


def cmd_spectrum(ctx):
    from .config import simple_specs
    from .spectra import compare_spectra, spectrum_sweep

    cfg = ctx.config.require("spectrum")
    sp = cfg.spectrum
    jj, qps = simple_specs(sp)
    fluxes = np.linspace(sp["flux_min"], sp["flux_max"], sp["n_flux"])
    n = sp["n_levels"]
    out = {}
    for label, spec in (("jj", jj), ("qps", qps)):
        specs = spectrum_sweep(spec, np.r_[fluxes, sp["compare_flux"]], n)
        out[label] = specs[:-1]
        if ctx.want_csv:
            rows = [(phi, j, e) for phi, s in zip(fluxes, specs) for j, e in enumerate(s.eigenvalues)]
            ctx.csv(f"spectrum_{label}.csv", "flux_phi0,level,energy_ghz", rows)
        if ctx.want_svg:
            ev = np.array([s.eigenvalues - s.eigenvalues[0] for s in specs[:-1]])
            series = {f"level {j}": (fluxes, ev[:, j]) for j in range(1, n)}
            ctx.svg_lines(f"spectrum_{label}.svg", series, "flux (Phi0)", "E_j - E_0 (GHz)")
        out[label + "_ref"] = specs[-1]
    k = sp["compare_levels"]
    cj, cq = out.pop("jj_ref"), out.pop("qps_ref")
    delta = compare_spectra(cj, cq, k)
    ctx.csv("comparison.csv", "level,delta_ghz", [(j, d) for j, d in enumerate(delta, start=1)])
    unconverged = {lab: int(sum(not s.all_converged for s in specs)) for lab, specs in out.items()}
    ctx.json("spectrum_summary.json", {"compare_flux": sp["compare_flux"],
                                       "delta_ghz": delta.tolist(),
                                       "unconverged_points": unconverged})


def cmd_fit(ctx):
    from .fitting import FitProblem, curve_model, fit

    cfg = ctx.config.require("circuit", "cavity", "fit")
    _, cols = io.read_csv(ctx.args.data)
    if "flux_phi0" not in cols or "f_ghz" not in cols:
        raise ConfigError("--data", "expected columns flux_phi0,f_ghz")
    f = cfg.fit
    iw = (cfg.sweep or {}).get("initial_well", 0)
    q = cfg.qps or {}
    problem = FitProblem(cols["flux_phi0"], cols["f_ghz"], cfg.circuit, cfg.cavity, f["free"],
                         f["bounds"], f["initial"])
    model = curve_model(problem.flux, 0 if iw == "global-minimum" else iw, **q)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = fit(problem, model, max_iter=f["max_iter"])
    ctx.json("fit_report.json", res.report())


def cmd_calibrate(ctx):
    from .dataops import CalibrationInput, JumpBranch, calibrate_flux, find_jump_voltages

    block = (ctx.config.calibration if ctx.config else None) or {"min_step": 1e-3}
    step = ctx.args.min_step if ctx.args.min_step is not None else block["min_step"]
    branches = []
    for path in ctx.args.data:
        _, cols = io.read_csv(path)
        if "voltage_v" not in cols or "f_ghz" not in cols:
            raise ConfigError(path, "expected columns voltage_v,f_ghz")
        v, fr = cols["voltage_v"], cols["f_ghz"]
        direction = 1 if v[-1] > v[0] else -1
        jumps = find_jump_voltages(v, fr, step)
        try:
            branches.append(JumpBranch(direction, jumps))
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from exc
    try:
        data = CalibrationInput(branches)
    except ValueError as exc:
        raise ConfigError("data", str(exc)) from exc
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = calibrate_flux(data)
    ctx.json("calibration.json", res.to_dict())


def cmd_lifetimes(ctx):
    from .dataops import ShotTrace, detect_decay, lifetime_histogram

    cfg = ctx.config.require("protocol")
    block = cfg.lifetimes or {"bins": 10, "debounce": 3, "window": None}
    bins = ctx.args.bins or block["bins"]
    paths = sorted(glob.glob(ctx.args.traces))
    if not paths:
        raise FileNotFoundError(f"no trace files match {ctx.args.traces!r}")
    samples, rows = [], []
    for p in paths:
        _, cols = io.read_csv(p)
        if "time_s" not in cols or "s21_mag" not in cols:
            raise ConfigError(p, "expected columns time_s,s21_mag")
        tr = ShotTrace(cols["time_s"], cols["s21_mag"], cfg.protocol.delta_phi, Path(p).name)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            s = detect_decay(tr, cfg.protocol, block["debounce"])
        samples.append(s)
        rows.append((Path(p).name, s.duration, s.censored, int(bool(caught))))
    h = lifetime_histogram(samples, bins, block["window"])
    ctx.csv("lifetimes.csv", "trace,duration_s,censored,ambiguous", rows)
    if ctx.want_csv:
        ctx.csv("histogram.csv", "bin_lo_s,bin_hi_s,count", h.rows(),
                footer=[("censored", h.censored_count, h.censored_fraction)])
    if ctx.want_svg:
        edges = h.edges
        w = np.diff(edges)
        written = io.bar_plot(edges[:-1], w, h.counts, ctx.out / "histogram.svg", "lifetime (s)",
                              "count", extra=(edges[-1] + w[-1], w[-1], h.censored_count),
                              digest=ctx.digest)
        ctx.written.append(str(written))


def cmd_synth_traces(ctx):
    from .dataops import NoiseModel, synthesize_traces

    a = ctx.args
    if a.count < 1 or a.dt <= 0 or a.window <= 0 or a.rate < 0:
        raise UsageError("count, dt and window must be positive and rate non-negative")
    traces = synthesize_traces(a.rate, a.window, a.count, NoiseModel(sigma=a.noise), a.dt, ctx.seed)
    for i, tr in enumerate(traces):
        ctx.csv(f"trace_{i:04d}.csv", "time_s,s21_mag", zip(tr.times, tr.s21))


COMMANDS = {
    "cpr": cmd_cpr,
    "sweep": cmd_sweep,
    "spectrum": cmd_spectrum,
    "fit": cmd_fit,
    "calibrate": cmd_calibrate,
    "lifetimes": cmd_lifetimes,
    "synth-traces": cmd_synth_traces,
}


def _fail(code, kind, message, key=None):
    payload = {"error": kind, "message": message, "exit_code": code}
    if key is not None:
        payload["key"] = key
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        ctx = Context(args)
        if ctx.threads is not None:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=ctx.threads):
                COMMANDS[args.command](ctx)
        else:
            COMMANDS[args.command](ctx)
    except UsageError as exc:
        return _fail(EXIT_CONFIG, "usage", str(exc))
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), exc.key)
    except WeakLinkError as exc:
        return _fail(EXIT_NUMERIC, "numerical", f"{type(exc).__name__}: {exc}")
    except np.linalg.LinAlgError as exc:
        return _fail(EXIT_NUMERIC, "numerical", f"LinAlgError: {exc}")
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))
    print(json.dumps({"command": args.command, "config_sha256": ctx.digest, "outputs": ctx.written}))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
