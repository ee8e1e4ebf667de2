"""Command-line front end.

Every run resolves its configuration from, in increasing precedence, the
built-in defaults, a JSON file given with ``--config``, environment variables
prefixed ``BOSEDIMER_`` (``BOSEDIMER_OMEGA=1.2``, ``BOSEDIMER_T_END=800``) and
explicit command-line flags.  The resolved configuration is written to
``manifest.json`` next to the outputs.

Exit codes: 0 success, 1 failed validation check, 2 configuration error,
3 numerical failure (details in ``diagnostics.json``).
"""
import argparse
import json
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, experiments, io
from .correlations import correlation_series
from .errors import BoseDimerError, ConfigError, InconclusiveClassification, NumericalError
from .fluctuations import NOISE_SCALE, integrate_lyapunov, log_time_grid
from .liouvillian import (block_spectrum, build_block, coherent_initial_blocks, evolve_blocks,
                          spin_equivalence_check, steady_state)
from .meanfield import classify_phase, integrate_mf
from .params import CONFIG_KEYS, ModelParams

ENV_PREFIX = "BOSEDIMER_"
SUBCOMMANDS = ("meanfield", "fluctuations", "spectrum", "evolve", "sweep", "phasediagram",
               "fit", "validate")
CHECKS = ("spin-equivalence", "block-trace", "three-mode")

# Options shared by all subcommands and their defaults.
COMMON_DEFAULTS = {"t_end": 500.0, "tol": 1e-10, "dt": 0.1, "out": "out", "threads": 1,
                   "seed": 0}
OPTION_DEFAULTS = {
    "meanfield": {"max_extensions": 3},
    "fluctuations": {"log_grid": False, "discord": True},
    "spectrum": {"n_prime": None, "modes": 16},
    "evolve": {"width": 2},
    "sweep": {"omega_min": 1.0, "omega_max": 1.6, "omega_step": 0.01, "settle": 200.0,
              "direction": "both"},
    "phasediagram": {"omega_grid": "1.1:1.6:0.05", "u_grid": "0:0.4:0.05",
                     "protocol": "continuation", "with_eps": False},
    "fit": {"kind": "exponent", "distances": "1e-4:1e-2:9"},
    "validate": {"check": "spin-equivalence", "n": 4},
}

# Conventions recorded in every manifest.
DECISIONS = {
    "noise_scale": NOISE_SCALE,
    "vacuum_covariance": "identity",
    "interaction": "2U/N [n_a(n_a-1) + n_b(n_b-1)]",
    "log_base": 2,
    "sweep_start": "each direction starts from the default initial state",
    "loop_area": "label-gated (TC2 vs other)",
}


@dataclass
class RunConfig:
    subcommand: str
    params: ModelParams
    t_end: float
    tol: float
    dt: float
    out: str
    threads: int
    seed: int
    options: dict = field(default_factory=dict)

    def to_dict(self):
        data = asdict(self)
        data["params"] = self.params.to_dict()
        return data


def _env_overrides(environ):
    out = {}
    for key, value in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        name = key[len(ENV_PREFIX):].lower()
        try:
            out[name] = json.loads(value)
        except json.JSONDecodeError:
            out[name] = value
    return out


def _load_config_file(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if not text.strip():
        raise ConfigError("config file is empty")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or not data:
        raise ConfigError("config must be a non-empty JSON object")
    return data


def _flatten(data):
    """Accept both flat configs and ``{"params": {...}, "options": {...}}``."""
    flat = {}
    for key, value in data.items():
        if key in ("params", "options", "integrator"):
            if not isinstance(value, dict):
                raise ConfigError(f"'{key}' must be an object")
            flat.update(value)
        else:
            flat[key] = value
    return flat


def resolve_config(args, environ=None):
    """Merge defaults, config file, environment and flags into a :class:`RunConfig`."""
    environ = os.environ if environ is None else environ
    layers = []
    if args.config:
        layers.append(_flatten(_load_config_file(args.config)))
    layers.append(_env_overrides(environ))
    cli = {k: v for k, v in vars(args).items()
           if v is not None and k not in ("config", "subcommand", "func")}
    layers.append(cli)

    subcommand = args.subcommand
    for layer in layers[:-1]:
        if "subcommand" in layer:
            if subcommand and layer["subcommand"] != subcommand:
                raise ConfigError("config subcommand does not match the command line")
            subcommand = layer.pop("subcommand")
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown or missing subcommand {subcommand!r}")

    merged = dict(COMMON_DEFAULTS)
    merged.update(OPTION_DEFAULTS[subcommand])
    merged.update({"omega": 0.0, "u": 0.0, "kappa": 1.0, "n_th": 0.0, "n_total": None})
    for layer in layers:
        merged.update(layer)
    allowed = set(COMMON_DEFAULTS) | set(OPTION_DEFAULTS[subcommand]) | set(CONFIG_KEYS)
    unknown = set(merged) - allowed
    if unknown:
        raise ConfigError(f"unknown keys for '{subcommand}': {sorted(unknown)}")
    params = ModelParams.from_dict({k: merged.pop(k) for k in CONFIG_KEYS})
    try:
        common = {"t_end": float(merged.pop("t_end")), "tol": float(merged.pop("tol")),
                  "dt": float(merged.pop("dt")), "out": str(merged.pop("out")),
                  "threads": int(merged.pop("threads")), "seed": int(merged.pop("seed"))}
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid option value: {exc}") from exc
    if common["t_end"] <= 0 or common["tol"] <= 0 or common["dt"] <= 0 or common["threads"] < 1:
        raise ConfigError("t_end, tol, dt must be positive and threads >= 1")
    return RunConfig(subcommand, params, options=merged, **common)


def parse_grid(text):
    """``"start:stop:step"`` (inclusive stop) or a comma-separated list."""
    if isinstance(text, (list, tuple)):
        return np.asarray(text, float)
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0:
                raise ValueError("step must be positive")
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return np.round(start + step * np.arange(n), 12)
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from exc


def _log_grid(text):
    start, stop, num = text.split(":")
    return np.logspace(np.log10(float(start)), np.log10(float(stop)), int(num))


def _out(cfg, name):
    return Path(cfg.out) / name


def cmd_meanfield(cfg):
    t_end = cfg.t_end
    label = None
    for _ in range(int(cfg.options["max_extensions"]) + 1):
        traj = integrate_mf(None, cfg.params, t_end=t_end, dt=cfg.dt, tol=cfg.tol)
        try:
            label = classify_phase(traj, cfg.params)
            break
        except InconclusiveClassification:
            t_end *= 2
    traj.to_csv(_out(cfg, "trajectory.csv"))
    payload = label.to_dict() if label else {"label": experiments.INCONCLUSIVE}
    payload["t_end_used"] = t_end
    io.write_json(_out(cfg, "phase.json"), payload)
    print(payload["label"])
    return {"t_end_used": t_end, "label": payload["label"]}


def cmd_fluctuations(cfg):
    times = log_time_grid(cfg.t_end) if cfg.options["log_grid"] else None
    traj, cov = integrate_lyapunov(None, None, cfg.params, t_end=cfg.t_end, tol=cfg.tol,
                                   dt=cfg.dt, times=times)
    cov.to_csv(_out(cfg, "covariance.csv"))
    corr = correlation_series(cov, with_discord=bool(cfg.options["discord"]))
    corr.to_csv(_out(cfg, "correlations.csv"))
    traj.to_csv(_out(cfg, "trajectory.csv"))
    return {"physicality_warnings": len(cov.warnings)}


def cmd_spectrum(cfg):
    n = cfg.params.n_total
    if n is None:
        raise ConfigError("spectrum needs --n-total")
    n_prime = cfg.options["n_prime"]
    n_prime = n - 1 if n_prime is None else int(n_prime)
    spec = block_spectrum(build_block(cfg.params, n, n_prime), k=int(cfg.options["modes"]))
    io.write_csv(_out(cfg, "spectrum.csv"), ["n", "n_prime", "re_lambda", "im_lambda"],
                 spec.rows())
    return {"method": spec.method, "residual": spec.residual}


def cmd_evolve(cfg):
    n = cfg.params.n_total
    if n is None:
        raise ConfigError("evolve needs --n-total")
    init = coherent_initial_blocks(n_total=n, width=int(cfg.options["width"]))
    obs = evolve_blocks(init.blocks, cfg.params, cfg.t_end, cfg.dt, init.coherence_norm)
    obs.to_csv(_out(cfg, "observables.csv"))
    return {"coherence_norm": init.coherence_norm, "window": init.window,
            "trace_drift": obs.metadata["trace_drift"]}


def cmd_sweep(cfg):
    o = cfg.options
    grid = parse_grid(f"{o['omega_min']}:{o['omega_max']}:{o['omega_step']}")
    kw = dict(kappa=cfg.params.kappa, n_th=cfg.params.n_th, dt=cfg.dt, tol=cfg.tol)
    rows, summary = [], {}
    if o["direction"] == "both":
        loop = experiments.hysteresis_loop(cfg.params.u, grid, float(o["settle"]), **kw)
        records = [loop.forward, loop.backward]
        summary = {"area": loop.area, "raw_area": loop.raw_area,
                   "bistable_omegas": loop.bistable_omegas}
    elif o["direction"] in ("forward", "backward"):
        records = [experiments.hysteresis_sweep(cfg.params.u, grid, o["direction"],
                                                float(o["settle"]), **kw)]
    else:
        raise ConfigError("direction must be forward, backward or both")
    for rec in records:
        rows.extend(rec.rows())
        summary[f"{rec.direction}_transition"] = rec.transition()
        summary[f"{rec.direction}_flagged"] = rec.flagged
    io.write_csv(_out(cfg, "sweep.csv"), ["omega", "direction", "delta_N", "delta_R_bar", "label"],
                 rows)
    io.write_json(_out(cfg, "loop.json"), summary)
    return summary


def _column(args):
    omega, u_grid, opts = args
    return experiments.phase_diagram([omega], u_grid, **opts).cells


def cmd_phasediagram(cfg):
    o = cfg.options
    omegas = parse_grid(o["omega_grid"])
    u_grid = parse_grid(o["u_grid"])
    opts = dict(protocol=o["protocol"], t_end=cfg.t_end, dt=cfg.dt, kappa=cfg.params.kappa,
                n_th=cfg.params.n_th, with_eps=bool(o["with_eps"]), tol=cfg.tol)
    jobs = [(w, u_grid, opts) for w in omegas]
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            columns = list(pool.map(_column, jobs))
    else:
        columns = [_column(j) for j in jobs]
    diagram = experiments.PhaseDiagram([c for col in columns for c in col], o["protocol"])
    diagram.to_csv(_out(cfg, "phasediagram.csv"))
    errors = [(c.omega, c.u, c.error) for c in diagram.cells if c.error]
    return {"cells": len(diagram.cells), "errors": errors}


def cmd_fit(cfg):
    kind = cfg.options["kind"]
    if kind == "exponent":
        distances = _log_grid(cfg.options["distances"])
        delta_n = experiments.simulate_exponent(distances, u=cfg.params.u, kappa=cfg.params.kappa)
        fit = experiments.critical_exponent_fit(distances, delta_n)
    elif kind == "growth":
        times, eps = experiments.entanglement_run(cfg.params, t_end=cfg.t_end, tol=cfg.tol)
        fit = experiments.entanglement_growth_fit(times, eps, window=(1e2, cfg.t_end))
    else:
        raise ConfigError("fit kind must be 'exponent' or 'growth'")
    result = asdict(fit)
    io.write_json(_out(cfg, "fit.json"), result)
    print(json.dumps(io.to_jsonable(result)))
    return result


def cmd_validate(cfg):
    check = cfg.options["check"]
    n = int(cfg.options["n"])
    if check == "spin-equivalence":
        value, threshold = spin_equivalence_check(cfg.params.replace(n_total=None), n), 1e-9
    elif check == "block-trace":
        rho = steady_state(build_block(cfg.params, n, n))
        value, threshold = abs(rho.trace() - 1), 1e-12
    elif check == "three-mode":
        from .liouvillian import adiabatic_rates, three_mode_oracle
        dist = []
        for ratio in (10, 100):
            g, gamma = adiabatic_rates(cfg.params.kappa, ratio)
            dist.append(three_mode_oracle(cfg.params, g, gamma, cutoff_c=4,
                                          n=min(n, 3)).trace_distance.max())
        value, threshold = dist[1] / dist[0], 0.5
    else:
        raise ConfigError(f"unknown check {check!r}; choose from {CHECKS}")
    passed = bool(value < threshold)
    print(f"{check}: {'PASS' if passed else 'FAIL'} (value {value:.3e}, threshold {threshold:.0e})")
    io.write_json(_out(cfg, "validate.json"),
                  {"check": check, "value": value, "threshold": threshold, "pass": passed})
    return {"pass": passed, "value": value}


COMMANDS = {"meanfield": cmd_meanfield, "fluctuations": cmd_fluctuations,
            "spectrum": cmd_spectrum, "evolve": cmd_evolve, "sweep": cmd_sweep,
            "phasediagram": cmd_phasediagram, "fit": cmd_fit, "validate": cmd_validate}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    # defaults are None so that unset flags do not mask config or env values
    common.add_argument("--omega", type=float)
    common.add_argument("--u", type=float)
    common.add_argument("--kappa", type=float)
    common.add_argument("--n-th", dest="n_th", type=float)
    common.add_argument("--n-total", dest="n_total", type=int)
    common.add_argument("--t-end", dest="t_end", type=float)
    common.add_argument("--tol", type=float)
    common.add_argument("--dt", type=float)
    common.add_argument("--out")
    common.add_argument("--threads", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--config", help="JSON file with parameters and options")

    parser = argparse.ArgumentParser(prog="bosedimer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand")
    sub.add_parser("meanfield", parents=[common], help="mean-field trajectory and phase label")
    p = sub.add_parser("fluctuations", parents=[common], help="covariance and correlations")
    p.add_argument("--log-grid", dest="log_grid", action="store_const", const=True)
    p.add_argument("--no-discord", dest="discord", action="store_const", const=False)
    p = sub.add_parser("spectrum", parents=[common], help="eigenvalues of one Liouvillian block")
    p.add_argument("--n-prime", dest="n_prime", type=int)
    p.add_argument("--modes", type=int)
    p = sub.add_parser("evolve", parents=[common], help="finite-N block evolution")
    p.add_argument("--width", type=int)
    p = sub.add_parser("sweep", parents=[common], help="adiabatic hysteresis sweep")
    p.add_argument("--omega-min", dest="omega_min", type=float)
    p.add_argument("--omega-max", dest="omega_max", type=float)
    p.add_argument("--omega-step", dest="omega_step", type=float)
    p.add_argument("--settle", type=float)
    p.add_argument("--direction", choices=("forward", "backward", "both"))
    p = sub.add_parser("phasediagram", parents=[common], help="phase classification grid")
    p.add_argument("--omega-grid", dest="omega_grid")
    p.add_argument("--u-grid", dest="u_grid")
    p.add_argument("--protocol", choices=("fresh", "continuation"))
    p.add_argument("--with-eps", dest="with_eps", action="store_const", const=True)
    p = sub.add_parser("fit", parents=[common], help="critical exponent or entanglement growth")
    p.add_argument("--kind", choices=("exponent", "growth"))
    p.add_argument("--distances", help="log grid start:stop:count")
    p = sub.add_parser("validate", parents=[common], help="built-in consistency checks")
    p.add_argument("--check", choices=CHECKS)
    p.add_argument("--n", type=int)
    return parser


def run(cfg):
    """Execute a resolved configuration; returns the summary dict."""
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    np.random.seed(cfg.seed)
    manifest = {"version": __version__, "config": cfg.to_dict(), "decisions": DECISIONS}
    io.write_json(_out(cfg, "manifest.json"), manifest)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        summary = COMMANDS[cfg.subcommand](cfg)
    manifest["summary"] = summary
    manifest["warnings"] = [str(w.message) for w in caught]
    io.write_json(_out(cfg, "manifest.json"), manifest)
    return summary


def main(argv=None, environ=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.subcommand is None and not getattr(args, "config", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = resolve_config(args, environ)
    except (ConfigError, BoseDimerError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        summary = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        io.write_json(_out(cfg, "diagnostics.json"),
                      {"error": type(exc).__name__, "message": str(exc),
                       "diagnostics": exc.diagnostics, "config": cfg.to_dict()})
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except BoseDimerError as exc:
        io.write_json(_out(cfg, "diagnostics.json"),
                      {"error": type(exc).__name__, "message": str(exc), "config": cfg.to_dict()})
        print(f"error: {exc}", file=sys.stderr)
        return 3
    if cfg.subcommand == "validate" and not summary["pass"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
