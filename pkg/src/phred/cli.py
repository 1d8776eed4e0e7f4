"""Command-line front end: model generation, reduction, comparison sweeps,
time/frequency analysis and model validation.

Configuration comes from an optional JSON file plus flag overrides
(flags win). Artifacts are Matrix Market matrices with JSON manifests,
JSON reports and RFC-4180 CSV tables; all writes are deterministic for
a given configuration.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import csv
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _linalg as la
from . import io as phio
from .analysis import (
    FrequencyGrid,
    error_system,
    frequency_response,
    make_signal,
    relative_h2_error,
    relative_hinf_error,
    simulate,
)
from .balancing import balanced_truncation, effort_constraint_reduce
from .core import PortHamiltonianSystem, ph_to_state_space
from .errors import BadParams, MaxIterationsExceeded, PhredError
from .irka import (
    IrkaOptions,
    default_init,
    init_perturbed_poles,
    init_reflected_poles,
    irka_general,
    irka_ph,
    stability_certificate,
)
from .models import LadderParams, MsdParams, build_ladder, build_msd
from .reduction import interpolation_residuals, ph_structure_reduce

METHODS = ("irka_ph", "one_step", "effort_bal", "balanced", "irka_general")


class ConfigError(Exception):
    pass


def _load_config(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _merged(args, defaults):
    """Config values overridden by explicitly set flags."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        cfg.update(_load_config(args.config))
    for key in defaults:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    return cfg


def _build_model(cfg):
    model = cfg.get("model")
    if isinstance(model, str):
        model = {"files": model}
    if not isinstance(model, dict):
        raise ConfigError("exactly one model source is required "
                          "(generator spec or files)")
    if ("files" in model) == ("family" in model):
        raise ConfigError("model needs either 'files' or 'family', not both")
    if "files" in model:
        return phio.load_system(model["files"])
    family = model["family"]
    n = int(model["n"])
    params = model.get("params", {})
    if family == "msd":
        return build_msd(MsdParams(n, **params))
    if family == "ladder":
        return build_ladder(LadderParams(n, **params))
    raise ConfigError(f"unknown model family {family!r}")


def _parse_init(spec, sys, r):
    if spec is None:
        spec = "logspace:1e-3:1e-1"
    parts = str(spec).split(":")
    kind = parts[0]
    if kind == "logspace":
        lo, hi = float(parts[1]), float(parts[2])
        return default_init(sys, r, lo, hi)
    if kind == "file":
        return phio.load_interpolation_data(":".join(parts[1:]))
    if kind == "perturbed-poles":
        eps = float(parts[1]) if len(parts) > 1 else 1e-3
        return init_perturbed_poles(sys, r, eps)
    if kind == "reflected-poles":
        return init_reflected_poles(sys, r)
    raise ConfigError(f"unknown init spec {spec!r}")


def _parse_grid(spec):
    if spec is None:
        return FrequencyGrid.logspace()
    parts = str(spec).split(":")
    if parts[0] != "logspace" or len(parts) != 4:
        raise ConfigError(f"unknown grid spec {spec!r}")
    return FrequencyGrid.logspace(float(parts[1]), float(parts[2]),
                                  int(parts[3]))


def _parse_signal(spec):
    if spec is None:
        spec = "decaying:0.05:5"
    parts = str(spec).split(":")
    if parts[0] in ("decaying", "decaying_sinusoid"):
        rate = float(parts[1]) if len(parts) > 1 else 0.05
        freq = float(parts[2]) if len(parts) > 2 else 5.0
        return make_signal("decaying_sinusoid", rate=rate, frequency=freq)
    if parts[0] in ("square", "square_wave"):
        period = float(parts[1]) if len(parts) > 1 else 0.2 * math.pi
        return make_signal("square_wave", period=period)
    if parts[0] == "zero":
        return make_signal("zero")
    raise ConfigError(f"unknown signal spec {spec!r}")


def _parse_orders(spec):
    if isinstance(spec, (list, tuple)):
        return [int(r) for r in spec]
    parts = str(spec).split(":")
    if len(parts) == 1:
        return [int(parts[0])]
    if len(parts) == 3:
        a, step, b = (int(p) for p in parts)
        return list(range(a, b + 1, step))
    raise ConfigError(f"unknown orders spec {spec!r}")


def _irka_options(cfg):
    return IrkaOptions(
        max_iterations=int(cfg.get("max_iter", 100)),
        shift_tolerance=float(cfg.get("tol_shift", 1e-6)),
        stagnation_window=int(cfg.get("stagnation_window", 5)),
    )


def _run_method(method, ph, r, cfg):
    """One reduction; returns (model, trace_or_None, init_data_or_None)."""
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")
    if not isinstance(ph, PortHamiltonianSystem) and method in (
            "irka_ph", "one_step", "effort_bal"):
        raise ConfigError(f"method {method} needs a port-Hamiltonian model")
    if r >= ph.n:
        raise ConfigError("reduction order must be < n")
    ss = ph_to_state_space(ph) if isinstance(ph, PortHamiltonianSystem) else ph
    opts = _irka_options(cfg)
    if method == "irka_ph":
        init = _parse_init(cfg.get("init"), ss, r)
        model, trace = irka_ph(ph, init, opts)
        return model, trace, init
    if method == "one_step":
        init = _parse_init(cfg.get("init"), ss, r)
        return ph_structure_reduce(ph, init), None, init
    if method == "effort_bal":
        return effort_constraint_reduce(ph, r), None, None
    if method == "balanced":
        return balanced_truncation(ss, r), None, None
    init = _parse_init(cfg.get("init"), ss, r)
    model, trace = irka_general(ss, init, opts)
    return model, trace, init


def _structural_report(model):
    if isinstance(model, PortHamiltonianSystem):
        J, R, Q = la.as_dense(model.J), la.as_dense(model.R), la.as_dense(model.Q)
        A = (J - R) @ Q
        return {
            "skewness_residual": float(np.linalg.norm(J + J.T, "fro")
                                       / max(1.0, np.linalg.norm(J, "fro"))),
            "min_eig_R": float(np.linalg.eigvalsh(la.sym_part(R))[0]),
            "min_eig_Q": float(np.linalg.eigvalsh(la.sym_part(Q))[0]),
            "spectral_abscissa": la.spectral_abscissa(A),
        }
    A = la.as_dense(model.A)
    E = None if model.e_is_identity else la.as_dense(model.E)
    return {"spectral_abscissa": la.spectral_abscissa(A, E)}


def _error_norms(full, model, grid, want_h2=True):
    out = {}
    hinf = relative_hinf_error(full, model, grid)
    out["rel_hinf"] = hinf.value
    out["rel_hinf_method"] = hinf.method
    err_order = full.n + model.n
    if want_h2 and err_order <= la.dense_ceiling():
        h2 = relative_h2_error(full, model)
        out["rel_h2"] = h2.value
        out["rel_h2_method"] = h2.method
    else:
        out["rel_h2"] = None
        out["rel_h2_method"] = "skipped: above dense ceiling"
    return out


def _complex_list(values):
    return [[float(z.real), float(z.imag)] for z in np.atleast_1d(values)]


def cmd_model(args):
    cfg = _merged(args, {"model": None, "out": "phred_out"})
    if getattr(args, "family", None):
        cfg["model"] = {"family": args.family, "n": args.n,
                        "params": (cfg.get("model") or {}).get("params", {})}
    model = _build_model(cfg)
    out = cfg["out"]
    manifest = phio.save_ph(out, model)
    print(f"wrote {manifest} (n={model.n}, m={model.m})")
    return 0


def cmd_validate(args):
    model = phio.load_system(args.model)
    report = _structural_report(model)
    for key, value in sorted(report.items()):
        print(f"{key}: {value:.6e}")
    kind = "port-Hamiltonian" if isinstance(model, PortHamiltonianSystem) \
        else "state-space"
    print(f"valid {kind} system, n={model.n}")
    return 0


def cmd_reduce(args):
    defaults = {"model": None, "method": "irka_ph", "order": None,
                "init": None, "grid": None, "tol_shift": None,
                "max_iter": None, "out": "phred_out", "seed": 0}
    cfg = _merged(args, defaults)
    cfg = {k: v for k, v in cfg.items() if v is not None}
    if "order" not in cfg:
        raise ConfigError("reduction order is required (--order)")
    ph = _build_model(cfg)
    method = cfg.get("method", "irka_ph")
    r = int(cfg["order"])
    grid = _parse_grid(cfg.get("grid"))
    out = cfg.get("out", "phred_out")
    os.makedirs(out, exist_ok=True)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model, trace, init = _run_method(method, ph, r, cfg)
        full = ph_to_state_space(ph) if isinstance(ph, PortHamiltonianSystem) else ph
        report = {
            "method": method,
            "order": r,
            "seed": int(cfg.get("seed", 0)),
            "structure": _structural_report(model),
            "norms": _error_norms(full, model, grid),
        }
        if isinstance(model, PortHamiltonianSystem):
            phio.save_ph(out, model, comment=f"reduced by {method}")
        else:
            phio.save_state_space(out, model, comment=f"reduced by {method}")
        if trace is not None:
            report["iterations"] = trace.iterations
            report["converged"] = trace.converged
            report["trace"] = trace.to_dict()
            report["final_interpolation"] = {
                "points": _complex_list(-trace.final_eigenvalues),
                "directions": [_complex_list(row)
                               for row in trace.final_directions],
            }
            if trace.converged and method == "irka_ph":
                cert = stability_certificate(ph, trace)
                report["certificates"] = {
                    "sylvester_residual": cert.sylvester_residual,
                    "lyapunov_residual": cert.lyapunov_residual,
                    "spectral_abscissa": cert.spectral_abscissa,
                    "k_r_condition": cert.k_r_condition,
                }
        if init is not None:
            red_ss = (ph_to_state_space(model)
                      if isinstance(model, PortHamiltonianSystem) else model)
            report["interpolation_residuals"] = interpolation_residuals(
                full, red_ss, init)
            report["initial_interpolation"] = {
                "points": _complex_list(init.points),
                "directions": [_complex_list(row) for row in init.directions],
            }
        report["warnings"] = sorted({str(w.message) for w in caught})

    path = os.path.join(out, "report.json")
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    print(f"wrote {path}")
    return 0


def _compare_cell(method, r, ph, cfg, grid):
    row = {"r": r, "method": method, "rel_h2": math.nan,
           "rel_hinf_sampled": math.nan, "iterations": 0, "reason": ""}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model, trace, _ = _run_method(method, ph, r, cfg)
        full = ph_to_state_space(ph) if isinstance(ph, PortHamiltonianSystem) else ph
        norms = _error_norms(full, model, grid)
        row["rel_h2"] = norms["rel_h2"] if norms["rel_h2"] is not None else math.nan
        row["rel_hinf_sampled"] = norms["rel_hinf"]
        row["iterations"] = trace.iterations if trace is not None else 0
    except MaxIterationsExceeded as exc:
        row["reason"] = f"not converged: {exc}"
    except (PhredError, ConfigError) as exc:
        row["reason"] = f"{type(exc).__name__}: {exc}"
    return row


def cmd_compare(args):
    defaults = {"model": None, "methods": None, "orders": None, "init": None,
                "grid": None, "tol_shift": None, "max_iter": None,
                "jobs": 1, "out": "phred_out", "seed": 0}
    cfg = _merged(args, defaults)
    cfg = {k: v for k, v in cfg.items() if v is not None}
    methods = cfg.get("methods")
    if isinstance(methods, str):
        methods = [m for m in methods.split(",") if m]
    if not methods:
        raise ConfigError("a nonempty method list is required")
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}")
    orders = _parse_orders(cfg.get("orders"))
    ph = _build_model(cfg)
    grid = _parse_grid(cfg.get("grid"))
    out = cfg.get("out", "phred_out")
    os.makedirs(out, exist_ok=True)

    cells = [(m, r) for m in methods for r in orders]
    jobs = max(1, int(cfg.get("jobs", 1)))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(
                lambda cell: _compare_cell(cell[0], cell[1], ph, cfg, grid),
                cells))
    else:
        rows = [_compare_cell(m, r, ph, cfg, grid) for m, r in cells]
    rows.sort(key=lambda row: (row["method"], row["r"]))

    path = os.path.join(out, "compare.csv")
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "method", "rel_h2", "rel_hinf_sampled",
                         "iterations", "reason"])
        for row in rows:
            writer.writerow([row["r"], row["method"], repr(row["rel_h2"]),
                             repr(row["rel_hinf_sampled"]),
                             row["iterations"], row["reason"]])
    os.replace(tmp, path)
    print(f"wrote {path}")
    return 0 if any(not row["reason"] for row in rows) else 3


def cmd_simulate(args):
    defaults = {"model": None, "methods": None, "order": None, "init": None,
                "signal": None, "t_end": 50.0, "rtol": 1e-6, "atol": 1e-9,
                "tol_shift": None, "max_iter": None, "out": "phred_out",
                "seed": 0}
    cfg = _merged(args, defaults)
    cfg = {k: v for k, v in cfg.items() if v is not None}
    ph = _build_model(cfg)
    signal = _parse_signal(cfg.get("signal"))
    t_end = float(cfg.get("t_end", 50.0))
    rtol = float(cfg.get("rtol", 1e-6))
    atol = float(cfg.get("atol", 1e-9))
    out = cfg.get("out", "phred_out")
    os.makedirs(out, exist_ok=True)

    full = ph_to_state_space(ph) if isinstance(ph, PortHamiltonianSystem) else ph
    traj_full = simulate(full, signal, t_end, rtol=rtol, atol=atol)
    traj_full.to_csv(os.path.join(out, "full.csv"))

    methods = cfg.get("methods") or []
    if isinstance(methods, str):
        methods = [m for m in methods.split(",") if m]
    summary = {"signal": signal.kind, "t_end": t_end, "max_abs_error": {}}
    for method in methods:
        if "order" not in cfg:
            raise ConfigError("reduction order is required with methods")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model, _, _ = _run_method(method, ph, int(cfg["order"]), cfg)
        red = (ph_to_state_space(model)
               if isinstance(model, PortHamiltonianSystem) else model)
        traj = simulate(red, signal, t_end, rtol=rtol, atol=atol)
        traj.to_csv(os.path.join(out, f"{method}.csv"))
        errs = np.max(np.abs(traj_full.outputs - traj.outputs), axis=1)
        summary["max_abs_error"][method] = {
            f"y_{i + 1}": float(errs[i]) for i in range(len(errs))
        }
    path = os.path.join(out, "summary.json")
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    print(f"wrote {path}")
    return 0


def cmd_freq(args):
    defaults = {"model": None, "methods": None, "order": None, "init": None,
                "grid": None, "tol_shift": None, "max_iter": None,
                "out": "phred_out", "seed": 0}
    cfg = _merged(args, defaults)
    cfg = {k: v for k, v in cfg.items() if v is not None}
    ph = _build_model(cfg)
    grid = _parse_grid(cfg.get("grid"))
    out = cfg.get("out", "phred_out")
    os.makedirs(out, exist_ok=True)

    full = ph_to_state_space(ph) if isinstance(ph, PortHamiltonianSystem) else ph
    frequency_response(full, grid).to_csv(os.path.join(out, "full_response.csv"))

    methods = cfg.get("methods") or []
    if isinstance(methods, str):
        methods = [m for m in methods.split(",") if m]
    for method in methods:
        if "order" not in cfg:
            raise ConfigError("reduction order is required with methods")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model, _, _ = _run_method(method, ph, int(cfg["order"]), cfg)
        red = (ph_to_state_space(model)
               if isinstance(model, PortHamiltonianSystem) else model)
        frequency_response(red, grid).to_csv(
            os.path.join(out, f"{method}_response.csv"))
        frequency_response(error_system(full, red), grid).to_csv(
            os.path.join(out, f"{method}_error_response.csv"))
    print(f"wrote responses to {out}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="phred",
        description="Structure-preserving interpolatory model reduction "
                    "for port-Hamiltonian systems")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="seed for randomized "
                       "strategies (reserved; recorded in reports)")

    p_model = sub.add_parser("model", help="generate a benchmark model")
    add_common(p_model)
    p_model.add_argument("--family", choices=("msd", "ladder"))
    p_model.add_argument("--n", type=int)
    p_model.set_defaults(func=cmd_model)

    p_reduce = sub.add_parser("reduce", help="reduce a model")
    add_common(p_reduce)
    p_reduce.add_argument("--method", choices=METHODS)
    p_reduce.add_argument("--order", type=int)
    p_reduce.add_argument("--init")
    p_reduce.add_argument("--grid")
    p_reduce.add_argument("--tol-shift", dest="tol_shift", type=float)
    p_reduce.add_argument("--max-iter", dest="max_iter", type=int)
    p_reduce.set_defaults(func=cmd_reduce)

    p_cmp = sub.add_parser("compare", help="method-by-order error sweep")
    add_common(p_cmp)
    p_cmp.add_argument("--methods", help="comma-separated method list")
    p_cmp.add_argument("--orders", help="A:STEP:B or single order")
    p_cmp.add_argument("--init")
    p_cmp.add_argument("--grid")
    p_cmp.add_argument("--tol-shift", dest="tol_shift", type=float)
    p_cmp.add_argument("--max-iter", dest="max_iter", type=int)
    p_cmp.add_argument("--jobs", type=int)
    p_cmp.set_defaults(func=cmd_compare)

    p_sim = sub.add_parser("simulate", help="time-domain comparison")
    add_common(p_sim)
    p_sim.add_argument("--methods")
    p_sim.add_argument("--order", type=int)
    p_sim.add_argument("--init")
    p_sim.add_argument("--signal")
    p_sim.add_argument("--t-end", dest="t_end", type=float)
    p_sim.add_argument("--rtol", type=float)
    p_sim.add_argument("--atol", type=float)
    p_sim.add_argument("--tol-shift", dest="tol_shift", type=float)
    p_sim.add_argument("--max-iter", dest="max_iter", type=int)
    p_sim.set_defaults(func=cmd_simulate)

    p_freq = sub.add_parser("freq", help="frequency responses")
    add_common(p_freq)
    p_freq.add_argument("--methods")
    p_freq.add_argument("--order", type=int)
    p_freq.add_argument("--init")
    p_freq.add_argument("--grid")
    p_freq.add_argument("--tol-shift", dest="tol_shift", type=float)
    p_freq.add_argument("--max-iter", dest="max_iter", type=int)
    p_freq.set_defaults(func=cmd_freq)

    p_val = sub.add_parser("validate", help="validate a stored model")
    p_val.add_argument("--model", required=True,
                       help="manifest path or directory")
    p_val.set_defaults(func=cmd_validate)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, BadParams) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MaxIterationsExceeded as exc:
        print(f"numerical failure: MaxIterationsExceeded: {exc}",
              file=sys.stderr)
        return 3
    except PhredError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
