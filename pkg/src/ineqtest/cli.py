"""Command-line interface: JSON configs in, CSV data in, JSON/CSV results out.

Subcommands: test-full, test-sub, confset, identified-set, mc-full, mc-sub.
Exit status 0 on success, 1 on usage/configuration errors, 2 on numerical
failures.  Every result embeds the seed and tolerance set actually used, and
output files are byte-reproducible given the same config.
"""

import argparse
import csv
import dataclasses
import json
import sys

import numpy as np

from . import __version__
from .errors import NumericalError
from .fullvector import FullVectorProblem, run_test, sample_variance
from .inference import GridSpec, invert_test
from .intervalreg import IntervalRegressionDesign
from .linalg import DEFAULT_TOLERANCES, PolyhedralSpec, Tolerances
from .montecarlo import (
    FullVectorDesign,
    correlation_preset,
    simulate_fullvector,
    simulate_interval_regression,
)
from .subvector import (
    SubvectorProblem,
    cond_var_discrete,
    cond_var_nearest_neighbor,
    run_subvector_test,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


_ALLOWED_KEYS = {
    "test-full": {"model": {"a", "b"}, "variance": None, "moment_columns": None,
                  "alpha": None, "variant": None, "seed": None,
                  "tolerances": None, "n": None},
    "test-sub": {"model": {"b_mat", "c_mat", "d"}, "variance": None,
                 "moment_columns": None, "alpha": None, "variant": None,
                 "seed": None, "tolerances": None, "n": None},
    "confset": {"model": {"a", "b"}, "variance": None, "moment_columns": None,
                "theta": {"loadings", "columns"}, "grid": {"lower", "upper", "count", "points"},
                "alpha": None, "variant": None, "seed": None, "tolerances": None,
                "threads": None},
    "identified-set": {"design": {"n_trials", "s_floor", "theta0", "d_c", "delta0"},
                       "draws": None, "seed": None, "tolerances": None},
    "mc-full": {"design": {"p", "omega", "rho", "mu_null", "mu_alt", "n", "replications"},
                "known_variance": None, "alpha": None, "variant": None,
                "seed": None, "tolerances": None},
    "mc-sub": {"design": {"d_c", "n_obs", "replications", "n_trials", "s_floor",
                          "theta0", "delta0", "ordered_pairs"},
               "theta_grid": None, "null_interval": None, "alpha": None,
               "variant": None, "seed": None, "tolerances": None},
}

_VARIANCE_KEYS = {"mode", "matrix", "z_columns", "labels_column", "seed"}


def _reject_unknown_keys(config, subcommand):
    allowed = _ALLOWED_KEYS[subcommand]
    for key, value in config.items():
        if key not in allowed:
            raise UsageError(f"unknown config key {key!r} for {subcommand}")
        sub = allowed[key]
        if sub is not None and isinstance(value, dict):
            for inner in value:
                if inner not in sub:
                    raise UsageError(f"unknown config key {key}.{inner}")
        if key == "variance" and isinstance(value, dict):
            for inner in value:
                if inner not in _VARIANCE_KEYS:
                    raise UsageError(f"unknown config key variance.{inner}")
        if key == "tolerances" and isinstance(value, dict):
            fields = {f.name for f in dataclasses.fields(Tolerances)}
            for inner in value:
                if inner not in fields:
                    raise UsageError(f"unknown tolerance {inner!r}")


def _load_config(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {path}: line {exc.lineno} column {exc.colno}")


def _load_csv(path):
    """Returns (column names, dict of name -> list of raw strings)."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise UsageError(f"{path}: empty file, header row required")
            columns = {name: [] for name in header}
            if len(columns) != len(header):
                raise UsageError(f"{path}: duplicate column names in header")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise UsageError(
                        f"{path}: line {lineno} has {len(row)} fields, expected {len(header)}")
                for name, value in zip(header, row):
                    columns[name].append(value)
    except OSError as exc:
        raise UsageError(f"cannot read data: {exc}")
    return header, columns


def _numeric_columns(path, columns, names):
    out = np.empty((len(next(iter(columns.values()), [])), len(names)))
    for j, name in enumerate(names):
        if name not in columns:
            raise UsageError(f"{path}: missing column {name!r}")
        for i, raw in enumerate(columns[name]):
            try:
                out[i, j] = float(raw)
            except ValueError:
                raise UsageError(
                    f"{path}: line {i + 2}, column {name!r}: not a number: {raw!r}")
    return out


def _tolerances(config):
    overrides = config.get("tolerances") or {}
    return dataclasses.replace(DEFAULT_TOLERANCES, **overrides) \
        if overrides else DEFAULT_TOLERANCES


def _moment_matrix(config, header, columns, path, reserved):
    names = config.get("moment_columns")
    if names is None:
        names = [c for c in header if c not in reserved]
    if not names:
        raise UsageError("no moment columns left after excluding variance columns")
    return names, _numeric_columns(path, columns, names)


def _variance_reserved(config):
    var = config.get("variance") or {"mode": "sample"}
    reserved = set(var.get("z_columns") or [])
    if var.get("labels_column"):
        reserved.add(var["labels_column"])
    return var, reserved


def _build_sigma(var, rows, columns, path, seed, tol):
    mode = var.get("mode", "sample")
    if mode == "sample":
        return sample_variance(rows)
    if mode == "fixed":
        if "matrix" not in var:
            raise UsageError("variance.mode 'fixed' requires variance.matrix")
        return np.asarray(var["matrix"], dtype=float)
    if mode == "nearest_neighbor":
        zcols = var.get("z_columns")
        if not zcols:
            raise UsageError("variance.mode 'nearest_neighbor' requires variance.z_columns")
        z = _numeric_columns(path, columns, zcols)
        return cond_var_nearest_neighbor(rows, z, seed=var.get("seed", seed), tol=tol)
    if mode == "discrete":
        label_col = var.get("labels_column")
        if not label_col:
            raise UsageError("variance.mode 'discrete' requires variance.labels_column")
        if label_col not in columns:
            raise UsageError(f"{path}: missing column {label_col!r}")
        return cond_var_discrete(rows, np.asarray(columns[label_col]))
    raise UsageError(f"unknown variance mode {mode!r}")


def _outcome_payload(outcome, seed, tol, extra=None):
    payload = {
        "statistic": outcome.statistic,
        "r_hat": outcome.rank,
        "tau_hat": outcome.tau,
        "beta_hat": outcome.beta,
        "critical_value": outcome.critical_value,
        "reject": bool(outcome.reject),
        "diagnostics": {
            "variant": outcome.variant,
            "mu_hat": list(np.asarray(outcome.mu_hat)),
            "active_set": None if outcome.active_set is None
            else [int(j) for j in outcome.active_set],
            "tolerances": dataclasses.asdict(tol),
            **(extra or {}),
        },
        "seed": seed,
        "version": __version__,
    }
    return payload


def _csv_sibling(path):
    return path[:-5] + ".csv" if path.endswith(".json") else path + ".csv"


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=float)
        fh.write("\n")


def _cmd_test_full(args, config):
    tol = _tolerances(config)
    alpha = args.alpha if args.alpha is not None else config.get("alpha", 0.05)
    variant = (args.variant or config.get("variant", "rcc")).lower()
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    model = config.get("model") or {}
    if "a" not in model or "b" not in model:
        raise UsageError("test-full config needs model.a and model.b")
    header, columns = _load_csv(args.data)
    var, reserved = _variance_reserved(config)
    names, rows = _moment_matrix(config, header, columns, args.data, reserved)
    if args.validate_only:
        PolyhedralSpec(model["a"], model["b"])
        return {"validated": True, "n": rows.shape[0], "moment_columns": names}
    sigma = _build_sigma(var, rows, columns, args.data, seed, tol)
    n = int(config.get("n", rows.shape[0]))
    problem = FullVectorProblem(m_bar=rows.mean(axis=0), sigma=sigma, n=n,
                                spec=PolyhedralSpec(model["a"], model["b"]),
                                alpha=alpha, tol=tol)
    out = run_test(problem, variant)
    return _outcome_payload(out, seed, tol, {"n": n, "moment_columns": names})


def _cmd_test_sub(args, config):
    tol = _tolerances(config)
    alpha = args.alpha if args.alpha is not None else config.get("alpha", 0.05)
    variant = (args.variant or config.get("variant", "srcc")).lower()
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    model = config.get("model") or {}
    for key in ("b_mat", "c_mat", "d"):
        if key not in model:
            raise UsageError(f"test-sub config needs model.{key}")
    header, columns = _load_csv(args.data)
    var, reserved = _variance_reserved(config)
    names, rows = _moment_matrix(config, header, columns, args.data, reserved)
    if args.validate_only:
        return {"validated": True, "n": rows.shape[0], "moment_columns": names}
    sigma = _build_sigma(var, rows, columns, args.data, seed, tol)
    n = int(config.get("n", rows.shape[0]))
    problem = SubvectorProblem(b_mat=model["b_mat"], c_mat=model["c_mat"],
                               d=model["d"], m_bar=rows.mean(axis=0),
                               sigma=sigma, n=n, alpha=alpha, tol=tol)
    out = run_subvector_test(problem, variant)
    extra = {"n": n, "moment_columns": names,
             "delta_hat": list(np.asarray(out.delta_hat))}
    return _outcome_payload(out, seed, tol, extra)


def _cmd_confset(args, config):
    tol = _tolerances(config)
    alpha = args.alpha if args.alpha is not None else config.get("alpha", 0.05)
    variant = (args.variant or config.get("variant", "rcc")).lower()
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    threads = args.threads if args.threads else config.get("threads", 1)
    model = config.get("model") or {}
    if "a" not in model or "b" not in model:
        raise UsageError("confset config needs model.a and model.b")
    grid_cfg = config.get("grid")
    if not grid_cfg:
        raise UsageError("confset config needs a grid block")
    if "points" in grid_cfg:
        grid = GridSpec(points=[np.atleast_1d(p) for p in grid_cfg["points"]])
    else:
        grid = GridSpec(lower=grid_cfg["lower"], upper=grid_cfg["upper"],
                        count=grid_cfg["count"])
    header, columns = _load_csv(args.data)
    var, reserved = _variance_reserved(config)
    theta_cfg = config.get("theta") or {}
    loading_cols = theta_cfg.get("columns")
    if loading_cols:
        reserved = reserved | {c for group in loading_cols for c in group}
    names, rows = _moment_matrix(config, header, columns, args.data, reserved)
    if args.validate_only:
        PolyhedralSpec(model["a"], model["b"])
        return {"validated": True, "n": rows.shape[0], "moment_columns": names,
                "grid_points": len(grid.grid_points())}

    d_m = rows.shape[1]
    if loading_cols:
        if len(loading_cols) != d_m:
            raise UsageError("theta.columns needs one column group per moment")
        loads = np.stack([_numeric_columns(args.data, columns, group)
                          for group in loading_cols], axis=1)  # n x d_m x d_t
    else:
        const = np.asarray(theta_cfg.get("loadings",
                                         -np.ones((d_m, 1))), dtype=float)
        if const.ndim == 1:
            const = const.reshape(d_m, 1)
        loads = np.broadcast_to(const, (rows.shape[0],) + const.shape)
    spec = PolyhedralSpec(model["a"], model["b"])

    def factory(theta):
        theta_vec = np.atleast_1d(np.asarray(theta, dtype=float))
        shifted = rows + loads @ theta_vec
        sigma = _build_sigma(var, shifted, columns, args.data, seed, tol)
        return FullVectorProblem(m_bar=shifted.mean(axis=0), sigma=sigma,
                                 n=shifted.shape[0], spec=spec, alpha=alpha,
                                 tol=tol)

    report = invert_test(factory, grid, variant=variant, alpha=alpha,
                         threads=threads)
    if args.out:
        report.to_csv(_csv_sibling(args.out))
    payload = report.summary()
    payload.update({"seed": seed, "version": __version__,
                    "tolerances": dataclasses.asdict(tol)})
    return payload


def _cmd_identified_set(args, config):
    from .inference import identified_set_interval_regression
    tol = _tolerances(config)
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    design_cfg = dict(config.get("design") or {})
    if "delta0" in design_cfg and design_cfg["delta0"] is not None:
        design_cfg["delta0"] = tuple(design_cfg["delta0"])
    design = IntervalRegressionDesign(**design_cfg)
    draws = int(config.get("draws", 1_000_000))
    if args.validate_only:
        return {"validated": True, "draws": draws}
    lo, hi = identified_set_interval_regression(design, draws=draws, seed=seed,
                                                tol=tol)
    return {"theta_lower": lo, "theta_upper": hi, "draws": draws, "seed": seed,
            "version": __version__, "tolerances": dataclasses.asdict(tol)}


def _omega_from_config(value, p):
    if isinstance(value, str):
        return correlation_preset(value, p)
    if isinstance(value, dict):
        return correlation_preset(value.get("preset", "identity"), p,
                                  rho=value.get("rho", 0.5))
    return np.asarray(value, dtype=float)


def _cmd_mc_full(args, config):
    tol = _tolerances(config)
    alpha = args.alpha if args.alpha is not None else config.get("alpha", 0.05)
    variant = (args.variant or config.get("variant", "rcc")).lower()
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    dcfg = config.get("design") or {}
    if "p" not in dcfg:
        raise UsageError("mc-full config needs design.p")
    p = int(dcfg["p"])
    design = FullVectorDesign(
        p=p, omega=_omega_from_config(dcfg.get("omega", "identity"), p),
        mu_null=tuple(tuple(m) for m in dcfg.get("mu_null", [])),
        mu_alt=tuple(tuple(m) for m in dcfg.get("mu_alt", [])),
        n=int(dcfg.get("n", 100)),
        replications=int(dcfg.get("replications", 10_000)), seed=seed)
    if args.validate_only:
        return {"validated": True, "points": len(design.mu_null) + len(design.mu_alt)}
    report = simulate_fullvector(design, variant=variant,
                                 known_variance=bool(config.get("known_variance", True)),
                                 alpha=alpha, tol=tol)
    if args.out:
        report.to_csv(_csv_sibling(args.out))
    payload = report.summary()
    payload.update({"version": __version__, "tolerances": dataclasses.asdict(tol)})
    return payload


def _cmd_mc_sub(args, config):
    tol = _tolerances(config)
    alpha = args.alpha if args.alpha is not None else config.get("alpha", 0.05)
    variant = (args.variant or config.get("variant", "srcc")).lower()
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    dcfg = dict(config.get("design") or {})
    if "delta0" in dcfg and dcfg["delta0"] is not None:
        dcfg["delta0"] = tuple(dcfg["delta0"])
    design = IntervalRegressionDesign(seed=seed, **dcfg)
    theta_grid = config.get("theta_grid") or [-1.0]
    null_interval = tuple(config.get("null_interval", (-1.203, -0.757)))
    if args.validate_only:
        return {"validated": True, "theta_points": len(theta_grid),
                "moments": design.n_moments}
    report = simulate_interval_regression(design, variant=variant,
                                          theta_grid=theta_grid, alpha=alpha,
                                          tol=tol, null_interval=null_interval)
    if args.out:
        report.to_csv(_csv_sibling(args.out))
    payload = report.summary()
    payload.update({"version": __version__, "tolerances": dataclasses.asdict(tol)})
    return payload


_COMMANDS = {
    "test-full": (_cmd_test_full, True),
    "test-sub": (_cmd_test_sub, True),
    "confset": (_cmd_confset, True),
    "identified-set": (_cmd_identified_set, False),
    "mc-full": (_cmd_mc_full, False),
    "mc-sub": (_cmd_mc_sub, False),
}


def build_parser():
    parser = _Parser(prog="ineqtest",
                     description="Inequality testing engine: tests, confidence "
                                 "sets, and Monte Carlo studies")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, needs_data) in _COMMANDS.items():
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="JSON config path")
        cmd.add_argument("--data", required=needs_data, help="CSV data path")
        cmd.add_argument("--out", help="output path for the JSON result")
        cmd.add_argument("--alpha", type=float)
        cmd.add_argument("--variant",
                         choices=["cc", "rcc", "scc", "srcc", "proj-u", "proj-c"])
        cmd.add_argument("--seed", type=int)
        cmd.add_argument("--threads", type=int, default=0)
        cmd.add_argument("--validate-only", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = _load_config(args.config)
        _reject_unknown_keys(config, args.command)
        handler, _ = _COMMANDS[args.command]
        payload = handler(args, config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, TypeError, KeyError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        diagnostic = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(diagnostic), file=sys.stderr)
        return 2
    if getattr(args, "out", None):
        _write_json(args.out, payload)
    print(json.dumps(payload, indent=2, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
