"""Command-line front end: solve, verify, sweep.

Problem configurations are JSON files; the schema is documented in the
README.  Exit statuses: 0 success (and all checks passed for ``verify``),
1 verification failure, 2 configuration error, 3 solver error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import coeffs as cf
from .equilibrium import solve
from .errors import ConfigError, EquicontrolError
from .moments import DiscreteDistribution
from .objectives import (
    AmbiguousCos,
    CosPenalty,
    CoshPenalty,
    ExpPenalty,
    FourierEvenPenalty,
    MomentCombo,
    ObjectiveSpec,
    StandardizedMoments,
)
from .verify import verification_report

try:
    from importlib.metadata import version as _dist_version

    _VERSION = _dist_version("equicontrol")
except Exception:  # pragma: no cover - metadata missing in odd install modes
    _VERSION = "unknown"

_SOLVER_NAMES = ("auto", "closed_form", "ode", "algebraic")
_SWEEP_PARAMETERS = ("kappa", "c", "kappa_2", "kappa_4", "T")
_CSV_HEADER = ("t", "y", "beta", "control_at_x0", "value_at_x0")


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def _require_mapping(obj, context: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{context} must be an object, got {type(obj).__name__}")
    return obj


def _check_keys(mapping: dict, allowed, context: str) -> None:
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown {context} keys: {', '.join(unknown)}")


def _number(mapping: dict, key: str, context: str, default=None):
    if key not in mapping:
        if default is None:
            raise ConfigError(f"{context} is missing required key {key!r}")
        return default
    value = mapping[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{context}.{key} must be a number, got {value!r}")
    return float(value)


def _number_list(value, context: str):
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{context} must be a nonempty array of numbers")
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{context} must contain only numbers, got {v!r}")
        out.append(float(v))
    return out


def parse_coefficient(entry, context: str):
    """Build a coefficient descriptor from a config entry.

    A bare number is shorthand for a constant path; otherwise an object with
    a ``type`` of constant, polynomial, exponential or samples.
    """
    if isinstance(entry, bool):
        raise ConfigError(f"{context} must be a number or an object")
    if isinstance(entry, (int, float)):
        return cf.ConstantCoefficient(float(entry))
    entry = _require_mapping(entry, context)
    kind = entry.get("type")
    if kind == "constant":
        _check_keys(entry, ("type", "value"), context)
        return cf.ConstantCoefficient(_number(entry, "value", context))
    if kind == "polynomial":
        _check_keys(entry, ("type", "coefficients"), context)
        return cf.PolynomialCoefficient(
            tuple(_number_list(entry.get("coefficients"), f"{context}.coefficients"))
        )
    if kind == "exponential":
        _check_keys(entry, ("type", "scale", "rate", "offset"), context)
        return cf.ExponentialCoefficient(
            _number(entry, "scale", context),
            _number(entry, "rate", context),
            _number(entry, "offset", context, default=0.0),
        )
    if kind == "samples":
        _check_keys(entry, ("type", "times", "values"), context)
        times = _number_list(entry.get("times"), f"{context}.times")
        values = _number_list(entry.get("values"), f"{context}.values")
        try:
            return cf.SampledCoefficient(np.array(times), np.array(values))
        except EquicontrolError as exc:
            raise ConfigError(f"{context}: {exc}") from exc
    raise ConfigError(
        f"{context}.type must be one of constant, polynomial, exponential, samples;"
        f" got {kind!r}"
    )


_COEFF_FIELDS = (
    ("state_drift", 0.0),
    ("control_drift", None),
    ("drift_offset", 0.0),
    ("control_vol", None),
    ("vol_offset", 0.0),
)


def parse_coefficients(section, grid: cf.TimeGrid) -> cf.CoefficientSet:
    section = _require_mapping(section, "coefficients")
    _check_keys(section, [name for name, _ in _COEFF_FIELDS], "coefficients")
    kwargs = {}
    for name, default in _COEFF_FIELDS:
        if name in section:
            kwargs[name] = parse_coefficient(section[name], f"coefficients.{name}")
        elif default is not None:
            kwargs[name] = cf.ConstantCoefficient(default)
        else:
            raise ConfigError(f"coefficients is missing required key {name!r}")
    try:
        return cf.CoefficientSet(grid, **kwargs)
    except EquicontrolError as exc:
        raise ConfigError(f"coefficients: {exc}") from exc


def parse_objective(section) -> ObjectiveSpec:
    section = _require_mapping(section, "objective")
    kind = section.get("variant")
    kappa = _number(section, "kappa", "objective")
    try:
        if kind in ("moment_combo", "standardized"):
            _check_keys(section, ("variant", "kappa", "weights"), "objective")
            weights = tuple(_number_list(section.get("weights"), "objective.weights"))
            variant = (
                MomentCombo(weights) if kind == "moment_combo" else StandardizedMoments(weights)
            )
        elif kind in ("exp", "cosh", "cos"):
            _check_keys(section, ("variant", "kappa", "c"), "objective")
            cls = {"exp": ExpPenalty, "cosh": CoshPenalty, "cos": CosPenalty}[kind]
            variant = cls(_number(section, "c", "objective"))
        elif kind == "ambiguous_cos":
            _check_keys(section, ("variant", "kappa", "support", "probs"), "objective")
            variant = AmbiguousCos(
                DiscreteDistribution(
                    tuple(_number_list(section.get("support"), "objective.support")),
                    tuple(_number_list(section.get("probs"), "objective.probs")),
                )
            )
        elif kind == "fourier_even":
            _check_keys(
                section, ("variant", "kappa", "frequencies", "density", "atom"), "objective"
            )
            variant = FourierEvenPenalty(
                tuple(_number_list(section.get("frequencies"), "objective.frequencies")),
                tuple(_number_list(section.get("density"), "objective.density")),
                _number(section, "atom", "objective", default=0.0),
            )
        else:
            raise ConfigError(
                "objective.variant must be one of moment_combo, standardized, exp, cosh,"
                f" cos, ambiguous_cos, fourier_even; got {kind!r}"
            )
        return ObjectiveSpec(kappa, variant)
    except ConfigError:
        raise
    except EquicontrolError as exc:
        raise ConfigError(f"objective: {exc}") from exc


_TOP_KEYS = (
    "horizon",
    "grid_size",
    "x0",
    "coefficients",
    "objective",
    "solver",
    "tolerances",
    "verification",
    "output",
)
_TOLERANCE_KEYS = ("ode", "residual", "self_consistency", "value")
_DEFAULT_TOLERANCES = {
    "ode": 1e-8,
    "residual": 1e-8,
    "self_consistency": 5e-6,
    "value": 1e-8,
}


@dataclasses.dataclass(frozen=True)
class Problem:
    """A fully parsed configuration plus command-line overrides."""

    coeffs: cf.CoefficientSet
    objective: ObjectiveSpec
    x0: float
    solver: str
    tolerances: dict
    verification: dict
    out_dir: Path
    config_sha256: str
    config_path: str


def load_config(path: str) -> tuple[dict, str]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return _require_mapping(cfg, "config"), hashlib.sha256(raw).hexdigest()


def build_problem(path: str, args) -> Problem:
    cfg, sha = load_config(path)
    _check_keys(cfg, _TOP_KEYS, "config")
    horizon = _number(cfg, "horizon", "config")
    if horizon <= 0.0:
        raise ConfigError(f"horizon must be positive, got {horizon}")
    grid_size = int(_number(cfg, "grid_size", "config", default=512.0))
    if args.grid is not None:
        grid_size = args.grid
    if grid_size < 2:
        raise ConfigError(f"grid_size must be at least 2, got {grid_size}")
    x0 = _number(cfg, "x0", "config", default=0.0)

    solver = cfg.get("solver", "auto")
    if args.solver is not None:
        solver = args.solver
    if solver not in _SOLVER_NAMES:
        raise ConfigError(
            f"solver must be one of {', '.join(_SOLVER_NAMES)}; got {solver!r}"
        )

    tolerances = dict(_DEFAULT_TOLERANCES)
    tol_section = _require_mapping(cfg.get("tolerances", {}), "tolerances")
    _check_keys(tol_section, _TOLERANCE_KEYS, "tolerances")
    for key in tol_section:
        tolerances[key] = _number(tol_section, key, "tolerances")

    verification = _require_mapping(cfg.get("verification", {}), "verification")

    output = _require_mapping(cfg.get("output", {}), "output")
    _check_keys(output, ("dir",), "output")
    out_dir = args.out or output.get("dir") or "equicontrol-out"

    try:
        grid = cf.TimeGrid(horizon, grid_size)
    except EquicontrolError as exc:
        raise ConfigError(str(exc)) from exc
    if "coefficients" not in cfg:
        raise ConfigError("config is missing required key 'coefficients'")
    if "objective" not in cfg:
        raise ConfigError("config is missing required key 'objective'")
    coeffs = parse_coefficients(cfg["coefficients"], grid)
    objective = parse_objective(cfg["objective"])
    return Problem(
        coeffs=coeffs,
        objective=objective,
        x0=x0,
        solver=solver,
        tolerances=tolerances,
        verification=verification,
        out_dir=Path(out_dir),
        config_sha256=sha,
        config_path=str(path),
    )


def _solve_problem(problem: Problem):
    return solve(
        problem.coeffs,
        problem.objective,
        solver=problem.solver,
        ode_tol=problem.tolerances["ode"],
    )


def _write_manifest(problem: Problem, sol, command: str, outputs, extra=None) -> Path:
    manifest = {
        "command": command,
        "config_path": problem.config_path,
        "config_sha256": problem.config_sha256,
        "package_version": _VERSION,
        "solver_requested": problem.solver,
        "solver_used": sol.solver_name,
        "grid_size": problem.coeffs.grid.num_steps,
        "horizon": problem.coeffs.grid.horizon,
        "x0": problem.x0,
        "tolerances": problem.tolerances,
        "outputs": [str(p) for p in outputs],
    }
    if extra:
        manifest.update(extra)
    path = problem.out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _solution_rows(problem: Problem, sol):
    nodes = sol.grid.nodes
    y = sol.y_many(nodes)
    beta = sol.beta_many(nodes)
    control = sol.control_many(nodes)
    values = np.array([sol.value(t, problem.x0) for t in nodes])
    return nodes, y, beta, control, values


def cmd_solve(args) -> int:
    problem = build_problem(args.config, args)
    sol = _solve_problem(problem)
    problem.out_dir.mkdir(parents=True, exist_ok=True)

    csv_path = problem.out_dir / "solution.csv"
    nodes, y, beta, control, values = _solution_rows(problem, sol)
    with open(csv_path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_HEADER)
        for row in zip(nodes, y, beta, control, values):
            writer.writerow([_fmt(v) for v in row])

    summary = {
        "y_0": float(y[0]),
        "beta_0": float(beta[0]),
        "control_at_x0_0": float(control[0]),
        "value_at_x0_0": float(values[0]),
        "concavity_worst_margin": sol.concavity.worst,
        "ode_error_estimate": sol.ode_error_estimate,
    }
    _write_manifest(problem, sol, "solve", [csv_path], {"summary": summary})
    print(f"solver: {sol.solver_name}")
    for key, val in summary.items():
        print(f"{key}: {_fmt(val)}")
    print(f"wrote {csv_path}")
    return 0


def _verification_kwargs(problem: Problem, args) -> dict:
    """Translate the config verification section into suite options.

    Each suite key may be true (defaults), false (skip) or an object of
    overrides; by default every suite runs.
    """
    section = dict(problem.verification)
    _check_keys(
        section,
        ("spike", "fbsde", "pde", "monte_carlo", "residual_tol", "self_consistency_tol", "value_tol"),
        "verification",
    )
    kwargs = {
        "x0": problem.x0,
        "residual_tol": float(section.get("residual_tol", problem.tolerances["residual"])),
        "consistency_tol": float(
            section.get("self_consistency_tol", problem.tolerances["self_consistency"])
        ),
        "value_tol": float(section.get("value_tol", problem.tolerances["value"])),
    }
    names = {"spike": "spike", "fbsde": "fbsde", "pde": "pde", "monte_carlo": "monte_carlo_cfg"}
    for key, kw in names.items():
        choice = section.get(key, True)
        if choice is True:
            kwargs[kw] = {}
        elif choice is False or choice is None:
            kwargs[kw] = None
        else:
            kwargs[kw] = dict(_require_mapping(choice, f"verification.{key}"))
    if kwargs["monte_carlo_cfg"] is not None and args.seed is not None:
        kwargs["monte_carlo_cfg"]["seed"] = args.seed
    return kwargs


def cmd_verify(args) -> int:
    problem = build_problem(args.config, args)
    kwargs = _verification_kwargs(problem, args)
    sol = _solve_problem(problem)
    report = verification_report(sol, **kwargs)
    problem.out_dir.mkdir(parents=True, exist_ok=True)
    report_path = problem.out_dir / "verification.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _write_manifest(problem, sol, "verify", [report_path], {"passed": report["passed"]})

    for key, value in report.items():
        if isinstance(value, dict) and "passed" in value:
            print(f"{key}: {'PASS' if value['passed'] else 'FAIL'}")
    print(f"overall: {'PASS' if report['passed'] else 'FAIL'}")
    print(f"wrote {report_path}")
    return 0 if report["passed"] else 1


def _sweep_problem(problem: Problem, parameter: str, value: float) -> Problem:
    """A copy of the problem with one swept parameter replaced."""
    spec = problem.objective
    if parameter == "kappa":
        if value < 0.0:
            raise ConfigError(f"kappa must be nonnegative, got {value}")
        return dataclasses.replace(problem, objective=ObjectiveSpec(value, spec.variant))
    if parameter == "c":
        if spec.variant.kind not in ("exp", "cosh", "cos"):
            raise ConfigError(
                f"parameter 'c' needs an exp, cosh or cos objective, not {spec.variant.kind}"
            )
        variant = dataclasses.replace(spec.variant, c=value)
        return dataclasses.replace(problem, objective=ObjectiveSpec(spec.kappa, variant))
    if parameter in ("kappa_2", "kappa_4"):
        if spec.variant.kind not in ("moment_combo", "standardized"):
            raise ConfigError(
                f"parameter {parameter!r} needs a moment_combo or standardized objective,"
                f" not {spec.variant.kind}"
            )
        order = int(parameter.split("_")[1])
        weights = list(spec.variant.weights)
        while len(weights) < order - 1:
            weights.append(0.0)
        weights[order - 2] = value
        variant = type(spec.variant)(tuple(weights))
        return dataclasses.replace(problem, objective=ObjectiveSpec(spec.kappa, variant))
    if parameter == "T":
        if value <= 0.0:
            raise ConfigError(f"horizon must be positive, got {value}")
        old = problem.coeffs
        try:
            grid = cf.TimeGrid(value, old.grid.num_steps)
            coeffs = cf.CoefficientSet(
                grid,
                state_drift=old.state_drift,
                control_drift=old.control_drift,
                drift_offset=old.drift_offset,
                control_vol=old.control_vol,
                vol_offset=old.vol_offset,
            )
        except EquicontrolError as exc:
            raise ConfigError(f"cannot sweep T to {value}: {exc}") from exc
        return dataclasses.replace(problem, coeffs=coeffs)
    raise ConfigError(
        f"unknown sweep parameter {parameter!r}; pick one of {', '.join(_SWEEP_PARAMETERS)}"
    )


def cmd_sweep(args) -> int:
    problem = build_problem(args.config, args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"cannot parse sweep values {args.values!r}: {exc}") from exc
    if not values:
        raise ConfigError("sweep needs at least one value")
    if args.parameter not in _SWEEP_PARAMETERS:
        raise ConfigError(
            f"unknown sweep parameter {args.parameter!r};"
            f" pick one of {', '.join(_SWEEP_PARAMETERS)}"
        )

    rows = []
    for value in values:
        sub = _sweep_problem(problem, args.parameter, value)
        sol = _solve_problem(sub)
        rows.append(
            (
                value,
                sol.beta_at(0.0),
                sol.control(0.0, sub.x0),
                sol.value(0.0, sub.x0),
                sol.y_at(0.0),
            )
        )

    problem.out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = problem.out_dir / "sweep.csv"
    header = (args.parameter, "beta_0", "control_at_x0", "value_at_x0", "y_0")
    with open(csv_path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    print(",".join(header))
    for row in rows:
        print(",".join(_fmt(v) for v in row))
    print(f"wrote {csv_path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="equicontrol",
        description="Time-consistent controls for moment-based objectives.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to a JSON problem config")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="Monte Carlo seed override")
        p.add_argument("--grid", type=int, default=None, help="grid size override")
        p.add_argument(
            "--solver", default=None, choices=_SOLVER_NAMES, help="solver override"
        )

    p_solve = sub.add_parser("solve", help="solve and write the strategy table")
    common(p_solve)
    p_verify = sub.add_parser("verify", help="solve and run the verification suite")
    common(p_verify)
    p_sweep = sub.add_parser("sweep", help="re-solve over a range of one parameter")
    common(p_sweep)
    p_sweep.add_argument(
        "--parameter", required=True, help="one of " + ", ".join(_SWEEP_PARAMETERS)
    )
    p_sweep.add_argument(
        "--values", required=True, help="comma-separated list of parameter values"
    )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"solve": cmd_solve, "verify": cmd_verify, "sweep": cmd_sweep}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except EquicontrolError as exc:
        print(f"solver error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
