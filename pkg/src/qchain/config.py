"""Run-configuration files: strict YAML parsing into model objects.

A configuration is a small YAML tree with sections ``chain`` (required),
``dephasing``, ``integrator``, ``sweep`` and ``output``.  Validation is
total: unknown keys are rejected, every value is checked before any
computation starts, and numeric scalars may be written as arithmetic
expressions with a ``pi`` literal (``theta: pi/3``).
"""

import ast
import math
import operator
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ConfigError
from .integrator import IntegratorConfig
from .model import ChainModel, DephasingSchedule
from .sweep import (
    ExperimentConfig,
    Scenario,
    markovian,
    no_dephasing,
    non_markovian,
)

_BIN_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_NAMES = {"pi": math.pi, "e": math.e}


def _eval_expr(node: ast.AST, where: str) -> float:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id in _NAMES:
            return _NAMES[node.id]
        raise ConfigError(f"{where}: unknown name {node.id!r} (only pi, e)")
    if isinstance(node, ast.BinOp) and type(node.op) in _BIN_OPS:
        return _BIN_OPS[type(node.op)](_eval_expr(node.left, where),
                                       _eval_expr(node.right, where))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        v = _eval_expr(node.operand, where)
        return v if isinstance(node.op, ast.UAdd) else -v
    raise ConfigError(f"{where}: unsupported expression element")


def parse_scalar(value, where: str) -> float:
    """Number, or an arithmetic expression string over pi and e."""
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            tree = ast.parse(value.strip(), mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"{where}: cannot parse {value!r} ({exc.msg})") from None
        return _eval_expr(tree.body, where)
    raise ConfigError(f"{where}: expected a number or expression string, "
                      f"got {type(value).__name__}")


def _expect_mapping(data, where: str, required=(), optional=()) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    allowed = set(required) | set(optional)
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}; allowed: {sorted(allowed)}")
    missing = sorted(set(required) - set(data))
    if missing:
        raise ConfigError(f"{where}: missing required keys {missing}")
    return data


def _scalar_list(value, where: str) -> list[float]:
    if not isinstance(value, list):
        raise ConfigError(f"{where}: expected a list")
    return [parse_scalar(v, f"{where}[{i}]") for i, v in enumerate(value)]


def _parse_bool(value, where: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{where}: expected true/false")
    return value


@dataclass
class RunSpec:
    """Fully validated configuration for one simulate or sweep invocation."""

    model: ChainModel
    schedules: tuple[DephasingSchedule, ...]
    integrator: IntegratorConfig
    out_dir: Path
    write_trajectory: bool
    experiment: ExperimentConfig | None
    source: Path


def _parse_chain(section) -> ChainModel:
    data = _expect_mapping(section, "chain",
                           required=("omega", "lambda", "kappa", "kappa_sink"))
    try:
        return ChainModel(
            omega=tuple(_scalar_list(data["omega"], "chain.omega")),
            lam=tuple(_scalar_list(data["lambda"], "chain.lambda")),
            kappa=tuple(_scalar_list(data["kappa"], "chain.kappa")),
            kappa_sink=parse_scalar(data["kappa_sink"], "chain.kappa_sink"),
        )
    except ValueError as exc:
        raise ConfigError(f"chain: {exc}") from None


def _parse_dephasing(section, n_sites: int):
    """Returns (gamma0 per site, J, theta, dephased 1-based sites, include_shift)."""
    if section is None:
        return (0.0,) * n_sites, 0.0, 0.0, (), True
    data = _expect_mapping(section, "dephasing", required=("gamma",),
                           optional=("J", "theta", "sites", "include_shift"))
    gamma = _scalar_list(data["gamma"], "dephasing.gamma")
    if len(gamma) != n_sites:
        raise ConfigError(f"dephasing.gamma: expected {n_sites} entries, got {len(gamma)}")
    if any(g < 0 for g in gamma):
        raise ConfigError("dephasing.gamma: rates must be non-negative")
    j = parse_scalar(data.get("J", 0.0), "dephasing.J")
    theta = parse_scalar(data.get("theta", 0.0), "dephasing.theta")
    if j < 0:
        raise ConfigError("dephasing.J: must be non-negative")
    sites = data.get("sites")
    if sites is None:
        dephased = tuple(range(1, n_sites + 1))
    else:
        if (not isinstance(sites, list) or not sites
                or not all(isinstance(s, int) and not isinstance(s, bool) for s in sites)):
            raise ConfigError("dephasing.sites: expected a non-empty list of integers")
        if any(s < 1 or s > n_sites for s in sites):
            raise ConfigError(f"dephasing.sites: indices must be within 1..{n_sites}")
        if len(set(sites)) != len(sites):
            raise ConfigError("dephasing.sites: duplicate site index")
        dephased = tuple(sorted(sites))
    include_shift = _parse_bool(data.get("include_shift", True), "dephasing.include_shift")
    return tuple(gamma), j, theta, dephased, include_shift


def _parse_integrator(section, overrides: dict) -> IntegratorConfig:
    fields = {}
    if section is not None:
        data = _expect_mapping(section, "integrator", optional=(
            "rel_tol", "abs_tol", "max_step", "t_max", "residual_eps",
            "hermitize_every_step"))
        for key in ("rel_tol", "abs_tol", "max_step", "t_max", "residual_eps"):
            if key in data:
                fields[key] = parse_scalar(data[key], f"integrator.{key}")
        if "hermitize_every_step" in data:
            fields["hermitize_every_step"] = _parse_bool(
                data["hermitize_every_step"], "integrator.hermitize_every_step")
    for key in ("t_max", "residual_eps"):
        if overrides.get(key) is not None:
            fields[key] = float(overrides[key])
    try:
        return IntegratorConfig(**fields)
    except ValueError as exc:
        raise ConfigError(f"integrator: {exc}") from None


def _parse_sweep_values(value, where: str) -> tuple[float, ...]:
    if isinstance(value, list):
        vals = _scalar_list(value, where)
        return tuple(vals)
    if isinstance(value, dict):
        data = _expect_mapping(value, where, required=("start", "stop", "count"))
        start = parse_scalar(data["start"], f"{where}.start")
        stop = parse_scalar(data["stop"], f"{where}.stop")
        count = data["count"]
        if not isinstance(count, int) or isinstance(count, bool) or count < 2:
            raise ConfigError(f"{where}.count: expected an integer >= 2")
        step = (stop - start) / (count - 1)
        return tuple(start + k * step for k in range(count))
    raise ConfigError(f"{where}: expected a list or a start/stop/count mapping")


_SCENARIO_BUILDERS = ("markovian", "non_markovian", "no_dephasing")


def _parse_sweep(section, name: str, model, gamma0, dephased, j, theta,
                 include_shift, integ) -> ExperimentConfig:
    data = _expect_mapping(section, "sweep", required=("parameter", "values"),
                           optional=("site", "scenarios"))
    param = data["parameter"]
    values = _parse_sweep_values(data["values"], "sweep.values")
    site = data.get("site")
    if site is not None and (not isinstance(site, int) or isinstance(site, bool)):
        raise ConfigError("sweep.site: expected an integer")
    names = data.get("scenarios")
    if names is None:
        if not dephased:
            scenarios = (no_dephasing(),)
        elif j > 0:
            scenarios = (non_markovian(j, theta, include_shift=include_shift),)
        else:
            scenarios = (markovian(),)
    else:
        if not isinstance(names, list) or not names:
            raise ConfigError("sweep.scenarios: expected a non-empty list of names")
        scenarios = []
        for s in names:
            if s not in _SCENARIO_BUILDERS:
                raise ConfigError(f"sweep.scenarios: unknown scenario {s!r}; "
                                  f"choose from {list(_SCENARIO_BUILDERS)}")
            if s == "markovian":
                scenarios.append(markovian())
            elif s == "non_markovian":
                if j <= 0:
                    raise ConfigError("sweep.scenarios: non_markovian requires "
                                      "dephasing.J > 0 in the config")
                scenarios.append(non_markovian(j, theta, include_shift=include_shift))
            else:
                scenarios.append(no_dephasing())
        scenarios = tuple(scenarios)
    try:
        return ExperimentConfig(
            name=name, model=model, gamma0=gamma0,
            dephased_sites=dephased, scenarios=tuple(scenarios),
            sweep_param=param, sweep_values=values, sweep_site=site,
            integrator=integ)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"sweep: {exc}") from None


def load_config(path, overrides: dict | None = None, expect_sweep: bool = False) -> RunSpec:
    """Parse and validate a configuration file.

    overrides may carry CLI-level replacements for t_max, residual_eps
    and out_dir.  With expect_sweep the file must define a sweep section;
    without it, a sweep section is rejected so a simulate invocation
    cannot silently ignore one.
    """
    overrides = overrides or {}
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"configuration file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    data = _expect_mapping(raw, str(path), required=("chain",),
                           optional=("dephasing", "integrator", "sweep", "output"))

    model = _parse_chain(data["chain"])
    gamma0, j, theta, dephased, include_shift = _parse_dephasing(
        data.get("dephasing"), model.n_sites)
    integ = _parse_integrator(data.get("integrator"), overrides)

    out_dir = Path(".")
    write_traj = True
    if data.get("output") is not None:
        out = _expect_mapping(data["output"], "output", optional=("directory", "trajectory"))
        if "directory" in out:
            if not isinstance(out["directory"], str):
                raise ConfigError("output.directory: expected a string")
            out_dir = Path(out["directory"])
        if "trajectory" in out:
            write_traj = _parse_bool(out["trajectory"], "output.trajectory")
    if overrides.get("out_dir") is not None:
        out_dir = Path(overrides["out_dir"])

    experiment = None
    if data.get("sweep") is not None:
        if not expect_sweep:
            raise ConfigError("config contains a sweep section; use the sweep command")
        experiment = _parse_sweep(data["sweep"], path.stem, model, gamma0,
                                  dephased, j, theta, include_shift, integ)
    elif expect_sweep:
        raise ConfigError("sweep command requires a sweep section in the config")

    schedules = []
    for i in range(1, model.n_sites + 1):
        if i in dephased:
            schedules.append(DephasingSchedule(gamma0[i - 1], j, theta,
                                               include_shift=include_shift))
        else:
            schedules.append(DephasingSchedule(0.0))

    return RunSpec(model=model, schedules=tuple(schedules), integrator=integ,
                   out_dir=out_dir, write_trajectory=write_traj,
                   experiment=experiment, source=path)
