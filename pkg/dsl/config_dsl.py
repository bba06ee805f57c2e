"""
config_dsl.py

Purpose:
    Parses the line-based run/sweep configuration language and turns it into validated,
    picklable engine objects.

Key Responsibilities:
    - Read `section.key = value` lines (`#` starts a comment, blank lines are ignored).
    - Check every key against a typed schema with defaults and range checks, collecting all
      problems before raising ConfigError.
    - Build the typed pieces of a run: GridSpec, ParamPoint, InitSpec, IntegratorConfig,
      transport laws, source spec and a gas-model spec resolved to a GasModel on demand.
    - Detect sweeps (any `sweep.*` key) and return a SweepConfig over the Cartesian product of
      the parameter axes.
    - Echo any config in canonical form; re-parsing the echo gives an equal config.

Usage:
    config = parse_config(Path("run.cfg").read_text(), base_dir=Path("."))
    if isinstance(config, SweepConfig):
        points = config.points()
    print(canonical_text(config))

Example file:
    grid.dim = 1
    grid.n = 64
    params.eps = 0.25
    params.kappa = 1
    init.generator = well-prepared
    integrator.t_end = 0.2
    sweep.eps = 1, 0.5, 0.25
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, NamedTuple, Optional, Union

from core.exceptions import ConfigError, ParameterError
from core.model import ParamPoint, SourceSpec, TransportLaws, validate_transport
from core.spectral import GridSpec
from core.thermo import SPECIES_CLOSURES, GasModel, ideal_gas, tabulated_gas, van_der_waals
from core.timeloop import FIELD_NAMES, FORMULATIONS, GENERATORS, InitSpec, IntegratorConfig

GAS_MODELS = ("ideal", "vdw", "table")
CONFIG_GAMMA_MODES = ("entropy", "density")
EXECUTOR_TYPES = ("local", "thread", "process")


# -------------------------
# Value parsing and checks
# -------------------------
def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(text)


def _split(text: str) -> list[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


PARSERS: dict[str, Callable[[str], Any]] = {
    "int": int,
    "float": float,
    "bool": _parse_bool,
    "str": str.strip,
    "floats": lambda text: tuple(float(x) for x in _split(text)),
    "ints": lambda text: tuple(int(x) for x in _split(text)),
    "strs": lambda text: tuple(_split(text)),
}


def _one_of(choices):
    def check(value):
        return None if value in choices else f"must be one of {choices} (got {value!r})"
    return check


def _at_least(bound):
    def check(value):
        return None if value >= bound else f"must be >= {bound} (got {value})"
    return check


def _positive(value):
    return None if value > 0 else f"must be > 0 (got {value})"


def _nonempty(value):
    return None if len(value) > 0 else "needs at least one value"


class Key(NamedTuple):
    kind: str
    default: Any
    check: Optional[Callable[[Any], Optional[str]]] = None


SCHEMA: dict[str, Key] = {
    "grid.dim": Key("int", 1, _one_of((1, 2, 3))),
    "grid.n": Key("int", 64),
    "grid.dealias": Key("bool", True),
    "gas.model": Key("str", "ideal", _one_of(GAS_MODELS)),
    "gas.R": Key("float", 1.0, _positive),
    "gas.cv": Key("floats", (1.5,), _nonempty),
    "gas.a": Key("float", 0.0, _at_least(0.0)),
    "gas.b": Key("float", 0.0, _at_least(0.0)),
    "gas.table": Key("str", ""),
    "gas.P_ref": Key("float", 1.0, _positive),
    "gas.T_ref": Key("float", 1.0, _positive),
    "transport.k": Key("float", 1.0),
    "transport.k_rate": Key("float", 0.0),
    "transport.zeta": Key("float", 1.0),
    "transport.zeta_rate": Key("float", 0.0),
    "transport.eta": Key("float", 0.0),
    "transport.D": Key("float", 1.0),
    "run.formulation": Key("str", "primal", _one_of(FORMULATIONS)),
    "params.eps": Key("float", 1.0),
    "params.mu": Key("float", 0.0),
    "params.kappa": Key("float", 0.0),
    "params.lambda": Key("float", 0.0),
    "init.generator": Key("str", "general", _one_of(GENERATORS)),
    "init.seed": Key("int", 0, _at_least(0)),
    "init.amplitude": Key("float", 0.05, _at_least(0.0)),
    "init.band": Key("int", 3, _at_least(1)),
    "init.species": Key("int", 0, _at_least(0)),
    "init.mode": Key("int", 1, _at_least(1)),
    "source.mode": Key("str", "none", _one_of(("none", "prescribed", "linear"))),
    "source.amplitude": Key("float", 0.0),
    "source.wavevector": Key("ints", (1,), _nonempty),
    "source.omega": Key("float", 0.0),
    "source.offset": Key("float", 0.0),
    "source.a1": Key("float", 0.0),
    "source.a3": Key("float", 0.0),
    "integrator.t_end": Key("float", 0.1, _positive),
    "integrator.cfl": Key("float", 0.5),
    "integrator.sample_every": Key("int", 1, _at_least(1)),
    "integrator.max_steps": Key("int", 100_000, _at_least(1)),
    "integrator.blowup_threshold": Key("float", 1e4, _positive),
    "integrator.dt": Key("float", 0.0, _at_least(0.0)),
    "integrator.frozen": Key("strs", ()),
    "diagnostics.s": Key("int", 2, _at_least(1)),
    "diagnostics.gamma_mode": Key("str", "entropy", _one_of(CONFIG_GAMMA_MODES)),
    "diagnostics.weighted": Key("bool", False),
    "species.closure": Key("str", "unit", _one_of(SPECIES_CLOSURES)),
    "sweep.eps": Key("floats", (), _nonempty),
    "sweep.mu": Key("floats", (), _nonempty),
    "sweep.kappa": Key("floats", (), _nonempty),
    "sweep.lambda": Key("floats", (), _nonempty),
    "sweep.workers": Key("int", 1, _at_least(1)),
    "sweep.executor": Key("str", "local", _one_of(EXECUTOR_TYPES)),
}


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(format_value(v) for v in value)
    return str(value)


# -------------------------
# Typed configuration objects
# -------------------------
@dataclass(frozen=True)
class GasSpec:
    """Gas model declaration; resolved to a GasModel by build() inside each worker."""
    model: str = "ideal"
    R: float = 1.0
    cv: tuple[float, ...] = (1.5,)
    a: float = 0.0
    b: float = 0.0
    table: str = ""
    P_ref: float = 1.0
    T_ref: float = 1.0

    def build(self) -> GasModel:
        if self.model == "vdw":
            return van_der_waals(self.a, self.b, R=self.R, C_V=self.cv[0], P_ref=self.P_ref, T_ref=self.T_ref)
        if self.model == "table":
            return tabulated_gas(self.table, P_ref=self.P_ref, T_ref=self.T_ref)
        C_V = self.cv[0] if len(self.cv) == 1 else self.cv
        return ideal_gas(R=self.R, C_V=C_V, P_ref=self.P_ref, T_ref=self.T_ref)


def build_transport(values: dict) -> TransportLaws:
    return TransportLaws.constant(
        k=values["transport.k"], zeta=values["transport.zeta"], eta=values["transport.eta"],
        D=values["transport.D"], k_rate=values["transport.k_rate"], zeta_rate=values["transport.zeta_rate"],
    )


def build_source(values: dict) -> SourceSpec:
    mode = values["source.mode"]
    if mode == "prescribed":
        return SourceSpec.prescribed_mode(values["source.amplitude"], values["source.wavevector"],
                                          values["source.omega"], values["source.offset"])
    if mode == "linear":
        return SourceSpec.linear_species(values["source.a1"], values["source.a3"])
    return SourceSpec.none()


@dataclass(frozen=True)
class RunConfig:
    """One fully resolved run. `values` holds every schema key and drives the canonical echo."""
    values: dict
    grid: GridSpec
    gas: GasSpec
    transport: TransportLaws
    formulation: str
    params: ParamPoint
    init: InitSpec
    source: SourceSpec
    integrator: IntegratorConfig
    s: int = 2
    gamma_mode: str = "entropy"
    weighted_limit: bool = False
    closure: str = "unit"

    def with_params(self, point: ParamPoint) -> "RunConfig":
        values = dict(self.values)
        values.update({"params.eps": point.eps, "params.mu": point.mu,
                       "params.kappa": point.kappa, "params.lambda": point.lam})
        return replace(self, values=values, params=point)

    def with_seed(self, seed: int) -> "RunConfig":
        values = dict(self.values, **{"init.seed": int(seed)})
        return replace(self, values=values, init=replace(self.init, seed=int(seed)))

    def build_gas(self) -> GasModel:
        return self.gas.build()


@dataclass(frozen=True)
class SweepConfig:
    base: RunConfig
    eps: tuple[float, ...]
    mu: tuple[float, ...]
    kappa: tuple[float, ...]
    lam: tuple[float, ...]
    workers: int = 1
    executor: str = "local"

    def points(self) -> list[ParamPoint]:
        """Cartesian product of the axes, sorted by (eps, mu, kappa, lambda)."""
        combos = sorted(set(itertools.product(self.eps, self.mu, self.kappa, self.lam)))
        return [ParamPoint(*combo) for combo in combos]

    def with_workers(self, workers: int) -> "SweepConfig":
        return replace(self, workers=int(workers))

    def with_seed(self, seed: int) -> "SweepConfig":
        return replace(self, base=self.base.with_seed(seed))

    @property
    def values(self) -> dict:
        out = dict(self.base.values)
        out.update({"sweep.eps": self.eps, "sweep.mu": self.mu, "sweep.kappa": self.kappa,
                    "sweep.lambda": self.lam, "sweep.workers": self.workers, "sweep.executor": self.executor})
        return out


Config = Union[RunConfig, SweepConfig]


# -------------------------
# Parsing
# -------------------------
def _read_lines(text: str, errors: list[str]) -> dict[str, Any]:
    raw: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'section.key = value' (got {line!r})")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            errors.append(f"line {lineno}: unknown key '{key}'")
            continue
        if key in raw:
            errors.append(f"line {lineno}: duplicate key '{key}'")
            continue
        spec = SCHEMA[key]
        try:
            parsed = PARSERS[spec.kind](value)
        except ValueError:
            errors.append(f"line {lineno}: {key} expects {spec.kind} (got {value!r})")
            continue
        problem = spec.check(parsed) if spec.check else None
        if problem:
            errors.append(f"{key} {problem}")
            continue
        raw[key] = parsed
    return raw


def _attempt(errors: list[str], build: Callable[[], Any]) -> Any:
    try:
        return build()
    except ConfigError as exc:
        errors.extend(exc.errors)
        return None


def _check_axis(name: str, values: tuple[float, ...], lo: float, hi: float, lo_open: bool, errors: list[str]) -> None:
    for v in values:
        low_ok = v > lo if lo_open else v >= lo
        if not (low_ok and v <= hi):
            bracket = "(" if lo_open else "["
            errors.append(f"sweep.{name} values must be in {bracket}{lo:g},{hi:g}] (got {v})")


def parse_config(text: str, base_dir: Optional[Path] = None) -> Config:
    """Parse and validate a config; raises ConfigError listing every problem found."""
    errors: list[str] = []
    raw = _read_lines(text, errors)
    values = {key: spec.default for key, spec in SCHEMA.items()}
    values.update(raw)

    is_sweep = any(key.startswith("sweep.") for key in raw)
    formulation = values["run.formulation"]

    table_ok = True
    if values["gas.model"] == "table":
        table = values["gas.table"]
        if not table:
            table_ok = False
            errors.append("gas.table is required when gas.model = table")
        else:
            path = Path(table)
            if not path.is_absolute() and base_dir is not None:
                path = (Path(base_dir) / path).resolve()
            if not path.is_file():
                table_ok = False
                errors.append(f"gas.table file not found: {path}")
            values["gas.table"] = str(path)
    gas = GasSpec(values["gas.model"], values["gas.R"], values["gas.cv"], values["gas.a"], values["gas.b"],
                  values["gas.table"], values["gas.P_ref"], values["gas.T_ref"])
    if table_ok:
        _attempt(errors, gas.build)

    grid = _attempt(errors, lambda: GridSpec(values["grid.dim"], values["grid.n"], values["grid.dealias"]))
    params = _attempt(errors, lambda: ParamPoint(values["params.eps"], values["params.mu"],
                                                 values["params.kappa"], values["params.lambda"]))
    init = _attempt(errors, lambda: InitSpec(values["init.generator"], values["init.seed"], values["init.amplitude"],
                                             values["init.band"], values["init.species"], values["init.mode"]))
    integrator = None
    unknown_frozen = [name for name in values["integrator.frozen"] if name not in FIELD_NAMES]
    if unknown_frozen:
        errors.append(f"integrator.frozen has unknown fields {unknown_frozen}")
    else:
        integrator = _attempt(errors, lambda: IntegratorConfig(
            t_end=values["integrator.t_end"], cfl=values["integrator.cfl"],
            sample_every=values["integrator.sample_every"], max_steps=values["integrator.max_steps"],
            blowup_threshold=values["integrator.blowup_threshold"],
            fixed_dt=values["integrator.dt"] or None, frozen=values["integrator.frozen"],
            norm_s=values["diagnostics.s"]))
    source = _attempt(errors, lambda: build_source(values))
    transport = build_transport(values)
    errors.extend(validate_transport(transport, combustion=formulation == "combustion"))

    if formulation == "combustion":
        if values["init.species"] < 1 and values["init.generator"] != "species":
            errors.append("combustion formulation needs init.species >= 1")
        if params is not None and not is_sweep:
            try:
                params.check_combustion()
            except ParameterError as exc:
                errors.extend(exc.errors)
    if formulation == "symmetrized" and values["source.mode"] != "none":
        errors.append("symmetrized formulation requires source.mode = none")
    if values["source.mode"] == "linear" and formulation != "combustion":
        errors.append("source.mode = linear needs run.formulation = combustion")

    if is_sweep:
        axes = {name: raw.get(f"sweep.{name}", (values[f"params.{name}"],))
                for name in ("eps", "mu", "kappa", "lambda")}
        _check_axis("eps", axes["eps"], 0.0, 1.0, True, errors)
        _check_axis("mu", axes["mu"], 0.0, 1.0, False, errors)
        _check_axis("kappa", axes["kappa"], 0.0, 1.0, False, errors)
        _check_axis("lambda", axes["lambda"], 0.0, 2.0, False, errors)

    if errors:
        raise ConfigError(errors)

    run_values = {key: value for key, value in values.items() if not key.startswith("sweep.")}
    base = RunConfig(
        values=run_values, grid=grid, gas=gas, transport=transport, formulation=formulation,
        params=params, init=init, source=source, integrator=integrator, s=values["diagnostics.s"],
        gamma_mode=values["diagnostics.gamma_mode"], weighted_limit=values["diagnostics.weighted"],
        closure=values["species.closure"],
    )
    if not is_sweep:
        return base
    return SweepConfig(base, tuple(axes["eps"]), tuple(axes["mu"]), tuple(axes["kappa"]),
                       tuple(axes["lambda"]), values["sweep.workers"], values["sweep.executor"])


def load_config(path: Union[str, Path]) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read config '{path}': {exc}"]) from exc
    return parse_config(text, base_dir=path.parent)


def canonical_text(config: Config) -> str:
    """Every key of the config, defaults included, one per line in sorted order."""
    values = config.values
    return "".join(f"{key} = {format_value(values[key])}\n" for key in sorted(values))
