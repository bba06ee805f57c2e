"""
timeloop.py

Purpose:
    Time integration of the primal, combustion and symmetrized formulations with
    eps-aware step control, blow-up monitoring and trajectory sampling.

Key Responsibilities:
    - stable_dt: the minimum of the acoustic (eps dx / c0), advective and diffusive limits.
    - rk4_step: classical four-stage Runge-Kutta on packed field stacks, dealiased at every stage.
    - simulate: drive a formulation to t_end; stop with a recorded reason on blow-up
      (W^{1,inf} monitor or non-finite values) or when max_steps is reached.
    - make_initial_data: seeded generators for general, well-prepared, theta-small
      and single-mode data.

Design Notes:
    - Trajectories always hold primal FluidStates; symmetrized runs are mapped back at
      every sample.
    - A NormAccumulator is updated every step so trajectory norms do not depend on the
      sampling cadence.

Usage:
    traj = simulate(state0, params, gas, transport, SourceSpec.none(), IntegratorConfig(t_end=0.2))
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np

from core.diagnostics import NormAccumulator
from core.exceptions import ConfigError, InversionFailure, NumericalBlowup, StateOutOfDomain
from core.model import (
    FluidState,
    ParamPoint,
    SourceSpec,
    SymState,
    Tendency,
    TransportLaws,
    check_finite,
    from_symmetrized,
    heat_divergence,
    rhs_combustion,
    rhs_primal,
    rhs_symmetrized,
    state_coefficients,
    to_symmetrized,
)
from core.spectral import (
    GridSpec,
    ScalarField,
    VectorField,
    dealias,
    dealias_array,
    grad,
    inv_grad_laplace,
    leray_project,
    product,
    random_band_limited,
)
from core.thermo import GasModel

logger = logging.getLogger("lowmach.timeloop")

FORMULATIONS = ("primal", "combustion", "symmetrized")
FIELD_NAMES = ("p", "v", "theta", "y")
DT_FLOOR = 1e-12
RK4_WEIGHTS = (1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0)


class TerminationReason(str, Enum):
    COMPLETED = "completed"
    BLOWUP = "blowup"
    MAX_STEPS = "max_steps"


@dataclass(frozen=True)
class IntegratorConfig:
    t_end: float
    cfl: float = 0.5
    sample_every: int = 1
    max_steps: int = 100_000
    blowup_threshold: float = 1e4
    fixed_dt: Optional[float] = None
    frozen: tuple[str, ...] = ()
    norm_s: int = 2

    def __post_init__(self):
        errors = []
        if not self.t_end > 0:
            errors.append("integrator.t_end must be > 0")
        if not 0 < self.cfl <= 1:
            errors.append("integrator.cfl must be in (0,1]")
        if self.sample_every < 1:
            errors.append("integrator.sample_every must be >= 1")
        if self.max_steps < 1:
            errors.append("integrator.max_steps must be >= 1")
        if not self.blowup_threshold > 0:
            errors.append("integrator.blowup_threshold must be > 0")
        if self.fixed_dt is not None and not self.fixed_dt > 0:
            errors.append("integrator.dt must be > 0 when set")
        unknown = [f for f in self.frozen if f not in FIELD_NAMES]
        if unknown:
            errors.append(f"integrator.frozen has unknown fields {unknown}")
        if self.norm_s < 1:
            errors.append("integrator.norm_s must be >= 1")
        if errors:
            raise ConfigError(errors)


@dataclass
class Trajectory:
    params: ParamPoint
    formulation: str = "primal"
    times: list[float] = field(default_factory=list)
    states: list[FluidState] = field(default_factory=list)
    dt_history: list[float] = field(default_factory=list)
    w1inf_history: list[float] = field(default_factory=list)
    termination: TerminationReason = TerminationReason.COMPLETED
    message: str = ""
    accumulator: Optional[NormAccumulator] = None

    @property
    def realized_T(self) -> float:
        return self.times[-1] if self.times else 0.0

    @property
    def final_state(self) -> FluidState:
        return self.states[-1]

    def add_sample(self, t: float, state: FluidState) -> None:
        if self.times and t <= self.times[-1]:
            return
        self.times.append(float(t))
        self.states.append(state)


# -------------------------
# Step control
# -------------------------
def w1inf_norm(state: FluidState) -> float:
    """max over fields of ||f||_inf + ||grad f||_inf."""
    best = 0.0
    for f in state.fields():
        g = grad(f)
        slope = np.sqrt(sum(c.values ** 2 for c in g))
        best = max(best, f.max_abs() + float(np.max(slope)))
    return best


def stable_dt(state: FluidState, params: ParamPoint, grid: GridSpec, cfl: float, model: GasModel,
              transport: TransportLaws, closure: Optional[str] = None) -> float:
    """
    cfl * min(eps dx / c0, dx / (|v|_inf + delta), dx^2 / (2 d (mu visc + kappa heat + lambda species) + delta))
    with c0 = max 1/sqrt(g1 g2) and effective diffusivities max chi2 (zeta + |eta|) / g2,
    max chi3 k / g3 and max chi4 D / g4 over the grid.
    """
    dx = grid.dx
    C = state_coefficients(state, params, model, closure if state.y else None)
    theta = state.theta.values
    c0 = float(np.max(1.0 / np.sqrt(C.g1 * C.g2)))
    speed = float(np.max(np.sqrt(sum(c.values ** 2 for c in state.v))))
    visc = float(np.max(C.chi2 * (transport.zeta(theta) + np.abs(transport.eta(theta))) / C.g2))
    heat = float(np.max(C.chi3 * transport.k(theta) / C.g3))
    species = 0.0
    if state.y and C.g4 is not None:
        species = float(np.max(C.chi4 * transport.D(theta) / C.g4))
    diffusion = params.mu * visc + params.kappa * heat + params.lam * species
    return cfl * min(
        params.eps * dx / c0,
        dx / (speed + DT_FLOOR),
        dx * dx / (2 * grid.dim * diffusion + DT_FLOOR),
    )


State = Union[FluidState, SymState]


def _frozen_rows(grid: GridSpec, n_species: int, frozen: tuple[str, ...]) -> list[int]:
    d = grid.dim
    rows = {"p": [0], "v": list(range(1, 1 + d)), "theta": [1 + d],
            "y": list(range(2 + d, 2 + d + n_species))}
    return [r for name in frozen for r in rows[name]]


def rk4_step(state: State, dt: float, rhs: Callable[[State, float], object], t: float = 0.0,
             frozen_rows: Optional[list[int]] = None) -> State:
    """Classical RK4; every stage and the update are dealiased. `rhs(state, t)` returns a tendency."""
    if not dt > 0:
        raise ValueError(f"time step must be positive (got {dt})")
    grid = state.grid
    u0 = state.pack()

    def f(arr: np.ndarray, tt: float) -> np.ndarray:
        k = rhs(state.like(arr), tt).pack()
        if frozen_rows:
            k[frozen_rows] = 0.0
        return k

    k1 = f(u0, t)
    k2 = f(dealias_array(grid, u0 + 0.5 * dt * k1), t + 0.5 * dt)
    k3 = f(dealias_array(grid, u0 + 0.5 * dt * k2), t + 0.5 * dt)
    k4 = f(dealias_array(grid, u0 + dt * k3), t + dt)
    a = RK4_WEIGHTS
    u1 = dealias_array(grid, u0 + dt * (a[0] * k1 + a[1] * k2 + a[2] * k3 + a[3] * k4))
    check_finite(u1, "Runge-Kutta update")
    return state.like(u1)


# -------------------------
# Driver
# -------------------------
def simulate(initial: FluidState, params: ParamPoint, model: GasModel, transport: TransportLaws,
             source: SourceSpec, config: IntegratorConfig, formulation: str = "primal",
             closure: str = "unit", forcing: Optional[Callable[[float], Tendency]] = None) -> Trajectory:
    if formulation not in FORMULATIONS:
        raise ConfigError([f"run.formulation must be one of {FORMULATIONS} (got {formulation!r})"])
    if formulation == "combustion":
        if not initial.y:
            raise ConfigError(["combustion formulation needs species fields (init.species >= 1)"])
        params.check_combustion()
    if formulation == "symmetrized" and source.mode != "none":
        raise ConfigError(["symmetrized formulation requires source.mode = none"])

    def primal_rhs(s: FluidState, t: float) -> Tendency:
        return rhs_primal(s, params, model, transport, source, t, forcing(t) if forcing else None)

    def combustion_rhs(s: FluidState, t: float) -> Tendency:
        return rhs_combustion(s, params, model, transport, source, t, closure, forcing(t) if forcing else None)

    def symmetrized_rhs(s: SymState, t: float):
        return rhs_symmetrized(s, params, model, transport)

    rhs = {"primal": primal_rhs, "combustion": combustion_rhs, "symmetrized": symmetrized_rhs}[formulation]
    grid = initial.grid
    frozen = _frozen_rows(grid, initial.n_species, config.frozen)
    dt_closure = closure if formulation == "combustion" else None

    traj = Trajectory(params=params, formulation=formulation,
                      accumulator=NormAccumulator(params, config.norm_s))
    u: State = to_symmetrized(initial, params, model) if formulation == "symmetrized" else initial
    physical = initial
    t = 0.0
    traj.add_sample(t, physical)
    traj.accumulator.update(t, physical)
    traj.w1inf_history.append(w1inf_norm(physical))
    logger.debug("simulate %s %s: t_end=%g", formulation, params.label(), config.t_end)

    step = 0
    end_tol = 1e-12 * config.t_end
    while t < config.t_end - end_tol:
        if step >= config.max_steps:
            traj.termination = TerminationReason.MAX_STEPS
            traj.message = f"max_steps={config.max_steps} reached at t={t:.6g}"
            break
        last_good = physical
        try:
            dt = config.fixed_dt or stable_dt(physical, params, grid, config.cfl, model, transport, dt_closure)
            dt = min(dt, config.t_end - t)
            u = rk4_step(u, dt, rhs, t, frozen)
            physical = from_symmetrized(u, params, model) if formulation == "symmetrized" else u
            w = w1inf_norm(physical)
        except (NumericalBlowup, StateOutOfDomain, InversionFailure) as exc:
            traj.termination = TerminationReason.BLOWUP
            traj.message = f"{type(exc).__name__} at t={t:.6g}: {exc}"
            break
        t += dt
        step += 1
        traj.dt_history.append(dt)
        traj.w1inf_history.append(w)
        if not np.isfinite(w) or w > config.blowup_threshold:
            traj.termination = TerminationReason.BLOWUP
            traj.message = f"W1,inf norm {w:.3e} exceeded {config.blowup_threshold:.3e} at t={t:.6g}"
            traj.add_sample(t - dt, last_good)
            break
        traj.accumulator.update(t, physical)
        if step % config.sample_every == 0 or t >= config.t_end - end_tol:
            traj.add_sample(t, physical)
    if traj.termination is TerminationReason.MAX_STEPS:
        traj.add_sample(t, physical)

    if traj.termination is TerminationReason.BLOWUP:
        logger.warning("run %s terminated: %s", params.label(), traj.message)
    else:
        logger.info("run %s %s after %d steps, T=%.6g", params.label(), traj.termination.value,
                    step, traj.realized_T)
    return traj


# -------------------------
# Initial data
# -------------------------
GENERATORS = ("zero", "general", "well-prepared", "theta-small", "acoustic", "heat", "species")


@dataclass(frozen=True)
class InitSpec:
    generator: str = "general"
    seed: int = 0
    amplitude: float = 0.05
    band: int = 3
    n_species: int = 0
    mode: int = 1

    def __post_init__(self):
        errors = []
        if self.generator not in GENERATORS:
            errors.append(f"init.generator must be one of {GENERATORS} (got {self.generator!r})")
        if self.amplitude < 0:
            errors.append("init.amplitude must be >= 0")
        if self.band < 1:
            errors.append("init.band must be >= 1")
        if self.n_species < 0:
            errors.append("init.species must be >= 0")
        if self.mode < 1:
            errors.append("init.mode must be >= 1")
        if errors:
            raise ConfigError(errors)


def _profiles(spec: InitSpec, grid: GridSpec, n_species: int) -> dict[str, object]:
    """Unit profiles drawn in a fixed order: p, v_1..v_d, theta, y_1..y_L."""
    rng = np.random.default_rng(spec.seed)
    band = min(spec.band, grid.max_resolved_mode())
    p = random_band_limited(grid, rng, band)
    v = VectorField(tuple(random_band_limited(grid, rng, band) for _ in range(grid.dim)))
    theta = random_band_limited(grid, rng, band)
    y = tuple(random_band_limited(grid, rng, band) for _ in range(n_species))
    return {"p": p, "v": v, "theta": theta, "y": y}


def _single_mode(grid: GridSpec, amplitude: float, mode: int) -> ScalarField:
    return ScalarField.from_function(grid, lambda *x: amplitude * np.sin(mode * x[0]))


def make_initial_data(spec: InitSpec, grid: GridSpec, params: ParamPoint, model: Optional[GasModel] = None,
                      transport: Optional[TransportLaws] = None,
                      source: Optional[SourceSpec] = None) -> FluidState:
    A = spec.amplitude
    eps = params.eps
    n_species = spec.n_species
    if spec.generator == "species":
        n_species = max(1, n_species)
    zero = FluidState.zeros(grid, n_species)

    if spec.generator == "zero":
        return zero
    if spec.generator in ("acoustic", "heat", "species"):
        if spec.mode > grid.max_resolved_mode():
            raise ConfigError([f"init.mode {spec.mode} is not resolved on n={grid.n_per_dim}"])
        wave = _single_mode(grid, A, spec.mode)
        if spec.generator == "acoustic":
            return FluidState(wave, zero.v, zero.theta, zero.y)
        if spec.generator == "heat":
            return FluidState(zero.p, zero.v, wave, zero.y)
        return FluidState(zero.p, zero.v, zero.theta, tuple(wave for _ in range(n_species)))

    prof = _profiles(spec, grid, n_species)
    y = tuple(A * yl for yl in prof["y"])
    if spec.generator == "general":
        return FluidState(A * prof["p"], A * prof["v"], A * prof["theta"], y)
    if spec.generator == "theta-small":
        return FluidState(A * prof["p"], A * prof["v"], (eps * A) * prof["theta"], y)

    # well-prepared: pressure O(eps), velocity = solenoidal part + grad Lap^-1 of the
    # mean-free heat/source forcing, so the eps^-1 pressure tendency stays O(1).
    theta0 = A * prof["theta"]
    p0 = (eps * A) * prof["p"]
    v0 = A * leray_project(prof["v"]) if grid.dim > 1 else VectorField.zeros(grid)
    Q = source.prescribed_at(0.0, grid) if source is not None else None
    if params.kappa > 0 or Q is not None:
        if model is None or transport is None:
            raise ConfigError(["well-prepared data need the gas model and transport laws"])
        draft = FluidState(p0, v0, theta0, y)
        C = state_coefficients(draft, params, model)
        F = ScalarField.zeros(grid)
        if params.kappa > 0:
            F = F + params.kappa * product(heat_divergence(theta0, transport), C.chi1)
        if Q is not None:
            F = F + product(Q, C.chi1)
        v0 = v0 + inv_grad_laplace(dealias(F - F.mean()))
    v0 = VectorField(tuple(dealias(c) for c in v0))
    return FluidState(p0, v0, theta0, y)
