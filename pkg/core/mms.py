"""
mms.py

Purpose:
    Manufactured-solution convergence studies for the primal and combustion solvers.

Key Responsibilities:
    - Define exact solutions u(t, x) = g(t) U(x) from sums of plane waves in every field,
      with a gentle modulation g(t) = 1 + sin(t)/2.
    - Evaluate the continuous right-hand side of the exact solution in closed form
      (derivatives of the waves, coefficients and transport laws at the grid nodes) and
      inject the forcing d_t u - RHS(u), so the discrete solver is checked against the
      continuous equations rather than against itself.
    - Spatial study: error vs n at dt -> 0 (Richardson extrapolation over dt, dt/2).
    - Temporal study: error vs dt at fixed n and the observed order from successive halvings.

Usage:
    result = mms_convergence("primal-1d")
    result.temporal_order, result.spatial_errors
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from core.exceptions import ConfigError
from core.model import ExpLaw, FluidState, ParamPoint, SourceSpec, Tendency, TransportLaws
from core.spectral import GridSpec, ScalarField, VectorField
from core.thermo import GasModel, coefficient_fields, ideal_gas
from core.timeloop import IntegratorConfig, simulate

logger = logging.getLogger("lowmach.mms")

MMS_CASES = ("primal-1d", "primal-2d", "combustion-1d")
AMPLITUDE = 0.05
GAS = ideal_gas(R=1.0, C_V=1.5)

Coords = Sequence[np.ndarray]


def modulation(t: float) -> float:
    return 1.0 + 0.5 * np.sin(t)


def modulation_rate(t: float) -> float:
    return 0.5 * np.cos(t)


# -------------------------
# Closed-form profiles
# -------------------------
class Wave(NamedTuple):
    """amplitude * sin(k . x + phase)."""
    amplitude: float
    wavevector: tuple[int, ...]
    phase: float = 0.0

    def _arg(self, coords: Coords) -> np.ndarray:
        return sum(kj * xj for kj, xj in zip(self.wavevector, coords)) + self.phase

    def value(self, coords: Coords) -> np.ndarray:
        return self.amplitude * np.sin(self._arg(coords))

    def d(self, coords: Coords, j: int) -> np.ndarray:
        return self.amplitude * self.wavevector[j] * np.cos(self._arg(coords))

    def dd(self, coords: Coords, j: int, l: int) -> np.ndarray:
        k = self.wavevector
        return -self.amplitude * k[j] * k[l] * np.sin(self._arg(coords))


@dataclass(frozen=True)
class TrigField:
    waves: tuple[Wave, ...]

    def value(self, coords: Coords) -> np.ndarray:
        return sum(w.value(coords) for w in self.waves)

    def d(self, coords: Coords, j: int) -> np.ndarray:
        return sum(w.d(coords, j) for w in self.waves)

    def dd(self, coords: Coords, j: int, l: int) -> np.ndarray:
        return sum(w.dd(coords, j, l) for w in self.waves)

    def grad(self, coords: Coords) -> list[np.ndarray]:
        return [self.d(coords, j) for j in range(len(coords))]

    def laplacian(self, coords: Coords) -> np.ndarray:
        return sum(self.dd(coords, j, j) for j in range(len(coords)))


def _wave(amplitude: float, *wavevector: int, phase: float = 0.0) -> TrigField:
    return TrigField((Wave(amplitude, tuple(wavevector), phase),))


@dataclass(frozen=True)
class Profile:
    p: TrigField
    v: tuple[TrigField, ...]
    theta: TrigField
    y: tuple[TrigField, ...] = ()

    def state(self, grid: GridSpec) -> FluidState:
        coords = grid.coordinates()

        def field_of(f: TrigField) -> ScalarField:
            return ScalarField(grid, np.broadcast_to(f.value(coords), grid.shape).copy())

        return FluidState(field_of(self.p), VectorField(tuple(field_of(c) for c in self.v)),
                          field_of(self.theta), tuple(field_of(yl) for yl in self.y))


def _law_slope(law: ExpLaw, values: np.ndarray) -> np.ndarray:
    """d/dtheta of base * exp(rate * theta), given its values."""
    return law.rate * values


def exact_tendency(profile: Profile, params: ParamPoint, model: GasModel, transport: TransportLaws,
                   source: SourceSpec, grid: GridSpec, t: float, closure: Optional[str] = None) -> Tendency:
    """
    Continuous right-hand side of the primal (or, with a closure, combustion) system at
    g(t) U, evaluated pointwise at the grid nodes from the exact derivatives of the waves.
    """
    coords = grid.coordinates()
    d = grid.dim
    g = modulation(t)
    eps = params.eps

    def full(arr) -> np.ndarray:
        return np.broadcast_to(arr, grid.shape).astype(float)

    P = full(g * profile.p.value(coords))
    grad_P = [full(g * a) for a in profile.p.grad(coords)]
    V = [full(g * c.value(coords)) for c in profile.v]
    dV = [[full(g * c.d(coords, j)) for j in range(d)] for c in profile.v]
    ddV = [[[full(g * c.dd(coords, j, l)) for l in range(d)] for j in range(d)] for c in profile.v]
    Th = full(g * profile.theta.value(coords))
    grad_Th = [full(g * a) for a in profile.theta.grad(coords)]
    lap_Th = full(g * profile.theta.laplacian(coords))

    def advective(values: list[np.ndarray]) -> np.ndarray:
        return sum(vj * gj for vj, gj in zip(V, values))

    C = coefficient_fields(model, Th, eps * P, closure)
    div_v = sum(dV[k][k] for k in range(d))

    k_law = transport.k(Th)
    heat = k_law * lap_Th + _law_slope(transport.k, k_law) * sum(a * a for a in grad_Th)

    p_src = theta_src = 0.0
    if source.mode == "state":
        y_vals = [full(g * yl.value(coords)) for yl in profile.y]
        p_src = source.q1(y_vals, Th, eps * P)
        theta_src = source.q3(y_vals, Th, eps * P)
    elif source.mode == "prescribed":
        Q = source.prescribed_at(t, grid).values
        p_src = C.chi1 * Q
        theta_src = C.chi3 * Q

    dp = -advective(grad_P) + (-div_v + params.kappa * C.chi1 * heat + p_src) / (C.g1 * eps)
    dtheta = -advective(grad_Th) + (-div_v + params.kappa * C.chi3 * heat + theta_src) / C.g3

    zeta = transport.zeta(Th)
    eta = transport.eta(Th)
    zeta_slope = _law_slope(transport.zeta, zeta)
    eta_slope = _law_slope(transport.eta, eta)
    dv = []
    for k in range(d):
        strain_div = sum(
            zeta_slope * grad_Th[j] * 0.5 * (dV[k][j] + dV[j][k])
            + zeta * 0.5 * (ddV[k][j][j] + ddV[j][k][j])
            for j in range(d)
        )
        bulk = eta_slope * grad_Th[k] * div_v + eta * sum(ddV[j][j][k] for j in range(d))
        viscous = C.chi2 * (strain_div + bulk)
        dv.append(-advective(dV[k]) - grad_P[k] / (eps * C.g2) + params.mu * viscous / C.g2)

    dy = []
    if profile.y:
        D = transport.D(Th)
        D_slope = _law_slope(transport.D, D)
        for yl in profile.y:
            grad_Y = [full(g * a) for a in yl.grad(coords)]
            diffusion = D * full(g * yl.laplacian(coords)) + D_slope * sum(a * b for a, b in zip(grad_Th, grad_Y))
            dy.append(-advective(grad_Y) + params.lam * C.chi4 * diffusion / C.g4)

    def sf(arr) -> ScalarField:
        return ScalarField(grid, full(arr))

    return Tendency(sf(dp), VectorField(tuple(sf(c) for c in dv)), sf(dtheta), tuple(sf(c) for c in dy))


# -------------------------
# Cases
# -------------------------
@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    dim: int
    params: ParamPoint
    formulation: str
    profile: Profile
    source: SourceSpec = SourceSpec.none()
    transport: TransportLaws = TransportLaws.constant(k=1.0, zeta=1.0, eta=0.2, D=1.0)

    @property
    def closure(self) -> Optional[str]:
        return "unit" if self.formulation == "combustion" else None

    def exact_state(self, grid: GridSpec, t: float) -> FluidState:
        return self.profile.state(grid).scaled(modulation(t))

    def exact_tendency(self, grid: GridSpec, t: float) -> Tendency:
        return exact_tendency(self.profile, self.params, GAS, self.transport, self.source, grid, t, self.closure)

    def forcing(self, grid: GridSpec) -> Callable[[float], Tendency]:
        base_stack = self.profile.state(grid).pack()

        def at(t: float) -> Tendency:
            return Tendency.unpack(grid, modulation_rate(t) * base_stack - self.exact_tendency(grid, t).pack())

        return at


_A = AMPLITUDE
_HALF_PI = 0.5 * np.pi


def _profile_1d(with_species: bool) -> Profile:
    return Profile(
        p=_wave(_A, 1),
        v=(_wave(_A, 1, phase=_HALF_PI),),
        theta=_wave(_A, 1, phase=0.5),
        y=(_wave(_A, 1, phase=_HALF_PI),) if with_species else (),
    )


# sin x1 cos x2 = (sin(x1 + x2) + sin(x1 - x2)) / 2
_PROFILE_2D = Profile(
    p=TrigField((Wave(0.5 * _A, (1, 1)), Wave(0.5 * _A, (1, -1)))),
    v=(_wave(_A, 1, 0, phase=_HALF_PI), _wave(_A, 0, 1)),
    theta=_wave(_A, 1, 1, phase=_HALF_PI),
)

CASES = {
    "primal-1d": ManufacturedCase("primal-1d", 1, ParamPoint(0.5, 0.1, 0.1), "primal", _profile_1d(False)),
    "primal-2d": ManufacturedCase("primal-2d", 2, ParamPoint(0.5, 0.1, 0.1), "primal", _PROFILE_2D),
    "combustion-1d": ManufacturedCase(
        "combustion-1d", 1, ParamPoint(0.5, 0.1, 0.1, 1.0), "combustion", _profile_1d(True),
        source=SourceSpec.linear_species(0.1, 0.05),
    ),
}


def _l2_error(a: np.ndarray, b: np.ndarray, grid: GridSpec) -> float:
    return float(np.sqrt(grid.volume * np.mean(np.sum((a - b) ** 2, axis=0))))


def _final_stack(case: ManufacturedCase, grid: GridSpec, t_end: float, dt: float) -> np.ndarray:
    config = IntegratorConfig(t_end=t_end, fixed_dt=dt, max_steps=10 ** 7, sample_every=10 ** 7)
    traj = simulate(case.exact_state(grid, 0.0), case.params, GAS, case.transport, case.source,
                    config, formulation=case.formulation, forcing=case.forcing(grid))
    if traj.termination.value != "completed":
        raise RuntimeError(f"MMS run {case.name} n={grid.n_per_dim} dt={dt} ended with {traj.message}")
    return traj.final_state.pack()


@dataclass
class MMSResult:
    case: str
    spatial_errors: dict[int, float] = field(default_factory=dict)
    temporal_errors: dict[float, float] = field(default_factory=dict)
    temporal_orders: list[float] = field(default_factory=list)

    @property
    def temporal_order(self) -> float:
        return self.temporal_orders[-1] if self.temporal_orders else float("nan")

    def spatial_ok(self, tol: float = 1e-9) -> bool:
        return all(err < tol for err in self.spatial_errors.values())

    def to_dict(self) -> dict:
        out = asdict(self)
        out["spatial_errors"] = {str(k): v for k, v in self.spatial_errors.items()}
        out["temporal_errors"] = {repr(k): v for k, v in self.temporal_errors.items()}
        out["temporal_order"] = self.temporal_order
        return out


def mms_convergence(case: str, spatial_n: tuple[int, ...] = (16, 32), spatial_dt: float = 0.01,
                    temporal_n: int = 16, temporal_dts: tuple[float, ...] = (0.05, 0.025, 0.0125),
                    t_end: float = 0.5) -> MMSResult:
    if case not in CASES:
        raise ConfigError([f"unknown MMS case {case!r}; choose from {MMS_CASES}"])
    spec = CASES[case]
    result = MMSResult(case)

    for n in spatial_n:
        grid = GridSpec(spec.dim, n)
        coarse = _final_stack(spec, grid, t_end, spatial_dt)
        fine = _final_stack(spec, grid, t_end, spatial_dt / 2)
        extrapolated = fine + (fine - coarse) / 15.0
        exact = spec.exact_state(grid, t_end).pack()
        result.spatial_errors[n] = _l2_error(extrapolated, exact, grid)
        logger.info("MMS %s spatial n=%d error=%.3e", case, n, result.spatial_errors[n])

    grid = GridSpec(spec.dim, temporal_n)
    exact = spec.exact_state(grid, t_end).pack()
    for dt in temporal_dts:
        result.temporal_errors[dt] = _l2_error(_final_stack(spec, grid, t_end, dt), exact, grid)
    errors = [result.temporal_errors[dt] for dt in temporal_dts]
    for (dt0, e0), (dt1, e1) in zip(zip(temporal_dts, errors), zip(temporal_dts[1:], errors[1:])):
        result.temporal_orders.append(float(np.log(e0 / e1) / np.log(dt0 / dt1)))
    logger.info("MMS %s temporal orders %s", case, [f"{o:.3f}" for o in result.temporal_orders])
    return result
