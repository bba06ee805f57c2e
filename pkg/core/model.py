"""
model.py

Purpose:
    Assembles the right-hand sides of the three formulations of the low-Mach system
    from spectral operators and thermodynamic coefficients:
      - primal:      unknowns (p, v, theta), coefficients at phi = (theta, eps p)
      - combustion:  primal plus species fluctuations y, state-dependent sources Q1, Q3
      - symmetrized: unknowns (rho~, v, theta~) = (G(theta, eps p)/eps, v, theta/eps)

Key Responsibilities:
    - Hold the parameter point (eps, mu, kappa, lambda), transport laws, states,
      tendencies and source descriptions as immutable values.
    - Evaluate coefficients pointwise on the grid (collocation) and dealias after
      every product.
    - Expose the eps^-1-singular part of the primal tendency separately for scaling checks.
    - Map states and tendencies between the primal and symmetrized unknowns.

Primal system (D_t = d_t + v . grad):
    g1 D_t p + eps^-1 div v - kappa eps^-1 chi1 div(k grad theta) = eps^-1 chi1 Q
    g2 D_t v + eps^-1 grad p - mu B2 v = 0,   B2 v = chi2 (div(zeta Dv) + grad(eta div v))
    g3 D_t theta + div v - kappa chi3 div(k grad theta) = chi3 Q

Usage:
    tend = rhs_primal(state, params, gas, transport, SourceSpec.none(), t=0.0)
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from core.exceptions import ConfigError, InversionFailure, NumericalBlowup, ParameterError
from core.spectral import (
    GridSpec,
    ScalarField,
    VectorField,
    advect,
    dealias,
    div,
    grad,
    partial,
    product,
    vector_product,
)
from core.thermo import CoefficientSet, GasModel, coefficient_fields, pushed_state

logger = logging.getLogger("lowmach.model")

NEWTON_MAX_ITER = 50
NEWTON_TOL = 1e-13


# -------------------------
# Parameters and transport
# -------------------------
@dataclass(frozen=True)
class ParamPoint:
    eps: float
    mu: float = 0.0
    kappa: float = 0.0
    lam: float = 0.0

    def __post_init__(self):
        errors = []
        if not 0.0 < self.eps <= 1.0:
            errors.append("eps must be in (0,1]")
        if not 0.0 <= self.mu <= 1.0:
            errors.append("mu must be in [0,1]")
        if not 0.0 <= self.kappa <= 1.0:
            errors.append("kappa must be in [0,1]")
        if not 0.0 <= self.lam <= 2.0:
            errors.append("lambda must be in [0,2]")
        if errors:
            raise ParameterError(errors)

    @property
    def nu(self) -> float:
        return float(np.sqrt(self.mu + self.kappa))

    @property
    def combustion_admissible(self) -> bool:
        return self.lam >= self.nu

    def check_combustion(self) -> None:
        if not self.combustion_admissible:
            raise ParameterError(
                [f"combustion requires lambda >= sqrt(mu+kappa): lambda={self.lam} < nu={self.nu:.6g}"]
            )

    def label(self) -> str:
        return f"eps={self.eps:g},mu={self.mu:g},kappa={self.kappa:g},lambda={self.lam:g}"

    def key(self) -> tuple[float, float, float, float]:
        return (self.eps, self.mu, self.kappa, self.lam)


class ExpLaw(NamedTuple):
    """base * exp(rate * theta); rate 0 is a constant law."""
    base: float
    rate: float = 0.0

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.rate == 0.0:
            return np.full_like(theta, self.base)
        return self.base * np.exp(self.rate * theta)


@dataclass(frozen=True)
class TransportLaws:
    k: Callable = ExpLaw(1.0)
    zeta: Callable = ExpLaw(1.0)
    eta: Callable = ExpLaw(0.0)
    D: Callable = ExpLaw(1.0)

    @classmethod
    def constant(cls, k: float = 1.0, zeta: float = 1.0, eta: float = 0.0, D: float = 1.0,
                 k_rate: float = 0.0, zeta_rate: float = 0.0) -> "TransportLaws":
        return cls(ExpLaw(k, k_rate), ExpLaw(zeta, zeta_rate), ExpLaw(eta), ExpLaw(D))


def validate_transport(transport: TransportLaws, theta_range: tuple[float, float] = (-1.0, 1.0),
                       samples: int = 33, combustion: bool = False) -> list[str]:
    """Positivity conditions on sampled theta: k > 0, zeta > 0, eta + 2 zeta > 0, and D > 0 if needed."""
    theta = np.linspace(theta_range[0], theta_range[1], samples)
    problems = []
    k, zeta, eta = transport.k(theta), transport.zeta(theta), transport.eta(theta)
    if np.any(k <= 0):
        problems.append("transport.k must be > 0")
    if np.any(zeta <= 0):
        problems.append("transport.zeta must be > 0")
    if np.any(eta + 2.0 * zeta <= 0):
        problems.append("transport.eta + 2 zeta must be > 0")
    if combustion and np.any(transport.D(theta) <= 0):
        problems.append("transport.D must be > 0 for combustion")
    return problems


# -------------------------
# States and tendencies
# -------------------------
def _pack(first: ScalarField, vec: VectorField, last: ScalarField, species: Sequence[ScalarField]) -> np.ndarray:
    return np.stack([first.values, *(c.values for c in vec), last.values, *(y.values for y in species)])


def _unpack(grid: GridSpec, arr: np.ndarray):
    d = grid.dim
    first = ScalarField(grid, arr[0])
    vec = VectorField(tuple(ScalarField(grid, arr[1 + j]) for j in range(d)))
    last = ScalarField(grid, arr[1 + d])
    species = tuple(ScalarField(grid, a) for a in arr[2 + d:])
    return first, vec, last, species


@dataclass(frozen=True, eq=False)
class FluidState:
    p: ScalarField
    v: VectorField
    theta: ScalarField
    y: tuple[ScalarField, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "y", tuple(self.y))
        grid = self.p.grid
        if self.v.grid != grid or self.theta.grid != grid or any(s.grid != grid for s in self.y):
            raise ValueError("all state fields must share one grid")
        if len(self.v) != grid.dim:
            raise ValueError(f"velocity needs {grid.dim} components")

    @property
    def grid(self) -> GridSpec:
        return self.p.grid

    @property
    def n_species(self) -> int:
        return len(self.y)

    @classmethod
    def zeros(cls, grid: GridSpec, n_species: int = 0) -> "FluidState":
        z = ScalarField.zeros(grid)
        return cls(z, VectorField.zeros(grid), z, tuple(z for _ in range(n_species)))

    def pack(self) -> np.ndarray:
        return _pack(self.p, self.v, self.theta, self.y)

    @classmethod
    def unpack(cls, grid: GridSpec, arr: np.ndarray) -> "FluidState":
        return cls(*_unpack(grid, arr))

    def like(self, arr: np.ndarray) -> "FluidState":
        return FluidState.unpack(self.grid, arr)

    def scaled(self, c: float) -> "FluidState":
        return self.like(c * self.pack())

    def fields(self) -> list[ScalarField]:
        return [self.p, *self.v, self.theta, *self.y]


@dataclass(frozen=True, eq=False)
class Tendency:
    dp: ScalarField
    dv: VectorField
    dtheta: ScalarField
    dy: tuple[ScalarField, ...] = ()

    def pack(self) -> np.ndarray:
        return _pack(self.dp, self.dv, self.dtheta, self.dy)

    @classmethod
    def unpack(cls, grid: GridSpec, arr: np.ndarray) -> "Tendency":
        return cls(*_unpack(grid, arr))

    def __add__(self, other: "Tendency") -> "Tendency":
        return Tendency.unpack(self.dp.grid, self.pack() + other.pack())


@dataclass(frozen=True, eq=False)
class SymState:
    rho_t: ScalarField
    v: VectorField
    theta_t: ScalarField

    @property
    def grid(self) -> GridSpec:
        return self.rho_t.grid

    def pack(self) -> np.ndarray:
        return _pack(self.rho_t, self.v, self.theta_t, ())

    @classmethod
    def unpack(cls, grid: GridSpec, arr: np.ndarray) -> "SymState":
        first, vec, last, _ = _unpack(grid, arr)
        return cls(first, vec, last)

    def like(self, arr: np.ndarray) -> "SymState":
        return SymState.unpack(self.grid, arr)

    def fields(self) -> list[ScalarField]:
        return [self.rho_t, *self.v, self.theta_t]


@dataclass(frozen=True, eq=False)
class SymTendency:
    drho_t: ScalarField
    dv: VectorField
    dtheta_t: ScalarField

    def pack(self) -> np.ndarray:
        return _pack(self.drho_t, self.dv, self.dtheta_t, ())


def check_finite(arr: np.ndarray, what: str = "tendency") -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericalBlowup(f"non-finite values in {what}")


# -------------------------
# Sources
# -------------------------
class ModeSource(NamedTuple):
    """Q(t, x) = amplitude cos(k . x) cos(omega t) + offset."""
    amplitude: float
    wavevector: tuple[int, ...]
    omega: float = 0.0
    offset: float = 0.0

    def __call__(self, t: float, coords: tuple[np.ndarray, ...]) -> np.ndarray:
        phase = sum(kj * xj for kj, xj in zip(self.wavevector, coords))
        return self.amplitude * np.cos(phase) * np.cos(self.omega * t) + self.offset


class LinearSpeciesSource(NamedTuple):
    """Q(Phi) = coeff * sum_l y_l; vanishes at Phi = 0."""
    coeff: float

    def __call__(self, y: Sequence[np.ndarray], theta: np.ndarray, wp: np.ndarray) -> np.ndarray:
        total = np.zeros_like(theta)
        for yl in y:
            total = total + yl
        return self.coeff * total


SOURCE_MODES = ("none", "prescribed", "state")


@dataclass(frozen=True)
class SourceSpec:
    mode: str = "none"
    prescribed: Optional[Callable] = None
    q1: Optional[Callable] = None
    q3: Optional[Callable] = None

    def __post_init__(self):
        errors = []
        if self.mode not in SOURCE_MODES:
            errors.append(f"source.mode must be one of {SOURCE_MODES} (got {self.mode!r})")
        if self.mode == "prescribed" and self.prescribed is None:
            errors.append("prescribed source needs a Q(t, x) callable")
        if self.mode == "state":
            if self.q1 is None or self.q3 is None:
                errors.append("state-dependent source needs Q1 and Q3")
            else:
                origin = np.zeros(1)
                for name, fn in (("Q1", self.q1), ("Q3", self.q3)):
                    if np.any(np.abs(fn([origin], origin, origin)) > 1e-14):
                        errors.append(f"{name} must vanish at Phi = 0")
        if errors:
            raise ConfigError(errors)

    @classmethod
    def none(cls) -> "SourceSpec":
        return cls()

    @classmethod
    def prescribed_mode(cls, amplitude: float, wavevector: Sequence[int], omega: float = 0.0,
                        offset: float = 0.0) -> "SourceSpec":
        return cls(mode="prescribed", prescribed=ModeSource(amplitude, tuple(int(k) for k in wavevector), omega, offset))

    @classmethod
    def linear_species(cls, a1: float, a3: float) -> "SourceSpec":
        return cls(mode="state", q1=LinearSpeciesSource(a1), q3=LinearSpeciesSource(a3))

    def prescribed_at(self, t: float, grid: GridSpec) -> Optional[ScalarField]:
        if self.mode != "prescribed":
            return None
        return ScalarField(grid, np.broadcast_to(self.prescribed(t, grid.coordinates()), grid.shape))


# -------------------------
# Operators shared by all formulations
# -------------------------
def state_coefficients(state: FluidState, params: ParamPoint, model: GasModel,
                       closure: Optional[str] = None) -> CoefficientSet:
    return coefficient_fields(model, state.theta.values, params.eps * state.p.values, closure)


def heat_divergence(theta: ScalarField, transport: TransportLaws) -> ScalarField:
    """div(k(theta) grad theta)."""
    return div(vector_product(grad(theta), transport.k(theta.values)))


def viscous_operator(v: VectorField, theta: ScalarField, chi2, transport: TransportLaws) -> VectorField:
    """B2 v = chi2 (div(zeta Dv) + grad(eta div v)) with Dv = (grad v + grad v^T) / 2."""
    d = v.grid.dim
    zeta = transport.zeta(theta.values)
    eta = transport.eta(theta.values)
    gradients = [grad(c) for c in v]
    div_v = div(v)
    eta_div = product(div_v, eta)
    out = []
    for k in range(d):
        flux = VectorField(tuple(product(0.5 * (gradients[k][j] + gradients[j][k]), zeta) for j in range(d)))
        out.append(product(div(flux) + partial(eta_div, k), chi2))
    return VectorField(tuple(out))


def _zero(grid: GridSpec) -> ScalarField:
    return ScalarField.zeros(grid)


def _assemble(state: FluidState, params: ParamPoint, C: CoefficientSet, transport: TransportLaws,
              p_source: Optional[ScalarField], theta_source: Optional[ScalarField]) -> tuple[Tendency, Tendency]:
    """Regular and eps^-1-singular parts of the (p, v, theta) tendency."""
    grid = state.grid
    inv_eps = 1.0 / params.eps
    inv_g1, inv_g2, inv_g3 = 1.0 / C.g1, 1.0 / C.g2, 1.0 / C.g3
    v = state.v
    div_v = div(v)

    p_forcing = -div_v
    theta_forcing = -div_v
    if params.kappa > 0:
        heat = heat_divergence(state.theta, transport)
        p_forcing = p_forcing + params.kappa * product(heat, C.chi1)
        theta_forcing = theta_forcing + params.kappa * product(heat, C.chi3)
    if p_source is not None:
        p_forcing = p_forcing + p_source
    if theta_source is not None:
        theta_forcing = theta_forcing + theta_source

    sing_p = product(p_forcing, inv_g1) * inv_eps
    sing_v = VectorField(tuple(product(-partial(state.p, k), inv_g2) * inv_eps for k in range(grid.dim)))

    reg_p = -advect(v, state.p)
    reg_v = [-advect(v, c) for c in v]
    if params.mu > 0:
        visc = viscous_operator(v, state.theta, C.chi2, transport)
        reg_v = [r + params.mu * product(b, inv_g2) for r, b in zip(reg_v, visc)]
    reg_theta = -advect(v, state.theta) + product(theta_forcing, inv_g3)

    zero_y = tuple(_zero(grid) for _ in state.y)
    regular = Tendency(reg_p, VectorField(tuple(reg_v)), reg_theta, zero_y)
    singular = Tendency(sing_p, sing_v, _zero(grid), zero_y)
    return regular, singular


def primal_split(state: FluidState, params: ParamPoint, model: GasModel, transport: TransportLaws,
                 source: SourceSpec, t: float = 0.0,
                 coeffs: Optional[CoefficientSet] = None) -> tuple[Tendency, Tendency]:
    """
    (regular, singular) parts of the primal tendency. Passing `coeffs` freezes the
    coefficient fields, which makes the singular part exactly proportional to 1/eps.
    """
    C = coeffs if coeffs is not None else state_coefficients(state, params, model)
    Q = source.prescribed_at(t, state.grid)
    p_source = product(Q, C.chi1) if Q is not None else None
    theta_source = product(Q, C.chi3) if Q is not None else None
    return _assemble(state, params, C, transport, p_source, theta_source)


def rhs_primal(state: FluidState, params: ParamPoint, model: GasModel, transport: TransportLaws,
               source: SourceSpec, t: float = 0.0, forcing: Optional[Tendency] = None) -> Tendency:
    regular, singular = primal_split(state, params, model, transport, source, t)
    total = regular.pack() + singular.pack()
    if forcing is not None:
        total = total + forcing.pack()
    check_finite(total, "primal tendency")
    return Tendency.unpack(state.grid, total)


def rhs_combustion(state: FluidState, params: ParamPoint, model: GasModel, transport: TransportLaws,
                   source: SourceSpec, t: float = 0.0, closure: str = "unit",
                   forcing: Optional[Tendency] = None) -> Tendency:
    """
    Primal terms with coefficients at Phi = (y, theta, eps p), the sources eps^-1 Q1(Phi)
    and Q3(Phi), and  g4 D_t y_l = lambda chi4 div(D(theta) grad y_l).
    """
    if not state.y:
        raise ConfigError(["combustion formulation needs at least one species field"])
    params.check_combustion()
    grid = state.grid
    C = state_coefficients(state, params, model, closure)
    wp = params.eps * state.p.values
    if source.mode == "state":
        y_vals = [s.values for s in state.y]
        p_source = dealias(ScalarField(grid, source.q1(y_vals, state.theta.values, wp)))
        theta_source = dealias(ScalarField(grid, source.q3(y_vals, state.theta.values, wp)))
    else:
        Q = source.prescribed_at(t, grid)
        p_source = product(Q, C.chi1) if Q is not None else None
        theta_source = product(Q, C.chi3) if Q is not None else None
    regular, singular = _assemble(state, params, C, transport, p_source, theta_source)

    D = transport.D(state.theta.values)
    inv_g4 = 1.0 / C.g4
    dy = []
    for yl in state.y:
        term = -advect(state.v, yl)
        if params.lam > 0:
            diffusion = div(vector_product(grad(yl), D))
            term = term + params.lam * product(product(diffusion, C.chi4), inv_g4)
        dy.append(term)
    total = regular.pack() + singular.pack()
    total[2 + grid.dim:] = np.stack([f.values for f in dy])
    if forcing is not None:
        total = total + forcing.pack()
    check_finite(total, "combustion tendency")
    return Tendency.unpack(grid, total)


# -------------------------
# Symmetrized formulation
# -------------------------
def to_symmetrized(state: FluidState, params: ParamPoint, model: GasModel) -> SymState:
    """rho~ = G(theta, eps p) / eps and theta~ = theta / eps."""
    eps = params.eps
    ts = pushed_state(model, state.theta.values, eps * state.p.values)
    grid = state.grid
    return SymState(
        ScalarField(grid, (ts.rho - model.rho_ref) / eps),
        state.v,
        ScalarField(grid, state.theta.values / eps),
    )


def invert_density(model: GasModel, theta: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Solve G(theta, wp) = G for wp by Newton's method, started from the ideal-gas inverse."""
    rho_ref = model.rho_ref
    ratio = np.maximum(G / rho_ref, -0.999999)
    wp = theta + np.log1p(ratio)
    step = np.zeros_like(wp)
    for _ in range(NEWTON_MAX_ITER):
        ts = pushed_state(model, theta, wp)
        step = (ts.rho - rho_ref - G) / (ts.P * ts.rho_P)
        wp = wp - step
        if np.all(np.abs(step) <= NEWTON_TOL * np.maximum(1.0, np.abs(wp))):
            return wp
    raise InversionFailure(NEWTON_MAX_ITER, float(np.max(np.abs(step))))


def from_symmetrized(sym: SymState, params: ParamPoint, model: GasModel) -> FluidState:
    eps = params.eps
    grid = sym.grid
    theta = eps * sym.theta_t.values
    wp = invert_density(model, theta, eps * sym.rho_t.values)
    return FluidState(ScalarField(grid, wp / eps), sym.v, ScalarField(grid, theta))


def rhs_symmetrized(sym: SymState, params: ParamPoint, model: GasModel, transport: TransportLaws) -> SymTendency:
    """
    chi3 D_t rho~ + (chi3 - chi1) omega eps^-1 div v = 0
    g2 D_t v + eps^-1 (gamma1 grad theta~ + (gamma2/omega) grad rho~) - mu B2 v = 0
    g3 D_t theta~ + eps^-1 div v - kappa eps^-1 chi3 div(k grad theta) = 0
    with omega = G_wp / g1, the weight that turns the printed pressure law into an exact one.
    """
    grid = sym.grid
    eps = params.eps
    inv_eps = 1.0 / eps
    state = from_symmetrized(sym, params, model)
    ts = pushed_state(model, state.theta.values, eps * state.p.values)
    C = state_coefficients(state, params, model)
    omega = ts.P * ts.rho_P / C.g1
    gamma1 = C.chi1 * C.g3 / (C.chi3 * C.g1)
    gamma2 = 1.0 / C.g1
    inv_g2, inv_g3 = 1.0 / C.g2, 1.0 / C.g3
    v = sym.v
    div_v = div(v)

    d_rho = -advect(v, sym.rho_t) - product(div_v, (C.chi3 - C.chi1) * omega / C.chi3) * inv_eps

    grad_theta_t = grad(sym.theta_t)
    grad_rho_t = grad(sym.rho_t)
    dv = []
    visc = viscous_operator(v, state.theta, C.chi2, transport) if params.mu > 0 else None
    for k in range(grid.dim):
        pressure = product(grad_theta_t[k], gamma1) + product(grad_rho_t[k], gamma2 / omega)
        term = -advect(v, v[k]) - product(pressure, inv_g2) * inv_eps
        if visc is not None:
            term = term + params.mu * product(visc[k], inv_g2)
        dv.append(term)

    theta_forcing = -div_v
    if params.kappa > 0:
        theta_forcing = theta_forcing + params.kappa * product(heat_divergence(state.theta, transport), C.chi3)
    d_theta = -advect(v, sym.theta_t) + product(theta_forcing, inv_g3) * inv_eps

    out = SymTendency(d_rho, VectorField(tuple(dv)), d_theta)
    check_finite(out.pack(), "symmetrized tendency")
    return out


def push_tendency(state: FluidState, tend: Tendency, params: ParamPoint, model: GasModel) -> SymTendency:
    """Chain rule: d rho~ = (G_theta d theta + G_wp eps d p) / eps, d theta~ = d theta / eps."""
    eps = params.eps
    ts = pushed_state(model, state.theta.values, eps * state.p.values)
    grid = state.grid
    d_rho = (ts.T * ts.rho_T * tend.dtheta.values + ts.P * ts.rho_P * eps * tend.dp.values) / eps
    return SymTendency(ScalarField(grid, d_rho), tend.dv, ScalarField(grid, tend.dtheta.values / eps))
