"""
diagnostics.py

Purpose:
    Norms and structural diagnostics on states and trajectories of the low-Mach system.

Key Responsibilities:
    - theorem_norm of a state and the six-piece trajectory norm X^s_a(T)
      (sup-in-time Sobolev pieces plus parameter-weighted space-time dissipation pieces).
    - High/low frequency split with the mollifier J_{eps nu}.
    - Low-Mach limit residuals: div of the corrected velocity v_e and curl of a weighted velocity.
    - Periodic energy structure: pressure/velocity ansatz, the skew-symmetric singular
      operator and the <E U, U> balance along a trajectory.
    - Combustion Z-norm, initial-data norm and div-curl inequality ratios.

Conventions:
    - Multi-component norms add the component norms; a gradient norm is the Hilbert norm
      of the gradient vector.
    - L2-in-time pieces use trapezoid integrals. NormAccumulator updates them every step;
      without it the trajectory samples are used.

Usage:
    report = build_norm_report(traj, params, gas, transport, source, s=2)
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from core.exceptions import ConfigError, DiagnosticError
from core.model import (
    FluidState,
    ParamPoint,
    SourceSpec,
    TransportLaws,
    heat_divergence,
    state_coefficients,
    viscous_operator,
)
from core.spectral import (
    ScalarField,
    VectorField,
    curl,
    curl_norm,
    dealias,
    div,
    gradient_hybrid_norm,
    gradient_norm,
    high_pass,
    hybrid_norm,
    inner,
    inv_grad_laplace,
    mollify,
    product,
    sobolev_norm,
    vector_product,
    vector_sobolev_norm,
)
from core.spectral import grad as spectral_grad
from core.thermo import GasModel, coefficient_set, pushed_state, slow_variables

if TYPE_CHECKING:
    from core.timeloop import Trajectory

logger = logging.getLogger("lowmach.diagnostics")

X_KEYS = ("x1", "x2", "x3", "x4", "x5", "x6")
GAMMA_MODES = ("entropy", "density", "custom")


# -------------------------
# State norms
# -------------------------
def theorem_norm(state: FluidState, eps: float, s: int) -> float:
    if s < 1:
        raise DiagnosticError(f"theorem norm needs s >= 1 (got {s})")
    total = gradient_norm(state.p, s - 1) + sum(gradient_norm(c, s - 1) for c in state.v)
    total += sobolev_norm(state.theta, s)
    total += eps * sobolev_norm(state.p, s) + eps * vector_sobolev_norm(state.v, s)
    return total


def _x_pieces(p: ScalarField, v: VectorField, theta: ScalarField, eps: float, nu: float, s: int):
    """Sup pieces (x1, x2) and squared L2 integrands (x3..x6) at one instant."""
    x1 = gradient_norm(p, s - 1) + sum(gradient_norm(c, s - 1) for c in v)
    x2 = (hybrid_norm(theta, s + 1, nu) + eps * hybrid_norm(p, s + 1, nu)
          + eps * sum(hybrid_norm(c, s + 1, nu) for c in v))
    x3 = sum(gradient_hybrid_norm(c, s + 1, eps * nu) for c in v) ** 2
    x4 = gradient_hybrid_norm(theta, s + 1, nu) ** 2
    x5 = gradient_norm(p, s) ** 2
    x6 = sobolev_norm(div(v), s) ** 2
    return x1, x2, x3, x4, x5, x6


def initial_data_norm(state: FluidState, params: ParamPoint, s: int) -> float:
    """||(grad p, grad v)||_{H^{s-1}} + ||(theta, eps p, eps v)||_{H^{s+1}_nu} at one instant."""
    x1, x2, *_ = _x_pieces(state.p, state.v, state.theta, params.eps, params.nu, s)
    return x1 + x2


def step_integrands(state: FluidState, params: ParamPoint, s: int) -> tuple[dict[str, float], dict[str, float]]:
    """
    Sup pieces and squared integrands of every trajectory norm at one instant:
    the X-norm (x*), its (Id - J_h)-filtered copy (hf_x*), the four low-frequency
    pieces (lf_*) with h = eps nu, and the species pieces (y) when present.
    """
    eps, nu = params.eps, params.nu
    p, v, theta = state.p, state.v, state.theta
    sup, sq = {}, {}
    x = _x_pieces(p, v, theta, eps, nu, s)
    sup["x1"], sup["x2"] = x[0], x[1]
    sq.update(zip(X_KEYS[2:], x[2:]))

    h = eps * nu
    hv = VectorField(tuple(high_pass(c, h) for c in v))
    hx = _x_pieces(high_pass(p, h), hv, high_pass(theta, h), eps, nu, s)
    sup["hf_x1"], sup["hf_x2"] = hx[0], hx[1]
    sq.update(zip(("hf_" + k for k in X_KEYS[2:]), hx[2:]))

    div_low = div(VectorField(tuple(mollify(c, h) for c in v)))
    p_low = mollify(p, h)
    sup["lf_div"] = sobolev_norm(div_low, s - 1)
    sq["lf_div"] = sobolev_norm(div_low, s) ** 2
    sup["lf_grad"] = gradient_norm(p_low, s - 1)
    sq["lf_grad"] = gradient_norm(p_low, s) ** 2

    if state.y:
        sup["y"] = sum(hybrid_norm(yl, s + 1, nu) for yl in state.y)
        sq["y"] = sum(hybrid_norm(yl, s + 2, nu) for yl in state.y) ** 2
    return sup, sq


class NormAccumulator:
    """Running sup and trapezoid time integrals of step_integrands, updated every step."""

    def __init__(self, params: ParamPoint, s: int):
        self.params = params
        self.s = s
        self.sup: dict[str, float] = {}
        self.integral: dict[str, float] = {}
        self._t_last: Optional[float] = None
        self._sq_last: dict[str, float] = {}

    def update(self, t: float, state: FluidState) -> None:
        sup, sq = step_integrands(state, self.params, self.s)
        for key, value in sup.items():
            self.sup[key] = max(self.sup.get(key, 0.0), value)
        if self._t_last is None:
            self.integral = {key: 0.0 for key in sq}
        else:
            dt = t - self._t_last
            for key, value in sq.items():
                self.integral[key] += 0.5 * dt * (self._sq_last[key] + value)
        self._t_last = t
        self._sq_last = sq

    def matches(self, params: ParamPoint, s: int) -> bool:
        return self.s == s and self.params == params and self._t_last is not None


def _trajectory_pieces(traj: "Trajectory", s: int, params: ParamPoint) -> tuple[dict, dict]:
    if len(traj.times) < 2:
        raise DiagnosticError(f"trajectory norms need >= 2 samples (got {len(traj.times)})")
    acc = traj.accumulator
    if acc is not None and acc.matches(params, s):
        return acc.sup, acc.integral
    sups, sqs = zip(*(step_integrands(st, params, s) for st in traj.states))
    times = np.asarray(traj.times)
    sup = {k: max(d[k] for d in sups) for k in sups[0]}
    integral = {k: float(integrate.trapezoid([d[k] for d in sqs], times)) for k in sqs[0]}
    return sup, integral


def _combine_x(sup: dict, integral: dict, params: ParamPoint, prefix: str = "") -> dict[str, float]:
    mu, kappa = params.mu, params.kappa
    return {
        "x1": sup[prefix + "x1"],
        "x2": sup[prefix + "x2"],
        "x3": np.sqrt(mu) * np.sqrt(integral[prefix + "x3"]),
        "x4": np.sqrt(kappa) * np.sqrt(integral[prefix + "x4"]),
        "x5": np.sqrt(mu + kappa) * np.sqrt(integral[prefix + "x5"]),
        "x6": np.sqrt(kappa) * np.sqrt(integral[prefix + "x6"]),
    }


def x_norm(traj: "Trajectory", s: int, params: ParamPoint) -> tuple[float, dict[str, float]]:
    sup, integral = _trajectory_pieces(traj, s, params)
    comps = {k: float(v) for k, v in _combine_x(sup, integral, params).items()}
    return float(sum(comps.values())), comps


def hf_lf_norms(traj: "Trajectory", s: int, params: ParamPoint) -> tuple[float, float]:
    sup, integral = _trajectory_pieces(traj, s, params)
    hf = float(sum(_combine_x(sup, integral, params, prefix="hf_").values()))
    nu = params.nu
    lf = (sup["lf_div"] + nu * np.sqrt(integral["lf_div"])
          + sup["lf_grad"] + nu * np.sqrt(integral["lf_grad"]))
    return hf, float(lf)


def z_norm(traj: "Trajectory", s: int, params: ParamPoint) -> float:
    """X-norm plus sup_t ||y||_{H^{s+1}_nu} + sqrt(lambda) ||y||_{L2_T(H^{s+2}_nu)}."""
    sup, integral = _trajectory_pieces(traj, s, params)
    if "y" not in sup:
        raise DiagnosticError("Z-norm needs species fields")
    x, _ = x_norm(traj, s, params)
    return float(x + sup["y"] + np.sqrt(params.lam) * np.sqrt(integral["y"]))


# -------------------------
# Low-Mach limit
# -------------------------
def thermal_drift(state: FluidState, params: ParamPoint, model: GasModel, transport: TransportLaws,
                  weighted: bool = False) -> VectorField:
    """kappa chi1 k(theta) grad theta with chi1 at the origin, or pointwise when weighted."""
    if weighted:
        chi1 = state_coefficients(state, params, model).chi1
    else:
        chi1 = coefficient_set(model, 0.0, 0.0).chi1
    weight = params.kappa * chi1 * transport.k(state.theta.values)
    return vector_product(spectral_grad(state.theta), weight)


def curl_weight(state: FluidState, params: ParamPoint, model: GasModel, gamma_mode: str = "entropy",
                gamma_fn: Optional[Callable] = None) -> np.ndarray:
    theta = state.theta.values
    wp = params.eps * state.p.values
    if gamma_mode == "entropy":
        return np.exp(np.asarray(slow_variables(model, theta, wp).F))
    if gamma_mode == "density":
        return np.asarray(pushed_state(model, theta, wp).rho) / model.rho_ref
    if gamma_mode == "custom":
        if gamma_fn is None:
            return np.ones_like(theta)
        return np.asarray(gamma_fn(theta, wp), dtype=float)
    raise ConfigError([f"diagnostics.gamma_mode must be one of {GAMMA_MODES} (got {gamma_mode!r})"])


@dataclass
class LimitDiagnostics:
    div_ve_norm: float = 0.0
    curl_gamma_v_norm: float = 0.0


def limit_diagnostics(state: FluidState, params: ParamPoint, model: GasModel, transport: TransportLaws,
                      s: int, gamma_mode: str = "entropy", gamma_fn: Optional[Callable] = None,
                      weighted: bool = False) -> LimitDiagnostics:
    v_e = state.v - thermal_drift(state, params, model, transport, weighted)
    div_ve = sobolev_norm(div(v_e), s - 1)
    if state.grid.dim == 1:
        return LimitDiagnostics(div_ve, 0.0)
    gamma = curl_weight(state, params, model, gamma_mode, gamma_fn)
    return LimitDiagnostics(div_ve, curl_norm(curl(vector_product(state.v, gamma)), s - 1))


# -------------------------
# Periodic energy structure
# -------------------------
@dataclass(frozen=True, eq=False)
class CombinedField:
    """U = (q, w): a scalar and a d-vector on one grid."""
    q: ScalarField
    w: VectorField

    def __post_init__(self):
        if self.q.grid != self.w.grid:
            raise ValueError("U components must share one grid")


@dataclass(frozen=True, eq=False)
class SymmetrizerFrame:
    U: CombinedField
    E_p: np.ndarray
    E_v: np.ndarray
    P_mean: float
    V: VectorField
    F_field: ScalarField
    F_centered: ScalarField

    def energy(self) -> float:
        """<E U, U> in L2."""
        q, w = self.U.q.values, self.U.w.values()
        grid = self.U.q.grid
        return float(grid.volume * np.mean(self.E_p * q * q + self.E_v * np.sum(w * w, axis=0)))


def periodic_ansatz(state: FluidState, params: ParamPoint, model: GasModel, transport: TransportLaws,
                    source: SourceSpec, t: float = 0.0, p_offset: float = 0.0) -> SymmetrizerFrame:
    """
    F = kappa chi1 div(k grad theta) + chi1 Q, P = <F>/<g1>, V = grad Lap^-1 (F - g1 P),
    U = (p - p_offset, v - V), E = diag(g1, g2 Id). p_offset is the running time
    integral of P / eps, supplied by the caller.
    """
    grid = state.grid
    C = state_coefficients(state, params, model)
    F = ScalarField.zeros(grid)
    if params.kappa > 0:
        F = F + params.kappa * product(heat_divergence(state.theta, transport), C.chi1)
    Q = source.prescribed_at(t, grid)
    if Q is not None:
        F = F + product(Q, C.chi1)
    g1 = np.broadcast_to(C.g1, grid.shape)
    P_mean = float(F.mean() / np.mean(g1))
    centered = dealias(F - g1 * P_mean)
    V = inv_grad_laplace(centered)
    U = CombinedField(state.p - p_offset, state.v - V)
    return SymmetrizerFrame(U, g1, np.broadcast_to(C.g2, grid.shape), P_mean, V, F, centered)


def skew_energy_residual(U: CombinedField) -> float:
    """|<S U, U>| with S U = (div U_w, grad U_q)."""
    q, w = U.q, U.w
    gq = spectral_grad(q)
    return abs(inner(div(w), q) + sum(inner(gj, wj) for gj, wj in zip(gq, w)))


def _along(v: VectorField, arr: np.ndarray) -> np.ndarray:
    """(v . grad) of a coefficient array, differentiated spectrally without dealiasing."""
    g = spectral_grad(ScalarField(v.grid, np.ascontiguousarray(np.broadcast_to(arr, v.grid.shape))))
    return sum(vj.values * gj.values for vj, gj in zip(v, g))


def energy_balance_residual(traj: "Trajectory", params: ParamPoint, model: GasModel,
                            transport: TransportLaws, source: SourceSpec) -> float:
    """
    Max over interior samples of |d/dt <E U, U> - R| / scale, where the energy law

        R = <(D_t E + E div v) U, U> + 2 <F_q, U_q> + 2 <mu B2 v - g2 D_t V, U_w>

    follows from g1 D_t q = -eps^-1 div w + F_q and g2 D_t w = -eps^-1 grad q + mu B2 v - g2 D_t V
    once the skew singular terms cancel. F_q = (F - g1 P - div V) / eps vanishes up to
    dealiasing. The pressure offset is the running integral of P / eps; d/dt <E U, U>, d_t E
    and d_t V are centered differences of the samples. scale = max(1, max_k <E U, U>).
    """
    n = len(traj.times)
    if n < 3:
        raise DiagnosticError(f"energy balance needs >= 3 samples (got {n})")
    times = np.asarray(traj.times)
    eps = params.eps
    frames = [periodic_ansatz(st, params, model, transport, source, t) for st, t in zip(traj.states, times)]
    P_means = np.array([f.P_mean for f in frames])
    offsets = integrate.cumulative_trapezoid(P_means / eps, times, initial=0.0)
    grid = traj.states[0].grid
    qs = [f.U.q.values - off for f, off in zip(frames, offsets)]
    ws = [f.U.w.values() for f in frames]
    W = np.array([grid.volume * np.mean(f.E_p * q * q + f.E_v * np.sum(w * w, axis=0))
                  for f, q, w in zip(frames, qs, ws)])
    worst = 0.0
    for k in range(1, n - 1):
        span = times[k + 1] - times[k - 1]
        dW = (W[k + 1] - W[k - 1]) / span
        state, f = traj.states[k], frames[k]
        v = state.v
        div_v = div(v).values
        DE_p = (frames[k + 1].E_p - frames[k - 1].E_p) / span + _along(v, f.E_p)
        DE_v = (frames[k + 1].E_v - frames[k - 1].E_v) / span + _along(v, f.E_v)
        DV = np.stack([(nxt.values - prv.values) / span + _along(v, cur.values)
                       for prv, cur, nxt in zip(frames[k - 1].V, f.V, frames[k + 1].V)])
        F_q = (f.F_field.values - f.E_p * f.P_mean - f.F_centered.values) / eps
        F_w = -f.E_v * DV
        if params.mu > 0:
            C = state_coefficients(state, params, model)
            F_w = F_w + params.mu * viscous_operator(v, state.theta, C.chi2, transport).values()
        q, w = qs[k], ws[k]
        predicted = grid.volume * np.mean(
            (DE_p + f.E_p * div_v) * q * q + (DE_v + f.E_v * div_v) * np.sum(w * w, axis=0)
            + 2.0 * (F_q * q + np.sum(F_w * w, axis=0))
        )
        worst = max(worst, abs(dW - predicted))
    return float(worst / max(1.0, float(W.max())))


# -------------------------
# Div-curl inequality ratios
# -------------------------
def torus_div_curl_ratio(v: VectorField, gamma, s: int) -> float:
    """||v||_{H^s} / (||div v||_{H^{s-1}} + ||curl(gamma v)||_{H^{s-1}} + ||v||_{L2})."""
    if s < 1:
        raise DiagnosticError("div-curl ratio needs s >= 1")
    gamma = gamma.values if isinstance(gamma, ScalarField) else gamma
    num = vector_sobolev_norm(v, s)
    den = (sobolev_norm(div(v), s - 1) + curl_norm(curl(vector_product(v, gamma)), s - 1)
           + vector_sobolev_norm(v, 0))
    return num / den if den > 0 else 0.0


def weighted_div_curl_ratio(v: VectorField, phi, s: int) -> float:
    """||grad v||_{H^s} / (||div(e^phi v)||_{H^s} + ||curl v||_{H^s} + ||v||_{L2})."""
    phi = phi.values if isinstance(phi, ScalarField) else phi
    num = sum(gradient_norm(c, s) for c in v)
    den = (sobolev_norm(div(vector_product(v, np.exp(phi))), s) + curl_norm(curl(v), s)
           + vector_sobolev_norm(v, 0))
    return num / den if den > 0 else 0.0


# -------------------------
# Reports
# -------------------------
@dataclass
class EnergyDiagnostics:
    skew_residual: float = 0.0
    balance_residual: float = 0.0


@dataclass
class NormReport:
    s: int
    params: ParamPoint
    theorem_norm_sup: float = 0.0
    x_norm: float = 0.0
    x_norm_components: dict[str, float] = field(default_factory=lambda: dict.fromkeys(X_KEYS, 0.0))
    hf_norm: float = 0.0
    lf_norm: float = 0.0
    limit: LimitDiagnostics = field(default_factory=LimitDiagnostics)
    energy: EnergyDiagnostics = field(default_factory=EnergyDiagnostics)
    z_norm: Optional[float] = None
    initial_norm: Optional[float] = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["params"] = {"eps": self.params.eps, "mu": self.params.mu,
                         "kappa": self.params.kappa, "lambda": self.params.lam}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "NormReport":
        p = data["params"]
        return cls(
            s=int(data["s"]),
            params=ParamPoint(p["eps"], p["mu"], p["kappa"], p["lambda"]),
            theorem_norm_sup=data["theorem_norm_sup"],
            x_norm=data["x_norm"],
            x_norm_components=dict(data["x_norm_components"]),
            hf_norm=data["hf_norm"],
            lf_norm=data["lf_norm"],
            limit=LimitDiagnostics(**data["limit"]),
            energy=EnergyDiagnostics(**data["energy"]),
            z_norm=data.get("z_norm"),
            initial_norm=data.get("initial_norm"),
        )


def build_norm_report(traj: "Trajectory", params: ParamPoint, model: GasModel, transport: TransportLaws,
                      source: SourceSpec, s: int, gamma_mode: str = "entropy",
                      gamma_fn: Optional[Callable] = None, weighted_limit: bool = False) -> NormReport:
    final = traj.states[-1]
    total, comps = x_norm(traj, s, params)
    hf, lf = hf_lf_norms(traj, s, params)
    frame = periodic_ansatz(final, params, model, transport, source, traj.times[-1])
    if len(traj.times) >= 3:
        balance = energy_balance_residual(traj, params, model, transport, source)
    else:
        logger.warning("energy balance skipped: only %d samples", len(traj.times))
        balance = 0.0
    return NormReport(
        s=s,
        params=params,
        theorem_norm_sup=max(theorem_norm(st, params.eps, s) for st in traj.states),
        x_norm=total,
        x_norm_components=comps,
        hf_norm=hf,
        lf_norm=lf,
        limit=limit_diagnostics(final, params, model, transport, s, gamma_mode, gamma_fn, weighted_limit),
        energy=EnergyDiagnostics(skew_energy_residual(frame.U), balance),
        z_norm=z_norm(traj, s, params) if final.y else None,
        initial_norm=initial_data_norm(traj.states[0], params, s),
    )
