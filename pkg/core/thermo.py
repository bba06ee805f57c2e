"""
thermo.py

Purpose:
    Derives every coefficient of the low-Mach PDE systems from an equation of state
    rho(P, T), e(P, T) and checks the structural assumptions those systems rely on.

Key Responsibilities:
    - Gas models: ideal gas with constant or polynomial C_V(T), a van der Waals gas,
      a tabulated gas with bicubic interpolation, and a callable-backed model for
      user-supplied state functions. Missing partials fall back to central differences.
    - Entropy from T dS = de + P d(1/rho), normalized by S(P_ref, T_ref) = 0 and integrated
      along L-shaped paths with adaptive quadrature.
    - Thermodynamic quantities (K_T, K_P, C_P, C_V, Rcal), the a, b, c, d coefficients,
      and the working-system coefficients g1, g2, g3, chi1, chi2, chi3 at pushed states
      (P_ref e^wp, T_ref e^theta), scalar or vectorized over a grid.
    - Validation: first-identity residual, Maxwell identity, sign conditions, chi1 < chi3,
      the Gamma compatibility conditions, and local Jacobian signs of the slow variables.

Design Notes:
    - Evaluation outside the declared (P, T) box raises StateOutOfDomain; nothing is extrapolated.
    - C_V = T (S_T rho_P - S_P rho_T) / rho_P. This reproduces the input C_V of an ideal gas.
    - Entropy partials: S_T = (e_T - P rho_T / rho^2) / T, S_P = (e_P - P rho_P / rho^2) / T.

Usage:
    gas = ideal_gas(R=1.0, C_V=1.5)
    coeffs = coefficient_set(gas, theta=0.0, wp=0.0)
    report = validate_gas_model(gas, samples=8)
"""
from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy import integrate, interpolate

from core.exceptions import (
    ConfigError,
    DegenerateState,
    PathOutOfDomain,
    SingularJacobian,
    StateOutOfDomain,
)

logger = logging.getLogger("lowmach.thermo")

ArrayLike = Union[float, np.ndarray]

FD_STEP = 1e-6
ENTROPY_TOL = 1e-10


class StateBox(NamedTuple):
    P_lo: float
    P_hi: float
    T_lo: float
    T_hi: float

    def contains(self, P: ArrayLike, T: ArrayLike) -> np.ndarray:
        P = np.asarray(P, dtype=float)
        T = np.asarray(T, dtype=float)
        return (P >= self.P_lo) & (P <= self.P_hi) & (T >= self.T_lo) & (T <= self.T_hi)


def default_box(P_ref: float, T_ref: float, span: float = 100.0) -> StateBox:
    return StateBox(P_ref / span, P_ref * span, T_ref / span, T_ref * span)


# -------------------------
# Gas models
# -------------------------
class GasModel(ABC):
    """
    Equation of state with reference state (P_ref, T_ref) and validity box.
    Subclasses implement rho and e; partials default to central differences with
    step FD_STEP * max(1, |state|).
    """
    name: str = "gas"
    P_ref: float
    T_ref: float
    box: StateBox

    @abstractmethod
    def rho(self, P: ArrayLike, T: ArrayLike) -> ArrayLike:
        ...

    @abstractmethod
    def e(self, P: ArrayLike, T: ArrayLike) -> ArrayLike:
        ...

    def rho_P(self, P, T):
        return _central(lambda x: self.rho(x, T), P)

    def rho_T(self, P, T):
        return _central(lambda x: self.rho(P, x), T)

    def e_P(self, P, T):
        return _central(lambda x: self.e(x, T), P)

    def e_T(self, P, T):
        return _central(lambda x: self.e(P, x), T)

    def entropy_closed_form(self, P, T) -> Optional[ArrayLike]:
        """Closed-form S(P, T) when the model has one, else None."""
        return None

    @property
    def rho_ref(self) -> float:
        return float(self.rho(self.P_ref, self.T_ref))

    def check_in_box(self, P, T, error=StateOutOfDomain) -> None:
        inside = self.box.contains(P, T)
        if not np.all(inside):
            bad = int(np.size(inside) - np.count_nonzero(inside))
            raise error(f"{bad} state(s) outside the {self.name} validity box {tuple(self.box)}")


def _central(fn: Callable[[np.ndarray], ArrayLike], x: ArrayLike) -> ArrayLike:
    x = np.asarray(x, dtype=float)
    h = FD_STEP * np.maximum(1.0, np.abs(x))
    return (np.asarray(fn(x + h)) - np.asarray(fn(x - h))) / (2.0 * h)


@dataclass(frozen=True)
class IdealGas(GasModel):
    """rho = P / (R T), e = integral of C_V(T) = sum_k c_k T^k."""
    R: float
    cv_coeffs: tuple[float, ...]
    P_ref: float = 1.0
    T_ref: float = 1.0
    box: StateBox = None
    name: str = "ideal"

    def __post_init__(self):
        if self.box is None:
            object.__setattr__(self, "box", default_box(self.P_ref, self.T_ref))

    def cv(self, T):
        T = np.asarray(T, dtype=float)
        return sum(c * T ** k for k, c in enumerate(self.cv_coeffs))

    def rho(self, P, T):
        return np.asarray(P, dtype=float) / (self.R * np.asarray(T, dtype=float))

    def e(self, P, T):
        T = np.asarray(T, dtype=float) + 0.0 * np.asarray(P, dtype=float)
        return sum(c * T ** (k + 1) / (k + 1) for k, c in enumerate(self.cv_coeffs))

    def rho_P(self, P, T):
        return 1.0 / (self.R * np.asarray(T, dtype=float)) + 0.0 * np.asarray(P, dtype=float)

    def rho_T(self, P, T):
        T = np.asarray(T, dtype=float)
        return -np.asarray(P, dtype=float) / (self.R * T * T)

    def e_P(self, P, T):
        return 0.0 * (np.asarray(P, dtype=float) + np.asarray(T, dtype=float))

    def e_T(self, P, T):
        return self.cv(T) + 0.0 * np.asarray(P, dtype=float)

    def entropy_closed_form(self, P, T):
        P = np.asarray(P, dtype=float)
        T = np.asarray(T, dtype=float)
        c0 = self.cv_coeffs[0]
        s = c0 * np.log(T / self.T_ref)
        for k, c in enumerate(self.cv_coeffs[1:], start=1):
            s = s + c * (T ** k - self.T_ref ** k) / k
        return s + self.R * np.log(T / self.T_ref) - self.R * np.log(P / self.P_ref)


@dataclass(frozen=True)
class VanDerWaalsGas(GasModel):
    """P = R T rho / (1 - b rho) - a rho^2, e = C_V T - a rho, gas branch."""
    a: float
    b: float
    R: float
    C_V: float
    P_ref: float = 1.0
    T_ref: float = 1.0
    box: StateBox = None
    name: str = "vdw"
    max_newton: int = 60

    def __post_init__(self):
        if self.box is None:
            object.__setattr__(self, "box", default_box(self.P_ref, self.T_ref, span=4.0))

    def _dP_drho(self, rho, T):
        return self.R * T / (1.0 - self.b * rho) ** 2 - 2.0 * self.a * rho

    def rho(self, P, T):
        P, T = np.broadcast_arrays(np.asarray(P, dtype=float), np.asarray(T, dtype=float))
        r = P / (self.R * T)
        for _ in range(self.max_newton):
            resid = self.R * T * r / (1.0 - self.b * r) - self.a * r * r - P
            slope = self._dP_drho(r, T)
            if np.any(slope <= 0):
                raise StateOutOfDomain("van der Waals state on or beyond the spinodal")
            step = resid / slope
            r = r - step
            if np.all(np.abs(step) <= 1e-14 * np.maximum(1.0, np.abs(r))):
                return r if r.ndim else float(r)
        raise StateOutOfDomain("van der Waals density iteration did not converge")

    def e(self, P, T):
        return self.C_V * np.asarray(T, dtype=float) - self.a * self.rho(P, T)

    def rho_P(self, P, T):
        T = np.asarray(T, dtype=float)
        return 1.0 / self._dP_drho(self.rho(P, T), T)

    def rho_T(self, P, T):
        T = np.asarray(T, dtype=float)
        r = self.rho(P, T)
        return -(self.R * r / (1.0 - self.b * r)) / self._dP_drho(r, T)

    def e_P(self, P, T):
        return -self.a * self.rho_P(P, T)

    def e_T(self, P, T):
        return self.C_V - self.a * self.rho_T(P, T)

    def entropy_closed_form(self, P, T):
        T = np.asarray(T, dtype=float)
        vol = 1.0 / self.rho(P, T) - self.b
        vol_ref = 1.0 / self.rho_ref - self.b
        return self.C_V * np.log(T / self.T_ref) + self.R * np.log(vol / vol_ref)


@dataclass(frozen=True, eq=False)
class TabulatedGas(GasModel):
    """Bicubic interpolation of rho and e tables on a tensor (P, T) grid."""
    P_grid: np.ndarray
    T_grid: np.ndarray
    rho_table: np.ndarray
    e_table: np.ndarray
    P_ref: float = 1.0
    T_ref: float = 1.0
    name: str = "table"
    box: StateBox = field(init=False)

    def __post_init__(self):
        P_grid = np.asarray(self.P_grid, dtype=float)
        T_grid = np.asarray(self.T_grid, dtype=float)
        shape = (P_grid.size, T_grid.size)
        errors = []
        if min(shape) < 4:
            errors.append("table needs at least 4 points per axis for bicubic interpolation")
        if np.any(np.diff(P_grid) <= 0) or np.any(np.diff(T_grid) <= 0):
            errors.append("table P and T grids must be strictly increasing")
        if np.shape(self.rho_table) != shape or np.shape(self.e_table) != shape:
            errors.append(f"table values must have shape {shape}")
        if errors:
            raise ConfigError(errors)
        box = StateBox(P_grid[0], P_grid[-1], T_grid[0], T_grid[-1])
        if not box.contains(self.P_ref, self.T_ref):
            raise ConfigError([f"reference state ({self.P_ref}, {self.T_ref}) lies outside the table"])
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "_rho_spline", interpolate.RectBivariateSpline(P_grid, T_grid, self.rho_table, kx=3, ky=3))
        object.__setattr__(self, "_e_spline", interpolate.RectBivariateSpline(P_grid, T_grid, self.e_table, kx=3, ky=3))

    def _eval(self, spline, P, T, dx=0, dy=0):
        P, T = np.broadcast_arrays(np.asarray(P, dtype=float), np.asarray(T, dtype=float))
        out = spline.ev(P.ravel(), T.ravel(), dx=dx, dy=dy).reshape(P.shape)
        return out if out.ndim else float(out)

    def rho(self, P, T):
        return self._eval(self._rho_spline, P, T)

    def e(self, P, T):
        return self._eval(self._e_spline, P, T)

    def rho_P(self, P, T):
        return self._eval(self._rho_spline, P, T, dx=1)

    def rho_T(self, P, T):
        return self._eval(self._rho_spline, P, T, dy=1)

    def e_P(self, P, T):
        return self._eval(self._e_spline, P, T, dx=1)

    def e_T(self, P, T):
        return self._eval(self._e_spline, P, T, dy=1)


@dataclass(frozen=True, eq=False)
class FunctionGas(GasModel):
    """State functions supplied as callables; partials that are None use central differences."""
    rho_fn: Callable
    e_fn: Callable
    P_ref: float = 1.0
    T_ref: float = 1.0
    box: StateBox = None
    rho_P_fn: Optional[Callable] = None
    rho_T_fn: Optional[Callable] = None
    e_P_fn: Optional[Callable] = None
    e_T_fn: Optional[Callable] = None
    name: str = "custom"

    def __post_init__(self):
        if self.box is None:
            object.__setattr__(self, "box", default_box(self.P_ref, self.T_ref))

    def rho(self, P, T):
        return self.rho_fn(P, T)

    def e(self, P, T):
        return self.e_fn(P, T)

    def rho_P(self, P, T):
        return self.rho_P_fn(P, T) if self.rho_P_fn else super().rho_P(P, T)

    def rho_T(self, P, T):
        return self.rho_T_fn(P, T) if self.rho_T_fn else super().rho_T(P, T)

    def e_P(self, P, T):
        return self.e_P_fn(P, T) if self.e_P_fn else super().e_P(P, T)

    def e_T(self, P, T):
        return self.e_T_fn(P, T) if self.e_T_fn else super().e_T(P, T)


def ideal_gas(R: float = 1.0, C_V: Union[float, Sequence[float]] = 1.5, P_ref: float = 1.0,
              T_ref: float = 1.0, box: Optional[StateBox] = None) -> IdealGas:
    """Mariotte gas; C_V is a constant or polynomial coefficients (c0, c1, ...) in T."""
    coeffs = (float(C_V),) if np.isscalar(C_V) else tuple(float(c) for c in C_V)
    errors = []
    if R <= 0:
        errors.append(f"gas.R must be > 0 (got {R})")
    if not coeffs:
        errors.append("gas.cv needs at least one coefficient")
    if P_ref <= 0 or T_ref <= 0:
        errors.append("gas reference state must be positive")
    if errors:
        raise ConfigError(errors)
    gas = IdealGas(R=float(R), cv_coeffs=coeffs, P_ref=float(P_ref), T_ref=float(T_ref), box=box)
    T_probe = np.linspace(gas.box.T_lo, gas.box.T_hi, 64)
    if np.any(gas.cv(T_probe) <= 0):
        raise ConfigError(["C_V(T) must be positive on the validity box"])
    return gas


def van_der_waals(a: float, b: float, R: float = 1.0, C_V: float = 1.5, P_ref: float = 1.0,
                  T_ref: float = 1.0, box: Optional[StateBox] = None) -> VanDerWaalsGas:
    errors = []
    if a < 0 or b < 0:
        errors.append("van der Waals a and b must be >= 0")
    if R <= 0 or C_V <= 0:
        errors.append("van der Waals R and C_V must be > 0")
    if errors:
        raise ConfigError(errors)
    return VanDerWaalsGas(a=float(a), b=float(b), R=float(R), C_V=float(C_V),
                          P_ref=float(P_ref), T_ref=float(T_ref), box=box)


def read_table(text: str, P_ref: float = 1.0, T_ref: float = 1.0) -> TabulatedGas:
    """
    Parse the table format: header "P_count T_count", then the P grid, the T grid,
    row-major rho values (rows over P) and row-major e values.
    """
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ConfigError(["gas table is empty"])
    try:
        n_P, n_T = (int(tok) for tok in lines[0].split())
        numbers = np.array(" ".join(lines[1:]).split(), dtype=float)
    except ValueError as exc:
        raise ConfigError([f"gas table header or values malformed: {exc}"]) from exc
    expected = n_P + n_T + 2 * n_P * n_T
    if numbers.size != expected:
        raise ConfigError([f"gas table holds {numbers.size} values, expected {expected}"])
    P_grid = numbers[:n_P]
    T_grid = numbers[n_P:n_P + n_T]
    body = numbers[n_P + n_T:]
    rho_table = body[:n_P * n_T].reshape(n_P, n_T)
    e_table = body[n_P * n_T:].reshape(n_P, n_T)
    return TabulatedGas(P_grid, T_grid, rho_table, e_table, P_ref=float(P_ref), T_ref=float(T_ref))


def tabulated_gas(path: Union[str, Path], P_ref: float = 1.0, T_ref: float = 1.0) -> TabulatedGas:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read gas table '{path}': {exc}"]) from exc
    return read_table(text, P_ref=P_ref, T_ref=T_ref)


def write_table(model: GasModel, P_grid: Sequence[float], T_grid: Sequence[float]) -> str:
    """Sample a model on a tensor grid in the table format (used to build tabulated models)."""
    P_grid = np.asarray(P_grid, dtype=float)
    T_grid = np.asarray(T_grid, dtype=float)
    PP, TT = np.meshgrid(P_grid, T_grid, indexing="ij")
    rows = [f"{P_grid.size} {T_grid.size}",
            " ".join(repr(float(x)) for x in P_grid),
            " ".join(repr(float(x)) for x in T_grid)]
    for table in (np.asarray(model.rho(PP, TT)), np.asarray(model.e(PP, TT))):
        rows.extend(" ".join(repr(float(x)) for x in row) for row in table)
    return "\n".join(rows) + "\n"


# -------------------------
# State functions
# -------------------------
class ThermoState(NamedTuple):
    P: ArrayLike
    T: ArrayLike
    rho: ArrayLike
    rho_P: ArrayLike
    rho_T: ArrayLike
    e_P: ArrayLike
    e_T: ArrayLike
    S_P: ArrayLike
    S_T: ArrayLike


def evaluate_state(model: GasModel, P: ArrayLike, T: ArrayLike, error=StateOutOfDomain) -> ThermoState:
    model.check_in_box(P, T, error=error)
    P = np.asarray(P, dtype=float)
    T = np.asarray(T, dtype=float)
    rho = np.asarray(model.rho(P, T), dtype=float)
    rho_P = np.asarray(model.rho_P(P, T), dtype=float)
    rho_T = np.asarray(model.rho_T(P, T), dtype=float)
    e_P = np.asarray(model.e_P(P, T), dtype=float)
    e_T = np.asarray(model.e_T(P, T), dtype=float)
    S_T = (e_T - P * rho_T / rho ** 2) / T
    S_P = (e_P - P * rho_P / rho ** 2) / T
    return ThermoState(P, T, rho, rho_P, rho_T, e_P, e_T, S_P, S_T)


def pushed_state(model: GasModel, theta: ArrayLike, wp: ArrayLike) -> ThermoState:
    """State functions at (P, T) = (P_ref e^wp, T_ref e^theta)."""
    P = model.P_ref * np.exp(np.asarray(wp, dtype=float))
    T = model.T_ref * np.exp(np.asarray(theta, dtype=float))
    return evaluate_state(model, P, T)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class ThermoCoefficients:
    K_T: ArrayLike
    K_P: ArrayLike
    C_P: ArrayLike
    C_V: ArrayLike
    Rcal: ArrayLike


def _thermo_from_state(ts: ThermoState) -> ThermoCoefficients:
    if np.any(ts.rho_P == 0):
        raise DegenerateState("d rho / d P vanishes; K_T, C_V and Rcal are undefined")
    return ThermoCoefficients(
        K_T=ts.rho_P / ts.rho,
        K_P=-ts.rho_T / ts.rho,
        C_P=ts.T * ts.S_T,
        C_V=ts.T * (ts.S_T * ts.rho_P - ts.S_P * ts.rho_T) / ts.rho_P,
        Rcal=-ts.rho * ts.S_P / ts.rho_P,
    )


def thermo_coefficients(model: GasModel, P: float, T: float) -> ThermoCoefficients:
    tc = _thermo_from_state(evaluate_state(model, P, T))
    return ThermoCoefficients(*(_scalar(getattr(tc, f)) for f in ("K_T", "K_P", "C_P", "C_V", "Rcal")))


def abcd(model: GasModel, P: float, T: float) -> dict[str, float]:
    ts = evaluate_state(model, P, T)
    det = ts.rho_P * ts.S_T - ts.rho_T * ts.S_P
    scale = abs(ts.rho_P * ts.S_T) + abs(ts.rho_T * ts.S_P)
    if abs(det) <= 1e-14 * max(scale, 1e-300):
        raise SingularJacobian(f"det J = {float(det):.3e} at (P, T) = ({P}, {T})")
    rho, T_ = ts.rho, ts.T
    return {
        "a": float(rho * ts.S_T / det),
        "b": float(-ts.rho_T / (rho * T_ * det)),
        "c": float(-rho * ts.S_P / det),
        "d": float(ts.rho_P / (rho * T_ * det)),
    }


# -------------------------
# Working-system coefficients
# -------------------------
@dataclass(frozen=True)
class CoefficientSet:
    g1: ArrayLike
    g2: ArrayLike
    g3: ArrayLike
    chi1: ArrayLike
    chi2: ArrayLike
    chi3: ArrayLike
    g4: Optional[ArrayLike] = None
    chi4: Optional[ArrayLike] = None

    def positive(self) -> bool:
        entries = [self.g1, self.g2, self.g3, self.chi1, self.chi2, self.chi3]
        return all(np.all(np.asarray(x) > 0) for x in entries)


SPECIES_CLOSURES = ("unit", "density")


def _coefficients_from_state(ts: ThermoState, rho_ref: float, closure: Optional[str]) -> CoefficientSet:
    tc = _thermo_from_state(ts)
    g4 = chi4 = None
    if closure == "unit":
        g4 = np.ones_like(ts.rho)
        chi4 = np.ones_like(ts.rho)
    elif closure == "density":
        g4 = ts.rho / rho_ref
        chi4 = np.ones_like(ts.rho)
    elif closure is not None:
        raise ConfigError([f"species closure must be one of {SPECIES_CLOSURES} (got {closure!r})"])
    return CoefficientSet(
        g1=tc.K_T * tc.C_V * ts.P / tc.C_P,
        g2=ts.rho / ts.P,
        g3=tc.C_V / tc.Rcal,
        chi1=tc.K_P / (ts.rho * tc.C_P),
        chi2=1.0 / ts.P,
        chi3=1.0 / (tc.Rcal * ts.rho * ts.T),
        g4=g4,
        chi4=chi4,
    )


def coefficient_fields(model: GasModel, theta: ArrayLike, wp: ArrayLike,
                       closure: Optional[str] = None) -> CoefficientSet:
    """Vectorized coefficients at pushed states; arrays keep the shape of theta and wp."""
    return _coefficients_from_state(pushed_state(model, theta, wp), model.rho_ref, closure)


def coefficient_set(model: GasModel, theta: float, wp: float, closure: Optional[str] = None) -> CoefficientSet:
    cs = coefficient_fields(model, theta, wp, closure)
    return CoefficientSet(*(None if v is None else _scalar(v) for v in
                            (cs.g1, cs.g2, cs.g3, cs.chi1, cs.chi2, cs.chi3, cs.g4, cs.chi4)))


def coefficients_from_abcd(model: GasModel, theta: float, wp: float) -> dict[str, float]:
    """g1 = P/a, g3 = T/c, chi1 = b/a, chi3 = d/c; must agree with coefficient_set."""
    P = model.P_ref * np.exp(wp)
    T = model.T_ref * np.exp(theta)
    k = abcd(model, P, T)
    return {"g1": P / k["a"], "g3": T / k["c"], "chi1": k["b"] / k["a"], "chi3": k["d"] / k["c"]}


class SymmetrizerCoefficients(NamedTuple):
    gamma1: ArrayLike
    gamma2: ArrayLike
    omega: ArrayLike


def gamma_coefficients(model: GasModel, theta: ArrayLike, wp: ArrayLike) -> SymmetrizerCoefficients:
    """gamma1 = chi1 g3 / (chi3 g1), gamma2 = 1 / g1 and the density weight omega = G_wp / g1."""
    ts = pushed_state(model, theta, wp)
    cs = _coefficients_from_state(ts, model.rho_ref, None)
    G_wp = ts.P * ts.rho_P
    return SymmetrizerCoefficients(
        _scalar(cs.chi1 * cs.g3 / (cs.chi3 * cs.g1)),
        _scalar(1.0 / cs.g1),
        _scalar(G_wp / cs.g1),
    )


# -------------------------
# Entropy and slow variables
# -------------------------
def entropy(model: GasModel, P: float, T: float, path: str = "L") -> float:
    """
    S(P, T) with S(P_ref, T_ref) = 0, integrating (de + P d(1/rho)) / T by adaptive
    quadrature. path "L" runs (P_ref, T_ref) -> (P, T_ref) -> (P, T); "reversed"
    runs (P_ref, T_ref) -> (P_ref, T) -> (P, T).
    """
    P0, T0 = model.P_ref, model.T_ref
    corner = (P, T0) if path == "L" else (P0, T)
    if path not in ("L", "reversed"):
        raise ValueError(f"unknown entropy path {path!r}")
    for p_, t_ in ((P, T), corner):
        if not bool(model.box.contains(p_, t_)):
            raise PathOutOfDomain(f"entropy path through ({p_}, {t_}) leaves the validity box")

    def s_P(p, t):
        return float(evaluate_state(model, p, t, error=PathOutOfDomain).S_P)

    def s_T(p, t):
        return float(evaluate_state(model, p, t, error=PathOutOfDomain).S_T)

    opts = dict(epsabs=ENTROPY_TOL * 1e-2, epsrel=1e-12, limit=200)
    if path == "L":
        leg1, _ = integrate.quad(lambda p: s_P(p, T0), P0, P, **opts) if P != P0 else (0.0, 0.0)
        leg2, _ = integrate.quad(lambda t: s_T(P, t), T0, T, **opts) if T != T0 else (0.0, 0.0)
    else:
        leg1, _ = integrate.quad(lambda t: s_T(P0, t), T0, T, **opts) if T != T0 else (0.0, 0.0)
        leg2, _ = integrate.quad(lambda p: s_P(p, T), P0, P, **opts) if P != P0 else (0.0, 0.0)
    return leg1 + leg2


def entropy_field(model: GasModel, P: ArrayLike, T: ArrayLike) -> ArrayLike:
    """Entropy over arrays: closed form when the model has one, quadrature per point otherwise."""
    closed = model.entropy_closed_form(P, T)
    if closed is not None:
        return closed
    return np.vectorize(lambda p, t: entropy(model, float(p), float(t)))(P, T)


@dataclass(frozen=True)
class SlowVariables:
    F: ArrayLike
    G: ArrayLike
    F_theta: ArrayLike
    F_wp: ArrayLike
    G_theta: ArrayLike
    G_wp: ArrayLike


def slow_variables(model: GasModel, theta: ArrayLike, wp: ArrayLike) -> SlowVariables:
    """F = S*(theta, wp) - S*(0, 0) and G = rho*(theta, wp) - rho*(0, 0) with their partials."""
    ts = pushed_state(model, theta, wp)
    F = entropy_field(model, ts.P, ts.T)
    G = ts.rho - model.rho_ref
    return SlowVariables(
        F=_scalar(F), G=_scalar(G),
        F_theta=_scalar(ts.T * ts.S_T), F_wp=_scalar(ts.P * ts.S_P),
        G_theta=_scalar(ts.T * ts.rho_T), G_wp=_scalar(ts.P * ts.rho_P),
    )


def compatibility_terms(model: GasModel, theta: ArrayLike, wp: ArrayLike) -> dict[str, ArrayLike]:
    """Gamma_1 and Gamma_2 applied to S* and rho*."""
    ts = pushed_state(model, theta, wp)
    cs = _coefficients_from_state(ts, model.rho_ref, None)
    S_th, S_wp = ts.T * ts.S_T, ts.P * ts.S_P
    r_th, r_wp = ts.T * ts.rho_T, ts.P * ts.rho_P

    def gamma1(d_th, d_wp):
        return _scalar(cs.g1 * d_th + cs.g3 * d_wp)

    def gamma2(d_th, d_wp):
        return _scalar(cs.g1 * cs.chi3 * d_th + cs.g3 * cs.chi1 * d_wp)

    return {
        "gamma1_S": gamma1(S_th, S_wp),
        "gamma2_rho": gamma2(r_th, r_wp),
        "gamma2_S": gamma2(S_th, S_wp),
        "gamma1_rho": gamma1(r_th, r_wp),
    }


def gamma_residuals(model: GasModel, theta: float, wp: float) -> tuple[float, float]:
    terms = compatibility_terms(model, theta, wp)
    return terms["gamma1_S"], terms["gamma2_rho"]


def maxwell_residual(model: GasModel, P: float, T: float) -> float:
    ts = evaluate_state(model, P, T)
    return float(abs(ts.S_P - ts.rho_T / ts.rho ** 2) / max(1.0, abs(float(ts.S_P))))


def first_identity_residual(ts: ThermoState) -> ArrayLike:
    """Relative defect of P rho_P + T rho_T = rho^2 e_P, the closedness condition for T dS."""
    lhs = ts.P * ts.rho_P + ts.T * ts.rho_T
    rhs = ts.rho ** 2 * ts.e_P
    return np.abs(lhs - rhs) / np.maximum(1.0, np.abs(ts.P * ts.rho_P) + np.abs(ts.T * ts.rho_T))


# -------------------------
# Validation
# -------------------------
@dataclass
class ValidationReport:
    n_points: int = 0
    max_identity_residual: float = 0.0
    max_maxwell_residual: float = 0.0
    sign_violations: dict[str, int] = field(default_factory=lambda: {
        "rho_P>0": 0, "rho_T<0": 0, "e_T*rho_P>e_P*rho_T": 0})
    chi_order_violations: int = 0
    jacobian_violations: dict[str, int] = field(default_factory=lambda: {
        "dF/dtheta>0": 0, "dG/dwp>0": 0, "dG/dtheta<0": 0})
    failures: list[str] = field(default_factory=list)
    identity_tol: float = 1e-8

    @property
    def passed(self) -> bool:
        return (
            self.n_points > 0
            and not self.failures
            and self.max_identity_residual <= self.identity_tol
            and not any(self.sign_violations.values())
            and self.chi_order_violations == 0
            and not any(self.jacobian_violations.values())
        )

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status}: {self.n_points} points, identity residual {self.max_identity_residual:.3e}, "
            f"Maxwell residual {self.max_maxwell_residual:.3e}, sign violations {self.sign_violations}, "
            f"chi1<chi3 violations {self.chi_order_violations}, Jacobian violations {self.jacobian_violations}, "
            f"evaluation failures {len(self.failures)}"
        )


def validate_gas_model(model: GasModel, box: Optional[StateBox] = None, samples: int = 8) -> ValidationReport:
    """Evaluate the structural conditions on a samples x samples tensor grid of the box."""
    if samples < 4:
        raise ValueError(f"validation needs >= 4 samples per axis (got {samples})")
    box = box or model.box
    report = ValidationReport()
    for P in np.linspace(box.P_lo, box.P_hi, samples):
        for T in np.linspace(box.T_lo, box.T_hi, samples):
            try:
                ts = evaluate_state(model, P, T)
                cs = _coefficients_from_state(ts, model.rho_ref, None)
            except Exception as exc:
                report.failures.append(f"({P:.6g}, {T:.6g}): {exc}")
                continue
            report.n_points += 1
            report.max_identity_residual = max(report.max_identity_residual, float(first_identity_residual(ts)))
            report.max_maxwell_residual = max(
                report.max_maxwell_residual,
                float(abs(ts.S_P - ts.rho_T / ts.rho ** 2) / max(1.0, abs(float(ts.S_P)))))
            checks = {
                "rho_P>0": ts.rho_P > 0,
                "rho_T<0": ts.rho_T < 0,
                "e_T*rho_P>e_P*rho_T": ts.e_T * ts.rho_P > ts.e_P * ts.rho_T,
            }
            for name, ok in checks.items():
                if not ok:
                    report.sign_violations[name] += 1
            if not cs.chi1 < cs.chi3:
                report.chi_order_violations += 1
            jac = {
                "dF/dtheta>0": ts.T * ts.S_T > 0,
                "dG/dwp>0": ts.P * ts.rho_P > 0,
                "dG/dtheta<0": ts.T * ts.rho_T < 0,
            }
            for name, ok in jac.items():
                if not ok:
                    report.jacobian_violations[name] += 1
    logger.info("gas model '%s' validation: %s", model.name, report.summary())
    return report
