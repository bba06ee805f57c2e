"""
spectral.py

Purpose:
    Fourier-spectral calculus on the periodic torus T^d = [0, 2*pi)^d, d in {1, 2, 3}.
    Every other module builds its differential operators, filters and norms from here.

Key Responsibilities:
    - Describe the grid (GridSpec) and hold real fields with lazily synced Fourier
      coefficients (ScalarField, VectorField).
    - Provide grad, div, curl, laplacian and the torus inverse grad(Laplacian^-1).
    - Provide Sobolev, gradient and hybrid norms with Plancherel normalization, so
      discrete L2 norms equal continuum integrals over [0, 2*pi)^d.
    - Provide the Friedrichs mollifier J_h with a fixed smooth radial cutoff and the
      2/3-rule dealiasing filter.

Conventions:
    - Coefficients are Fourier-series coefficients: f(x) = sum_xi f_hat(xi) exp(i xi.x),
      so f_hat = fftn(values) / N.
    - Derivative multipliers zero the Nyquist wavenumber -n/2, which keeps discrete
      integration by parts and the div-curl identity exact. Norm weights keep it.
    - Fields are immutable. Per-grid wavenumber tables are cached with lru_cache,
      which is safe for concurrent readers.

Usage:
    grid = GridSpec(dim=2, n_per_dim=32)
    f = ScalarField.from_function(grid, lambda x, y: np.sin(x) * np.cos(y))
    g = grad(f)
    sobolev_norm(div(g), 1.0)
"""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple, Sequence, Union

import numpy as np

from core.exceptions import ConfigError, DiagnosticError, MeanNotZero

logger = logging.getLogger("lowmach.spectral")

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class GridSpec:
    dim: int
    n_per_dim: int
    dealias: bool = True

    def __post_init__(self):
        errors = []
        if self.dim not in (1, 2, 3):
            errors.append(f"grid.dim must be 1, 2 or 3 (got {self.dim})")
        if self.n_per_dim < 8 or self.n_per_dim % 2:
            errors.append(f"grid.n must be even and >= 8 (got {self.n_per_dim})")
        if errors:
            raise ConfigError(errors)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_per_dim,) * self.dim

    @property
    def size(self) -> int:
        return self.n_per_dim ** self.dim

    @property
    def dx(self) -> float:
        return TWO_PI / self.n_per_dim

    @property
    def volume(self) -> float:
        return TWO_PI ** self.dim

    def coordinates(self) -> tuple[np.ndarray, ...]:
        return _tables(self).coords

    def max_resolved_mode(self) -> int:
        """Largest |xi_j| kept by the dealiasing filter."""
        return self.n_per_dim // 3


class _GridTables(NamedTuple):
    coords: tuple[np.ndarray, ...]
    k: tuple[np.ndarray, ...]
    kd: tuple[np.ndarray, ...]
    k2: np.ndarray
    kd2: np.ndarray
    k_abs: np.ndarray
    dealias_mask: np.ndarray


@functools.lru_cache(maxsize=32)
def _tables(grid: GridSpec) -> _GridTables:
    n = grid.n_per_dim
    axis = np.fft.fftfreq(n, d=1.0 / n)
    axis_d = axis.copy()
    axis_d[n // 2] = 0.0
    x = np.arange(n) * grid.dx
    k = np.meshgrid(*([axis] * grid.dim), indexing="ij")
    kd = np.meshgrid(*([axis_d] * grid.dim), indexing="ij")
    coords = np.meshgrid(*([x] * grid.dim), indexing="ij")
    k2 = sum(kj * kj for kj in k)
    kd2 = sum(kj * kj for kj in kd)
    mask = np.ones(grid.shape, dtype=bool)
    for kj in k:
        mask &= 3.0 * np.abs(kj) <= n
    tables = _GridTables(tuple(coords), tuple(k), tuple(kd), k2, kd2, np.sqrt(k2), mask)
    for arr in (*tables.coords, *tables.k, *tables.kd, k2, kd2, tables.k_abs, mask):
        arr.setflags(write=False)
    logger.debug("built wavenumber tables for %s", grid)
    return tables


# -------------------------
# Fields
# -------------------------
@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real field on a grid; `coefficients` is computed on first access and cached."""
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @functools.cached_property
    def coefficients(self) -> np.ndarray:
        coeffs = np.fft.fftn(self.values) / self.grid.size
        coeffs.setflags(write=False)
        return coeffs

    @classmethod
    def from_coefficients(cls, grid: GridSpec, coeffs: np.ndarray) -> "ScalarField":
        coeffs = np.asarray(coeffs, dtype=complex)
        field = cls(grid, np.fft.ifftn(coeffs * grid.size).real)
        coeffs = coeffs.copy()
        coeffs.setflags(write=False)
        field.__dict__["coefficients"] = coeffs
        return field

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: GridSpec, fn: Callable[..., np.ndarray]) -> "ScalarField":
        return cls(grid, np.broadcast_to(fn(*grid.coordinates()), grid.shape))

    def mean(self) -> float:
        return float(self.values.mean())

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def _other(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        if isinstance(other, VectorField):
            return other * self
        return ScalarField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.grid, self.values / self._other(other))

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class VectorField:
    components: tuple[ScalarField, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a VectorField needs at least one component")
        grid = comps[0].grid
        if any(c.grid != grid for c in comps):
            raise ValueError("all components must share one grid")
        object.__setattr__(self, "components", comps)

    @property
    def grid(self) -> GridSpec:
        return self.components[0].grid

    @classmethod
    def zeros(cls, grid: GridSpec) -> "VectorField":
        return cls(tuple(ScalarField.zeros(grid) for _ in range(grid.dim)))

    @classmethod
    def from_arrays(cls, grid: GridSpec, arrays: Sequence[np.ndarray]) -> "VectorField":
        return cls(tuple(ScalarField(grid, a) for a in arrays))

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self) -> Iterator[ScalarField]:
        return iter(self.components)

    def __getitem__(self, j: int) -> ScalarField:
        return self.components[j]

    def values(self) -> np.ndarray:
        return np.stack([c.values for c in self.components])

    def max_abs(self) -> float:
        return max(c.max_abs() for c in self.components)

    def dot(self, other: "VectorField") -> ScalarField:
        return ScalarField(self.grid, sum(a.values * b.values for a, b in zip(self, other)))

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(tuple(a + b for a, b in zip(self, other)))

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(tuple(a - b for a, b in zip(self, other)))

    def __mul__(self, other) -> "VectorField":
        return VectorField(tuple(c * other for c in self.components))

    __rmul__ = __mul__

    def __neg__(self) -> "VectorField":
        return VectorField(tuple(-c for c in self.components))


CurlField = Union[ScalarField, VectorField]


# -------------------------
# Differential operators
# -------------------------
def grad(f: ScalarField) -> VectorField:
    tables = _tables(f.grid)
    fh = f.coefficients
    return VectorField(tuple(ScalarField.from_coefficients(f.grid, 1j * kj * fh) for kj in tables.kd))


def partial(f: ScalarField, j: int) -> ScalarField:
    kj = _tables(f.grid).kd[j]
    return ScalarField.from_coefficients(f.grid, 1j * kj * f.coefficients)


def div(v: VectorField) -> ScalarField:
    tables = _tables(v.grid)
    total = sum(1j * kj * vj.coefficients for kj, vj in zip(tables.kd, v))
    return ScalarField.from_coefficients(v.grid, total)


def laplacian(f: ScalarField) -> ScalarField:
    """Spectral Laplacian with the derivative wavenumbers, so div(grad f) == laplacian(f)."""
    return ScalarField.from_coefficients(f.grid, -_tables(f.grid).kd2 * f.coefficients)


def curl(v: VectorField) -> CurlField:
    """d=3 gives a vector field, d=2 the scalar d1 v2 - d2 v1, d=1 an identically zero scalar."""
    grid = v.grid
    if grid.dim == 1:
        return ScalarField.zeros(grid)
    kd = _tables(grid).kd
    vh = [c.coefficients for c in v]
    if grid.dim == 2:
        return ScalarField.from_coefficients(grid, 1j * (kd[0] * vh[1] - kd[1] * vh[0]))
    return VectorField((
        ScalarField.from_coefficients(grid, 1j * (kd[1] * vh[2] - kd[2] * vh[1])),
        ScalarField.from_coefficients(grid, 1j * (kd[2] * vh[0] - kd[0] * vh[2])),
        ScalarField.from_coefficients(grid, 1j * (kd[0] * vh[1] - kd[1] * vh[0])),
    ))


def inv_grad_laplace(f: ScalarField) -> VectorField:
    """
    grad(Laplacian^-1) f on zero-mean fields; the zero mode of every component is zero.
    Raises MeanNotZero when |mean f| exceeds 1e-10 times the RMS of f.
    """
    grid = f.grid
    fh = f.coefficients
    mean = fh[(0,) * grid.dim].real
    rms = np.sqrt(np.sum(np.abs(fh) ** 2))
    if abs(mean) > 1e-10 * rms:
        raise MeanNotZero(mean, rms)
    tables = _tables(grid)
    denom = np.where(tables.kd2 > 0, tables.kd2, 1.0)
    scale = np.where(tables.kd2 > 0, 1.0 / denom, 0.0)
    return VectorField(tuple(
        ScalarField.from_coefficients(grid, -1j * kj * scale * fh) for kj in tables.kd
    ))


def leray_project(v: VectorField) -> VectorField:
    """Solenoidal part v - grad(Laplacian^-1) div v."""
    return v - inv_grad_laplace(div(v))


# -------------------------
# Filters
# -------------------------
def _bump(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    safe = np.where(t > 0, t, 1.0)
    return np.where(t > 0, np.exp(-1.0 / safe), 0.0)


def cutoff_profile(r) -> np.ndarray:
    """Radial cutoff: 1 on r <= 1, 0 on r >= 2, B(2 - r) in between with B(t) = w(t)/(w(t)+w(1-t))."""
    r = np.asarray(r, dtype=float)
    t = np.clip(2.0 - r, 0.0, 1.0)
    w0, w1 = _bump(t), _bump(1.0 - t)
    blend = w0 / np.where(w0 + w1 > 0, w0 + w1, 1.0)
    return np.where(r <= 1.0, 1.0, np.where(r >= 2.0, 0.0, blend))


def mollify(f: ScalarField, h: float) -> ScalarField:
    """Friedrichs mollifier J_h; h = 0 is the identity."""
    if h < 0:
        raise ValueError(f"mollifier scale must be non-negative (got {h})")
    if h == 0:
        return f
    multiplier = cutoff_profile(h * _tables(f.grid).k_abs)
    return ScalarField.from_coefficients(f.grid, multiplier * f.coefficients)


def high_pass(f: ScalarField, h: float) -> ScalarField:
    """(Id - J_h) f."""
    if h == 0:
        return ScalarField.zeros(f.grid)
    multiplier = 1.0 - cutoff_profile(h * _tables(f.grid).k_abs)
    return ScalarField.from_coefficients(f.grid, multiplier * f.coefficients)


def dealias(f: ScalarField) -> ScalarField:
    """2/3 rule: zero every coefficient with some |xi_j| > n/3. Identity when the grid disables it."""
    if not f.grid.dealias:
        return f
    mask = _tables(f.grid).dealias_mask
    return ScalarField.from_coefficients(f.grid, np.where(mask, f.coefficients, 0.0))


def dealias_array(grid: GridSpec, stack: np.ndarray) -> np.ndarray:
    """Dealias a stack of fields whose trailing axes are the grid axes."""
    if not grid.dealias:
        return stack
    axes = tuple(range(stack.ndim - grid.dim, stack.ndim))
    coeffs = np.fft.fftn(stack, axes=axes)
    coeffs *= _tables(grid).dealias_mask
    return np.fft.ifftn(coeffs, axes=axes).real


def product(a: ScalarField, b) -> ScalarField:
    """Pointwise product followed by one dealias pass."""
    return dealias(a * b)


def vector_product(v: VectorField, a) -> VectorField:
    return VectorField(tuple(product(c, a) for c in v))


def advect(v: VectorField, f: ScalarField) -> ScalarField:
    """(v . grad) f, formed in physical space and dealiased."""
    g = grad(f)
    return dealias(ScalarField(f.grid, sum(vj.values * gj.values for vj, gj in zip(v, g))))


# -------------------------
# Norms
# -------------------------
def _weighted_energy(grid: GridSpec, coeffs: np.ndarray, sigma: float, extra=None) -> float:
    weight = (1.0 + _tables(grid).k2) ** sigma
    if extra is not None:
        weight = weight * extra
    return float(grid.volume * np.sum(weight * np.abs(coeffs) ** 2))


def sobolev_norm(f: ScalarField, sigma: float) -> float:
    if sigma < 0:
        raise ValueError(f"Sobolev order must be >= 0 (got {sigma})")
    return float(np.sqrt(_weighted_energy(f.grid, f.coefficients, sigma)))


def gradient_norm(f: ScalarField, sigma: float) -> float:
    """H^sigma norm of the gradient vector, (sum_j ||d_j f||^2)^(1/2)."""
    if sigma < 0:
        raise ValueError(f"Sobolev order must be >= 0 (got {sigma})")
    return float(np.sqrt(_weighted_energy(f.grid, f.coefficients, sigma, _tables(f.grid).kd2)))


def _check_weight(alpha: float) -> None:
    if not 0.0 <= alpha <= 2.0:
        raise DiagnosticError(f"hybrid norm weight must be in [0,2] (got {alpha})")


def hybrid_norm(f: ScalarField, m: int, alpha: float) -> float:
    """||f||_{H^{m-1}} + alpha ||f||_{H^m}."""
    if m < 1:
        raise ValueError(f"hybrid norm index must be >= 1 (got {m})")
    _check_weight(alpha)
    low = sobolev_norm(f, m - 1)
    if alpha == 0:
        return low
    return low + alpha * sobolev_norm(f, m)


def gradient_hybrid_norm(f: ScalarField, m: int, alpha: float) -> float:
    _check_weight(alpha)
    low = gradient_norm(f, m - 1)
    if alpha == 0:
        return low
    return low + alpha * gradient_norm(f, m)


def vector_sobolev_norm(v: VectorField, sigma: float) -> float:
    """Sum-of-components convention."""
    return sum(sobolev_norm(c, sigma) for c in v)


def curl_norm(c: CurlField, sigma: float) -> float:
    if isinstance(c, VectorField):
        return vector_sobolev_norm(c, sigma)
    return sobolev_norm(c, sigma)


def inner(a: ScalarField, b: ScalarField) -> float:
    """L2(T^d) inner product by the grid quadrature, exact for products of resolved fields."""
    return float(a.grid.volume * np.mean(a.values * b.values))


def div_curl_residual(v: VectorField, s: int) -> float:
    """
    Relative defect of ||grad v||^2 = ||div v||^2 + ||curl v||^2 in H^s, which holds
    mode by mode as |xi|^2 |v_hat|^2 = |xi . v_hat|^2 + |xi ^ v_hat|^2.
    """
    grid = v.grid
    kd = _tables(grid).kd
    vh = [c.coefficients for c in v]
    grad_sq = sum(_weighted_energy(grid, kj * vc, s) for kj in kd for vc in vh)
    div_sq = _weighted_energy(grid, sum(kj * vc for kj, vc in zip(kd, vh)), s)
    if grid.dim == 2:
        curl_sq = _weighted_energy(grid, kd[0] * vh[1] - kd[1] * vh[0], s)
    elif grid.dim == 3:
        curl_sq = (_weighted_energy(grid, kd[1] * vh[2] - kd[2] * vh[1], s)
                   + _weighted_energy(grid, kd[2] * vh[0] - kd[0] * vh[2], s)
                   + _weighted_energy(grid, kd[0] * vh[1] - kd[1] * vh[0], s))
    else:
        curl_sq = 0.0
    return abs(grad_sq - div_sq - curl_sq) / max(1.0, grad_sq)


# -------------------------
# Random band-limited profiles
# -------------------------
def random_band_limited(grid: GridSpec, rng: np.random.Generator, band: int) -> ScalarField:
    """
    Zero-mean real profile with modes 1 <= max_j |xi_j| <= band, scaled to max |f| = 1.
    Coefficients are drawn for every wavevector and symmetrized through the real part.
    """
    tables = _tables(grid)
    kmax = np.max(np.abs(np.stack(tables.k)), axis=0)
    active = (kmax >= 1) & (kmax <= band)
    raw = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    raw = np.where(active, raw, 0.0)
    values = np.fft.ifftn(raw).real
    peak = np.max(np.abs(values))
    if peak == 0:
        return ScalarField.zeros(grid)
    return ScalarField(grid, values / peak)
