"""Periodic lattice on [-pi L, pi L)^n with FFT transforms and Bessel potentials.

Arrays are stored in FFT order along every frequency axis, so ``grid.xi``
and ``fft`` outputs line up index for index.  The frequency measure is
``dxi / (2 pi)^n``; with the lattice spacing ``1/L`` this makes the
discrete inverse transform carry the factor ``(2 pi L)^{-n}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ParameterError, ShapeError


@dataclass(frozen=True)
class Grid:
    dim: int
    half_length: float
    points: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ParameterError(f"dim must be 1 or 2, got {self.dim}")
        if self.points < 2 or self.points & (self.points - 1):
            raise ParameterError(f"points per axis must be a power of two, got {self.points}")
        if not self.half_length > 0:
            raise ParameterError("half_length must be positive")

    @property
    def L(self) -> float:
        return self.half_length

    @property
    def P(self) -> int:
        return self.points

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def size(self) -> int:
        return self.points**self.dim

    @property
    def spacing(self) -> float:
        return 2 * np.pi * self.half_length / self.points

    @property
    def box(self) -> float:
        """Side length of the periodic box."""
        return 2 * np.pi * self.half_length

    @property
    def weight(self) -> float:
        """Trapezoid weight per lattice cell."""
        return self.spacing**self.dim

    @property
    def xi_weight(self) -> float:
        """Weight of one frequency cell under the normalized measure."""
        return (1.0 / (2 * np.pi * self.half_length)) ** self.dim

    @cached_property
    def x1(self) -> np.ndarray:
        return -np.pi * self.half_length + self.spacing * np.arange(self.points)

    @cached_property
    def xi1(self) -> np.ndarray:
        # fftfreq ordering; the Nyquist index carries m = -P/2
        return np.fft.fftfreq(self.points, d=1.0 / self.points) / self.half_length

    @cached_property
    def x(self) -> np.ndarray:
        """Lattice points, shape ``grid.shape + (dim,)``."""
        return np.stack(np.meshgrid(*([self.x1] * self.dim), indexing="ij"), axis=-1)

    @cached_property
    def xi(self) -> np.ndarray:
        """Frequency lattice in FFT order, shape ``grid.shape + (dim,)``."""
        return np.stack(np.meshgrid(*([self.xi1] * self.dim), indexing="ij"), axis=-1)

    @cached_property
    def bracket(self) -> np.ndarray:
        """<xi> on the frequency lattice."""
        return np.sqrt(1.0 + np.sum(self.xi**2, axis=-1))

    @cached_property
    def _phase(self) -> np.ndarray:
        # exp(-i x_0 xi_m) = (-1)^m since x_0 = -pi L and xi_m = m/L
        m = np.fft.fftfreq(self.points, d=1.0 / self.points).astype(int)
        sign1 = np.where(m % 2 == 0, 1.0, -1.0)
        out = sign1
        for _ in range(self.dim - 1):
            out = np.multiply.outer(out, sign1)
        return out

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(self.dim))

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.dim, self.half_length, self.points * factor)

    def function(self, f, N: int | None = None) -> "GridFunction":
        """Sample a callable ``f(x)`` with ``x`` of shape ``(..., dim)``."""
        vals = np.asarray(f(self.x), dtype=complex)
        if vals.shape == self.shape:
            vals = vals[..., None]
        return GridFunction(self, vals if N is None else vals.reshape(self.shape + (N,)))


@dataclass
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape == self.grid.shape:
            v = v[..., None]
        if v.ndim != self.grid.dim + 1 or v.shape[:-1] != self.grid.shape:
            raise ShapeError(f"values of shape {v.shape} do not fit grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ShapeError("grid function has non-finite entries")
        self.values = v

    @property
    def N(self) -> int:
        return self.values.shape[-1]

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def flat(self) -> np.ndarray:
        """Values as a vector in row-major (lattice, component) order."""
        return self.values.reshape(-1)

    def norm(self) -> float:
        return float(np.sqrt(self.grid.weight * np.sum(np.abs(self.values) ** 2)))

    def __add__(self, other):
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        return self.with_values(self.values - other.values)

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__


@dataclass
class FourierCoefficients:
    grid: Grid
    values: np.ndarray

    def l2_norm(self) -> float:
        """Norm under the normalized frequency measure."""
        return float(np.sqrt(self.grid.xi_weight * np.sum(np.abs(self.values) ** 2)))


def _check(u: GridFunction, grid: Grid | None = None) -> Grid:
    g = u.grid
    if grid is not None and grid != g:
        raise ShapeError("grid mismatch")
    if u.values.shape[:-1] != g.shape:
        raise ShapeError(f"values of shape {u.values.shape} do not fit grid {g.shape}")
    return g


def forward_fourier(u: GridFunction) -> FourierCoefficients:
    g = _check(u)
    hat = np.fft.fftn(u.values, axes=g.axes) * g._phase[..., None] * g.weight
    return FourierCoefficients(g, hat)


def inverse_fourier(c: FourierCoefficients) -> GridFunction:
    g = c.grid
    vals = np.fft.ifftn(c.values * g._phase[..., None], axes=g.axes) / g.weight
    return GridFunction(g, vals)


def fourier_multiplier(u: GridFunction, symbol_values: np.ndarray) -> GridFunction:
    """Apply a scalar multiplier sampled on the frequency lattice (FFT order)."""
    g = _check(u)
    hat = np.fft.fftn(u.values, axes=g.axes)
    out = np.fft.ifftn(hat * np.asarray(symbol_values)[..., None], axes=g.axes)
    return GridFunction(g, out)


def bessel_multiplier(s: float, u: GridFunction) -> GridFunction:
    return fourier_multiplier(u, u.grid.bracket**s)


def sobolev_norm(u: GridFunction, s: float) -> float:
    if s == 0:
        return u.norm()
    return bessel_multiplier(s, u).norm()


def spectral_derivative(u: GridFunction, beta) -> GridFunction:
    """D^beta with D = -i d/dx.  Nyquist modes are kept (multiplier xi)."""
    g = u.grid
    beta = tuple(int(b) for b in np.atleast_1d(beta))
    if len(beta) != g.dim:
        raise ShapeError("multi-index length must equal grid dimension")
    mult = np.ones(g.shape)
    for axis, b in enumerate(beta):
        if b:
            mult = mult * g.xi[..., axis] ** b
    return fourier_multiplier(u, mult)
