"""Periodic grids, lattice fields and spectral calculus.

Conventions
-----------
Grid points sit at ``x_j = (j - m/2) * dx`` for ``j = 0..m-1`` on every axis,
so the box is ``[-L/2, L/2)``.  Frequency-domain arrays are stored in the
usual FFT order (``k = 2 pi * fftfreq(m, dx)``).

The forward transform returns the coefficients of ``f`` against the
orthonormal plane waves ``exp(i k.x) / L**(d/2)``::

    f_hat(k) = L**(-d/2) * dx**d * sum_j exp(-i k.x_j) f(x_j)

so that ``sum_k |f_hat(k)|**2 == sum_j |f(x_j)|**2 dx**d`` exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import StructuralError

FFT_WORKERS = -1


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with ``points`` per axis in ``dim`` dimensions."""

    dim: int
    points: int
    box_length: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise StructuralError(f"dim must be 1, 2 or 3, got {self.dim}")
        m = self.points
        if m < 2 or m & (m - 1):
            raise StructuralError(f"points per axis must be a power of two, got {m}")
        if not self.box_length > 0:
            raise StructuralError("box_length must be positive")

    @property
    def spacing(self) -> float:
        return self.box_length / self.points

    @property
    def shape(self) -> tuple:
        return (self.points,) * self.dim

    @property
    def size(self) -> int:
        return self.points**self.dim

    @property
    def measure(self) -> float:
        """Integration weight ``dx**dim`` of one lattice cell."""
        return self.spacing**self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        return (np.arange(self.points) - self.points // 2) * self.spacing

    @cached_property
    def axis_wavenumbers(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.points, self.spacing)

    def coordinates(self) -> list:
        """Broadcastable coordinate arrays, one per axis."""
        return _broadcast_axes(self.axis, self.dim)

    def wavenumbers(self) -> list:
        return _broadcast_axes(self.axis_wavenumbers, self.dim)

    @cached_property
    def radius_squared(self) -> np.ndarray:
        return sum(c**2 for c in self.coordinates())

    @cached_property
    def k_squared(self) -> np.ndarray:
        return sum(k**2 for k in self.wavenumbers())

    @cached_property
    def _phase(self) -> np.ndarray:
        # exp(-i k x_0) per axis, so coefficients refer to the physical origin
        x0 = self.axis[0]
        phase = np.ones(self.shape, complex)
        for k in self.wavenumbers():
            phase = phase * np.exp(-1j * k * x0)
        return phase

    def shell_mask(self, fraction: float = 0.125) -> np.ndarray:
        """Points whose max-norm distance from the centre exceeds
        ``(1 - fraction) * L / 2``."""
        cut = (1.0 - fraction) * self.box_length / 2
        dist = np.zeros(self.shape)
        for c in self.coordinates():
            dist = np.maximum(dist, np.abs(c))
        return dist >= cut


def _broadcast_axes(values, dim):
    out = []
    for ax in range(dim):
        shape = [1] * dim
        shape[ax] = -1
        out.append(values.reshape(shape))
    return out


@dataclass(frozen=True)
class Field:
    """Complex lattice function on ``grid``.

    ``domain`` is ``"space"`` for point values or ``"frequency"`` for
    plane-wave coefficients (FFT order).
    """

    grid: Grid
    values: np.ndarray
    domain: str = "space"

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape != self.grid.shape:
            raise StructuralError(
                f"field shape {vals.shape} does not match grid shape {self.grid.shape}"
            )
        if self.domain not in ("space", "frequency"):
            raise StructuralError(f"unknown domain {self.domain!r}")
        object.__setattr__(self, "values", vals)

    @property
    def measure_weight(self) -> float:
        return self.grid.measure if self.domain == "space" else 1.0

    def inner(self, other: "Field") -> complex:
        """``<self, other>`` with the conjugate on the left."""
        _same_grid(self, other)
        if self.domain != other.domain:
            raise StructuralError("inner product across domains")
        return complex(np.vdot(self.values, other.values) * self.measure_weight)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.measure_weight))

    def __mul__(self, c):
        return Field(self.grid, self.values * c, self.domain)

    __rmul__ = __mul__

    def __add__(self, other):
        _same_grid(self, other)
        return Field(self.grid, self.values + other.values, self.domain)

    def __sub__(self, other):
        _same_grid(self, other)
        return Field(self.grid, self.values - other.values, self.domain)

    def normalized(self) -> "Field":
        n = self.norm()
        if n == 0:
            raise StructuralError("cannot normalize the zero field")
        return self * (1.0 / n)


def _same_grid(a: Field, b: Field):
    if a.grid != b.grid:
        raise StructuralError("fields live on different grids")


def forward(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Array-level forward transform (see module docstring)."""
    scale = grid.measure / grid.box_length ** (grid.dim / 2)
    return sfft.fftn(values, workers=FFT_WORKERS) * (grid._phase * scale)


def inverse(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    scale = grid.box_length ** (grid.dim / 2) / grid.measure
    return sfft.ifftn(coeffs * (np.conj(grid._phase) * scale), workers=FFT_WORKERS)


def spectral_transform(f: Field, direction: str = "forward") -> Field:
    if f.values.shape != f.grid.shape:
        raise StructuralError("field dimensions do not match grid")
    if direction == "forward":
        if f.domain != "space":
            raise StructuralError("forward transform expects a space-domain field")
        return Field(f.grid, forward(f.values, f.grid), "frequency")
    if direction == "inverse":
        if f.domain != "frequency":
            raise StructuralError("inverse transform expects a frequency-domain field")
        return Field(f.grid, inverse(f.values, f.grid), "space")
    raise StructuralError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def laplacian_apply(f: Field) -> Field:
    """Spectral Laplacian: multiply coefficients by ``-|k|^2`` and invert."""
    g = f.grid
    coeffs = sfft.fftn(f.values, workers=FFT_WORKERS)
    return Field(g, sfft.ifftn(-g.k_squared * coeffs, workers=FFT_WORKERS))


def gradient_norm_squared(values: np.ndarray, grid: Grid) -> float:
    """``||grad f||_2^2`` computed spectrally."""
    coeffs = forward(values, grid)
    return float(np.sum(grid.k_squared * np.abs(coeffs) ** 2))


def field_norms(f: Field) -> dict:
    vals = f.values
    l2sq = float(np.sum(np.abs(vals) ** 2) * f.grid.measure)
    grad = gradient_norm_squared(vals, f.grid)
    return {
        "l2": np.sqrt(l2sq),
        "linf": float(np.max(np.abs(vals))) if vals.size else 0.0,
        "h1": np.sqrt(l2sq + grad),
    }


def weighted_norm_surrogate(f: Field, order: float) -> dict:
    """Discrete stand-ins for the weighted Sobolev norms of order ``order``.

    ``sobolev`` is ``||(1+|k|^2)^{s/2} f_hat||`` and ``moment`` is
    ``||(1+|x|^2)^{s/2} f||``; ``total`` is their sum.
    """
    g = f.grid
    coeffs = forward(f.values, g)
    sob = np.sqrt(np.sum((1 + g.k_squared) ** order * np.abs(coeffs) ** 2))
    mom = np.sqrt(np.sum((1 + g.radius_squared) ** order * np.abs(f.values) ** 2) * g.measure)
    return {"order": order, "sobolev": float(sob), "moment": float(mom), "total": float(sob + mom)}


def gaussian(grid: Grid, width: float, center=None) -> Field:
    """Normalized isotropic Gaussian whose density has standard deviation
    ``width`` per axis: ``phi ~ exp(-|x - c|^2 / (4 width^2))``."""
    if width <= 0:
        raise StructuralError("width must be positive")
    center = np.zeros(grid.dim) if center is None else np.asarray(center, float)
    r2 = sum((c - x0) ** 2 for c, x0 in zip(grid.coordinates(), center))
    vals = np.exp(-r2 / (4 * width**2)).astype(complex)
    return Field(grid, vals).normalized()


def free_gaussian_values(grid: Grid, width: float, t: float) -> np.ndarray:
    """Closed-form solution of ``i phi_t = -Laplace phi`` for :func:`gaussian`
    data in the continuum (no periodic images)."""
    a = width**2
    d = grid.dim
    z = a + 1j * t
    return (2 * np.pi * a) ** (-d / 4) * (a / z) ** (d / 2) * np.exp(-grid.radius_squared / (4 * z))


def free_gaussian_linf(width: float, t, dim: int = 3):
    """Peak modulus of the free Gaussian at time ``t`` (array friendly)."""
    a = width**2
    t = np.asarray(t, float)
    return (2 * np.pi) ** (-dim / 4) * a ** (dim / 4) * (a * a + t * t) ** (-dim / 4)
