"""Screened singular pair potentials ``lam * exp(-mu r) * r**(-gamma)`` on
periodic lattices.

The singularity at ``r = 0`` is removed by the mollification
``(r^2 + eps^2)^(-gamma/2)`` with ``eps = mollification * dx``.  Distances are
minimal-image distances, so the sampled potential is periodic.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import DomainError, StructuralError
from .lattice import FFT_WORKERS, Field, Grid


@dataclass(frozen=True)
class PotentialSpec:
    lam: float
    mu: float = 0.0
    gamma: float = 1.0
    mollification: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.5:
            raise DomainError(f"gamma must lie in (0, 3/2), got {self.gamma}")
        if self.mu < 0:
            raise DomainError(f"mu must be nonnegative, got {self.mu}")
        if not self.mollification > 0:
            raise DomainError("mollification must be positive")

    def epsilon(self, grid: Grid) -> float:
        return self.mollification * grid.spacing

    def with_lambda(self, lam: float) -> "PotentialSpec":
        return replace(self, lam=lam)

    def evaluate(self, r, eps: float):
        """Mollified potential at distance ``r``."""
        r = np.asarray(r, float)
        return self.lam * np.exp(-self.mu * r) * (r * r + eps * eps) ** (-self.gamma / 2)


def _displacement_radius(grid: Grid) -> np.ndarray:
    # grid coordinates already are minimal-image displacements from the origin
    return np.sqrt(grid.radius_squared)


def sample_potential(grid: Grid, spec: PotentialSpec) -> Field:
    """``V_eps`` on the displacement lattice, centred like the grid."""
    vals = spec.evaluate(_displacement_radius(grid), spec.epsilon(grid))
    return Field(grid, np.asarray(vals, float))


@lru_cache(maxsize=32)
def _kernel_array(grid: Grid, spec: PotentialSpec, power: int) -> np.ndarray:
    v = spec.evaluate(_displacement_radius(grid), spec.epsilon(grid)) ** power
    # move displacement zero to index 0 before transforming
    k = sfft.fftn(sfft.ifftshift(v), workers=FFT_WORKERS) * grid.measure
    k = k.real
    k.setflags(write=False)
    return k


def kernel_fourier(grid: Grid, spec: PotentialSpec, power: int = 1) -> Field:
    """Transfer function ``K(k) = sum_x dx^d exp(-i k.x) V_eps(x)^power``.

    It approximates the continuum transform of ``V**power`` and is what
    :func:`convolve` multiplies by.  Results are cached per (grid, spec).
    """
    return Field(grid, _kernel_array(grid, spec, power), "frequency")


@lru_cache(maxsize=32)
def kernel_rfft(grid: Grid, spec: PotentialSpec, power: int = 1) -> np.ndarray:
    """Half-spectrum of :func:`kernel_fourier` matching ``scipy.fft.rfftn``."""
    k = _kernel_array(grid, spec, power)
    return np.ascontiguousarray(k[..., : grid.points // 2 + 1])


def convolve(kernel_hat: Field, density: Field) -> Field:
    """Periodic convolution ``(V * rho)(x) = sum_y V(x - y) rho(y) dy``."""
    if kernel_hat.grid != density.grid:
        raise StructuralError("kernel and density live on different grids")
    if kernel_hat.domain != "frequency" or density.domain != "space":
        raise StructuralError("convolve expects a frequency kernel and a space density")
    rho = density.values
    out = sfft.ifftn(kernel_hat.values * sfft.fftn(rho, workers=FFT_WORKERS), workers=FFT_WORKERS)
    if not np.iscomplexobj(rho) and np.isrealobj(kernel_hat.values):
        out = out.real
    return Field(density.grid, out)


def convolve_density(values: np.ndarray, grid: Grid, spec: PotentialSpec, power: int = 1) -> np.ndarray:
    """Array-level ``V^power * |values|^2`` using real transforms."""
    rho = np.abs(values) ** 2
    kr = kernel_rfft(grid, spec, power)
    return sfft.irfftn(kr * sfft.rfftn(rho, workers=FFT_WORKERS), grid.shape, workers=FFT_WORKERS)


def interaction_l2_map(spec: PotentialSpec, grid: Grid, phi: Field) -> Field:
    """``x -> ||V(x - .) phi||_2`` via one convolution of ``V^2`` with ``|phi|^2``."""
    if spec.lam == 0:
        return Field(grid, np.zeros(grid.shape))
    conv = convolve_density(phi.values, grid, spec, power=2)
    return Field(grid, np.sqrt(np.maximum(conv, 0.0)))


def interaction_sup(spec: PotentialSpec, grid: Grid, values: np.ndarray) -> float:
    """``sup_x ||V(x - .) phi||_2`` for a raw value array."""
    if spec.lam == 0:
        return 0.0
    conv = convolve_density(values, grid, spec, power=2)
    return float(np.sqrt(max(conv.max(), 0.0)))


def hardy_ratio(spec: PotentialSpec, grid: Grid, phi: Field) -> float:
    """``sup_x ||V(x-.)phi||_2 / (|lam| ||phi||_H1)``; monitored for ``gamma <= 1``."""
    from .lattice import field_norms

    if spec.lam == 0:
        return 0.0
    return interaction_sup(spec, grid, phi.values) / (abs(spec.lam) * field_norms(phi)["h1"])


def pair_matrix(grid: Grid, spec: PotentialSpec) -> np.ndarray:
    """Dense ``V_eps(x_i - x_j)`` over all lattice points (minimal image).

    Intended for small lattices (1-D many-body runs, brute-force checks).
    """
    pts = np.stack([c.ravel() for c in np.meshgrid(*([grid.axis] * grid.dim), indexing="ij")], axis=1)
    diff = np.abs(pts[:, None, :] - pts[None, :, :])
    L = grid.box_length
    diff = np.minimum(diff, L - diff)
    r = np.sqrt(np.sum(diff**2, axis=-1))
    return spec.evaluate(r, spec.epsilon(grid))
