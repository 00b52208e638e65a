"""Exact N-boson dynamics on a small periodic lattice and its distance to
the Hartree orbital.

The N-body Hamiltonian is

    H = sum_xy hop_xy b_x^* b_y + 1/(2(N-1)) sum_xy pair_xy b_x^* b_y^* b_y b_x

in the colex-ordered occupation basis of the symmetric subspace.  Both the
many-body side and the paired Hartree solve use the same periodic 3-point
finite-difference Laplacian and the same mollified pair potential, so any
distance between them is the mean-field gap and not a discretisation
mismatch.

Lattice wavefunctions are carried as l2 coefficients ``c_x = phi(x_j) sqrt(dx)``
so that ``sum |c|^2 = 1``.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.special import gammaln

from .errors import DomainError, InfeasibleError, StructuralError
from .krylov import expmv
from .lattice import Field, Grid
from .occupation import Sector, sector_dimension
from .potential import PotentialSpec, pair_matrix

DEFAULT_MAX_DIMENSION = 2_000_000


def finite_difference_laplacian(grid: Grid) -> np.ndarray:
    """``-Laplace`` as the periodic 3-point stencil ``(2 c_x - c_{x-1} - c_{x+1}) / dx^2``."""
    if grid.dim != 1:
        raise StructuralError("the many-body lattice is one-dimensional")
    m = grid.points
    eye = np.eye(m)
    return (2 * eye - np.roll(eye, 1, 0) - np.roll(eye, -1, 0)) / grid.spacing**2


def spectral_laplacian(grid: Grid) -> np.ndarray:
    """``-Laplace`` with the exact Fourier symbol ``|k|^2`` as a dense matrix."""
    if grid.dim != 1:
        raise StructuralError("the many-body lattice is one-dimensional")
    m = grid.points
    F = np.fft.fft(np.eye(m), axis=0)
    return (np.fft.ifft(grid.k_squared[:, None] * F, axis=0)).real


def orbital_coefficients(phi) -> np.ndarray:
    """l2 coefficients of a lattice orbital (a space-domain Field or an array)."""
    if isinstance(phi, Field):
        return np.asarray(phi.values, complex).ravel() * math.sqrt(phi.grid.measure)
    return np.asarray(phi, complex).ravel()


@dataclass
class SymmetricState:
    sector: Sector
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, complex)
        if c.shape != (self.sector.dimension,):
            raise StructuralError(f"expected {self.sector.dimension} coefficients, got {c.shape}")
        self.coefficients = c

    @property
    def sites(self) -> int:
        return self.sector.sites

    @property
    def particles(self) -> int:
        return self.sector.particles

    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))


@dataclass
class LatticeHamiltonian:
    grid: Grid
    spec: PotentialSpec
    particles: int
    hop: np.ndarray
    pair: np.ndarray

    @property
    def coupling(self) -> float:
        return 1.0 / (self.particles - 1)

    @cached_property
    def sector(self) -> Sector:
        return Sector(self.hop.shape[0], self.particles)

    @cached_property
    def lowering(self) -> sp.csr_matrix:
        return self.sector.stacked_lowering()

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        m = self.hop.shape[0]
        below = sector_dimension(m, self.particles - 1)
        A = self.lowering
        kin = sp.kron(sp.csr_matrix(self.hop), sp.identity(below, format="csr"), format="csr")
        H = (A.T @ (kin @ A)).tocsr()
        occ = self.sector.occupations.astype(float)
        diag = 0.5 * self.coupling * (np.einsum("ix,xy,iy->i", occ, self.pair, occ) - occ @ np.diag(self.pair))
        return (H + sp.diags(diag)).tocsr()

    def apply(self, state: SymmetricState) -> SymmetricState:
        return SymmetricState(state.sector, self.matrix @ state.coefficients)

    def energy(self, state: SymmetricState) -> float:
        c = state.coefficients
        return float(np.vdot(c, self.matrix @ c).real)


def build_hamiltonian(grid: Grid, spec: PotentialSpec, N: int, kinetic: str = "fd",
                      max_dimension: int = DEFAULT_MAX_DIMENSION) -> LatticeHamiltonian:
    if N < 2:
        raise DomainError("the mean-field Hamiltonian needs N >= 2")
    hop = finite_difference_laplacian(grid) if kinetic == "fd" else spectral_laplacian(grid)
    dim = sector_dimension(grid.points, N)
    if dim > max_dimension:
        raise InfeasibleError(
            f"symmetric space for m={grid.points}, N={N} has dimension {dim} > limit {max_dimension}")
    return LatticeHamiltonian(grid, spec, N, hop, pair_matrix(grid, spec))


def product_state(sector: Sector, orbital) -> SymmetricState:
    """``phi^{otimes N}`` in the occupation basis:
    ``sqrt(N!/prod n_x!) prod_x c_x^{n_x}``."""
    c = orbital_coefficients(orbital)
    if c.shape != (sector.sites,):
        raise StructuralError("orbital does not match the lattice")
    occ = sector.occupations
    N = sector.particles
    logamp = 0.5 * (gammaln(N + 1) - gammaln(occ + 1.0).sum(axis=1))
    # product over particles: gather c at each particle's site
    cum = np.cumsum(occ, axis=1)
    prod = np.ones(len(occ), complex)
    for j in range(N):
        pos = np.argmax(cum > j, axis=1)
        prod *= c[pos]
    return SymmetricState(sector, np.exp(logamp) * prod)


def evolve_exact(state: SymmetricState, H: LatticeHamiltonian, times, tol: float = 1e-12,
                 krylov_dim: int = 20) -> list:
    """States ``exp(-i H t) psi`` at each of the increasing ``times``."""
    out = []
    psi = state.coefficients
    t_prev = 0.0
    for t in np.asarray(times, float):
        psi = expmv(H.matrix, psi, t - t_prev, tol=tol, krylov_dim=krylov_dim)
        out.append(SymmetricState(state.sector, psi))
        t_prev = t
    return out


@dataclass
class ReducedDensity:
    matrix: np.ndarray

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T)).min())


def reduced_density(state: SymmetricState, lowering: sp.csr_matrix | None = None) -> ReducedDensity:
    """``gamma[x, y] = <b_y psi, b_x psi> / N``."""
    A = state.sector.stacked_lowering() if lowering is None else lowering
    m = state.sites
    B = (A @ state.coefficients).reshape(m, -1)
    return ReducedDensity(B @ B.conj().T / state.particles)


def trace_distance(gamma, phi) -> float:
    """Trace norm of ``gamma - |phi><phi|`` from a full eigendecomposition."""
    g = gamma.matrix if isinstance(gamma, ReducedDensity) else np.asarray(gamma)
    c = orbital_coefficients(phi)
    diff = g - np.outer(c, c.conj())
    return float(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


# --------------------------------------------------------------------------
# first-quantized reference representation (small cases only)

def to_tensor(state: SymmetricState) -> np.ndarray:
    """Symmetric wavefunction ``psi(x_1..x_N)`` as an ``m^N`` array."""
    m, N = state.sites, state.particles
    idx = np.indices((m,) * N).reshape(N, -1).T
    occ = np.zeros((len(idx), m), dtype=np.int16)
    for j in range(N):
        np.add.at(occ, (np.arange(len(idx)), idx[:, j]), 1)
    r = state.sector.index(occ)
    weight = np.exp(0.5 * (gammaln(occ + 1.0).sum(axis=1) - gammaln(N + 1)))
    return (state.coefficients[r] * weight).reshape((m,) * N)


def tensor_reduced_density(psi: np.ndarray) -> np.ndarray:
    m = psi.shape[0]
    flat = psi.reshape(m, -1)
    return flat @ flat.conj().T


def tensor_hamiltonian_apply(psi: np.ndarray, hop: np.ndarray, pair: np.ndarray) -> np.ndarray:
    """First-quantized ``sum_j hop_j + 1/(N-1) sum_{i<j} pair(x_i, x_j)``."""
    N = psi.ndim
    out = np.zeros_like(psi)
    for j in range(N):
        out += np.moveaxis(np.tensordot(hop, psi, axes=([1], [j])), 0, j)
    grids = np.indices(psi.shape)
    pot = np.zeros(psi.shape)
    for i in range(N):
        for j in range(i + 1, N):
            pot += pair[grids[i], grids[j]]
    return out + pot * psi / (N - 1)


# --------------------------------------------------------------------------
# the paired Hartree solve

def lattice_hartree(grid: Grid, spec: PotentialSpec, orbital, times, hop: np.ndarray | None = None,
                    rtol: float = 1e-12, atol: float = 1e-14) -> np.ndarray:
    """Solve ``i c' = hop c + (pair |c|^2) c`` on the lattice; rows are ``c(t)``."""
    c0 = orbital_coefficients(orbital)
    times = np.asarray(times, float)
    hop = finite_difference_laplacian(grid) if hop is None else hop
    if spec.lam == 0:
        w, U = np.linalg.eigh(hop)
        coeff = U.conj().T @ c0
        return np.array([U @ (np.exp(-1j * w * t) * coeff) for t in times])
    V = pair_matrix(grid, spec)

    def rhs(_t, y):
        c = y[: len(c0)] + 1j * y[len(c0):]
        dc = -1j * (hop @ c + (V @ np.abs(c) ** 2) * c)
        return np.concatenate([dc.real, dc.imag])

    y0 = np.concatenate([c0.real, c0.imag])
    t_eval = np.unique(np.concatenate([[0.0], times]))
    sol = solve_ivp(rhs, (0.0, float(t_eval[-1])), y0, method="DOP853", t_eval=t_eval, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"Hartree integration failed: {sol.message}")
    ys = sol.y[: len(c0)] + 1j * sol.y[len(c0):]
    lookup = {float(t): ys[:, i] for i, t in enumerate(sol.t)}
    return np.array([lookup[float(t)] for t in times])


def gaussian_orbital(grid: Grid, width: float = 1.0, center: float = 0.0, momentum: float = 0.0) -> np.ndarray:
    """Normalized Gaussian lattice orbital (l2 coefficients)."""
    x = grid.axis
    c = np.exp(-((x - center) ** 2) / (4 * width**2) + 1j * momentum * x)
    return c / np.linalg.norm(c)


# --------------------------------------------------------------------------
# the convergence-rate experiment

@dataclass
class RateReport:
    entries: list
    slopes: dict
    slopes_vs_pairs: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def distances(self, t: float) -> tuple:
        rows = [e for e in self.entries if abs(e["t"] - t) < 1e-12]
        return np.array([e["N"] for e in rows]), np.array([e["distance"] for e in rows])

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "t", "distance", "C_estimate"])
            for e in self.entries:
                w.writerow([e["N"], repr(float(e["t"])), repr(float(e["distance"])), repr(float(e["C_estimate"]))])
        return path

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps({"slopes": self.slopes, "slopes_vs_pairs": self.slopes_vs_pairs,
                                    "entries": self.entries, "meta": self.meta},
                                   indent=2, default=float))
        return path


def _distances_for_N(args):
    N, grid, spec, times, c0, hartree_t, max_dimension = args
    H = build_hamiltonian(grid, spec, N, max_dimension=max_dimension)
    psi0 = product_state(H.sector, c0)
    states = evolve_exact(psi0, H, times)
    A = H.lowering
    return [trace_distance(reduced_density(s, A), ct) for s, ct in zip(states, hartree_t)]


def rate_experiment(N_list, grid: Grid, spec: PotentialSpec, t_probes, orbital=None,
                    hartree_solver=None, max_dimension: int = DEFAULT_MAX_DIMENSION,
                    jobs: int = 1, skip_below: float = 1e-8) -> RateReport:
    """Distances ``Tr|gamma_N(t) - |phi_t><phi_t||`` over ``N`` and ``t``, with
    per-time log-log slopes against ``N`` (skipped when every distance is
    below ``skip_below``, e.g. without interaction)."""
    N_list = [int(n) for n in N_list]
    too_big = {n: sector_dimension(grid.points, n) for n in N_list
               if sector_dimension(grid.points, n) > max_dimension}
    if too_big:
        raise InfeasibleError(f"dimensions {too_big} exceed the limit {max_dimension}")
    times = np.asarray(t_probes, float)
    c0 = gaussian_orbital(grid) if orbital is None else orbital_coefficients(orbital)
    solver = lattice_hartree if hartree_solver is None else hartree_solver
    hartree_t = solver(grid, spec, c0, times)
    tasks = [(N, grid, spec, times, c0, hartree_t, max_dimension) for N in N_list]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_distances_for_N, tasks))
    else:
        results = [_distances_for_N(t) for t in tasks]
    entries = []
    for N, ds in zip(N_list, results):
        for t, d in zip(times, ds):
            entries.append({"N": N, "t": float(t), "distance": float(d), "C_estimate": float(d * N)})
    # the coupling is 1/(N-1), so the slope against N-1 is reported alongside
    slopes, shifted = {}, {}
    for t in times:
        Ns = np.array(N_list, float)
        ds = np.array([e["distance"] for e in entries if e["t"] == float(t)])
        key = f"{t:g}"
        if len(Ns) < 2 or np.all(ds < skip_below) or np.any(ds <= 0):
            slopes[key] = shifted[key] = None
            continue
        slopes[key] = float(np.polyfit(np.log(Ns), np.log(ds), 1)[0])
        shifted[key] = float(np.polyfit(np.log(Ns - 1), np.log(ds), 1)[0])
    meta = {"grid": asdict(grid), "spec": asdict(spec), "N_list": N_list, "t_probes": times.tolist()}
    return RateReport(entries, slopes, shifted, meta)
