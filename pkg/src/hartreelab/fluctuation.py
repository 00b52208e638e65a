"""Fluctuation dynamics around the Hartree orbital on a truncated Fock space.

Everything is expressed in an orthonormal mode basis ``u_1..u_M`` of the
lattice, with the interaction tensor

    W[i,j,k,l] = sum_xy conj(u_i(x)) conj(u_j(y)) V(x-y) u_k(x) u_l(y)

and the one-particle kinetic matrix ``K = <u_i, -Laplace u_j>``.  In these
coordinates the generators read

    L2 = dGamma(K + D + X) + 1/2 sum (P_ij a_i^* a_j^* + h.c.)
         D_ij = sum_kl W[i,k,j,l] conj(phi_k) phi_l        (direct)
         X_ij = sum_kl W[k,i,j,l] conj(phi_k) phi_l        (exchange)
         P_ij = sum_kl W[i,j,k,l] phi_k phi_l              (pairing)
    L3 = N^{-1/2} sum W[i,j,k,l] phi_l a_i^* a_j^* a_k + h.c.
    L4 = (2N)^{-1} sum W[i,j,k,l] a_i^* a_j^* a_k a_l

The orbital ``phi_t`` follows the Galerkin projection of the Hartree equation
onto the same modes, ``i phi_i' = K phi + sum W[i,j,k,l] conj(phi_j) phi_k phi_l``,
so the linear term of the expansion vanishes identically.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .errors import CoverageError, DomainError, StructuralError, TruncationError
from .fock import (FockSpace, FockVector, ModeBasis, d_N, displaced_number_state,
                   field_operator, second_quantize)
from .krylov import expmv
from .lattice import Field
from .manybody import finite_difference_laplacian, lattice_hartree, orbital_coefficients
from .potential import PotentialSpec, convolve_density, pair_matrix

VARIANTS = ("full", "tilde")


# --------------------------------------------------------------------------
# mode-space model

def interaction_tensor(modes: np.ndarray, pair: np.ndarray) -> np.ndarray:
    """``W[i,j,k,l]`` for l2-normalized mode rows over a lattice with pair matrix ``pair``."""
    u = np.asarray(modes, complex)
    P = np.einsum("ix,kx->ikx", u.conj(), u)
    return np.einsum("ikx,xy,jly->ijkl", P, pair, P, optimize=True)


def site_tensor(v_matrix: np.ndarray) -> np.ndarray:
    """Tensor for the site basis itself: ``W[i,j,k,l] = v_ij delta_ik delta_jl``."""
    v = np.asarray(v_matrix)
    M = len(v)
    W = np.zeros((M,) * 4, dtype=complex)
    i, j = np.meshgrid(np.arange(M), np.arange(M), indexing="ij")
    W[i, j, i, j] = v
    return W


@dataclass(frozen=True)
class ModeModel:
    basis: ModeBasis
    kinetic: np.ndarray
    tensor: np.ndarray

    @property
    def modes(self) -> int:
        return self.basis.mode_count

    def hartree_rhs(self, phi: np.ndarray) -> np.ndarray:
        """``-i (K phi + W conj(phi) phi phi)``."""
        nl = np.einsum("ijkl,j,k,l->i", self.tensor, phi.conj(), phi, phi)
        return -1j * (self.kinetic @ phi + nl)

    def interaction_density(self, phi: np.ndarray) -> float:
        """``sum_x (V * |phi|^2)(x) |phi(x)|^2`` in mode coordinates."""
        return float(np.einsum("ijkl,i,j,k,l->", self.tensor, phi.conj(), phi.conj(), phi, phi).real)


def mode_model(basis: ModeBasis, hop: np.ndarray, pair: np.ndarray) -> ModeModel:
    """Restrict a lattice kinetic matrix and pair matrix to ``basis`` (l2 coefficient modes)."""
    if basis.weight != 1.0:
        raise StructuralError("mode_model expects l2-normalized coefficient modes")
    u = basis.modes
    K = u.conj() @ hop @ u.T
    return ModeModel(basis, K, interaction_tensor(u, pair))


def model_from_matrices(basis: ModeBasis, kinetic: np.ndarray, v_matrix: np.ndarray) -> ModeModel:
    """Model whose interaction is diagonal in the basis (a lattice site basis):
    ``W[i,j,k,l] = v_ij delta_ik delta_jl``."""
    K = np.asarray(kinetic, complex)
    M = basis.mode_count
    if K.shape != (M, M) or np.shape(v_matrix) != (M, M):
        raise StructuralError(f"kinetic and v_matrix must be {M}x{M}")
    return ModeModel(basis, K, site_tensor(v_matrix))


def trajectory_modes(grid, spec: PotentialSpec, orbital, horizon: float, count: int = 4,
                     samples: int = 64) -> ModeBasis:
    """The initial orbital followed by the leading singular vectors of the
    lattice Hartree trajectory on ``[0, horizon]`` (orthogonalized against it)."""
    c0 = orbital_coefficients(orbital)
    c0 = c0 / np.linalg.norm(c0)
    if count > grid.points:
        raise DomainError("more modes than lattice sites")
    times = np.linspace(0.0, horizon, samples)
    traj = lattice_hartree(grid, spec, c0, times).T
    rest = traj - np.outer(c0, c0.conj() @ traj)
    U, s, _ = np.linalg.svd(rest, full_matrices=True)
    modes = [c0] + [U[:, i] for i in range(count - 1)]
    Q, _ = np.linalg.qr(np.array(modes).T)
    # QR may flip the phase of the first column; restore the orbital itself
    Q[:, 0] *= np.vdot(Q[:, 0], c0) / abs(np.vdot(Q[:, 0], c0))
    return ModeBasis(Q.T.copy())


def lattice_mode_model(grid, spec: PotentialSpec, orbital, horizon: float, count: int = 4) -> ModeModel:
    basis = trajectory_modes(grid, spec, orbital, horizon, count)
    return mode_model(basis, finite_difference_laplacian(grid), pair_matrix(grid, spec))


class OrbitalFlow:
    """Dense-output solution of the mode-space Hartree equation."""

    def __init__(self, model: ModeModel, phi0, horizon: float, rtol: float = 1e-12, atol: float = 1e-14):
        phi0 = np.asarray(phi0, complex)
        if abs(np.linalg.norm(phi0) - 1) > 1e-10:
            raise DomainError("orbital must be normalized in mode coordinates")
        self.model = model
        self.horizon = horizon
        M = model.modes

        def rhs(_t, y):
            d = model.hartree_rhs(y[:M] + 1j * y[M:])
            return np.concatenate([d.real, d.imag])

        sol = solve_ivp(rhs, (0.0, horizon), np.concatenate([phi0.real, phi0.imag]),
                        method="DOP853", rtol=rtol, atol=atol, dense_output=True)
        if not sol.success:
            raise RuntimeError(sol.message)
        self._sol = sol
        self._M = M

    def __call__(self, t: float) -> np.ndarray:
        if t < -1e-12 or t > self.horizon + 1e-12:
            raise CoverageError(f"t={t} outside [0, {self.horizon}]")
        y = self._sol.sol(min(max(t, 0.0), self.horizon))
        return y[: self._M] + 1j * y[self._M:]


# --------------------------------------------------------------------------
# generators

@dataclass
class GeneratorSet:
    l0_phase: float
    l2: np.ndarray
    l3: np.ndarray
    l4: np.ndarray
    time: float
    orbital: np.ndarray

    def total(self, variant: str) -> np.ndarray:
        if variant == "full":
            return self.l2 + self.l3 + self.l4
        if variant == "tilde":
            return self.l2 + self.l4
        raise DomainError(f"variant must be one of {VARIANTS}")


class _OperatorBasis:
    """Ladder monomials of one Fock space, flattened for fast recombination."""

    def __init__(self, space: FockSpace):
        self.space = space
        M, D = space.modes, space.dimension
        up, dn = space.raising, space.lowering
        self.hop = [[(up[i] @ dn[j]).tocsr() for j in range(M)] for i in range(M)]
        self.pair = [[(up[i] @ up[j]).tocsr() for j in range(M)] for i in range(M)]
        self.cubic = [[[(self.pair[i][j] @ dn[k]).tocsr() for k in range(M)] for j in range(M)] for i in range(M)]
        flat = lambda m: m.toarray().ravel()  # noqa: E731
        self.hop_stack = sp.csr_matrix(np.array([flat(self.hop[i][j]) for i in range(M) for j in range(M)]))
        self.pair_stack = sp.csr_matrix(np.array([flat(self.pair[i][j]) for i in range(M) for j in range(M)]))
        self.cubic_stack = sp.csr_matrix(np.array(
            [flat(self.cubic[i][j][k]) for i in range(M) for j in range(M) for k in range(M)]))
        self.D = D

    def combine(self, stack, coeffs) -> np.ndarray:
        return (stack.T @ np.asarray(coeffs).ravel()).reshape(self.D, self.D)

    def quartic(self, W: np.ndarray) -> np.ndarray:
        M = self.space.modes
        dn = self.space.lowering
        out = np.zeros((self.D, self.D), complex)
        for i in range(M):
            for j in range(M):
                for k in range(M):
                    for l in range(M):
                        if W[i, j, k, l] != 0:
                            out += W[i, j, k, l] * (self.pair[i][j] @ (dn[k] @ dn[l])).toarray()
        return out


def _hermitian_residual(A: np.ndarray) -> float:
    return float(np.max(np.abs(A - A.conj().T))) if A.size else 0.0


class GeneratorFamily:
    """Generators along an orbital flow, sharing the time-independent quartic term."""

    def __init__(self, model: ModeModel, space: FockSpace, N: int, flow: OrbitalFlow | None = None,
                 orbital0=None, horizon: float | None = None, check: bool = True):
        if space.modes != model.modes:
            raise StructuralError("Fock space and mode model disagree on the mode count")
        if N < 1:
            raise DomainError("N must be positive")
        self.model, self.space, self.N, self.check = model, space, N, check
        if flow is None:
            if orbital0 is None or horizon is None:
                raise DomainError("need an orbital flow or an initial orbital and horizon")
            flow = OrbitalFlow(model, orbital0, horizon)
        self.flow = flow
        self._ops = _OperatorBasis(space)

    @cached_property
    def l4(self) -> np.ndarray:
        L4 = self._ops.quartic(self.model.tensor) / (2 * self.N)
        if self.check:
            _assert_hermitian(L4, "L4")
        return L4

    def at(self, t: float) -> GeneratorSet:
        return build_generators(self.flow(t), self.model, self.space, self.N, t, family=self)


def _assert_hermitian(A, name):
    res = _hermitian_residual(A)
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if res > 1e-12 * scale:
        raise StructuralError(f"{name} is not hermitian (residual {res:.2e})")


def build_generators(orbital, model: ModeModel, space: FockSpace, N: int, time: float = 0.0,
                     family: GeneratorFamily | None = None, check: bool = True) -> GeneratorSet:
    """Assemble ``L2``, ``L3``, ``L4`` (dense) and the phase integrand at one time."""
    phi = np.asarray(orbital, complex)
    if phi.shape != (model.modes,):
        raise StructuralError("orbital must be given in mode coordinates")
    if abs(np.linalg.norm(phi) - 1) > 1e-8:
        raise DomainError(f"orbital is not normalized (norm {np.linalg.norm(phi):.12g})")
    if family is None:
        family = GeneratorFamily(model, space, N, flow=_ConstantFlow(phi), check=check)
    ops = family._ops
    W = model.tensor
    pc = phi.conj()
    direct = np.einsum("ikjl,k,l->ij", W, pc, phi)
    exchange = np.einsum("kijl,k,l->ij", W, pc, phi)
    pairing = np.einsum("ijkl,k,l->ij", W, phi, phi)
    one_body = model.kinetic + direct + exchange
    pair_op = 0.5 * ops.combine(ops.pair_stack, pairing)
    L2 = ops.combine(ops.hop_stack, one_body) + pair_op + pair_op.conj().T
    cubic = ops.combine(ops.cubic_stack, np.einsum("ijkl,l->ijk", W, phi)) / math.sqrt(N)
    L3 = cubic + cubic.conj().T
    L4 = family.l4
    if check:
        _assert_hermitian(L2, "L2")
        _assert_hermitian(L3, "L3")
    l0 = 0.5 * N * model.interaction_density(phi)
    return GeneratorSet(l0, L2, L3, L4, time, phi)


class _ConstantFlow:
    def __init__(self, phi):
        self.phi = phi

    def __call__(self, t):
        return self.phi


# --------------------------------------------------------------------------
# the phase omega(t; s)

def interaction_integrand(phi: Field, spec: PotentialSpec) -> float:
    """``int (V * |phi|^2)(x) |phi(x)|^2 dx`` on a lattice."""
    if spec.lam == 0:
        return 0.0
    pot = convolve_density(phi.values, phi.grid, spec)
    return float(np.sum(pot * np.abs(phi.values) ** 2) * phi.grid.measure)


def omega_phase(source, s: float, t: float, N: int) -> float:
    """``(N/2) int_s^t dtau int (V * |phi_tau|^2) |phi_tau|^2`` by the trapezoid rule.

    ``source`` is an ObservableRecord (which stores half the integrand as
    ``interaction``) or a pair ``(times, integrand_values)``.
    """
    if hasattr(source, "interaction"):
        times, vals = source.times, 2.0 * source.interaction
    else:
        times, vals = (np.asarray(a, float) for a in source)
    lo, hi = min(s, t), max(s, t)
    if lo < times[0] - 1e-12 or hi > times[-1] + 1e-12:
        raise CoverageError(f"[{lo}, {hi}] outside recorded range [{times[0]}, {times[-1]}]")
    if hi == lo:
        return 0.0
    inside = (times > lo) & (times < hi)
    ts = np.concatenate([[lo], times[inside], [hi]])
    ys = np.interp(ts, times, vals)
    val = 0.5 * N * float(np.trapezoid(ys, ts))
    return val if t >= s else -val


# --------------------------------------------------------------------------
# propagation

@dataclass
class PropagatorRun:
    variant: str
    dt: float
    times: np.ndarray
    states: list
    norms: np.ndarray
    top_mass: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> FockVector:
        return self.states[-1]

    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norms - self.norms[0])))


def propagate(variant: str, family: GeneratorFamily, dt: float, horizon: float,
              initial: FockVector | None = None, record_every: int = 1, tol: float = 1e-13,
              abort_top_mass: float = 1e-2) -> PropagatorRun:
    """Midpoint exponential stepping ``psi <- exp(-i dt L(t + dt/2)) psi``.

    ``abort_top_mass`` bounds the mass allowed in the cutoff sector; beyond it
    the truncation no longer represents the dynamics and a
    :class:`TruncationError` is raised.
    """
    if variant not in VARIANTS:
        raise DomainError(f"variant must be one of {VARIANTS}")
    if not dt > 0 or not horizon >= 0:
        raise DomainError("need dt > 0 and horizon >= 0")
    space = family.space
    psi = (space.vacuum() if initial is None else initial).coefficients.copy()
    steps = int(round(horizon / dt))
    top = space.sector_slice(space.cutoff)
    times, states, norms, tops = [0.0], [FockVector(space, psi)], [np.linalg.norm(psi)], [0.0]
    for n in range(steps):
        L = family.at((n + 0.5) * dt).total(variant)
        psi = expmv(L, psi, dt, tol=tol, krylov_dim=min(30, space.dimension))
        top_mass = float(np.sum(np.abs(psi[top]) ** 2))
        if top_mass > abort_top_mass:
            raise TruncationError(
                f"{variant} propagation put mass {top_mass:.3e} in the cutoff sector "
                f"n={space.cutoff} at t={(n + 1) * dt:.4g}; raise the cutoff")
        if (n + 1) % record_every == 0 or n == steps - 1:
            times.append((n + 1) * dt)
            states.append(FockVector(space, psi.copy()))
            norms.append(np.linalg.norm(psi))
            tops.append(top_mass)
    return PropagatorRun(variant, dt, np.array(times), states, np.array(norms), np.array(tops),
                         {"N": family.N, "modes": space.modes, "cutoff": space.cutoff})


def generator_residual(family: GeneratorFamily, variant: str, psi0: np.ndarray, t: float, dt: float) -> float:
    """``|| i (psi(t+dt) - psi(t)) / dt - L(t+dt/2) psi(t+dt/2) ||`` for one midpoint step."""
    L = family.at(t + dt / 2).total(variant)
    psi1 = expmv(L, psi0, dt, tol=1e-14)
    mid = expmv(L, psi0, dt / 2, tol=1e-14)
    return float(np.linalg.norm(1j * (psi1 - psi0) / dt - L @ mid))


def parity_check(run: PropagatorRun) -> dict:
    """Odd-sector mass and ``max_i |<psi, a_i psi>|`` along a run."""
    space = run.states[0].space
    odd = space.particle_numbers % 2 == 1
    odd_mass = np.array([float(np.sum(np.abs(s.coefficients[odd]) ** 2)) for s in run.states])
    fe = []
    for s in run.states:
        c = s.coefficients
        fe.append(max(abs(np.vdot(c, a @ c)) for a in space.lowering))
    fe = np.array(fe)
    return {"times": run.times, "odd_mass": odd_mass, "field_expectation": fe,
            "max_odd_mass": float(odd_mass.max()), "max_field_expectation": float(fe.max())}


def parity_commutator(space: FockSpace, A: np.ndarray) -> float:
    """``max |[(-1)^N, A]|`` entrywise."""
    p = np.where(space.particle_numbers % 2 == 0, 1.0, -1.0)
    return float(np.max(np.abs(p[:, None] * A - A * p[None, :])))


# --------------------------------------------------------------------------
# the two error terms

def condensate_vector(space: FockSpace, N: int, mode: int = 0) -> FockVector:
    """``W^*(sqrt(N) phi) (a^*(phi))^N / sqrt(N!) Omega`` with ``phi`` the
    basis mode ``mode``, truncated to ``space``."""
    single = displaced_number_state(N)
    c = np.zeros(space.dimension, complex)
    occ = np.zeros(space.modes, dtype=int)
    top = min(space.cutoff, single.space.cutoff)
    for n in range(top + 1):
        occ[:] = 0
        occ[mode] = n
        c[space.index(occ)] = single.coefficients[n]
    lost = max(0.0, 1.0 - float(np.linalg.norm(c)) ** 2)
    return FockVector(space, c, safe=lost <= 1e-12)


def et_from_states(xi_t: FockVector, omega_t: FockVector, J: np.ndarray, orbital_t: np.ndarray, N: int) -> dict:
    """``E1 = d_N/N <U xi, dGamma(J) U Omega>`` and
    ``E2 = d_N/sqrt(N) <U xi, phi(J phi_t) U Omega>``."""
    space = xi_t.space
    J = np.asarray(J, complex)
    dn = d_N(N)
    dG = second_quantize(space, J).matrix
    ph = field_operator(space, J @ np.asarray(orbital_t, complex)).matrix
    e1 = dn / N * np.vdot(xi_t.coefficients, dG @ omega_t.coefficients)
    e2 = dn / math.sqrt(N) * np.vdot(xi_t.coefficients, ph @ omega_t.coefficients)
    return {"e1": complex(e1), "e2": complex(e2), "safe": bool(xi_t.safe and omega_t.safe)}


def et_estimates(family: GeneratorFamily, J: np.ndarray, t: float, dt: float, variant: str = "full") -> dict:
    """Both error terms at time ``t``: the vacuum and the condensate vector
    are propagated with the same generator, and ``<xi, U^* A U Omega> =
    <U xi, A U Omega>``."""
    space = family.space
    xi = condensate_vector(space, family.N)
    run_omega = propagate(variant, family, dt, t, abort_top_mass=1.0)
    run_xi = propagate(variant, family, dt, t, initial=xi, abort_top_mass=1.0)
    out = et_from_states(run_xi.final, run_omega.final, J, family.flow(t), family.N)
    out["safe"] = out["safe"] and bool(xi.safe)
    out["t"] = t
    return out


def write_report(payload: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, default=_jsonable))
    return path


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    return float(o)
