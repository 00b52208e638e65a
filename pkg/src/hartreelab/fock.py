"""Truncated bosonic Fock space over ``M`` modes.

States are indexed by occupation rows ``(n_1, ..., n_M)`` with a global
cutoff ``sum n_i <= n_max``; sector ``n`` occupies a contiguous block ordered
by colexicographic rank.  The ladder operators are assembled once per space
from the occupation kernels, with ``a_i = (a_i^*)^dagger`` holding exactly.
The only truncation artefact is that ``a^*`` maps the top sector to zero, so
identities such as ``[a, a^*] = 1`` hold only away from the cutoff.  Results
whose mass reaches sector ``n_max - 2`` are flagged as not truncation-safe.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError, StructuralError
from .occupation import Sector

SAFE_TOL = 1e-12


@dataclass(frozen=True)
class ModeBasis:
    """``M`` orthonormal one-particle vectors (rows of ``modes``).

    ``weight`` is the quadrature weight of the underlying lattice, so the
    Gram matrix is ``weight * modes.conj() @ modes.T``.
    """

    modes: np.ndarray
    weight: float = 1.0
    gram_tolerance: float = 1e-12

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.modes))
        object.__setattr__(self, "modes", m)
        gram = self.weight * (m.conj() @ m.T)
        if not np.allclose(gram, np.eye(len(m)), rtol=0, atol=self.gram_tolerance):
            raise StructuralError("mode vectors are not orthonormal")

    @classmethod
    def abstract(cls, count: int) -> "ModeBasis":
        return cls(np.eye(count))

    @property
    def mode_count(self) -> int:
        return len(self.modes)

    def coordinates(self, f: np.ndarray) -> np.ndarray:
        """Mode coordinates ``<u_i, f>`` of a one-particle vector."""
        return self.weight * (self.modes.conj() @ np.asarray(f).ravel())


class FockSpace:
    def __init__(self, modes: int, cutoff: int):
        if modes < 1 or cutoff < 0:
            raise StructuralError("need at least one mode and a nonnegative cutoff")
        self.modes = modes
        self.cutoff = cutoff
        self.sectors = [Sector(modes, n) for n in range(cutoff + 1)]
        dims = [s.dimension for s in self.sectors]
        self.offsets = np.concatenate([[0], np.cumsum(dims)]).astype(np.int64)
        self.dimension = int(self.offsets[-1])

    def __repr__(self):
        return f"FockSpace(modes={self.modes}, cutoff={self.cutoff}, dim={self.dimension})"

    @cached_property
    def occupations(self) -> np.ndarray:
        return np.concatenate([s.occupations for s in self.sectors], axis=0)

    @cached_property
    def particle_numbers(self) -> np.ndarray:
        return np.repeat(np.arange(self.cutoff + 1), np.diff(self.offsets))

    def sector_slice(self, n: int) -> slice:
        if not 0 <= n <= self.cutoff:
            raise DomainError(f"sector {n} outside 0..{self.cutoff}")
        return slice(int(self.offsets[n]), int(self.offsets[n + 1]))

    def index(self, occupation) -> int:
        occ = np.asarray(occupation, dtype=np.int16)
        if occ.shape != (self.modes,):
            raise StructuralError(f"occupation must have {self.modes} entries")
        if np.any(occ < 0) or occ.sum() > self.cutoff:
            raise DomainError(f"occupation {tuple(occ)} outside the truncated space")
        n = int(occ.sum())
        return int(self.offsets[n] + self.sectors[n].index(occ)[0])

    @cached_property
    def lowering(self) -> list:
        """``a_i`` for every mode as sparse ``D x D`` matrices."""
        rows = [[] for _ in range(self.modes)]
        cols = [[] for _ in range(self.modes)]
        vals = [[] for _ in range(self.modes)]
        for n in range(1, self.cutoff + 1):
            sec = self.sectors[n]
            site, src, dst, amp = _sector_entries(sec)
            for i in range(self.modes):
                sel = site == i
                rows[i].append(dst[sel] + self.offsets[n - 1])
                cols[i].append(src[sel] + self.offsets[n])
                vals[i].append(amp[sel])
        D = self.dimension
        out = []
        for i in range(self.modes):
            if rows[i]:
                r, c, v = np.concatenate(rows[i]), np.concatenate(cols[i]), np.concatenate(vals[i])
            else:
                r = c = np.zeros(0, int)
                v = np.zeros(0)
            out.append(sp.csr_matrix((v, (r, c)), shape=(D, D)))
        return out

    @cached_property
    def raising(self) -> list:
        return [a.T.tocsr() for a in self.lowering]

    def vacuum(self) -> "FockVector":
        c = np.zeros(self.dimension, complex)
        c[0] = 1.0
        return FockVector(self, c)

    def basis_state(self, occupation) -> "FockVector":
        c = np.zeros(self.dimension, complex)
        c[self.index(occupation)] = 1.0
        return FockVector(self, c)

    def random_safe_vector(self, rng: np.random.Generator, top: int | None = None) -> "FockVector":
        """Normalized random vector supported on sectors ``<= top``
        (default ``n_max - 3``), hence truncation-safe."""
        top = self.cutoff - 3 if top is None else top
        if top < 0:
            raise DomainError("cutoff too small for a safe random vector")
        c = np.zeros(self.dimension, complex)
        k = int(self.offsets[top + 1])
        c[:k] = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        # spread weight evenly over sectors so high sectors are exercised
        for n in range(top + 1):
            s = self.sector_slice(n)
            c[s] /= np.linalg.norm(c[s]) or 1.0
        return FockVector(self, c / np.linalg.norm(c))


def _sector_entries(sec: Sector):
    from .occupation import kernels

    return kernels().annihilation_entries(sec.occupations, sec.binom)


@dataclass
class FockVector:
    space: FockSpace
    coefficients: np.ndarray
    safe: bool | None = None

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.shape != (self.space.dimension,):
            raise StructuralError(f"expected {self.space.dimension} coefficients, got {c.shape}")
        self.coefficients = c
        own = self.tail_mass(self.space.cutoff - 2) <= SAFE_TOL * max(self.norm() ** 2, 1e-300)
        self.safe = own if self.safe is None else (self.safe and own)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    def inner(self, other: "FockVector") -> complex:
        _same_space(self.space, other.space)
        return complex(np.vdot(self.coefficients, other.coefficients))

    def sector_masses(self) -> np.ndarray:
        sq = np.abs(self.coefficients) ** 2
        return np.add.reduceat(sq, self.space.offsets[:-1])

    def tail_mass(self, k: int) -> float:
        """Mass in sectors ``n >= k``."""
        k = max(k, 0)
        if k > self.space.cutoff:
            return 0.0
        return float(np.sum(np.abs(self.coefficients[self.space.offsets[k]:]) ** 2))

    def __add__(self, other):
        _same_space(self.space, other.space)
        return FockVector(self.space, self.coefficients + other.coefficients, self.safe and other.safe)

    def __sub__(self, other):
        _same_space(self.space, other.space)
        return FockVector(self.space, self.coefficients - other.coefficients, self.safe and other.safe)

    def __mul__(self, c):
        return FockVector(self.space, self.coefficients * c, self.safe)

    __rmul__ = __mul__


def _same_space(a: FockSpace, b: FockSpace):
    if a is not b and (a.modes != b.modes or a.cutoff != b.cutoff):
        raise StructuralError("objects live on different Fock spaces")


@dataclass
class FockOperator:
    space: FockSpace
    matrix: object  # scipy sparse matrix or dense ndarray
    hermitian: bool = False
    safe: bool = True
    label: str = ""

    def dense(self) -> np.ndarray:
        m = self.matrix
        return m.toarray() if sp.issparse(m) else np.asarray(m)

    def apply(self, psi: FockVector) -> FockVector:
        _same_space(self.space, psi.space)
        return FockVector(self.space, self.matrix @ psi.coefficients, psi.safe and self.safe)

    def __matmul__(self, other):
        if isinstance(other, FockVector):
            return self.apply(other)
        if isinstance(other, FockOperator):
            _same_space(self.space, other.space)
            return FockOperator(self.space, self.matrix @ other.matrix, False, self.safe and other.safe)
        raise TypeError(f"cannot apply FockOperator to {type(other).__name__}")

    def __add__(self, other):
        _same_space(self.space, other.space)
        return FockOperator(self.space, self.matrix + other.matrix,
                            self.hermitian and other.hermitian, self.safe and other.safe)

    def __sub__(self, other):
        _same_space(self.space, other.space)
        return FockOperator(self.space, self.matrix - other.matrix,
                            self.hermitian and other.hermitian, self.safe and other.safe)

    def __mul__(self, c):
        return FockOperator(self.space, self.matrix * c, self.hermitian and np.isreal(c), self.safe)

    __rmul__ = __mul__

    def adjoint(self) -> "FockOperator":
        m = self.matrix
        adj = m.conj().T
        return FockOperator(self.space, adj.tocsr() if sp.issparse(adj) else adj, self.hermitian, self.safe)

    def hermiticity_residual(self, rng: np.random.Generator, pairs: int = 8) -> float:
        """``max |<psi, A chi> - conj(<chi, A psi>)|`` over random pairs."""
        worst = 0.0
        for _ in range(pairs):
            psi = self.space.random_safe_vector(rng, top=self.space.cutoff).coefficients
            chi = self.space.random_safe_vector(rng, top=self.space.cutoff).coefficients
            lhs = np.vdot(psi, self.matrix @ chi)
            rhs = np.conj(np.vdot(chi, self.matrix @ psi))
            worst = max(worst, abs(lhs - rhs))
        return float(worst)


def _mode_vector(space: FockSpace, f) -> np.ndarray:
    f = np.asarray(f, dtype=complex).ravel()
    if f.shape != (space.modes,):
        raise StructuralError(f"mode vector needs {space.modes} entries, got {f.shape[0]}")
    return f


def create(space: FockSpace, f) -> FockOperator:
    """``a^*(f) = sum_i f_i a_i^*``."""
    f = _mode_vector(space, f)
    m = sum((fi * r for fi, r in zip(f, space.raising) if fi != 0), sp.csr_matrix((space.dimension,) * 2))
    return FockOperator(space, sp.csr_matrix(m), label="a*(f)")


def annihilate(space: FockSpace, f) -> FockOperator:
    """``a(f) = sum_i conj(f_i) a_i``; the exact adjoint of :func:`create`."""
    f = _mode_vector(space, f)
    m = sum((np.conj(fi) * a for fi, a in zip(f, space.lowering) if fi != 0), sp.csr_matrix((space.dimension,) * 2))
    return FockOperator(space, sp.csr_matrix(m), label="a(f)")


def field_operator(space: FockSpace, f) -> FockOperator:
    """``phi(f) = a^*(f) + a(f)``."""
    op = create(space, f) + annihilate(space, f)
    op.hermitian = True
    return op


def number_op(space: FockSpace) -> FockOperator:
    return FockOperator(space, sp.diags(space.particle_numbers.astype(float)).tocsr(), True, label="N")


def second_quantize(space: FockSpace, J) -> FockOperator:
    """``dGamma(J) = sum_ij J_ij a_i^* a_j``."""
    J = np.asarray(J, dtype=complex)
    if J.shape != (space.modes, space.modes):
        raise StructuralError(f"J must be {space.modes}x{space.modes}")
    m = sp.csr_matrix((space.dimension,) * 2, dtype=complex)
    for i in range(space.modes):
        for j in range(space.modes):
            if J[i, j] != 0:
                m = m + J[i, j] * (space.raising[i] @ space.lowering[j])
    return FockOperator(space, m.tocsr(), bool(np.allclose(J, J.conj().T)), label="dGamma(J)")


def sector_projector(space: FockSpace, n: int) -> FockOperator:
    d = np.zeros(space.dimension)
    d[space.sector_slice(n)] = 1.0
    return FockOperator(space, sp.diags(d).tocsr(), True, label=f"P_{n}")


def sector_project(psi: FockVector, n: int) -> FockVector:
    """Keep sector ``n`` of ``psi`` and zero the rest."""
    s = psi.space.sector_slice(n)
    c = np.zeros_like(psi.coefficients)
    c[s] = psi.coefficients[s]
    return FockVector(psi.space, c, psi.safe)


def parity_project(psi: FockVector, parity: str) -> FockVector:
    """Even or odd particle-number part of ``psi``."""
    if parity not in ("even", "odd"):
        raise DomainError("parity must be 'even' or 'odd'")
    keep = psi.space.particle_numbers % 2 == (0 if parity == "even" else 1)
    return FockVector(psi.space, np.where(keep, psi.coefficients, 0), psi.safe)


def safe_amplitude(space: FockSpace, f) -> bool:
    """Heuristic: displacements with ``||f||^2 <= (n_max - 6)/4`` stay clear of the cutoff."""
    return float(np.vdot(f, f).real) <= (space.cutoff - 6) / 4


def weyl(space: FockSpace, f) -> FockOperator:
    """``W(f) = exp(a^*(f) - a(f))`` by dense scaling-and-squaring."""
    f = _mode_vector(space, f)
    gen = (create(space, f) - annihilate(space, f)).dense()
    W = sla.expm(gen)
    safe = safe_amplitude(space, f)
    if not safe:
        warnings.warn(f"|f|^2 = {np.vdot(f, f).real:.3g} is large for cutoff {space.cutoff}; "
                      "Weyl operator flagged as not truncation-safe", stacklevel=2)
    return FockOperator(space, W, False, safe, label="W(f)")


def _nilpotent_exp(M: np.ndarray, steps: int) -> np.ndarray:
    out = np.eye(M.shape[0], dtype=complex)
    term = np.eye(M.shape[0], dtype=complex)
    for k in range(1, steps + 1):
        term = term @ M / k
        out = out + term
    return out


def hadamard_weyl(space: FockSpace, f) -> FockOperator:
    """Normal-ordered form ``exp(-|f|^2/2) exp(a^*(f)) exp(-a(f))``.

    Both exponentials are finite sums because the ladder operators are
    nilpotent on the truncated space.  Only agrees with :func:`weyl` on low
    sectors; kept as a cross-check.
    """
    f = _mode_vector(space, f)
    up = create(space, f).dense()
    down = annihilate(space, f).dense()
    norm2 = float(np.vdot(f, f).real)
    W = math.exp(-norm2 / 2) * _nilpotent_exp(up, space.cutoff) @ _nilpotent_exp(-down, space.cutoff)
    return FockOperator(space, W, False, safe_amplitude(space, f), label="W_hadamard(f)")


def coherent(space: FockSpace, f) -> FockVector:
    """``psi(f) = W(f) Omega``."""
    return weyl(space, f).apply(space.vacuum())


def coherent_closed_form(space: FockSpace, f) -> FockVector:
    """``exp(-|f|^2/2) prod_i f_i^{n_i} / sqrt(n_i!)`` on every occupation row."""
    f = _mode_vector(space, f)
    occ = space.occupations.astype(int)
    logfact = np.vectorize(math.lgamma)(occ + 1.0)
    with np.errstate(divide="ignore"):
        c = np.prod(np.power(f[None, :], occ), axis=1) * np.exp(-0.5 * logfact.sum(axis=1))
    c = c * math.exp(-0.5 * float(np.vdot(f, f).real))
    return FockVector(space, c)


def low_sector_norm(space: FockSpace, coefficients: np.ndarray, margin: int = 6) -> float:
    """Norm of the part of ``coefficients`` in sectors ``n <= n_max - margin``."""
    top = max(space.cutoff - margin, 0)
    return float(np.linalg.norm(coefficients[: space.offsets[top + 1]]))


def weyl_commutation_check(space: FockSpace, f, g, probes=None, margin: int = 6) -> float:
    """``max_v ||W(f)W(g)v - exp(-i Im<f,g>) W(f+g) v||`` over probe vectors.

    The truncated exponential reflects weight off the cutoff, so the
    difference is measured on sectors ``n <= n_max - margin`` (``margin=0``
    measures everything).  Default probes: the vacuum and every one-particle
    basis state.
    """
    f = _mode_vector(space, f)
    g = _mode_vector(space, g)
    Wf, Wg, Wfg = weyl(space, f), weyl(space, g), weyl(space, f + g)
    phase = np.exp(-1j * np.vdot(f, g).imag)
    if probes is None:
        probes = [space.vacuum()] + [space.basis_state(np.eye(space.modes, dtype=int)[i])
                                     for i in range(space.modes)]
    worst = 0.0
    for v in probes:
        lhs = Wf.matrix @ (Wg.matrix @ v.coefficients)
        rhs = phase * (Wfg.matrix @ v.coefficients)
        worst = max(worst, low_sector_norm(space, lhs - rhs, margin))
    return worst


def ladder_bound_check(space: FockSpace, f, psi: FockVector) -> dict:
    """Slacks of the three ladder-operator bounds (all must be >= 0)."""
    f = _mode_vector(space, f)
    nf = float(np.linalg.norm(f))
    n = space.particle_numbers.astype(float)
    c = psi.coefficients
    sqrt_n = np.linalg.norm(np.sqrt(n) * c)
    sqrt_n1 = np.linalg.norm(np.sqrt(n + 1) * c)
    a = np.linalg.norm(annihilate(space, f).matrix @ c)
    ad = np.linalg.norm(create(space, f).matrix @ c)
    ph = np.linalg.norm(field_operator(space, f).matrix @ c)
    return {
        "annihilation": nf * sqrt_n - a,
        "creation": nf * sqrt_n1 - ad,
        "field": 2 * nf * sqrt_n1 - ph,
    }


def second_quantization_bound_check(space: FockSpace, J, psi: FockVector) -> float:
    """Slack of ``||dGamma(J) psi|| <= ||J||_op ||N psi||``."""
    dG = second_quantize(space, J)
    lhs = np.linalg.norm(dG.matrix @ psi.coefficients)
    rhs = np.linalg.norm(np.asarray(J), 2) * np.linalg.norm(space.particle_numbers * psi.coefficients)
    return float(rhs - lhs)


# --------------------------------------------------------------------------
# the N-particle state seen from the coherent state

def d_N(N: int) -> float:
    """``sqrt(N!) / (N^{N/2} e^{-N/2})`` evaluated in log space."""
    if N < 1:
        raise DomainError("N must be at least 1")
    return math.exp(0.5 * math.lgamma(N + 1) - 0.5 * N * math.log(N) + 0.5 * N)


def default_single_mode_cutoff(N: int) -> int:
    """Cutoff for ``W^*(sqrt(N)) |N>``: that vector has mean particle number
    ``2N`` and standard deviation about ``sqrt(6N)``, so it needs room up to
    roughly ``4N``."""
    return int(math.ceil(4 * N + 12 * math.sqrt(N) + 20))


def displaced_number_state(N: int, cutoff: int | None = None, use_vacuum: bool = False) -> FockVector:
    """``W^*(sqrt(N) phi) (a^*(phi))^N / sqrt(N!) Omega`` in the single-mode space."""
    cutoff = default_single_mode_cutoff(N) if cutoff is None else cutoff
    if cutoff < N:
        raise DomainError("cutoff below the particle number")
    space = FockSpace(1, cutoff)
    start = space.vacuum() if use_vacuum else space.basis_state([N])
    beta = -math.sqrt(N)
    gen = (create(space, [beta]) - annihilate(space, [beta])).matrix.tocsc()
    # same truncated exponential as weyl(), applied matrix-free for large cutoffs
    return FockVector(space, spla.expm_multiply(gen, start.coefficients))


def sector_norm_check(N: int, k: int, cutoff: int | None = None) -> dict:
    """Even/odd sector norms of the displaced ``N``-particle state against
    ``2/d_N`` and ``2 (k+1)^{3/2} / (d_N sqrt(N))``."""
    if N < 1:
        raise DomainError("N must be at least 1")
    if k < 0 or k > 0.5 * N ** (1.0 / 3.0) + 1e-12:
        raise DomainError(f"k={k} outside 0 <= k <= N^(1/3)/2 for N={N}")
    psi = displaced_number_state(N, cutoff)
    if 2 * k + 1 > psi.space.cutoff:
        raise DomainError("cutoff too small for the requested sector")
    masses = psi.sector_masses()
    dn = d_N(N)
    out = {
        "N": N,
        "k": k,
        "even_norm": float(math.sqrt(masses[2 * k])),
        "odd_norm": float(math.sqrt(masses[2 * k + 1])),
        "even_bound": 2.0 / dn,
        "odd_bound": 2.0 * (k + 1) ** 1.5 / (dn * math.sqrt(N)),
        "safe": bool(psi.safe),
    }
    out["passed"] = out["even_norm"] <= out["even_bound"] and out["odd_norm"] <= out["odd_bound"]
    return out


def weighted_norm_check(N: int, cutoff: int | None = None, use_vacuum: bool = False) -> dict:
    """``||(N+1)^{-1/2} W^*(sqrt(N) phi) |N>||`` and its ratio to ``1/d_N``."""
    psi = displaced_number_state(N, cutoff, use_vacuum)
    n = psi.space.particle_numbers
    w = float(np.linalg.norm(psi.coefficients / np.sqrt(n + 1.0)))
    return {"N": N, "weighted_norm": w, "bound_ratio": w * d_N(N), "safe": bool(psi.safe)}


@dataclass
class VerificationReport:
    check: str
    parameters: dict
    measured: dict
    bounds: dict = field(default_factory=dict)
    passed: bool = True

    def to_dict(self):
        return {"check": self.check, "parameters": self.parameters, "measured": self.measured,
                "bounds": self.bounds, "passed": bool(self.passed)}


def write_reports(reports, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps([r.to_dict() for r in reports], indent=2, default=float))
    return path
