"""Split-step Fourier integration of the Hartree equation

    i d/dt phi = -Laplace phi + (V * |phi|^2) phi

on a periodic box, with the observables used by the decay analysis recorded
along the way.

Each Strang step is: half free flight in Fourier space, an exact nonlinear
phase rotation (|phi| is unchanged by a pure phase, so the potential can be
frozen over the full step), and another half free flight.  Consecutive half
flights between two recording times are fused into one full flight.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import BoxTooSmallError, CoverageError, DomainError, StructuralError
from .lattice import FFT_WORKERS, Field, Grid, gradient_norm_squared, weighted_norm_surrogate
from .potential import PotentialSpec, convolve_density

CSV_COLUMNS = ("t", "linf", "h1", "s_sup", "key_integral", "energy", "boundary_mass")


@dataclass(frozen=True)
class HartreeState:
    phi: Field
    time: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.phi.grid


@dataclass(frozen=True)
class SolverConfig:
    """Time stepping parameters.

    Splitting is unconditionally stable, so ``dt`` only controls accuracy
    (the global error is ``O(dt^2)``).  ``on_breach`` decides what happens
    when the boundary-shell mass exceeds ``guard_threshold``: ``"raise"``
    throws :class:`BoxTooSmallError`, ``"stop"`` ends the run and returns the
    record truncated at the breach.
    """

    dt: float
    horizon: float
    record_stride: int = 1
    guard_threshold: float = 1e-6
    shell_fraction: float = 0.125
    on_breach: str = "raise"

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if not self.horizon > 0:
            raise DomainError("horizon must be positive")
        if self.record_stride < 1:
            raise DomainError("record_stride must be at least 1")
        if self.on_breach not in ("raise", "stop"):
            raise DomainError("on_breach must be 'raise' or 'stop'")

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass
class ObservableRecord:
    times: np.ndarray
    linf: np.ndarray
    h1: np.ndarray
    s_sup: np.ndarray
    key_integral: np.ndarray
    energy: np.ndarray
    boundary_mass: np.ndarray
    mass: np.ndarray
    breach_time: float | None = None
    final_state: HartreeState | None = None
    meta: dict = field(default_factory=dict)
    interaction: np.ndarray | None = None

    @property
    def guard_time(self) -> float:
        """Last time before the guard tripped (or the end of the run)."""
        if self.breach_time is None:
            return float(self.times[-1])
        ok = self.times[self.times < self.breach_time]
        return float(ok[-1]) if ok.size else 0.0

    def series(self, name: str) -> tuple:
        return self.times, getattr(self, name)

    def rows(self):
        cols = [self.times, self.linf, self.h1, self.s_sup, self.key_integral,
                self.energy, self.boundary_mass]
        return zip(*cols)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for row in self.rows():
                w.writerow([repr(float(v)) for v in row])
        return path

    def to_json(self, path, config: dict | None = None) -> Path:
        path = Path(path)
        payload = {
            "config": config or {},
            "meta": self.meta,
            "breach_time": self.breach_time,
            "guard_time": self.guard_time,
            "max_mass_error": float(np.max(np.abs(self.mass - 1.0))),
            "columns": {name: getattr(self, "times" if name == "t" else name).tolist()
                        for name in CSV_COLUMNS},
        }
        path.write_text(json.dumps(payload, indent=2))
        return path


# --------------------------------------------------------------------------
# stepping kernels (array level)

def _free_phase(grid: Grid, dt: float) -> np.ndarray:
    return np.exp(-1j * grid.k_squared * dt)


def _kick(values: np.ndarray, grid: Grid, spec: PotentialSpec, dt: float) -> np.ndarray:
    pot = convolve_density(values, grid, spec)
    return values * np.exp(-1j * dt * pot)


def _advance(values: np.ndarray, grid: Grid, spec: PotentialSpec, dt: float, nsteps: int) -> np.ndarray:
    """``nsteps`` Strang steps with the inner half flights fused."""
    if nsteps == 0 or dt == 0:
        return values
    if spec.lam == 0:
        c = sfft.fftn(values, workers=FFT_WORKERS) * _free_phase(grid, dt * nsteps)
        return sfft.ifftn(c, workers=FFT_WORKERS)
    half = _free_phase(grid, dt / 2)
    full = half * half
    c = sfft.fftn(values, workers=FFT_WORKERS) * half
    for i in range(nsteps):
        v = sfft.ifftn(c, workers=FFT_WORKERS)
        v = _kick(v, grid, spec, dt)
        c = sfft.fftn(v, workers=FFT_WORKERS)
        c *= full if i < nsteps - 1 else half
    return sfft.ifftn(c, workers=FFT_WORKERS)


def strang_step(state: HartreeState, spec: PotentialSpec, dt: float) -> HartreeState:
    """One second-order split step.  ``dt`` may be negative (backward in time)."""
    if state.phi.domain != "space":
        raise StructuralError("state must hold a space-domain field")
    vals = _advance(state.phi.values, state.grid, spec, dt, 1)
    return HartreeState(Field(state.grid, vals), state.time + dt)


def propagate(state: HartreeState, spec: PotentialSpec, dt: float, steps: int) -> HartreeState:
    """``steps`` Strang steps of size ``dt`` without recording."""
    vals = _advance(state.phi.values, state.grid, spec, dt, steps)
    return HartreeState(Field(state.grid, vals), state.time + dt * steps)


# --------------------------------------------------------------------------
# observables

def energy(phi: Field, spec: PotentialSpec) -> float:
    """``int |grad phi|^2 + 1/2 int (V * |phi|^2) |phi|^2``."""
    g = phi.grid
    kinetic = gradient_norm_squared(phi.values, g)
    if spec.lam == 0:
        return kinetic
    pot = convolve_density(phi.values, g, spec)
    return kinetic + 0.5 * float(np.sum(pot * np.abs(phi.values) ** 2) * g.measure)


def _observe(values: np.ndarray, grid: Grid, spec: PotentialSpec, shell: np.ndarray) -> dict:
    dens = np.abs(values) ** 2
    mass = float(np.sum(dens) * grid.measure)
    grad = gradient_norm_squared(values, grid)
    if spec.lam == 0:
        s_sup, interaction = 0.0, 0.0
    else:
        pot = convolve_density(values, grid, spec)
        interaction = 0.5 * float(np.sum(pot * dens) * grid.measure)
        sq = convolve_density(values, grid, spec, power=2)
        s_sup = float(np.sqrt(max(sq.max(), 0.0)))
    return {
        "linf": float(np.sqrt(dens.max())),
        "h1": math.sqrt(mass + grad),
        "s_sup": s_sup,
        "energy": grad + interaction,
        "boundary_mass": float(np.sum(dens[shell]) * grid.measure),
        "mass": mass,
        "interaction": interaction,
    }


def _build_record(times, obs, breach_time, final_state, meta) -> ObservableRecord:
    t = np.asarray(times, float)
    cols = {k: np.asarray([o[k] for o in obs], float) for k in obs[0]}
    s = cols["s_sup"]
    key = np.concatenate([[0.0], np.cumsum(0.5 * (s[1:] + s[:-1]) * np.diff(t))])
    return ObservableRecord(
        times=t, linf=cols["linf"], h1=cols["h1"], s_sup=s, key_integral=key,
        energy=cols["energy"], boundary_mass=cols["boundary_mass"], mass=cols["mass"],
        breach_time=breach_time, final_state=final_state, meta=meta,
        interaction=cols["interaction"],
    )


def evolve(state: HartreeState, spec: PotentialSpec, config: SolverConfig) -> ObservableRecord:
    """Integrate to ``config.horizon``, recording every ``record_stride`` steps."""
    grid = state.grid
    shell = grid.shell_mask(config.shell_fraction)
    vals = state.phi.values.astype(complex)
    meta = {
        "spec": asdict(spec),
        "grid": asdict(grid),
        "solver": asdict(config),
        "weighted_norms": weighted_norm_surrogate(state.phi, 5),
    }
    obs = [_observe(vals, grid, spec, shell)]
    times = [state.time]
    if obs[0]["boundary_mass"] > config.guard_threshold:
        raise BoxTooSmallError(
            "initial data already has mass in the boundary shell; enlarge the box",
            state.time, obs[0]["boundary_mass"],
        )
    total = config.steps
    done = 0
    breach = None
    while done < total:
        n = min(config.record_stride, total - done)
        vals = _advance(vals, grid, spec, config.dt, n)
        done += n
        t = state.time + done * config.dt
        o = _observe(vals, grid, spec, shell)
        obs.append(o)
        times.append(t)
        if o["boundary_mass"] > config.guard_threshold:
            breach = t
            break
    final = HartreeState(Field(grid, vals), times[-1])
    record = _build_record(times, obs, breach, final, meta)
    if breach is not None and config.on_breach == "raise":
        raise BoxTooSmallError(
            f"box too small: boundary-shell mass {obs[-1]['boundary_mass']:.3e} "
            f"exceeds {config.guard_threshold:.1e} at t={breach:.4g}",
            breach, obs[-1]["boundary_mass"], record,
        )
    return record


def strichartz_norm(record: ObservableRecord, T: float) -> float:
    """``(int_0^T ||phi_t||_inf^2 dt)^{1/2}`` by the trapezoid rule."""
    t = record.times
    if T < t[0] - 1e-12 or T > t[-1] + 1e-9 * max(1.0, abs(t[-1])):
        raise CoverageError(f"T={T} outside recorded range [{t[0]}, {t[-1]}]")
    y = record.linf**2
    inside = t < T
    ts = np.append(t[inside], T)
    ys = np.append(y[inside], np.interp(T, t, y))
    return float(np.sqrt(np.trapezoid(ys, ts))) if ts.size > 1 else 0.0


def strichartz_profile(record: ObservableRecord, t_min: float = 1.0) -> tuple:
    """``(T, ||phi||_{L^2((0,T),L^inf)} / sqrt(1+T))`` at every recorded ``T >= t_min``."""
    y = record.linf**2
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(record.times))])
    sel = record.times >= t_min - 1e-12
    T = record.times[sel]
    return T, np.sqrt(cum[sel]) / np.sqrt(1.0 + T)
