"""Regime classification and fitting of recorded decay/growth laws.

The regimes are indexed by the size and sign of the coupling relative to a
user-supplied threshold ``lambda_c``, by the singularity ``gamma`` and by
whether the potential is screened (``mu > 0``).  Each cell carries a growth
family for the time factor of the convergence rate, and each proof case an
envelope for ``s(t) = sup_x ||V(x-.)phi_t||_2`` and its time integral.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, StructuralError
from .lattice import Field, weighted_norm_surrogate

FAMILIES = ("bounded", "log", "polynomial", "stretched_exp", "exponential", "exp_power")
CASES = ("1", "2", "3.1", "3.2", "3.3", "3.4", "4", "5", "6")


@dataclass(frozen=True)
class RegimeLabel:
    family: str
    parameter: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown regime family {self.family!r}")

    def __str__(self):
        if self.family == "polynomial":
            return "polynomial(K)"
        if self.parameter is None:
            return self.family
        return f"{self.family}({self.parameter:.6g})"


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class FitReport:
    exponent: float
    amplitude: float
    r_squared: float
    window: tuple
    n_points: int

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class BoundReport:
    case_id: str
    envelope: str
    constant: float
    normalized_range: tuple
    integral_envelope: str
    integral_constant: float
    integral_constant_early: float
    holds: bool
    ceiling: float | None = None
    fit: FitReport | None = None

    def to_dict(self):
        d = asdict(self)
        return d

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, default=float))
        return path


def _check_gamma(gamma):
    if not 0.0 < gamma < 1.5:
        raise DomainError(f"gamma must lie in (0, 3/2), got {gamma}")


def _size_row(lam, lambda_c):
    if lambda_c <= 0:
        raise DomainError("lambda_c must be positive")
    if lam > lambda_c:
        return "large_repulsive"
    if lam < -lambda_c:
        return "large_attractive"
    return "small"


def _column(gamma, mu):
    if mu < 0:
        raise DomainError("mu must be nonnegative")
    if mu > 0:
        return "screened"
    if math.isclose(gamma, 1.0, rel_tol=0, abs_tol=1e-12):
        return "coulomb"
    return "soft" if gamma < 1 else "singular"


def classify_regime(lam: float, gamma: float, mu: float, lambda_c: float,
                    alpha: float | None = None) -> RegimeLabel:
    """Growth family of the convergence-rate time factor for one parameter cell.

    ``alpha`` only matters for strongly attractive, unscreened potentials with
    ``1 < gamma < 3/2``; it must lie in ``[2 gamma/3, 1)`` and defaults to the
    lower end, which gives the exponent ``gamma/alpha = 3/2``.
    """
    _check_gamma(gamma)
    row = _size_row(lam, lambda_c)
    col = _column(gamma, mu)
    if row == "large_repulsive":
        if col == "soft":
            return RegimeLabel("exponential")
        if col in ("coulomb", "singular"):
            return RegimeLabel("stretched_exp", 1.0 - 2.0 * gamma / 3.0)
        return RegimeLabel("polynomial")
    if row == "small":
        if col == "soft":
            return RegimeLabel("stretched_exp", 1.0 - gamma)
        if col == "coulomb":
            return RegimeLabel("polynomial")
        return RegimeLabel("bounded")
    if col == "singular":
        alpha = 2.0 * gamma / 3.0 if alpha is None else alpha
        if not 2.0 * gamma / 3.0 - 1e-12 <= alpha < 1.0:
            raise DomainError(f"alpha must lie in [2*gamma/3, 1), got {alpha}")
        return RegimeLabel("exp_power", gamma / alpha)
    return RegimeLabel("exponential")


def case_for(lam: float, gamma: float, mu: float, lambda_c: float) -> str:
    """Proof case responsible for a parameter cell."""
    _check_gamma(gamma)
    row = _size_row(lam, lambda_c)
    col = _column(gamma, mu)
    table = {
        "large_repulsive": {"soft": "1", "coulomb": "5", "singular": "5", "screened": "6"},
        "small": {"soft": "2", "coulomb": "3.1", "singular": "3.2", "screened": "4"},
        "large_attractive": {"soft": "1", "coulomb": "1", "singular": "3.3", "screened": "3.4"},
    }
    return table[row][col]


def regime_table(lambda_c: float, couplings=None, gammas=(0.5, 1.0, 1.25, 1.0), mus=(0.0, 0.0, 0.0, 1.0),
                 alpha: float | None = None):
    """Rows ``[row_name, cell...]`` mirroring the 3x4 regime layout."""
    if couplings is None:
        couplings = (("lambda > lambda_c", 10 * lambda_c),
                     ("|lambda| <= lambda_c", 0.5 * lambda_c),
                     ("lambda < -lambda_c", -10 * lambda_c))
    header = ["", "mu=0, 0<gamma<1", "mu=0, gamma=1", "mu=0, 1<gamma<3/2", "mu>0, 0<gamma<3/2"]
    rows = [header]
    for name, lam in couplings:
        cells = []
        for g, m in zip(gammas, mus):
            label = classify_regime(lam, g, m, lambda_c, alpha)
            cells.append(f"{label} [case {case_for(lam, g, m, lambda_c)}]")
        rows.append([name] + cells)
    return rows


def write_regime_csv(path, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    return path


# --------------------------------------------------------------------------
# fitting

def _as_series(series) -> tuple:
    if isinstance(series, TimeSeries):
        t, y = series.times, series.values
    else:
        t, y = series
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    if t.shape != y.shape or t.ndim != 1:
        raise StructuralError("series needs matching one-dimensional times and values")
    return t, y


def _window(t, y, window):
    lo, hi = (t[0], t[-1]) if window is None else window
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if sel.sum() < 2:
        raise DomainError(f"window {window} contains fewer than two samples")
    return t[sel], y[sel], (float(lo), float(hi))


def _linear_fit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    # a perfectly flat series is fitted exactly
    if ss_tot <= 1e-300 or ss_tot < 1e-28 * max(1.0, float(np.sum(y * y))):
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return float(slope), float(icpt), r2


def fit_power_law(series, window=None) -> FitReport:
    """Fit ``value ~ A (1+t)^(-p)``; decay gives a positive exponent ``p``."""
    t, y = _as_series(series)
    t, y, win = _window(t, y, window)
    if np.any(y <= 0):
        raise DomainError("power-law fit needs strictly positive values")
    slope, icpt, r2 = _linear_fit(np.log1p(t), np.log(y))
    return FitReport(-slope, math.exp(icpt), r2, win, int(t.size))


def fit_log_growth(series, window=None) -> FitReport:
    """Fit ``value ~ a log(1+t) + b``; ``exponent`` holds ``a`` and
    ``amplitude`` holds ``b``."""
    t, y = _as_series(series)
    t, y, win = _window(t, y, window)
    scale = max(1.0, float(np.max(np.abs(y))))
    if np.any(np.diff(y) < -1e-12 * scale):
        raise DomainError("log-growth fit needs a nondecreasing series")
    slope, icpt, r2 = _linear_fit(np.log1p(t), y)
    return FitReport(slope, icpt, r2, win, int(t.size))


# --------------------------------------------------------------------------
# case envelopes

def _case_rules(case_id, gamma, alpha):
    """(s-envelope exponent or None for bounded, label, integral envelope fn, label)."""
    if case_id in ("2", "3.1", "3.2"):
        p = gamma
        s_label = f"(1+t)^-{gamma:g}"
    elif case_id == "4":
        p = 1.5
        s_label = "(1+t)^-1.5"
    elif case_id == "5":
        p = gamma / 3.0
        s_label = f"(1+t)^-{gamma / 3:g}"
    elif case_id == "6":
        p = 0.5
        s_label = "(1+t)^-0.5"
    else:
        p = 0.0
        s_label = "bounded"

    if case_id == "1":
        ienv, ilabel = (lambda t: t), "t"
    elif case_id == "2":
        ienv, ilabel = (lambda t: (1 + t) ** (1 - gamma) - 1), f"(1+t)^{1 - gamma:g}-1"
    elif case_id in ("3.1", "6"):
        ienv, ilabel = np.log1p, "log(1+t)"
    elif case_id == "3.3":
        q = gamma / alpha
        ienv, ilabel = (lambda t: np.maximum((1 + t) ** q, np.exp(t)) - 1), f"max((1+t)^{q:g}, e^t)-1"
    elif case_id == "3.4":
        ienv, ilabel = (lambda t: t), "t"
    elif case_id == "5":
        ienv, ilabel = (lambda t: (1 + t) ** (1 - gamma / 3) - 1), f"(1+t)^{1 - gamma / 3:g}-1"
    else:  # 3.2 and 4: bounded integral
        ienv, ilabel = (lambda t: np.minimum(t, 1.0)), "bounded"
    return p, s_label, ienv, ilabel


def _check_case_parameters(case_id, spec, alpha, lambda_c):
    gamma, mu, lam = spec.gamma, spec.mu, spec.lam
    unscreened = mu == 0
    coulomb = math.isclose(gamma, 1.0, abs_tol=1e-12)
    rules = {
        "1": unscreened and (gamma < 1 or coulomb),
        "2": unscreened and gamma < 1,
        "3.1": unscreened and coulomb,
        "3.2": unscreened and 1 < gamma < 1.5,
        "3.3": unscreened,
        "3.4": mu > 0,
        "4": mu > 0,
        "5": unscreened and (coulomb or gamma > 1) and lam >= 0,
        "6": mu > 0 and lam >= 0,
    }
    if not rules[case_id]:
        raise DomainError(f"case {case_id} does not apply to (lambda={lam}, gamma={gamma}, mu={mu})")
    if lambda_c is not None and lam != 0:
        small = abs(lam) <= lambda_c
        if case_id in ("2", "3.1", "3.2", "4") and not small:
            raise DomainError(f"case {case_id} needs |lambda| <= lambda_c")
        if case_id in ("5", "6") and lam <= lambda_c:
            raise DomainError(f"case {case_id} needs lambda > lambda_c")
    if case_id == "3.3":
        if alpha is None:
            raise DomainError("case 3.3 needs alpha in [2*gamma/3, 1)")
        if not 2 * gamma / 3 - 1e-12 <= alpha < 1:
            raise DomainError(f"alpha must lie in [2*gamma/3, 1), got {alpha}")


def check_case_bound(case_id, record, spec, alpha: float | None = None, window=None,
                     lambda_c: float | None = None, growth_tolerance: float = 1.5) -> BoundReport:
    """Test the recorded ``s_sup`` and ``key_integral`` against one case envelope.

    ``constant`` is the smallest ``C`` with ``s(t) <= C env(t)`` on the window
    and ``normalized_range`` is the range of ``s(t)/env(t)`` divided by its
    value at the window start.  The integral constant is computed on the
    first half of the window and on the whole window; the bound ``holds``
    when the late data do not force the constant up by more than
    ``growth_tolerance``.  For Case 3.1 the analytic ceiling
    ``2 sqrt(pi) |lambda| log(1+t)`` must also hold.
    """
    case_id = str(case_id)
    if case_id not in CASES:
        raise DomainError(f"unknown case {case_id!r}")
    _check_case_parameters(case_id, spec, alpha, lambda_c)
    p, s_label, ienv, ilabel = _case_rules(case_id, spec.gamma, alpha)

    t = record.times
    lo, hi = (max(t[0], 2.0) if t[-1] > 2.0 else t[0], t[-1]) if window is None else window
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if sel.sum() < 2:
        raise DomainError("window holds fewer than two records")
    ts, ss, Is = t[sel], record.s_sup[sel], record.key_integral[sel]

    if spec.lam == 0 or not np.any(ss > 0):
        return BoundReport(case_id, s_label, 0.0, (1.0, 1.0), ilabel, 0.0, 0.0, True,
                           0.0 if case_id == "3.1" else None)

    ratio = ss * (1 + ts) ** p
    constant = float(ratio.max())
    norm = ratio / ratio[0]
    env = ienv(ts)
    pos = env > 0
    full = float(np.max(Is[pos] / env[pos])) if pos.any() else 0.0
    half = ts <= lo + 0.5 * (hi - lo)
    early = float(np.max(Is[pos & half] / env[pos & half])) if (pos & half).any() else full
    holds = full <= growth_tolerance * early

    ceiling = None
    if case_id == "3.1":
        ceiling = 2 * math.sqrt(math.pi) * abs(spec.lam)
        tt = t[t > 0]
        holds = holds and bool(np.all(record.key_integral[t > 0] <= ceiling * np.log1p(tt) * (1 + 1e-12)))

    fit = fit_power_law((ts, ss)) if p > 0 else None
    return BoundReport(case_id, s_label, constant, (float(norm.min()), float(norm.max())),
                       ilabel, full, early, bool(holds), ceiling, fit)


# --------------------------------------------------------------------------
# small-data rescaling

def rescale_small_data(phi: Field, lam: float, M: float, eps_prime: float | None = None,
                       order: float = 5) -> tuple:
    """Map ``(phi, lam)`` to ``(phi * M/eps', lam * (eps'/M)^2)``.

    The Hartree flow commutes with this map: ``V * |c phi|^2`` is unchanged
    when ``lam`` is divided by ``c^2``.  ``eps'`` defaults to the weighted
    norm surrogate of ``phi`` at ``order``.
    """
    if not M > 0:
        raise DomainError("M must be positive")
    if eps_prime is None:
        eps_prime = weighted_norm_surrogate(phi, order)["total"]
    if not eps_prime > 0:
        raise DomainError("weighted norm of phi must be positive")
    c = M / eps_prime
    return phi * c, lam / (c * c)
