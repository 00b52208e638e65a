"""Lanczos approximation of ``exp(-i t H) v`` for Hermitian ``H``.

One Krylov basis is built per substep; the substep length is then chosen
from the a-posteriori estimate ``beta_m |[exp(-i tau T_m)]_{m,1}|``, so the
matrix-vector products are never wasted on rejected steps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import KrylovBreakdown


_ROUNDOFF = 64 * np.finfo(float).eps


@dataclass
class KrylovInfo:
    substeps: int = 0
    matvecs: int = 0
    error_estimate: float = 0.0


def _as_apply(H):
    if callable(H) and not hasattr(H, "dot"):
        return H
    return lambda x: H @ x


def _lanczos(apply, v, m):
    beta0 = np.linalg.norm(v)
    n = v.shape[0]
    V = np.empty((m + 1, n), dtype=complex)
    V[0] = v / beta0
    alpha = np.zeros(m)
    beta = np.zeros(m)
    k = m
    for j in range(m):
        w = apply(V[j])
        alpha[j] = np.vdot(V[j], w).real
        w = w - alpha[j] * V[j]
        if j > 0:
            w -= beta[j - 1] * V[j - 1]
        # one pass of full reorthogonalization keeps the basis orthonormal
        w -= V[: j + 1].T @ (V[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] <= 1e-13 * max(1.0, abs(alpha[j])):
            k = j + 1
            beta[j] = 0.0
            break
        V[j + 1] = w / beta[j]
    return V, alpha[:k], beta[:k], beta0, k


def _small_exp(alpha, beta, tau):
    theta, Q = eigh_tridiagonal(alpha, beta[:-1]) if len(alpha) > 1 else (alpha.copy(), np.ones((1, 1)))
    return Q @ (np.exp(-1j * tau * theta) * Q[0].conj())


def expmv(H, v, t: float, tol: float = 1e-12, krylov_dim: int = 20,
          max_substeps: int = 100000, info: KrylovInfo | None = None) -> np.ndarray:
    """``exp(-i t H) v``; ``H`` is a sparse matrix, LinearOperator or callable.

    ``tol`` bounds the estimated error relative to ``|v|`` over the whole step.
    """
    apply = _as_apply(H)
    w = np.asarray(v, dtype=complex).copy()
    info = KrylovInfo() if info is None else info
    if t == 0 or not np.any(w):
        return w
    m = max(1, min(krylov_dim, w.shape[0]))
    done = 0.0
    sign = 1.0 if t > 0 else -1.0
    total = abs(t)
    while done < total * (1 - 1e-14):
        if info.substeps >= max_substeps:
            raise KrylovBreakdown(f"Lanczos exponential needed more than {max_substeps} substeps")
        V, alpha, beta, beta0, k = _lanczos(apply, w, m)
        info.matvecs += k
        tau = total - done
        while True:
            y = _small_exp(alpha, beta, sign * tau)
            err = beta0 * beta[-1] * abs(y[-1])
            # relative to |v|, with a floor for the roundoff of the small exponential
            if err <= beta0 * (tol * tau / total + _ROUNDOFF) or beta[-1] == 0.0:
                break
            tau *= 0.5
            if tau < 1e-14 * total:
                raise KrylovBreakdown("Lanczos step size collapsed")
        w = beta0 * (V[:k].T @ y)
        info.error_estimate += err
        info.substeps += 1
        done += tau
    return w


def expmv_times(H, v, times, **kw) -> np.ndarray:
    """``exp(-i t H) v`` at each of the increasing ``times`` (rows of the result)."""
    times = np.asarray(times, float)
    out = np.empty((len(times), len(v)), dtype=complex)
    w = np.asarray(v, dtype=complex)
    t_prev = 0.0
    for i, t in enumerate(times):
        w = expmv(H, w, t - t_prev, **kw)
        out[i] = w
        t_prev = t
    return out
