"""Pure numpy implementation of the occupation-basis kernels.

A bosonic configuration of ``N`` particles on ``M`` sites is stored as its
occupation row ``n[0..M-1]``.  With sorted particle positions ``s_1 <= ... <=
s_N`` the numbers ``c_i = s_i + i - 1`` are strictly increasing and

    rank = sum_i binom(c_i, i)

is the colexicographic rank, a bijection onto ``[0, binom(M+N-1, N))``.
"""
from __future__ import annotations

from itertools import combinations_with_replacement

import numpy as np

OCC_DTYPE = np.int16


def binomial_table(n_max: int, k_max: int) -> np.ndarray:
    B = np.zeros((n_max + 1, k_max + 1), dtype=np.int64)
    B[:, 0] = 1
    for n in range(1, n_max + 1):
        B[n, 1:] = B[n - 1, 1:] + B[n - 1, :-1]
    return B


def _positions(occ: np.ndarray, N: int) -> np.ndarray:
    """Sorted particle positions, shape ``(D, N)``."""
    cum = np.cumsum(occ, axis=1)
    j = np.arange(N)
    # position of particle j = number of sites whose cumulative count is <= j
    return np.sum(cum[:, :, None] <= j[None, None, :], axis=1)


def ranks(occ: np.ndarray, binom: np.ndarray) -> np.ndarray:
    occ = np.asarray(occ)
    N = int(occ[0].sum()) if len(occ) else 0
    if N == 0:
        return np.zeros(len(occ), dtype=np.int64)
    s = _positions(occ, N)
    j = np.arange(N)
    return binom[s + j, j + 1].sum(axis=1)


def basis(M: int, N: int, binom: np.ndarray) -> np.ndarray:
    """All occupation rows with ``sum = N``, row ``r`` having rank ``r``."""
    if N == 0:
        return np.zeros((1, M), dtype=OCC_DTYPE)
    pos = np.array(list(combinations_with_replacement(range(M), N)), dtype=np.int64)
    D = len(pos)
    occ = np.zeros((D, M), dtype=OCC_DTYPE)
    np.add.at(occ, (np.repeat(np.arange(D), N), pos.ravel()), 1)
    j = np.arange(N)
    r = binom[pos + j, j + 1].sum(axis=1)
    out = np.empty_like(occ)
    out[r] = occ
    return out


def annihilation_entries(occ: np.ndarray, binom: np.ndarray) -> tuple:
    """Matrix entries of every ``a_x`` acting on the sector held in ``occ``.

    Returns ``(site, src, dst, amp)``: ``a_x |src> = amp |dst>`` where ``dst``
    indexes the sector with one particle fewer.
    """
    occ = np.asarray(occ)
    D = len(occ)
    N = int(occ[0].sum()) if D else 0
    if N == 0:
        e = np.zeros(0, dtype=np.int64)
        return e, e, e, np.zeros(0)
    s = _positions(occ, N)
    j = np.arange(N)
    c = s + j
    prefix = np.cumsum(binom[c, j + 1], axis=1)
    shifted = np.zeros((D, N), dtype=np.int64)
    if N > 1:
        shifted[:, 1:] = binom[c[:, 1:] - 1, j[1:]]
    suffix = np.cumsum(shifted[:, ::-1], axis=1)[:, ::-1]
    rows = np.arange(D)
    sites, srcs, dsts, amps = [], [], [], []
    for k in range(N):
        last = np.ones(D, bool) if k == N - 1 else s[:, k] != s[:, k + 1]
        r = rows[last]
        dst = (prefix[r, k - 1] if k > 0 else 0) + (suffix[r, k + 1] if k < N - 1 else 0)
        x = s[r, k]
        sites.append(x)
        srcs.append(r)
        dsts.append(np.broadcast_to(dst, r.shape))
        amps.append(np.sqrt(occ[r, x].astype(float)))
    return (np.concatenate(sites).astype(np.int64), np.concatenate(srcs).astype(np.int64),
            np.concatenate(dsts).astype(np.int64), np.concatenate(amps))
