"""Occupation-number bases shared by the Fock-space and many-body code.

The hot loops (basis enumeration, ranking, annihilation maps) come from the
compiled extension when it is importable and from a numpy implementation
otherwise.  Set ``HARTREELAB_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp

from . import _occupation_py

_kernels = _occupation_py
BACKEND = "python"
if os.environ.get("HARTREELAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _occupation_ext as _kernels  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on the build
        _kernels = _occupation_py


def kernels(backend: str | None = None):
    """The kernel module for ``backend`` (``"python"``, ``"compiled"`` or the active one)."""
    if backend is None:
        return _kernels
    if backend == "python":
        return _occupation_py
    if backend == "compiled":
        from . import _occupation_ext

        return _occupation_ext
    raise ValueError(f"unknown backend {backend!r}")


def sector_dimension(sites: int, particles: int) -> int:
    from math import comb

    return comb(sites + particles - 1, particles)


@lru_cache(maxsize=8)
def _binom(n_max, k_max):
    B = _kernels.binomial_table(n_max, k_max)
    B.setflags(write=False)
    return B


@dataclass(frozen=True)
class Sector:
    """Fixed particle number ``particles`` on ``sites`` modes, colex ordered."""

    sites: int
    particles: int

    @property
    def dimension(self) -> int:
        return sector_dimension(self.sites, self.particles)

    @property
    def binom(self) -> np.ndarray:
        return _binom(self.sites + self.particles, max(self.particles, 1))

    @cached_property
    def occupations(self) -> np.ndarray:
        occ = _kernels.basis(self.sites, self.particles, self.binom)
        occ.setflags(write=False)
        return occ

    def index(self, occ) -> np.ndarray:
        occ = np.atleast_2d(np.asarray(occ, dtype=np.int16))
        return np.asarray(_kernels.ranks(occ, self.binom))

    def lowering(self) -> list:
        """``a_x`` as sparse maps from this sector to the one below, one per site."""
        if self.particles == 0:
            raise ValueError("the vacuum sector has no lowering map")
        site, src, dst, amp = _kernels.annihilation_entries(self.occupations, self.binom)
        below = sector_dimension(self.sites, self.particles - 1)
        mats = []
        for x in range(self.sites):
            sel = site == x
            mats.append(sp.csr_matrix((amp[sel], (dst[sel], src[sel])), shape=(below, self.dimension)))
        return mats

    def stacked_lowering(self) -> sp.csr_matrix:
        """All ``a_x`` stacked: block ``x`` of rows holds ``a_x``."""
        site, src, dst, amp = _kernels.annihilation_entries(self.occupations, self.binom)
        below = sector_dimension(self.sites, self.particles - 1)
        return sp.csr_matrix((amp, (site * below + dst, src)), shape=(self.sites * below, self.dimension))
