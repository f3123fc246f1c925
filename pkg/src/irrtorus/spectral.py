"""Dealiased cubic convolution on the ``Q_L`` lattice via padded FFTs."""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft


class DealiasingError(ValueError):
    pass


def min_grid(L: int) -> int:
    # products of three Q_L fields live in Q_3L; aliases shift by the grid
    # size and must not land back in Q_L
    return 4 * L + 1


class CubicConvolution:
    """``N_k(z) = sum_{k1 + k2 - k3 = k} z_k1 z_k2 conj(z_k3)`` restricted to ``Q_L``.

    Equivalent to projecting ``|psi|^2 psi`` onto ``Q_L`` where
    ``psi(x) = sum_k z_k exp(i k.x)``.  Exact (alias free) when the grid has at
    least ``4L + 1`` points per side.
    """

    def __init__(self, L: int, grid: int | None = None):
        self.L = int(L)
        need = min_grid(self.L)
        if grid is None:
            grid = sfft.next_fast_len(need)
        if grid < need:
            raise DealiasingError(f"grid {grid} too small for L={L}; need at least {need}")
        self.grid = int(grid)
        self._idx = np.arange(-self.L, self.L + 1) % self.grid

    def to_grid(self, z: np.ndarray) -> np.ndarray:
        w = 2 * self.L + 1
        spec = np.zeros((self.grid, self.grid), dtype=complex)
        spec[np.ix_(self._idx, self._idx)] = z.reshape(w, w)
        return sfft.ifft2(spec) * self.grid ** 2

    def from_grid(self, u: np.ndarray) -> np.ndarray:
        spec = sfft.fft2(u) / self.grid ** 2
        return spec[np.ix_(self._idx, self._idx)]

    def __call__(self, z: np.ndarray) -> np.ndarray:
        u = self.to_grid(z)
        return self.from_grid(np.abs(u) ** 2 * u).reshape(np.shape(z))

    def quartic(self, z: np.ndarray) -> float:
        """``sum over momentum tuples in Q_L`` of ``z z conj(z) conj(z)`` (real)."""
        return float(np.real(np.vdot(z.ravel(), self(z).ravel())))
