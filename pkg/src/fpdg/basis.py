"""Orthonormal modal bases of total degree <= k on the reference cell.

The reference cell is [-1/2, 1/2]^2.  Basis functions are products of
shifted, L2-normalized Legendre polynomials, ordered by total degree and,
within a degree block, by descending x-degree.  The first function is the
constant 1, so the leading modal coefficient of any cell polynomial is its
cell average.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


def _legendre_1d(x: np.ndarray, kmax: int):
    """Values and derivatives of the orthonormal Legendre family on [-1/2, 1/2].

    Returns arrays of shape (len(x), kmax + 1).  The n-th member is
    sqrt(2n + 1) * P_n(2x), which has unit L2 norm on the reference interval.
    """
    x = np.asarray(x, dtype=float)
    t = 2.0 * x
    vals = np.empty(x.shape + (kmax + 1,))
    ders = np.empty_like(vals)
    p_prev = np.ones_like(t)
    dp_prev = np.zeros_like(t)
    vals[..., 0] = 1.0
    ders[..., 0] = 0.0
    if kmax == 0:
        return vals, ders
    p = t.copy()
    dp = np.ones_like(t)
    vals[..., 1] = np.sqrt(3.0) * p
    ders[..., 1] = 2.0 * np.sqrt(3.0) * dp
    for n in range(2, kmax + 1):
        p_next = ((2 * n - 1) * t * p - (n - 1) * p_prev) / n
        dp_next = dp_prev + (2 * n - 1) * p
        p_prev, p = p, p_next
        dp_prev, dp = dp, dp_next
        scale = np.sqrt(2.0 * n + 1.0)
        vals[..., n] = scale * p
        ders[..., n] = 2.0 * scale * dp
    return vals, ders


@dataclass(frozen=True)
class BasisSet:
    """Evaluator for the modal basis of one polynomial degree."""

    degree: int
    exponents: tuple = field(repr=False)

    @property
    def n_b(self) -> int:
        return len(self.exponents)

    def values(self, points: np.ndarray) -> np.ndarray:
        """Basis values at reference points; shape (npts, n_b)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        vx, _ = _legendre_1d(points[:, 0], self.degree)
        vy, _ = _legendre_1d(points[:, 1], self.degree)
        ex = np.array([e[0] for e in self.exponents])
        ey = np.array([e[1] for e in self.exponents])
        return vx[:, ex] * vy[:, ey]

    def gradients(self, points: np.ndarray) -> np.ndarray:
        """Reference-coordinate gradients; shape (npts, n_b, 2)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        vx, dx = _legendre_1d(points[:, 0], self.degree)
        vy, dy = _legendre_1d(points[:, 1], self.degree)
        ex = np.array([e[0] for e in self.exponents])
        ey = np.array([e[1] for e in self.exponents])
        out = np.empty((points.shape[0], len(self.exponents), 2))
        out[:, :, 0] = dx[:, ex] * vy[:, ey]
        out[:, :, 1] = vx[:, ex] * dy[:, ey]
        return out


def legendre_basis(k: int) -> BasisSet:
    """Total-degree-<= k orthonormal basis; dimension (k+1)(k+2)/2."""
    if k < 1:
        raise ConfigError(f"basis degree must be >= 1, got {k}")
    exps = []
    for d in range(k + 1):
        for ix in range(d, -1, -1):
            exps.append((ix, d - ix))
    return BasisSet(degree=k, exponents=tuple(exps))
