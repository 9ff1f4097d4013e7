"""Broken-polynomial fields: per-cell modal coefficient arrays."""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .basis import BasisSet
from .mesh import Mesh
from .quadrature import gauss_rule, tensor_rule


@lru_cache(maxsize=None)
def quadrature_table(basis: BasisSet, q: int):
    """(points, weights, values, gradients) of the tensor rule on the reference cell."""
    pts, wts = tensor_rule(gauss_rule(q))
    return pts, wts, basis.values(pts), basis.gradients(pts)


@dataclass
class DGField:
    """A member of the broken space: coefficients of shape (n_cells, n_b).

    With the orthonormal modal basis the leading coefficient of each cell is
    its cell average, and the global mass is |E| times their sum.
    """

    mesh: Mesh
    basis: BasisSet
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        expected = (self.mesh.n_cells, self.basis.n_b)
        if self.coeffs.shape != expected:
            raise ValueError(f"coefficient array must have shape {expected}, got {self.coeffs.shape}")

    @classmethod
    def zeros(cls, mesh: Mesh, basis: BasisSet) -> "DGField":
        return cls(mesh, basis, np.zeros((mesh.n_cells, basis.n_b)))

    def copy(self) -> "DGField":
        return DGField(self.mesh, self.basis, self.coeffs.copy())

    def cell_averages(self) -> np.ndarray:
        return self.coeffs[:, 0]

    def global_mass(self) -> float:
        return self.mesh.cell_area * float(self.coeffs[:, 0].sum())

    def values_at_quadrature(self, q: int | None = None) -> np.ndarray:
        """Field values at the tensor quadrature points; shape (n_cells, q^2)."""
        if q is None:
            q = self.basis.degree + 1
        _, _, vals, _ = quadrature_table(self.basis, q)
        return self.coeffs @ vals.T

    def quadrature_points(self, q: int | None = None) -> np.ndarray:
        """Physical quadrature points per cell; shape (n_cells, q^2, 2)."""
        if q is None:
            q = self.basis.degree + 1
        pts, _, _, _ = quadrature_table(self.basis, q)
        return self.mesh.centers[:, None, :] + self.mesh.h * pts[None, :, :]
