"""Uniform Cartesian meshes of square cells on a rectangle.

Cells are indexed row-major, i = iy * nx + ix.  Interior faces are stored
by orientation: x-faces carry the unit normal (1, 0) pointing from the cell
with the smaller index into the larger one, y-faces carry (0, 1).  This
canonical orientation satisfies i- < i+ on every interior face.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

_SQUARE_RTOL = 1e-12


@dataclass(frozen=True)
class Mesh:
    lo: tuple
    hi: tuple
    nx: int
    ny: int
    h: float
    centers: np.ndarray = field(repr=False)  # (n_cells, 2)
    fx_minus: np.ndarray = field(repr=False)  # x-face left cells
    fx_plus: np.ndarray = field(repr=False)
    fy_minus: np.ndarray = field(repr=False)  # y-face lower cells
    fy_plus: np.ndarray = field(repr=False)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    @property
    def n_interior_faces(self) -> int:
        return self.fx_minus.size + self.fy_minus.size

    def interior_faces(self):
        """Yield (i_minus, i_plus, unit normal) over all interior faces."""
        nx_hat = np.array([1.0, 0.0])
        ny_hat = np.array([0.0, 1.0])
        for a, b in zip(self.fx_minus, self.fx_plus):
            yield int(a), int(b), nx_hat
        for a, b in zip(self.fy_minus, self.fy_plus):
            yield int(a), int(b), ny_hat

    def boundary_faces(self):
        """Yield (cell index, outward unit normal) over all boundary faces."""
        ix = np.arange(self.nx)
        iy = np.arange(self.ny)
        for cells, normal in [
            (iy * self.nx, (-1.0, 0.0)),
            (iy * self.nx + self.nx - 1, (1.0, 0.0)),
            (ix, (0.0, -1.0)),
            ((self.ny - 1) * self.nx + ix, (0.0, 1.0)),
        ]:
            n = np.array(normal)
            for c in cells:
                yield int(c), n


def build_mesh(lo, hi, nx: int, ny: int) -> Mesh:
    """Partition the rectangle [lo, hi] into nx-by-ny square cells."""
    lo = (float(lo[0]), float(lo[1]))
    hi = (float(hi[0]), float(hi[1]))
    if nx < 1 or ny < 1:
        raise ConfigError(f"cell counts must be >= 1, got nx={nx}, ny={ny}")
    if not (hi[0] > lo[0] and hi[1] > lo[1]):
        raise ConfigError(f"domain corners must satisfy hi > lo, got {lo}, {hi}")
    hx = (hi[0] - lo[0]) / nx
    hy = (hi[1] - lo[1]) / ny
    if abs(hx - hy) > _SQUARE_RTOL * max(hx, hy):
        raise ConfigError(
            f"cells must be square: hx={hx!r} != hy={hy!r}; "
            "choose nx, ny matching the domain aspect ratio"
        )
    h = hx
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    cx = lo[0] + (ix.ravel() + 0.5) * h
    cy = lo[1] + (iy.ravel() + 0.5) * h
    centers = np.column_stack([cx, cy])

    # vertical faces between (ix, iy) and (ix+1, iy)
    gx, gy = np.meshgrid(np.arange(nx - 1), np.arange(ny), indexing="xy")
    fx_minus = (gy * nx + gx).ravel()
    fx_plus = fx_minus + 1
    # horizontal faces between (ix, iy) and (ix, iy+1)
    gx, gy = np.meshgrid(np.arange(nx), np.arange(ny - 1), indexing="xy")
    fy_minus = (gy * nx + gx).ravel()
    fy_plus = fy_minus + nx

    return Mesh(
        lo=lo,
        hi=hi,
        nx=nx,
        ny=ny,
        h=h,
        centers=centers,
        fx_minus=fx_minus.astype(np.intp),
        fx_plus=fx_plus.astype(np.intp),
        fy_minus=fy_minus.astype(np.intp),
        fy_plus=fy_plus.astype(np.intp),
    )
