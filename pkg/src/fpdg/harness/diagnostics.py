"""Error norms, moments, and the CSV/grid output formats.

Diagnostics CSV columns, in order:
    step, time, mass, l2h_err, linf_err, sigma11, sigma22,
    min_cell_avg, min_quad_val, dr_iters
Quantities without a value for a given run are written as empty fields.

Convergence CSV columns: dx, tau, l2h_err, l2h_rate, linf_err, linf_rate.
"""
import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..fields import DGField, quadrature_table


def _quad_samples(f: DGField, q: int):
    pts, wts, vals, _ = quadrature_table(f.basis, q)
    phys = f.mesh.centers[:, None, :] + f.mesh.h * pts[None, :, :]
    return phys, wts, f.coeffs @ vals.T


def l2h_error(f: DGField, exact, t: float) -> float:
    """Discrete L2 error: dx^2 * sum_cells sum_nu w_nu |f_h - f|^2, rooted."""
    q = f.basis.degree + 1
    phys, wts, fh = _quad_samples(f, q)
    diff = fh - np.asarray(exact(t, phys), dtype=float)
    return math.sqrt(f.mesh.cell_area * float(np.sum(wts[None, :] * diff * diff)))


def linf_error(f: DGField, exact, t: float) -> float:
    """Max over cells and tensor quadrature points of |f_h - f|."""
    q = f.basis.degree + 1
    phys, _, fh = _quad_samples(f, q)
    return float(np.abs(fh - np.asarray(exact(t, phys), dtype=float)).max())


def convergence_rate(err_coarse: float, err_fine: float) -> float:
    """Observed order: ln(err_coarse / err_fine) / ln 2."""
    if err_coarse <= 0.0 or err_fine <= 0.0:
        raise ConfigError("convergence rate undefined for nonpositive errors")
    return math.log(err_coarse / err_fine) / math.log(2.0)


def covariance_moments(f: DGField) -> np.ndarray:
    """Second moments int v_i v_j f_h dv by a rule exact for the integrand.

    Uses k+2 points per direction (the integrand has per-direction degree
    at most k+2).
    """
    q = f.basis.degree + 2
    pts, wts, vals, _ = quadrature_table(f.basis, q)
    phys = f.mesh.centers[:, None, :] + f.mesh.h * pts[None, :, :]
    fh = f.coeffs @ vals.T
    out = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            out[i, j] = f.mesh.cell_area * float(
                np.sum(wts[None, :] * phys[:, :, i] * phys[:, :, j] * fh)
            )
    return out


def min_quadrature_value(f: DGField) -> float:
    return float(f.values_at_quadrature().min())


@dataclass
class DiagnosticsRecord:
    step: int
    time: float
    mass: float
    l2h_err: float | None = None
    linf_err: float | None = None
    sigma11: float | None = None
    sigma22: float | None = None
    min_cell_avg: float | None = None
    min_quad_val: float | None = None
    dr_iters: int | None = None


_DIAG_COLUMNS = (
    "step", "time", "mass", "l2h_err", "linf_err", "sigma11", "sigma22",
    "min_cell_avg", "min_quad_val", "dr_iters",
)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_diagnostics_csv(path, records):
    with open(path, "w") as fh:
        fh.write(",".join(_DIAG_COLUMNS) + "\n")
        for r in records:
            fh.write(",".join(_fmt(getattr(r, c)) for c in _DIAG_COLUMNS) + "\n")


def write_convergence_csv(path, rows):
    """rows: iterable of (dx, tau, l2h_err, l2h_rate, linf_err, linf_rate)."""
    with open(path, "w") as fh:
        fh.write("dx,tau,l2h_err,l2h_rate,linf_err,linf_rate\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def write_grid_dump(path, f: DGField, t: float):
    """Plain-text field dump: '# nx ny k t' header, one row per cell with
    cell index, center coordinates, cell average, and min/max over the
    tensor quadrature set."""
    vals = f.values_at_quadrature()
    vmin = vals.min(axis=1)
    vmax = vals.max(axis=1)
    with open(path, "w") as fh:
        fh.write(f"# {f.mesh.nx} {f.mesh.ny} {f.basis.degree} {float(t)!r}\n")
        for i in range(f.mesh.n_cells):
            cx, cy = (float(c) for c in f.mesh.centers[i])
            fh.write(
                f"{i} {cx!r} {cy!r} {float(f.coeffs[i, 0])!r} "
                f"{float(vmin[i])!r} {float(vmax[i])!r}\n"
            )
