"""Assembly of the interior-penalty diffusion form and the upwinded
convection form on the broken space.

Both forms integrate with the tensor Gauss rule of k+1 points per
direction and omit all boundary-face integrals: since convection is
explicit and diffusion implicit, dropping each form's boundary integral
separately realizes the zero-total-flux wall condition while keeping both
forms individually conservative.

Operators are stored as scipy CSR matrices with a cell-block structure of
at most five blocks per block row (self plus edge neighbors).
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import BasisSet
from .fields import DGField, quadrature_table
from .mesh import Mesh
from .quadrature import gauss_rule

_SIDE_POINTS = {
    "L": lambda g: np.column_stack([np.full_like(g, -0.5), g]),
    "R": lambda g: np.column_stack([np.full_like(g, 0.5), g]),
    "B": lambda g: np.column_stack([g, np.full_like(g, -0.5)]),
    "T": lambda g: np.column_stack([g, np.full_like(g, 0.5)]),
}


class ReferenceElement:
    """Tabulated basis data at volume and trace quadrature points."""

    def __init__(self, basis: BasisSet, q: int):
        self.basis = basis
        self.q = q
        pts, wts, vals, grads = quadrature_table(basis, q)
        self.vol_pts = pts
        self.vol_w = wts
        self.vol_vals = vals
        self.vol_grads = grads
        rule = gauss_rule(q)
        self.face_nodes = rule.nodes
        self.face_w = rule.weights
        self.trace_vals = {}
        self.trace_grads = {}
        for side, make in _SIDE_POINTS.items():
            p = make(rule.nodes)
            self.trace_vals[side] = basis.values(p)
            self.trace_grads[side] = basis.gradients(p)


@dataclass
class _FaceGroup:
    """One orientation class of interior faces sharing geometry."""

    minus: np.ndarray
    plus: np.ndarray
    normal: np.ndarray
    side_minus: str
    side_plus: str
    points: np.ndarray  # (n_faces, q, 2) physical quadrature points


def _face_groups(mesh: Mesh, ref: ReferenceElement, flip: bool = False):
    """The x- and y-oriented interior face groups of a uniform mesh.

    With ``flip`` the stored orientation of every face is reversed (cells
    swapped, normal negated); assembly must be invariant under this.
    """
    h = mesh.h
    g = ref.face_nodes
    groups = []
    if mesh.fx_minus.size:
        cmin = mesh.centers[mesh.fx_minus]
        px = cmin[:, 0] + 0.5 * h
        pts = np.empty((mesh.fx_minus.size, g.size, 2))
        pts[:, :, 0] = px[:, None]
        pts[:, :, 1] = cmin[:, 1, None] + h * g[None, :]
        groups.append(
            _FaceGroup(mesh.fx_minus, mesh.fx_plus, np.array([1.0, 0.0]), "R", "L", pts)
        )
    if mesh.fy_minus.size:
        cmin = mesh.centers[mesh.fy_minus]
        py = cmin[:, 1] + 0.5 * h
        pts = np.empty((mesh.fy_minus.size, g.size, 2))
        pts[:, :, 0] = cmin[:, 0, None] + h * g[None, :]
        pts[:, :, 1] = py[:, None]
        groups.append(
            _FaceGroup(mesh.fy_minus, mesh.fy_plus, np.array([0.0, 1.0]), "T", "B", pts)
        )
    if flip:
        groups = [
            _FaceGroup(g.plus, g.minus, -g.normal, g.side_plus, g.side_minus, g.points)
            for g in groups
        ]
    return groups


def _block_indices(row_cells, col_cells, nb):
    a = np.arange(nb)
    rows = row_cells[:, None, None] * nb + a[None, :, None] + np.zeros((1, 1, nb), dtype=np.intp)
    cols = col_cells[:, None, None] * nb + a[None, None, :] + np.zeros((1, nb, 1), dtype=np.intp)
    return rows.ravel(), cols.ravel()


class _AssemblerBase:
    """Shared geometry, tables, and sparsity pattern for both forms."""

    def __init__(self, mesh: Mesh, basis: BasisSet, q: int | None = None, flip_faces: bool = False):
        self.mesh = mesh
        self.basis = basis
        self.q = q if q is not None else basis.degree + 1
        self.ref = ReferenceElement(basis, self.q)
        self.groups = _face_groups(mesh, self.ref, flip=flip_faces)
        self.vol_points = mesh.centers[:, None, :] + mesh.h * self.ref.vol_pts[None, :, :]
        nb = basis.n_b
        n = mesh.n_cells
        cells = np.arange(n, dtype=np.intp)
        rows = [None] * (1 + 2 * len(self.groups))
        cols = [None] * (1 + 2 * len(self.groups))
        rows[0], cols[0] = _block_indices(cells, cells, nb)
        for i, grp in enumerate(self.groups):
            rows[1 + 2 * i], cols[1 + 2 * i] = _block_indices(grp.minus, grp.plus, nb)
            rows[2 + 2 * i], cols[2 + 2 * i] = _block_indices(grp.plus, grp.minus, nb)
        self._rows = np.concatenate(rows)
        self._cols = np.concatenate(cols)
        self.n_dof = n * nb

    def _to_csr(self, diag, offdiag):
        """Assemble the canonical-order block data into a CSR matrix.

        ``offdiag`` holds (minus-plus, plus-minus) block arrays per group,
        matching the pattern laid down in the constructor.
        """
        data = [diag.ravel()]
        for mp, pm in offdiag:
            data.append(mp.ravel())
            data.append(pm.ravel())
        matrix = sp.csr_matrix(
            (np.concatenate(data), (self._rows, self._cols)),
            shape=(self.n_dof, self.n_dof),
        )
        return matrix


class NIPGAssembler(_AssemblerBase):
    """Non-symmetric interior-penalty discretization of -div(D grad f)."""

    def __init__(self, mesh, basis, sigma: float, q=None, flip_faces=False):
        if sigma <= 0.0:
            raise ValueError(f"penalty parameter must be positive, got {sigma}")
        super().__init__(mesh, basis, q, flip_faces)
        self.sigma = sigma

    def assemble_field(self, d_field, penalty: bool = True) -> sp.csr_matrix:
        """Assemble with D given by a matrix field v -> (..., 2, 2).

        The penalty term is D-independent, so affine recombinations include
        it exactly once via the ``penalty`` switch.
        """
        ref, mesh = self.ref, self.mesh
        nb = self.basis.n_b
        h = mesh.h
        d_vol = np.asarray(d_field(self.vol_points), dtype=float)
        diag = np.einsum(
            "q,qax,cqxy,qby->cab",
            ref.vol_w, ref.vol_grads, d_vol, ref.vol_grads,
            optimize=True,
        )
        offdiag = []
        for grp in self.groups:
            d_face = np.asarray(d_field(grp.points), dtype=float)
            dn = np.einsum("fjxy,x->fjy", d_face, grp.normal)
            tm = ref.trace_vals[grp.side_minus]
            tp = ref.trace_vals[grp.side_plus]
            # physical gradients carry 1/h; the face measure contributes h
            dgm = np.einsum("fjy,jby->fjb", dn, ref.trace_grads[grp.side_minus]) / h
            dgp = np.einsum("fjy,jby->fjb", dn, ref.trace_grads[grp.side_plus]) / h
            w = ref.face_w
            half_h = 0.5 * h
            # consistency (-{D grad f . n}[chi]) and symmetry (+{D grad chi . n}[f])
            mm = half_h * (-np.einsum("j,ja,fjb->fab", w, tm, dgm)
                           + np.einsum("j,fja,jb->fab", w, dgm, tm))
            mp = half_h * (-np.einsum("j,ja,fjb->fab", w, tm, dgp)
                           - np.einsum("j,fja,jb->fab", w, dgm, tp))
            pm = half_h * (np.einsum("j,ja,fjb->fab", w, tp, dgm)
                           + np.einsum("j,fja,jb->fab", w, dgp, tm))
            pp = half_h * (np.einsum("j,ja,fjb->fab", w, tp, dgp)
                           - np.einsum("j,fja,jb->fab", w, dgp, tp))
            if penalty:
                pen_mm = self.sigma * np.einsum("j,ja,jb->ab", w, tm, tm)
                pen_mp = -self.sigma * np.einsum("j,ja,jb->ab", w, tm, tp)
                pen_pm = -self.sigma * np.einsum("j,ja,jb->ab", w, tp, tm)
                pen_pp = self.sigma * np.einsum("j,ja,jb->ab", w, tp, tp)
                mm += pen_mm
                mp += pen_mp
                pm += pen_pm
                pp += pen_pp
            diag_add = np.zeros_like(diag)
            diag_add[grp.minus] += mm
            diag_add[grp.plus] += pp
            diag += diag_add
            offdiag.append((mp, pm))
        return self._to_csr(diag, offdiag)

    def assemble(self, provider, t: float) -> sp.csr_matrix:
        return self.assemble_field(lambda v: provider.diffusion(t, v))


class ConvectionAssembler(_AssemblerBase):
    """Upwind-dissipation (local Lax-Friedrichs) form of -div(b f).

    The numerical flux is central plus a jump penalty scaled by the
    per-face maximum of |b . n| over that face's quadrature points.
    """

    def _face_data(self, provider, t, grp):
        b = np.asarray(provider.drift(t, grp.points), dtype=float)
        bn = b @ grp.normal
        alpha = np.abs(bn).max(axis=1)
        cm = 0.5 * (bn + alpha[:, None])
        cp = 0.5 * (bn - alpha[:, None])
        return cm, cp

    def assemble(self, provider, t: float) -> sp.csr_matrix:
        ref, mesh = self.ref, self.mesh
        h = mesh.h
        b_vol = np.asarray(provider.drift(t, self.vol_points), dtype=float)
        bg = np.einsum("cqd,qad->cqa", b_vol, ref.vol_grads)
        diag = h * np.einsum("q,cqa,qb->cab", ref.vol_w, bg, ref.vol_vals, optimize=True)
        offdiag = []
        for grp in self.groups:
            cm, cp = self._face_data(provider, t, grp)
            tm = ref.trace_vals[grp.side_minus]
            tp = ref.trace_vals[grp.side_plus]
            w = ref.face_w
            mm = -h * np.einsum("j,ja,fj,jb->fab", w, tm, cm, tm, optimize=True)
            mp = -h * np.einsum("j,ja,fj,jb->fab", w, tm, cp, tp, optimize=True)
            pm = h * np.einsum("j,ja,fj,jb->fab", w, tp, cm, tm, optimize=True)
            pp = h * np.einsum("j,ja,fj,jb->fab", w, tp, cp, tp, optimize=True)
            diag_add = np.zeros_like(diag)
            diag_add[grp.minus] += mm
            diag_add[grp.plus] += pp
            diag += diag_add
            offdiag.append((mp, pm))
        return self._to_csr(diag, offdiag)

    def apply(self, provider, t: float, f: DGField) -> np.ndarray:
        """Residual vector r with r[chi] = a_conv(f, chi); shape (n_dof,)."""
        ref, mesh = self.ref, self.mesh
        h = mesh.h
        coeffs = f.coeffs
        b_vol = np.asarray(provider.drift(t, self.vol_points), dtype=float)
        bg = np.einsum("cqd,qad->cqa", b_vol, ref.vol_grads)
        fvals = coeffs @ ref.vol_vals.T
        r = h * np.einsum("q,cq,cqa->ca", ref.vol_w, fvals, bg, optimize=True)
        for grp in self.groups:
            cm, cp = self._face_data(provider, t, grp)
            tm = ref.trace_vals[grp.side_minus]
            tp = ref.trace_vals[grp.side_plus]
            fm = coeffs[grp.minus] @ tm.T
            fp = coeffs[grp.plus] @ tp.T
            flux = (cm * fm + cp * fp) * ref.face_w[None, :]
            r[grp.minus] -= h * (flux @ tm)
            r[grp.plus] += h * (flux @ tp)
        return r.ravel()


def assemble_mass(mesh: Mesh, basis: BasisSet) -> sp.csr_matrix:
    """Mass operator |E| * identity (orthonormal basis, affine map)."""
    return sp.identity(mesh.n_cells * basis.n_b, format="csr") * mesh.cell_area


def assemble_nipg(mesh, basis, provider, t, sigma, q=None) -> sp.csr_matrix:
    return NIPGAssembler(mesh, basis, sigma, q=q).assemble(provider, t)


def assemble_convection(mesh, basis, provider, t, q=None) -> sp.csr_matrix:
    return ConvectionAssembler(mesh, basis, q=q).assemble(provider, t)


def apply_convection(mesh, basis, provider, t, f: DGField, q=None) -> np.ndarray:
    return ConvectionAssembler(mesh, basis, q=q).apply(provider, t, f)
