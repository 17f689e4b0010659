"""Sparse operators over the weighted b-spline space.

The core data structure is a table of weighted basis values and gradients
at every quadrature point (CSR, points x padded dofs).  Mass and stiffness
matrices, load vectors, nonlinear-term vectors and Jacobians are all
contractions of those tables against quadrature weights, which keeps every
integral on the identical point cloud and makes the sparsity pattern equal
the support-overlap graph restricted to the domain.

Irrelevant (padded) indices are pinned: their table columns are dropped,
so their rows and columns in every operator are identically zero, and the
linear algebra re-inserts unit diagonals where needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bspline import bspline_derivative, bspline_value
from .quadrature import build_domain_quadrature

__all__ = [
    "AssemblyError",
    "AssembledOperators",
    "assemble_mass_stiffness",
    "assemble_load",
    "assemble_nonlinear",
    "ritz_project",
    "export_coo",
]


class AssemblyError(RuntimeError):
    pass


def _basis_point_tables(basis, weight, dq):
    """CSR tables of w*b_k values and gradients at the quadrature points."""
    m = basis.degree
    h = basis.grid_width
    pts = dq.points
    P = pts.shape[0]
    sx = (pts[:, 0] - basis.origin[0]) / h
    sy = (pts[:, 1] - basis.origin[1]) / h
    cx = np.clip(np.floor(sx).astype(int), 0, basis.cells_per_side - 1)
    cy = np.clip(np.floor(sy).astype(int), 0, basis.cells_per_side - 1)

    nloc = m + 1
    vals_x = np.empty((P, nloc))
    vals_y = np.empty((P, nloc))
    ders_x = np.empty((P, nloc))
    ders_y = np.empty((P, nloc))
    for j in range(nloc):
        ax = sx - cx + (m - j)
        ay = sy - cy + (m - j)
        vals_x[:, j] = bspline_value(m, ax)
        vals_y[:, j] = bspline_value(m, ay)
        ders_x[:, j] = bspline_derivative(m, 1, ax)
        ders_y[:, j] = bspline_derivative(m, 1, ay)

    value = vals_x[:, :, None] * vals_y[:, None, :]
    gx = (ders_x / h)[:, :, None] * vals_y[:, None, :]
    gy = vals_x[:, :, None] * (ders_y / h)[:, None, :]

    w = weight.value(pts[:, 0], pts[:, 1])
    wx, wy = weight.grad(pts[:, 0], pts[:, 1])
    data_b = w[:, None, None] * value
    data_bx = wx[:, None, None] * value + w[:, None, None] * gx
    data_by = wy[:, None, None] * value + w[:, None, None] * gy

    kx = (cx[:, None] - m + np.arange(nloc)[None, :])[:, :, None]
    ky = (cy[:, None] - m + np.arange(nloc)[None, :])[:, None, :]
    kx = np.broadcast_to(kx, (P, nloc, nloc))
    ky = np.broadcast_to(ky, (P, nloc, nloc))
    inside = (
        (kx >= basis.kmin[0]) & (kx <= basis.kmax[0])
        & (ky >= basis.kmin[1]) & (ky <= basis.kmax[1])
    )
    ny = basis.shape[1]
    col = (kx - basis.kmin[0]) * ny + (ky - basis.kmin[1])
    col = np.where(inside, col, 0)
    keep = inside & basis.relevant_mask.ravel()[col]

    rows = np.broadcast_to(np.arange(P)[:, None, None], (P, nloc, nloc))[keep]
    cols = col[keep]
    shape = (P, basis.ndof)
    B = sp.csr_matrix((data_b[keep], (rows, cols)), shape=shape)
    BX = sp.csr_matrix((data_bx[keep], (rows, cols)), shape=shape)
    BY = sp.csr_matrix((data_by[keep], (rows, cols)), shape=shape)
    return B, BX, BY


@dataclass
class AssembledOperators:
    """Weighted mass/stiffness matrices plus the quadrature-point tables.

    ``mass[i, j] = int (w b_i)(w b_j)``, ``stiffness[i, j] = int grad(w b_i)
    . grad(w b_j)``, both on the padded lexicographic layout with pinned
    rows/columns identically zero.
    """

    basis: object
    weight: object
    quadrature: object
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    table_values: sp.csr_matrix = field(repr=False)
    table_grad_x: sp.csr_matrix = field(repr=False)
    table_grad_y: sp.csr_matrix = field(repr=False)

    def __post_init__(self):
        self._values_t = self.table_values.T.tocsr()
        self._grad_x_t = self.table_grad_x.T.tocsr()
        self._grad_y_t = self.table_grad_y.T.tocsr()

    @property
    def ndof(self):
        return self.basis.ndof

    @property
    def pinned(self):
        return self.basis.pinned

    def identity_on_pinned(self):
        return sp.diags(self.pinned.astype(float), format="csr")

    def point_values(self, coeffs):
        """Finite element function values at all quadrature points."""
        return self.table_values @ coeffs

    def l2_norm(self, values_at_points):
        return float(np.sqrt(np.dot(self.quadrature.weights, values_at_points ** 2)))


def assemble_mass_stiffness(basis, weight, q=None, max_depth=4, quadrature=None):
    """Assemble mass and stiffness over the cut-cell quadrature.

    ``q`` defaults to degree + 2 points per direction, slightly
    over-integrating to absorb the polynomial weight's extra degree.
    Fails if any relevant basis function has no quadrature support.
    """
    if q is None:
        q = basis.degree + 2
    dq = quadrature
    if dq is None:
        dq = build_domain_quadrature(weight, basis.cells_per_side, q, max_depth)
    B, BX, BY = _basis_point_tables(basis, weight, dq)
    omega = dq.weights
    scaled = sp.diags(omega)
    mass = (B.T @ scaled @ B).tocsr()
    mass = ((mass + mass.T) * 0.5).tocsr()
    stiff = (BX.T @ scaled @ BX + BY.T @ scaled @ BY).tocsr()
    stiff = ((stiff + stiff.T) * 0.5).tocsr()

    diag = mass.diagonal()
    bad = (diag <= 0.0) & ~basis.pinned
    if bad.any():
        raise AssemblyError(
            f"{int(bad.sum())} relevant basis functions have nonpositive mass diagonal; "
            "quadrature does not resolve their domain overlap"
        )
    return AssembledOperators(
        basis=basis,
        weight=weight,
        quadrature=dq,
        mass=mass,
        stiffness=stiff,
        table_values=B,
        table_grad_x=BX,
        table_grad_y=BY,
    )


def assemble_load(g, ops):
    """Load vector with entries ``int_Omega g * (w b_i)``.

    ``g`` maps coordinate arrays to values; it is evaluated once on the
    cached quadrature point cloud.
    """
    pts = ops.quadrature.points
    vals = np.asarray(g(pts[:, 0], pts[:, 1]), dtype=float)
    if vals.ndim == 0:
        vals = np.full(pts.shape[0], float(vals))
    return ops._values_t @ (ops.quadrature.weights * vals)


def assemble_nonlinear(state, ops):
    """Nonlinear source f(u) = u - u^3 evaluated through the coefficients.

    Returns the dual vector with entries ``int f(u_h) (w b_i)`` and the
    Jacobian block ``int f'(u_h) (w b_j)(w b_i)`` with f'(s) = 1 - 3 s^2.
    """
    u = ops.table_values @ state
    omega = ops.quadrature.weights
    vec = ops._values_t @ (omega * (u - u ** 3))
    jac = (ops.table_values.T @ sp.diags(omega * (1.0 - 3.0 * u ** 2)) @ ops.table_values).tocsr()
    jac = ((jac + jac.T) * 0.5).tocsr()
    return vec, jac


def ritz_project(u0_grad, ops):
    """Energy projection onto the weighted space: solve S beta = (grad u0, grad w b_i).

    ``u0_grad`` maps coordinate arrays to the pair of partial derivatives.
    Pinned entries stay zero.  Raises :class:`AssemblyError` with the
    residual when the factorized solve fails to reproduce the right side.
    """
    pts = ops.quadrature.points
    gx, gy = u0_grad(pts[:, 0], pts[:, 1])
    omega = ops.quadrature.weights
    rhs = ops._grad_x_t @ (omega * np.asarray(gx, dtype=float)) \
        + ops._grad_y_t @ (omega * np.asarray(gy, dtype=float))
    system = (ops.stiffness + ops.identity_on_pinned()).tocsc()
    try:
        beta = spla.splu(system).solve(rhs)
    except RuntimeError as exc:
        raise AssemblyError(f"Ritz projection factorization failed: {exc}") from exc
    residual = np.linalg.norm(system @ beta - rhs)
    scale = max(np.linalg.norm(rhs), 1.0)
    if not np.isfinite(residual) or residual > 1e-8 * scale:
        raise AssemblyError(f"Ritz projection solve residual {residual:.3e} exceeds tolerance")
    return beta


def export_coo(matrix, path):
    """Write a sparse matrix as 'row col value' text lines (debugging aid)."""
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        for i in order:
            fh.write(f"{coo.row[i]} {coo.col[i]} {coo.data[i]!r}\n")
