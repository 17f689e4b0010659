"""Uniform cardinal b-splines and tensor-product bases on implicit domains.

Univariate splines are the standard uniform b-splines of degree ``m`` with
knots ``0, 1, ..., m+1``; bivariate basis functions are products of scaled
translates ``b_k(x, y) = b(x/h - k1) * b(y/h - k2)`` on a square grid of
width ``h``.  A basis function is *relevant* when its support contains a
point of the implicit domain {w > 0}; only relevant functions carry
unknowns, but the index bookkeeping keeps the smallest enclosing
rectangular array so linear algebra can run on a padded, fixed layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "bspline_value",
    "bspline_derivative",
    "TensorBasis",
    "eval_tensor",
    "classify_relevant",
]


def bspline_value(m, x):
    """Evaluate the uniform b-spline of degree ``m`` at ``x`` (scalar or array).

    Degree 0 is the indicator of the half-open interval [0, 1); the value is
    zero outside [0, m+1].  For m >= 1 the spline is continuous, so the
    half-open convention is invisible and evaluation on closed boxes agrees
    with the limit from the left at the right endpoint.
    """
    if m < 0:
        raise ValueError("degree must be >= 0")
    x = np.asarray(x, dtype=float)
    if m == 0:
        return ((x >= 0.0) & (x < 1.0)).astype(float)
    return (x * bspline_value(m - 1, x) + (m + 1 - x) * bspline_value(m - 1, x - 1.0)) / m


def bspline_derivative(m, order, x):
    """``order``-th derivative of the degree-``m`` uniform b-spline at ``x``.

    Uses the exact difference identity d/dx b_m(x) = b_{m-1}(x) - b_{m-1}(x-1)
    recursively; ``order`` may not exceed ``m``.
    """
    if not 0 <= order:
        raise ValueError("derivative order must be >= 0")
    if order > m:
        raise ValueError(f"derivative order {order} exceeds degree {m}")
    if order == 0:
        return bspline_value(m, x)
    x = np.asarray(x, dtype=float)
    return bspline_derivative(m - 1, order - 1, x) - bspline_derivative(m - 1, order - 1, x - 1.0)


@dataclass(frozen=True)
class TensorBasis:
    """Tensor-product b-spline basis over a square bounding box.

    Attributes
    ----------
    degree : int
        Polynomial degree ``m`` of the univariate factors.
    cells_per_side : int
        Number of grid cells per coordinate direction in the bounding box.
    grid_width : float
        Cell width ``h`` (bounding box side / cells_per_side).
    origin : (float, float)
        Lower-left corner of the bounding box.
    kmin, kmax : (int, int)
        Inclusive index corners of the padded rectangular array.
    relevant_mask : ndarray of bool, shape (nx, ny)
        True where the index belongs to the relevant set.
    """

    degree: int
    cells_per_side: int
    grid_width: float
    origin: tuple
    kmin: tuple
    kmax: tuple
    relevant_mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.relevant_mask.flags.writeable = False

    @property
    def shape(self):
        return (self.kmax[0] - self.kmin[0] + 1, self.kmax[1] - self.kmin[1] + 1)

    @property
    def ndof(self):
        """Size of the padded rectangular array (paper-style DOF count)."""
        nx, ny = self.shape
        return nx * ny

    @property
    def n_relevant(self):
        return int(self.relevant_mask.sum())

    @property
    def padded_indices(self):
        """All indices of the rectangular array, lexicographic order, shape (ndof, 2)."""
        nx, ny = self.shape
        kx = np.arange(self.kmin[0], self.kmax[0] + 1)
        ky = np.arange(self.kmin[1], self.kmax[1] + 1)
        out = np.empty((nx * ny, 2), dtype=int)
        out[:, 0] = np.repeat(kx, ny)
        out[:, 1] = np.tile(ky, nx)
        return out

    @property
    def relevant_indices(self):
        """Relevant indices in lexicographic order, shape (n_relevant, 2)."""
        return self.padded_indices[self.relevant_mask.ravel()]

    @property
    def pinned(self):
        """Boolean mask over the padded layout; True where coefficients are pinned to zero."""
        return ~self.relevant_mask.ravel()

    def dof_index(self, k):
        """Row index of tensor index ``k`` in the padded lexicographic layout."""
        k = np.asarray(k, dtype=int)
        ny = self.shape[1]
        return (k[..., 0] - self.kmin[0]) * ny + (k[..., 1] - self.kmin[1])

    def support_box(self, k):
        """Support rectangle of basis function ``k`` as (x0, y0, x1, y1)."""
        h = self.grid_width
        x0 = self.origin[0] + k[0] * h
        y0 = self.origin[1] + k[1] * h
        return (x0, y0, x0 + (self.degree + 1) * h, y0 + (self.degree + 1) * h)


def eval_tensor(basis, k, point):
    """Value and gradient of tensor-product basis function ``k`` at ``point``.

    ``point`` may be a pair of scalars or of equal-shape arrays.  Returns
    ``(value, (d/dx, d/dy))``; support is compact so anything outside
    ``k*h + [0, m+1]^2 * h`` evaluates to exactly zero.
    """
    m = basis.degree
    h = basis.grid_width
    sx = (np.asarray(point[0], dtype=float) - basis.origin[0]) / h - k[0]
    sy = (np.asarray(point[1], dtype=float) - basis.origin[1]) / h - k[1]
    bx = bspline_value(m, sx)
    by = bspline_value(m, sy)
    dbx = bspline_derivative(m, 1, sx) / h
    dby = bspline_derivative(m, 1, sy) / h
    return bx * by, (dbx * by, bx * dby)


def classify_relevant(degree, cells_per_side, weight, samples_per_cell=4):
    """Build a :class:`TensorBasis`, classifying indices as relevant/irrelevant.

    An index is relevant when at least one point of a uniform
    ``samples_per_cell`` x ``samples_per_cell`` lattice (endpoints included)
    on some grid cell of its support has ``weight > 0``.  The padded array is
    the smallest integer rectangle containing the relevant set.

    Raises ``ValueError`` when no index is relevant (degenerate domain/grid).
    """
    m, M = degree, cells_per_side
    if M < 1:
        raise ValueError("cells_per_side must be >= 1")
    if samples_per_cell < 2:
        raise ValueError("samples_per_cell must be >= 2")
    box = weight.bounding_box
    hx = (box[2] - box[0]) / M
    hy = (box[3] - box[1]) / M
    if not np.isclose(hx, hy):
        raise ValueError("bounding box must be square")
    h = hx
    origin = (box[0], box[1])

    # Candidate indices whose support meets the bounding box, plus the cells
    # their supports cover (cells may lie outside the box; w <= 0 there).
    lo, hi = -m, M - 1
    cells = np.arange(lo, hi + m + 1)
    s = samples_per_cell
    offs = np.linspace(0.0, 1.0, s)
    coords = (cells[:, None] + offs[None, :]).ravel()
    px = origin[0] + h * coords
    py = origin[1] + h * coords
    X, Y = np.meshgrid(px, py, indexing="ij")
    positive = weight.value(X, Y) > 0.0
    ncells = cells.size
    cell_positive = positive.reshape(ncells, s, ncells, s).any(axis=(1, 3))

    # k is relevant iff any of the (m+1)^2 support cells has a positive sample.
    nk = hi - lo + 1
    relevant = np.zeros((nk, nk), dtype=bool)
    for dx in range(m + 1):
        for dy in range(m + 1):
            relevant |= cell_positive[dx : dx + nk, dy : dy + nk]

    if not relevant.any():
        raise ValueError("no relevant b-splines: domain does not meet the grid")

    ix, iy = np.nonzero(relevant)
    kmin = (lo + ix.min(), lo + iy.min())
    kmax = (lo + ix.max(), lo + iy.max())
    mask = relevant[ix.min() : ix.max() + 1, iy.min() : iy.max() + 1].copy()
    return TensorBasis(
        degree=m,
        cells_per_side=M,
        grid_width=h,
        origin=origin,
        kmin=kmin,
        kmax=kmax,
        relevant_mask=mask,
    )
