"""Gauss-Legendre quadrature over implicit domains {w > 0}.

Grid cells fully inside the domain get a tensor Gauss rule; cells cut by
the boundary are subdivided recursively, re-classifying each sub-cell, and
at the deepest level a still-cut sub-cell keeps only the Gauss nodes where
the weight is positive.  Every assembled integrand carries a factor of w
or w^2 vanishing on the boundary, so the node-level zero extension commits
only a subdominant geometric error.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

__all__ = [
    "QuadratureRule",
    "gauss_rule",
    "CellKind",
    "classify_box",
    "classify_cells",
    "DomainQuadrature",
    "build_domain_quadrature",
    "integrate_over_domain",
]

MAX_GAUSS_POINTS = 16
CLASSIFY_SAMPLES = 5  # per-direction lattice, corners included


@dataclass(frozen=True)
class QuadratureRule:
    """1-D Gauss-Legendre rule on [-1, 1]: exact for degree <= 2q-1."""

    points_per_direction: int
    nodes: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=None)
def gauss_rule(q):
    if not 1 <= q <= MAX_GAUSS_POINTS:
        raise ValueError(f"points_per_direction must be in [1, {MAX_GAUSS_POINTS}]")
    nodes, weights = leggauss(q)
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return QuadratureRule(points_per_direction=q, nodes=nodes, weights=weights)


class CellKind(enum.IntEnum):
    EXTERIOR = 0
    INTERIOR = 1
    CUT = 2


def classify_box(weight, box):
    """Classify a rectangle against {w > 0} on a 5x5 sample lattice (corners included)."""
    x0, y0, x1, y1 = box
    t = np.linspace(0.0, 1.0, CLASSIFY_SAMPLES)
    X, Y = np.meshgrid(x0 + t * (x1 - x0), y0 + t * (y1 - y0), indexing="ij")
    w = weight.value(X, Y)
    if np.all(w > 0.0):
        return CellKind.INTERIOR
    if np.all(w <= 0.0):
        return CellKind.EXTERIOR
    return CellKind.CUT


def classify_cells(weight, cells_per_side):
    """Classify every grid cell of the bounding box; returns (M, M) CellKind array."""
    box = weight.bounding_box
    M = cells_per_side
    hx = (box[2] - box[0]) / M
    hy = (box[3] - box[1]) / M
    kinds = np.empty((M, M), dtype=np.int8)
    for lx in range(M):
        for ly in range(M):
            cell = (box[0] + lx * hx, box[1] + ly * hy,
                    box[0] + (lx + 1) * hx, box[1] + (ly + 1) * hy)
            kinds[lx, ly] = classify_box(weight, cell)
    return kinds


def _tensor_points(box, rule):
    x0, y0, x1, y1 = box
    gx = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * rule.nodes
    gy = 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * rule.nodes
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    wx = 0.5 * (x1 - x0) * rule.weights
    wy = 0.5 * (y1 - y0) * rule.weights
    W = np.multiply.outer(wx, wy)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    return pts, W.ravel()


def _collect_cut(weight, box, rule, depth, max_depth, out_pts, out_wts):
    if depth >= max_depth:
        pts, wts = _tensor_points(box, rule)
        keep = weight.value(pts[:, 0], pts[:, 1]) > 0.0
        if keep.any():
            out_pts.append(pts[keep])
            out_wts.append(wts[keep])
        return
    x0, y0, x1, y1 = box
    xm = 0.5 * (x0 + x1)
    ym = 0.5 * (y0 + y1)
    for child in ((x0, y0, xm, ym), (x0, ym, xm, y1), (xm, y0, x1, ym), (xm, ym, x1, y1)):
        kind = classify_box(weight, child)
        if kind == CellKind.INTERIOR:
            pts, wts = _tensor_points(child, rule)
            out_pts.append(pts)
            out_wts.append(wts)
        elif kind == CellKind.CUT:
            _collect_cut(weight, child, rule, depth + 1, max_depth, out_pts, out_wts)


@dataclass(frozen=True)
class DomainQuadrature:
    """Flattened quadrature point cloud over {w > 0} with positive weights."""

    points: np.ndarray  # (P, 2)
    weights: np.ndarray  # (P,)
    cell_kinds: np.ndarray  # (M, M)
    points_per_direction: int
    max_depth: int

    @property
    def size(self):
        return self.points.shape[0]


def build_domain_quadrature(weight, cells_per_side, q, max_depth=4):
    """Build the composite quadrature point cloud on the grid over ``weight``'s box.

    Cells are visited in lexicographic order and cut cells recurse through a
    fixed child order, so identical inputs produce identical point sequences.
    """
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    rule = gauss_rule(q)
    box = weight.bounding_box
    M = cells_per_side
    hx = (box[2] - box[0]) / M
    hy = (box[3] - box[1]) / M
    kinds = classify_cells(weight, M)
    out_pts, out_wts = [], []
    for lx in range(M):
        for ly in range(M):
            cell = (box[0] + lx * hx, box[1] + ly * hy,
                    box[0] + (lx + 1) * hx, box[1] + (ly + 1) * hy)
            kind = kinds[lx, ly]
            if kind == CellKind.INTERIOR:
                pts, wts = _tensor_points(cell, rule)
                out_pts.append(pts)
                out_wts.append(wts)
            elif kind == CellKind.CUT:
                _collect_cut(weight, cell, rule, 0, max_depth, out_pts, out_wts)
    if out_pts:
        points = np.vstack(out_pts)
        weights_arr = np.concatenate(out_wts)
    else:
        points = np.zeros((0, 2))
        weights_arr = np.zeros(0)
    points.flags.writeable = False
    weights_arr.flags.writeable = False
    return DomainQuadrature(
        points=points,
        weights=weights_arr,
        cell_kinds=kinds,
        points_per_direction=q,
        max_depth=max_depth,
    )


def integrate_over_domain(f, weight, cells_per_side, q, max_depth=4, quadrature=None):
    """Integrate ``f(x, y)`` over {w > 0}; zero if the domain has no interior mass.

    ``f`` must accept coordinate arrays.  Pass a prebuilt ``quadrature`` to
    amortize point-cloud construction across integrands.
    """
    dq = quadrature
    if dq is None:
        dq = build_domain_quadrature(weight, cells_per_side, q, max_depth)
    if dq.size == 0:
        return 0.0
    vals = np.asarray(f(dq.points[:, 0], dq.points[:, 1]), dtype=float)
    return float(np.dot(dq.weights, vals))
