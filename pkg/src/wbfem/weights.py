"""Analytic weight functions describing implicit domains.

A weight ``w`` is positive inside the domain, zero on its boundary and
(for the built-in kinds) negative outside, so the sign of ``w`` is the
single membership predicate used everywhere: relevance classification,
quadrature cell classification and cut-cell node filtering.  Multiplying
basis functions by ``w`` imposes homogeneous essential boundary
conditions exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bspline import eval_tensor

__all__ = [
    "WeightFunction",
    "product_square_weight",
    "disk_weight",
    "custom_weight",
    "weight_value_grad",
    "weighted_basis_value_grad",
]


@dataclass(frozen=True)
class WeightFunction:
    """Implicit domain description: value/gradient maps plus geometry hooks.

    ``value`` and ``grad`` accept coordinate arrays of equal shape and are
    analytic on the whole plane (negative values mark the exterior).
    ``boundary_points(n)`` samples the boundary parameterization, used by
    tests and boundary-condition checks.
    """

    kind: str
    bounding_box: tuple  # (x0, y0, x1, y1)
    interior_point: tuple
    value: callable = field(repr=False)
    grad: callable = field(repr=False)
    boundary_points: callable = field(repr=False)


def product_square_weight(x0=0.0, y0=0.0, x1=1.0, y1=1.0):
    """Polynomial weight (x-x0)(x1-x)(y-y0)(y1-y) vanishing on a rectangle's edges."""

    def value(x, y):
        return (x - x0) * (x1 - x) * (y - y0) * (y1 - y)

    def grad(x, y):
        gy = (y - y0) * (y1 - y)
        gx = (x - x0) * (x1 - x)
        return ((x0 + x1 - 2.0 * x) * gy, (y0 + y1 - 2.0 * y) * gx)

    def boundary_points(n):
        t = np.linspace(0.0, 1.0, n, endpoint=False)
        side = np.empty((4 * n, 2))
        side[:n] = np.column_stack([x0 + t * (x1 - x0), np.full(n, y0)])
        side[n : 2 * n] = np.column_stack([np.full(n, x1), y0 + t * (y1 - y0)])
        side[2 * n : 3 * n] = np.column_stack([x1 - t * (x1 - x0), np.full(n, y1)])
        side[3 * n :] = np.column_stack([np.full(n, x0), y1 - t * (y1 - y0)])
        return side

    return WeightFunction(
        kind="product_square",
        bounding_box=(x0, y0, x1, y1),
        interior_point=((x0 + x1) / 2.0, (y0 + y1) / 2.0),
        value=value,
        grad=grad,
        boundary_points=boundary_points,
    )


def disk_weight(cx=0.5, cy=0.5, radius=0.5):
    """Quadratic weight r^2 - (x-cx)^2 - (y-cy)^2 vanishing on a circle."""
    r2 = radius * radius

    def value(x, y):
        return r2 - (x - cx) ** 2 - (y - cy) ** 2

    def grad(x, y):
        return (-2.0 * (x - cx), -2.0 * (y - cy))

    def boundary_points(n):
        t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        return np.column_stack([cx + radius * np.cos(t), cy + radius * np.sin(t)])

    return WeightFunction(
        kind="disk",
        bounding_box=(cx - radius, cy - radius, cx + radius, cy + radius),
        interior_point=(cx, cy),
        value=value,
        grad=grad,
        boundary_points=boundary_points,
    )


def custom_weight(value, grad, bounding_box, interior_point, boundary_points=None):
    """Wrap user-supplied analytic value/gradient callables as a weight.

    The callables must be vectorized over coordinate arrays and negative
    outside the intended domain.  No expression parsing is done.
    """
    if boundary_points is None:
        def boundary_points(n):
            raise NotImplementedError("custom weight has no boundary parameterization")

    return WeightFunction(
        kind="custom",
        bounding_box=tuple(bounding_box),
        interior_point=tuple(interior_point),
        value=value,
        grad=grad,
        boundary_points=boundary_points,
    )


def weight_value_grad(weight, point):
    """Analytic weight value and gradient at ``point`` (pair of scalars/arrays)."""
    x, y = point
    return weight.value(x, y), weight.grad(x, y)


def weighted_basis_value_grad(weight, basis, k, point):
    """Value and gradient of the weighted basis function ``w * b_k`` at ``point``.

    Product rule: grad = (grad w) b_k + w (grad b_k).  Vanishes on the domain
    boundary because w does, which is what enforces the essential conditions.
    """
    b, (bx, by) = eval_tensor(basis, k, point)
    w, (wx, wy) = weight_value_grad(weight, point)
    return w * b, (wx * b + w * bx, wy * b + w * by)
