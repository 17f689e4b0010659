"""Time marching for the fully-discrete mixed scheme.

Each step couples the primary unknown with its negative Laplacian through
a 2x2 block sparse system.  Step one treats the cubic source implicitly
and is solved by a full Newton iteration; later steps extrapolate the
source from the two previous levels and reduce to a single linear solve.
The fractional derivative contributes a history sum over all previous
increments, so the loop is inherently sequential.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import assemble_nonlinear
from .fractime import l21_coefficients

logger = logging.getLogger(__name__)

__all__ = [
    "StepperError",
    "StepRecord",
    "SolutionHistory",
    "BlockSolveResult",
    "solve_block",
    "first_step",
    "linear_step",
    "march",
    "condition_estimate",
]


class StepperError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class StepRecord:
    n: int
    time: float
    newton_iterations: int
    newton_residual: float
    linear_residual: float
    constraint_residual: float


class SolutionHistory:
    """Coefficient trajectories (U^0..U^n, V^0..V^n) plus per-step telemetry.

    Stored vectors are frozen on append; completed steps are never mutated.
    """

    def __init__(self, u0, v0):
        u0 = np.array(u0, dtype=float)
        v0 = np.array(v0, dtype=float)
        u0.flags.writeable = False
        v0.flags.writeable = False
        self.U = [u0]
        self.V = [v0]
        self.records = []

    @property
    def n(self):
        return len(self.U) - 1

    def append(self, u, v, record):
        u = np.array(u, dtype=float)
        v = np.array(v, dtype=float)
        u.flags.writeable = False
        v.flags.writeable = False
        self.U.append(u)
        self.V.append(v)
        self.records.append(record)


@dataclass(frozen=True)
class BlockSolveResult:
    x_top: np.ndarray
    x_bottom: np.ndarray
    residual: float
    stats: dict = field(default_factory=dict)


def _relative_residual(A, x, b):
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return r / nb if nb > 0.0 else r


def solve_block(a11, a12, a21, a22, rhs_top, rhs_bottom, method="direct", tol=1e-12):
    """Solve the nonsymmetric 2x2 block sparse system.

    ``direct`` factorizes the assembled matrix; ``krylov`` applies symmetric
    diagonal scaling and restarted GMRES to relative tolerance ``tol``.
    The reported residual is ||Ax - b|| / ||b|| recomputed on the assembled
    system.
    """
    n_top = rhs_top.shape[0]
    A = sp.bmat([[a11, a12], [a21, a22]], format="csc")
    b = np.concatenate([rhs_top, rhs_bottom])
    if method == "direct":
        try:
            lu = spla.splu(A)
        except RuntimeError as exc:
            raise StepperError(f"sparse factorization failed: {exc}") from exc
        x = lu.solve(b)
        stats = {"mode": "direct", "factor_nnz": int(lu.nnz)}
    elif method == "krylov":
        d = np.sqrt(np.abs(A.diagonal()))
        d[d == 0.0] = 1.0
        Dinv = sp.diags(1.0 / d)
        As = (Dinv @ A @ Dinv).tocsr()
        bs = b / d
        iters = 0

        def count(_):
            nonlocal iters
            iters += 1

        xs, info = spla.gmres(As, bs, rtol=tol, atol=0.0, restart=100,
                              maxiter=max(50, A.shape[0]), callback=count,
                              callback_type="pr_norm")
        if info != 0:
            raise StepperError(f"GMRES did not converge (info={info})",
                               residual=_relative_residual(As, xs, bs))
        x = xs / d
        stats = {"mode": "krylov", "iterations": iters}
    else:
        raise ValueError(f"unknown solver method {method!r}")
    if not np.all(np.isfinite(x)):
        raise StepperError("block solve produced non-finite values")
    residual = _relative_residual(A, x, b)
    return BlockSolveResult(x_top=x[:n_top], x_bottom=x[n_top:], residual=residual,
                            stats=stats)


def condition_estimate(a11, a12, a21, a22):
    """1-norm condition estimate of the assembled block matrix (diagnostic)."""
    A = sp.bmat([[a11, a12], [a21, a22]], format="csc")
    lu = spla.splu(A)
    inv = spla.LinearOperator(A.shape, matvec=lu.solve)
    return float(spla.onenormest(A) * spla.onenormest(inv))


def _constraint_residual(ops, u, v):
    r = ops.stiffness @ u - ops.mass @ v
    scale = np.linalg.norm(ops.mass @ v)
    return float(np.linalg.norm(r) / scale) if scale > 0.0 else float(np.linalg.norm(r))


def _poisson_guess(ops, v0, solver, tol):
    """Newton warm start: homogeneous-Dirichlet Poisson solve driven by the
    initial auxiliary data, with the constraint-consistent companion."""
    ipin = ops.identity_on_pinned()
    S = (ops.stiffness + ipin).tocsc()
    Mp = (ops.mass + ipin).tocsc()
    ug = spla.splu(S).solve(ops.mass @ v0)
    vg = spla.splu(Mp).solve(ops.stiffness @ ug)
    return ug, vg


def first_step(history, ops, mesh, forcing_load, newton_tol=1e-12, max_iters=25,
               solver="direct", nonlinear=True):
    """Advance from n=0 to n=1 by Newton iteration on the coupled system.

    ``forcing_load`` maps a time to the assembled source vector; it is
    evaluated at the first offset point.  Raises :class:`StepperError`
    carrying the last residual when Newton fails to reach ``newton_tol``
    (l2 norm of the stacked residual) within ``max_iters`` iterations.
    """
    if history.n != 0:
        raise ValueError("first_step requires a history at n=0")
    sigma = mesh.sigma
    c = l21_coefficients(mesh, 1)[0]
    M = ops.mass
    S = ops.stiffness
    SM = (S + M).tocsr()
    ipin = ops.identity_on_pinned()
    U0, V0 = history.U[0], history.V[0]
    G = forcing_load(mesh.offset_time(1))

    u, v = _poisson_guess(ops, V0, solver, newton_tol)

    def residual(u1, v1):
        us = sigma * U0 + (1.0 - sigma) * u1
        if nonlinear:
            fvec, jac = assemble_nonlinear(us, ops)
        else:
            fvec, jac = 0.0, None
        r1 = c * (M @ (u1 - U0)) + SM @ (sigma * V0 + (1.0 - sigma) * v1) - fvec - G
        r2 = S @ u1 - M @ v1
        return r1, r2, jac

    iterations = 0
    res_norm = np.inf
    lin_residual = 0.0
    for _ in range(max_iters):
        r1, r2, jac = residual(u, v)
        res_norm = float(np.sqrt(np.dot(r1, r1) + np.dot(r2, r2)))
        if res_norm <= newton_tol:
            break
        j11 = c * M + ipin
        if nonlinear:
            j11 = (j11 - (1.0 - sigma) * jac).tocsr()
        result = solve_block(j11, (1.0 - sigma) * SM, S, -(M + ipin),
                             -r1, -r2, method=solver, tol=newton_tol)
        u = u + result.x_top
        v = v + result.x_bottom
        lin_residual = result.residual
        iterations += 1
    else:
        r1, r2, _ = residual(u, v)
        res_norm = float(np.sqrt(np.dot(r1, r1) + np.dot(r2, r2)))
        if res_norm > newton_tol:
            raise StepperError(
                f"Newton did not reach {newton_tol:.1e} in {max_iters} iterations "
                f"(residual {res_norm:.3e})", residual=res_norm)

    record = StepRecord(n=1, time=mesh.nodes[1], newton_iterations=iterations,
                        newton_residual=res_norm, linear_residual=lin_residual,
                        constraint_residual=_constraint_residual(ops, u, v))
    logger.debug("step 1: newton_iters=%d residual=%.3e", iterations, res_norm)
    history.append(u, v, record)
    return history


def linear_step(history, ops, mesh, forcing_load, solver="direct", tol=1e-12,
                increments=None, coefficients=None):
    """Advance one linearized step (n >= 2) by a single block solve.

    ``increments`` may carry the precomputed rows ``mass @ (U^j - U^{j-1})``
    for j = 1..n-1 (the marching driver maintains them); otherwise they are
    recomputed from the stored history.
    """
    n = history.n + 1
    if n < 2:
        raise ValueError("linear_step requires n >= 2")
    sigma = mesh.sigma
    coef = coefficients if coefficients is not None else l21_coefficients(mesh, n)
    c = coef[0]
    M = ops.mass
    S = ops.stiffness
    SM = (S + M).tocsr()
    ipin = ops.identity_on_pinned()

    if increments is None:
        increments = np.stack([M @ (history.U[j] - history.U[j - 1])
                               for j in range(1, n)])
    memory = coef[1:][::-1] @ increments[: n - 1]

    tau_star = (1.0 - sigma) * mesh.tau[n - 1] / mesh.tau[n - 2]
    u_hat = (1.0 + tau_star) * history.U[n - 1] - tau_star * history.U[n - 2]
    fvec = ops._values_t @ (ops.quadrature.weights * _cubic_source(ops, u_hat))
    G = forcing_load(mesh.offset_time(n))

    rhs1 = c * (M @ history.U[n - 1]) - memory - sigma * (SM @ history.V[n - 1]) + fvec + G
    result = solve_block(c * M + ipin, (1.0 - sigma) * SM, S, -(M + ipin),
                         rhs1, np.zeros_like(rhs1), method=solver, tol=tol)
    u, v = result.x_top, result.x_bottom
    record = StepRecord(n=n, time=mesh.nodes[n], newton_iterations=0,
                        newton_residual=0.0, linear_residual=result.residual,
                        constraint_residual=_constraint_residual(ops, u, v))
    history.append(u, v, record)
    return history


def _cubic_source(ops, state):
    u = ops.table_values @ state
    return u - u ** 3


def march(ops, mesh, forcing_load, u0, v0, newton_tol=1e-12, newton_max_iters=25,
          solver="direct", on_step=None):
    """Run the scheme over the whole mesh and return the solution history.

    ``forcing_load(t)`` must return the assembled source vector at time t.
    ``on_step(history)`` is called after every completed step (telemetry
    streaming, progress reporting).
    """
    history = SolutionHistory(u0, v0)
    first_step(history, ops, mesh, forcing_load, newton_tol=newton_tol,
               max_iters=newton_max_iters, solver=solver)
    if on_step is not None:
        on_step(history)

    N = mesh.N
    ndof = ops.ndof
    increments = np.zeros((N, ndof))
    increments[0] = ops.mass @ (history.U[1] - history.U[0])
    for n in range(2, N + 1):
        linear_step(history, ops, mesh, forcing_load, solver=solver,
                    tol=newton_tol, increments=increments)
        increments[n - 1] = ops.mass @ (history.U[n] - history.U[n - 1])
        if on_step is not None:
            on_step(history)
    return history
