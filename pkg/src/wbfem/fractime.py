"""Graded temporal meshes and the L2-1_sigma fractional-derivative machinery.

The Caputo derivative of order ``alpha`` in (0, 1) is discretized at the
offset points ``t_{n-sigma} = sigma*t_{n-1} + (1-sigma)*t_n`` with
``sigma = alpha/2`` on the graded mesh ``t_n = T (n/N)^r``.  All
coefficient integrals have power-function primitives and are evaluated in
closed form; adaptive quadrature of the defining integrals is kept to the
test suite as an independent oracle.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

logger = logging.getLogger(__name__)

__all__ = [
    "GradedMesh",
    "build_mesh",
    "l21_coefficients",
    "l21_coefficient_tables",
    "l21_apply",
    "complementary_coefficients",
    "caputo_power",
]


@dataclass(frozen=True)
class GradedMesh:
    """Temporal grid t_n = T (n/N)^r with L2-1_sigma offset bookkeeping."""

    T: float
    N: int
    r: float
    alpha: float
    nodes: np.ndarray  # (N+1,)
    tau: np.ndarray  # (N,), tau[n-1] = t_n - t_{n-1}
    sigma: float
    offset_nodes: np.ndarray  # (N,), offset_nodes[n-1] = t_{n-sigma}

    def offset_time(self, n):
        """The collocation point t_{n-sigma} of step ``n`` (1-based)."""
        return self.offset_nodes[n - 1]


def build_mesh(T, N, r, alpha):
    """Construct a graded mesh; rejects alpha outside (0,1) and r < 1."""
    if T <= 0.0:
        raise ValueError("final time T must be positive")
    if N < 1:
        raise ValueError("N must be >= 1")
    if r < 1.0:
        raise ValueError("grading parameter r must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError("fractional order alpha must lie in (0, 1)")
    n = np.arange(N + 1, dtype=float)
    nodes = T * (n / N) ** r
    tau = np.diff(nodes)
    sigma = alpha / 2.0
    offset = sigma * nodes[:-1] + (1.0 - sigma) * nodes[1:]
    nodes.flags.writeable = False
    tau.flags.writeable = False
    offset.flags.writeable = False
    return GradedMesh(T=T, N=int(N), r=float(r), alpha=float(alpha),
                      nodes=nodes, tau=tau, sigma=sigma, offset_nodes=offset)


def l21_coefficients(mesh, n):
    """History weights of step ``n``: array ``c`` with ``c[n-j]`` multiplying
    the increment ``u^j - u^{j-1}`` for j = 1..n.

    The last partial interval uses linear interpolation; earlier intervals use
    the quadratic interpolant, whose correction terms are the ``b`` integrals
    reshuffled between neighboring increments.
    """
    if not 1 <= n <= mesh.N:
        raise ValueError("step index out of range")
    alpha = mesh.alpha
    sigma = mesh.sigma
    t = mesh.nodes
    tau = mesh.tau
    ts = mesh.offset_nodes[n - 1]
    g1 = gamma(1.0 - alpha)
    g2 = (1.0 - alpha) * g1

    a_last = (1.0 - sigma) ** (1.0 - alpha) * tau[n - 1] ** (-alpha) / g2
    if n == 1:
        return np.array([a_last])

    j = np.arange(1, n)
    tj = t[j]
    tjm1 = t[j - 1]
    tjp1 = t[j + 1]
    tauj = tau[j - 1]
    s = ts - tjm1
    e = ts - tj
    p1 = s ** (1.0 - alpha) - e ** (1.0 - alpha)
    p2 = s ** (2.0 - alpha) - e ** (2.0 - alpha)
    a = p1 / (tauj * g2)
    mid = 0.5 * (tj + tjm1)
    integral = (ts - mid) * p1 / g2 - p2 / ((2.0 - alpha) * g1)
    b = 2.0 * integral / (tauj * (tjp1 - tjm1))

    # Re-index by the distance subscript n-j (ascending), then fold the
    # quadratic corrections into the neighboring increments.
    asub = np.empty(n)
    bsub = np.empty(n)
    asub[0] = a_last
    asub[1:] = a[::-1]
    bsub[0] = np.nan
    bsub[1:] = b[::-1]

    coef = np.empty(n)
    coef[0] = asub[0] + (tau[n - 2] / tau[n - 1]) * bsub[1]
    idx = np.arange(1, n - 1)
    if idx.size:
        ratio = tau[n - idx - 2] / tau[n - idx - 1]
        coef[idx] = asub[idx] + ratio * bsub[idx + 1] - bsub[idx]
    coef[n - 1] = asub[n - 1] - bsub[n - 1]

    if logger.isEnabledFor(logging.DEBUG) and np.any(np.diff(coef) > 0.0):
        logger.debug("history weights not monotone at step %d", n)
    return coef


def l21_coefficient_tables(mesh, upto=None):
    """Coefficient arrays for steps 1..upto (defaults to N)."""
    upto = mesh.N if upto is None else upto
    return [l21_coefficients(mesh, n) for n in range(1, upto + 1)]


def l21_apply(mesh, samples, tables=None):
    """Apply the discrete fractional derivative to ``samples`` at t_0..t_N.

    Returns the N values at the offset points; ``samples`` may carry trailing
    axes (e.g. coefficient vectors per time level).
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] != mesh.N + 1:
        raise ValueError("need one sample per mesh node")
    if tables is None:
        tables = l21_coefficient_tables(mesh)
    diffs = samples[1:] - samples[:-1]
    out = np.empty_like(diffs)
    for n in range(1, mesh.N + 1):
        coef = tables[n - 1]
        out[n - 1] = np.tensordot(coef[::-1], diffs[:n], axes=(0, 0))
    return out


def complementary_coefficients(tables):
    """Discrete inverse weights of the fractional-derivative operator.

    Given the per-step coefficient arrays for steps 1..n, returns ``Q`` with
    ``Q[n-i]`` for i = n..1 (``Q[0]`` first), satisfying
    ``sum_j Q[n-j] * (applied derivative at step j) = u^n - u^0`` exactly.
    """
    n = len(tables)
    if n == 0:
        raise ValueError("need at least one coefficient table")
    Q = np.zeros(n)
    Q[0] = 1.0 / tables[n - 1][0]
    for i in range(n - 1, 0, -1):
        acc = 0.0
        for k in range(i + 1, n + 1):
            Ak = tables[k - 1]
            acc += (Ak[k - i - 1] - Ak[k - i]) * Q[n - k]
        Q[n - i] = acc / tables[i - 1][0]
    return Q


def caputo_power(alpha, gamma_exp, t):
    """Caputo derivative of t^gamma_exp: Gamma(g+1)/Gamma(g+1-alpha) * t^(g-alpha).

    Only positive exponents are admitted (the defining integral diverges
    otherwise).
    """
    if gamma_exp <= 0.0:
        raise ValueError("exponent must be positive")
    t = np.asarray(t, dtype=float)
    return gamma(gamma_exp + 1.0) / gamma(gamma_exp + 1.0 - alpha) * t ** (gamma_exp - alpha)
