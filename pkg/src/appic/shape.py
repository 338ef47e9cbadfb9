"""B-spline particle shape functions, charge deposition and field interpolation.

Particles couple to the grid through centered cardinal B-splines of order
m in {1, 2, 3} (linear "cloud-in-cell", quadratic, cubic).  A spline of
order m spreads a particle over m+1 nodes per axis.  Deposition and
interpolation share the same stencil machinery so the pair is adjoint up
to the cell-area normalization, which is what grid momentum conservation
relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EscapedParticleError

SUPPORTED_ORDERS = (1, 2, 3)


def bspline_value(order: int, t):
    """Evaluate the centered B-spline of the given order at offsets ``t``.

    Support is |t| < (order+1)/2; the function is a piecewise polynomial
    of degree ``order`` with unit integral.
    """
    t = np.asarray(t, dtype=np.float64)
    a = np.abs(t)
    if order == 1:
        return np.where(a < 1.0, 1.0 - a, 0.0)
    if order == 2:
        inner = 0.75 - t * t
        outer = 0.5 * (1.5 - a) ** 2
        return np.where(a <= 0.5, inner, np.where(a < 1.5, outer, 0.0))
    if order == 3:
        inner = 2.0 / 3.0 - t * t + 0.5 * a**3
        outer = (2.0 - a) ** 3 / 6.0
        return np.where(a <= 1.0, inner, np.where(a < 2.0, outer, 0.0))
    raise ValueError(f"unsupported spline order {order}, expected one of {SUPPORTED_ORDERS}")


def stencil_1d(u, order: int):
    """Stencil start indices and weights for positions ``u`` in grid units.

    Returns ``(start, weights)`` where ``weights`` has shape
    ``(order+1,) + u.shape`` and ``weights[j]`` belongs to node
    ``start + j``.  Even orders anchor on the nearest node, odd orders on
    the cell, which is the standard centering for each parity.
    """
    u = np.asarray(u, dtype=np.float64)
    start = np.floor(u - 0.5 * (order - 1)).astype(np.int64)
    offs = u - start
    weights = np.empty((order + 1,) + u.shape, dtype=np.float64)
    for j in range(order + 1):
        weights[j] = bspline_value(order, offs - j)
    return start, weights


def spline_weights(xi: float, order: int) -> np.ndarray:
    """Weights of the order+1 nodes nearest a particle at cell offset ``xi``.

    ``xi`` is the normalized position within the cell, in [0, 1).  The
    leftmost stencil node is floor(-(order-1)/2 + xi); weights are
    nonnegative and sum to one (partition of unity).
    """
    if not 0.0 <= xi < 1.0:
        raise ValueError(f"xi must lie in [0, 1), got {xi}")
    _, w = stencil_1d(np.float64(xi), order)
    return w


def _node_indices(start, order: int, n: int, periodic: bool):
    """Per-stencil-offset node indices, wrapped or clamped to [0, n)."""
    idx = []
    for j in range(order + 1):
        k = start + j
        idx.append(k % n if periodic else np.clip(k, 0, n - 1))
    return idx


def _support_check(x, y, grid):
    """Raise EscapedParticleError for particles outside a clamped grid box."""
    xmax = grid.x0 + (grid.nx - 1) * grid.h
    ymax = grid.y0 + (grid.ny - 1) * grid.h
    bad = (x < grid.x0) | (x > xmax) | (y < grid.y0) | (y > ymax)
    if np.any(bad):
        raise EscapedParticleError(np.nonzero(np.atleast_1d(bad))[0])


def deposit_density(x, y, w, grid, order: int) -> np.ndarray:
    """Deposit particle weights onto the grid as a nodal charge density.

    Normalized so that sum(rho) * h^2 equals sum(w) exactly (up to
    rounding): each particle contributes w_k * Wx_i * Wy_j / h^2 to node
    (i, j).  Periodic grids wrap the stencil; bounded grids clamp it and
    reject particles outside the box.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    w = np.broadcast_to(np.asarray(w, dtype=np.float64), x.shape)
    periodic = grid.periodic
    if not periodic:
        _support_check(x, y, grid)

    u = (x - grid.x0) / grid.h
    v = (y - grid.y0) / grid.h
    sx, wx = stencil_1d(u, order)
    sy, wy = stencil_1d(v, order)
    ix = _node_indices(sx, order, grid.nx, periodic)
    iy = _node_indices(sy, order, grid.ny, periodic)

    rho = np.zeros(grid.nx * grid.ny, dtype=np.float64)
    for i in range(order + 1):
        wxi = w * wx[i]
        for j in range(order + 1):
            flat = ix[i] * grid.ny + iy[j]
            rho += np.bincount(flat, weights=wxi * wy[j], minlength=rho.size)
    rho /= grid.h**2
    return rho.reshape(grid.nx, grid.ny)


def deposit(particles, grid, order: int):
    """Fill ``grid.rho`` from a particle ensemble and return the grid."""
    grid.rho = deposit_density(particles.x, particles.y, particles.w, grid, order)
    return grid


def interpolate_values(values: np.ndarray, grid, x, y, order: int):
    """Interpolate a nodal scalar array at particle positions.

    Uses the same stencil as deposition (adjoint pairing).  Scalar inputs
    give a scalar output.
    """
    scalar_in = np.isscalar(x) or getattr(x, "ndim", 1) == 0
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    periodic = grid.periodic
    if not periodic:
        _support_check(x, y, grid)

    u = (x - grid.x0) / grid.h
    v = (y - grid.y0) / grid.h
    sx, wx = stencil_1d(u, order)
    sy, wy = stencil_1d(v, order)
    ix = _node_indices(sx, order, grid.nx, periodic)
    iy = _node_indices(sy, order, grid.ny, periodic)

    flat_values = values.reshape(-1)
    out = np.zeros_like(x)
    for i in range(order + 1):
        for j in range(order + 1):
            out += wx[i] * wy[j] * flat_values[ix[i] * grid.ny + iy[j]]
    return out[0] if scalar_in else out


def interpolate(grid, x, y, order: int):
    """Interpolate the grid electric field (ex, ey) at positions (x, y)."""
    ex = interpolate_values(grid.ex, grid, x, y, order)
    ey = interpolate_values(grid.ey, grid, x, y, order)
    return ex, ey


@dataclass(frozen=True)
class MomentReport:
    """Numerically integrated moments of a shape function."""

    order: int
    mass: float
    first_moment: float
    second_moment: float
    min_value: float

    @property
    def ok(self) -> bool:
        return (
            abs(self.mass - 1.0) < 1e-10
            and abs(self.first_moment) < 1e-10
            and self.min_value >= 0.0
        )


def moment_check(order: int, n_points: int = 10_000) -> MomentReport:
    """Quadrature check of the spline moment conditions.

    Integrates the spline piecewise with tiled 10-point Gauss rules
    (about ``n_points`` evaluation points total), which is exact for the
    piecewise polynomials involved.  Unit mass and a vanishing first
    moment give the moment condition of order 2; the second moment is
    reported for reference (1/6, 1/4, 1/3 of h^2 for orders 1, 2, 3).
    """
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported spline order {order}")
    half = 0.5 * (order + 1)
    # order+1 unit-width smooth pieces; Gauss panels never straddle a kink.
    edges = np.linspace(-half, half, order + 2)
    gauss_t, gauss_w = np.polynomial.legendre.leggauss(10)
    panels_per_piece = max(1, n_points // (10 * (order + 1)))

    mass = first = second = 0.0
    min_value = np.inf
    for a, b in zip(edges[:-1], edges[1:]):
        sub = np.linspace(a, b, panels_per_piece + 1)
        mid = 0.5 * (sub[:-1] + sub[1:])
        halfw = 0.5 * (sub[1] - sub[0])
        t = (mid[:, None] + halfw * gauss_t[None, :]).ravel()
        wq = np.tile(halfw * gauss_w, panels_per_piece)
        phi = bspline_value(order, t)
        mass += float(np.dot(wq, phi))
        first += float(np.dot(wq, t * phi))
        second += float(np.dot(wq, t * t * phi))
        min_value = min(min_value, float(phi.min()))
    return MomentReport(order, mass, first, second, min_value)
