"""Shared numeric substrate: weight function, grids, sampled fields,
finite-difference derivatives, semiclassical parameter handling.

Conventions
-----------
* Points are row vectors: an array of shape ``(..., d)`` is a batch of
  points in ``R^d``.  All evaluators used by this library are expected to
  accept such batches and return an array of shape ``(...,)``.
* The weight is ``lam(v) = (1 + |v|^2)^(1/2)`` over the concatenation of
  whatever variable blocks are in play; it is >= 1 everywhere and grows
  linearly at infinity.
* All container types are frozen; operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Sequence

import numpy as np

from .errors import (
    EvaluationError,
    InvalidArgumentError,
    UnsupportedDimensionError,
)

MAX_DERIVATIVE_ORDER = 4

_HALTON_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19)


def weight(v) -> np.ndarray:
    """Weight ``lam(v) = sqrt(1 + sum v_i^2)`` over the trailing axis.

    Accepts a single point ``(d,)`` or a batch ``(..., d)``; scalars are
    treated as points in R^1.  Raises on non-finite input.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        v = v[None]
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError("weight: non-finite input")
    return np.sqrt(1.0 + np.sum(v * v, axis=-1))


@dataclass(frozen=True)
class HValue:
    """Semiclassical parameter h > 0 (typical range (0, 1])."""

    h: float

    def __post_init__(self):
        if not (np.isfinite(self.h) and self.h > 0):
            raise InvalidArgumentError(f"h must be positive, got {self.h}")


def as_h(value) -> float:
    """Normalize an ``HValue`` or bare number to a validated float."""
    if isinstance(value, HValue):
        return float(value.h)
    return HValue(float(value)).h


@dataclass(frozen=True)
class Grid:
    """Uniform symmetric grid on ``[-L, L]^dim`` including both endpoints.

    Quadrature is uniform: every node carries weight ``spacing**dim``
    (trapezoid-equivalent for integrands that decay at the box edge).
    """

    dim: int
    half_width: float
    points_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise UnsupportedDimensionError(
                f"grid dim must be 1 or 2, got {self.dim}")
        if self.points_per_axis < 2:
            raise InvalidArgumentError("points_per_axis must be >= 2")
        if not (np.isfinite(self.half_width) and self.half_width > 0):
            raise InvalidArgumentError("half_width must be positive")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.points_per_axis - 1)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width,
                           self.points_per_axis)

    @property
    def node_count(self) -> int:
        return self.points_per_axis ** self.dim

    @property
    def node_weight(self) -> float:
        return self.spacing ** self.dim

    def nodes(self) -> np.ndarray:
        """All nodes as an ``(node_count, dim)`` array, C-ordered mesh."""
        if self.dim == 1:
            return self.axis[:, None]
        a = self.axis
        X, Y = np.meshgrid(a, a, indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=-1)

    def to_meta(self) -> dict:
        return {"dim": self.dim, "half_width": self.half_width,
                "points_per_axis": self.points_per_axis}


def make_grid(dim: int, half_width: float, points_per_axis: int) -> Grid:
    """Build a uniform grid; unsupported ``dim`` raises."""
    return Grid(dim=dim, half_width=float(half_width),
                points_per_axis=int(points_per_axis))


@dataclass(frozen=True)
class ScalarField:
    """Complex samples of a function on a grid's nodes."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.grid.node_count,):
            raise InvalidArgumentError(
                f"field has {vals.shape} values for {self.grid.node_count} nodes")
        object.__setattr__(self, "values", vals)

    def norm(self) -> float:
        """Weighted L2 norm on the grid."""
        return float(np.sqrt(self.grid.node_weight
                             * np.sum(np.abs(self.values) ** 2)))


def field_from_callable(grid: Grid, func) -> ScalarField:
    vals = np.asarray(func(grid.nodes()), dtype=complex).reshape(-1)
    return ScalarField(grid, vals)


@dataclass(frozen=True)
class DerivativeRequest:
    """Multi-indices per variable block; total order capped.

    ``alpha`` applies to the leading block of coordinates, ``beta`` to the
    next, ``gamma`` (optional) to the last; their concatenation must match
    the dimension of the evaluation point.
    """

    alpha: tuple
    beta: tuple = ()
    gamma: tuple = ()
    max_order: int = MAX_DERIVATIVE_ORDER

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(int(o) for o in self.alpha))
        object.__setattr__(self, "beta", tuple(int(o) for o in self.beta))
        object.__setattr__(self, "gamma", tuple(int(o) for o in self.gamma))
        orders = self.alpha + self.beta + self.gamma
        if any(o < 0 for o in orders):
            raise InvalidArgumentError("derivative orders must be >= 0")
        if sum(orders) > self.max_order:
            raise InvalidArgumentError(
                f"total order {sum(orders)} exceeds max {self.max_order}")

    @property
    def orders(self) -> tuple:
        return self.alpha + self.beta + self.gamma

    @property
    def total_order(self) -> int:
        return sum(self.orders)


def _central_stencil(order: int):
    """Offsets (in units of the step) and signed binomial weights for the
    central difference of a given order; divisor is step**order."""
    k = order
    js = np.arange(k + 1)
    coeffs = np.array([(-1) ** j * _binom(k, j) for j in js], dtype=float)
    offsets = k / 2.0 - js
    return offsets, coeffs


def _binom(n, k):
    from math import comb
    return comb(n, k)


def fd_derivative_batch(func, points: np.ndarray, orders: Sequence[int],
                        base_step: float | None = None) -> np.ndarray:
    """Mixed central-difference derivative at a batch of points.

    ``func`` maps ``(..., d) -> (...)`` and may return complex values.
    One Richardson step (full-step vs half-step stencils) removes the
    leading O(step^2) truncation term.  The step follows the documented
    rule ``max(1e-3, 1e-3 * lam(point))`` per point unless overridden.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    orders = tuple(int(o) for o in orders)
    if len(orders) != points.shape[-1]:
        raise InvalidArgumentError("one order per coordinate required")

    if base_step is None:
        step = np.maximum(1e-3, 1e-3 * weight(points))
    else:
        step = np.full(points.shape[0], float(base_step))

    def estimate(hs):
        total = np.zeros(points.shape[0], dtype=complex)
        axes = [(_central_stencil(o) if o > 0 else (np.array([0.0]),
                                                    np.array([1.0])))
                for o in orders]
        for combo in product(*[range(len(a[0])) for a in axes]):
            shift = np.array([axes[d][0][combo[d]]
                              for d in range(len(orders))])
            coeff = np.prod([axes[d][1][combo[d]]
                             for d in range(len(orders))])
            pts = points + shift[None, :] * hs[:, None]
            vals = np.asarray(func(pts))
            if not np.all(np.isfinite(vals.real)) or not np.all(
                    np.isfinite(np.imag(vals))):
                bad = np.argwhere(~np.isfinite(np.abs(vals)))
                idx = int(bad[0][0]) if bad.size else 0
                raise EvaluationError(
                    "non-finite value during finite differencing",
                    point=pts[idx])
            total = total + coeff * vals
        denom = np.prod([hs ** o for o in orders if o > 0], axis=0) \
            if any(orders) else np.ones_like(hs)
        return total / denom

    if sum(orders) == 0:
        vals = np.asarray(func(points), dtype=complex)
        if not np.all(np.isfinite(np.abs(vals))):
            bad = np.argwhere(~np.isfinite(np.abs(vals)))
            idx = int(bad[0][0]) if bad.size else 0
            raise EvaluationError("non-finite function value",
                                  point=points[idx])
        return vals

    coarse = estimate(step)
    fine = estimate(step / 2.0)
    return (4.0 * fine - coarse) / 3.0


def fd_derivative(func: Callable, point, req: DerivativeRequest) -> float:
    """Scalar front end to :func:`fd_derivative_batch`.

    Real input/real output convenience wrapper; complex parts are kept
    if the callable returns complex values.
    """
    point = np.asarray(point, dtype=float).reshape(1, -1)
    out = fd_derivative_batch(func, point, req.orders)
    val = out[0]
    if abs(val.imag) == 0.0:
        return float(val.real)
    return complex(val)


def halton_points(count: int, dim: int, half_width: float,
                  skip: int = 20) -> np.ndarray:
    """Deterministic low-discrepancy points in ``[-L, L]^dim``.

    Van der Corput radical-inverse sequences with one prime base per
    coordinate; a short initial segment is skipped to avoid the origin
    clustering of the raw sequence.
    """
    if dim > len(_HALTON_PRIMES):
        raise UnsupportedDimensionError("too many Halton dimensions")
    idx = np.arange(skip, skip + count)
    cols = []
    for d in range(dim):
        base = _HALTON_PRIMES[d]
        x = np.zeros(count)
        f = 1.0
        i = idx.astype(np.int64).copy()
        while np.any(i > 0):
            f /= base
            x += f * (i % base)
            i //= base
        cols.append(x)
    u = np.stack(cols, axis=-1)
    return (2.0 * u - 1.0) * half_width


def block_samples(dim: int, half_width: float, points_per_axis: int,
                  extra: int = 200, max_mesh: int = 250_000) -> np.ndarray:
    """Sample points for a product box ``[-L, L]^dim``: a full mesh
    (strided down if it would exceed ``max_mesh`` nodes) plus ``extra``
    Halton interior points."""
    axis = np.linspace(-half_width, half_width, points_per_axis)
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    mesh = np.stack([g.ravel() for g in grids], axis=-1)
    if mesh.shape[0] > max_mesh:
        stride = int(np.ceil(mesh.shape[0] / max_mesh))
        mesh = mesh[::stride]
    if extra > 0:
        mesh = np.concatenate([mesh, halton_points(extra, dim, half_width)])
    return mesh
