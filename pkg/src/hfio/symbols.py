"""Amplitude representation and empirical symbol-class membership.

An amplitude ``a(x, theta)`` claims an order ``m`` and a regularity
``rho`` in {0, 1}: membership in the class means every derivative
``d^alpha_x d^beta_theta a`` is bounded by ``C * lam^(m - rho*(|alpha|+|beta|))``
with a finite constant.  Verification here is empirical: constants are
estimated as sups over a sampled box, so every verdict is explicitly
"on the sampled box only" -- a global claim is not decidable for
black-box callables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._jsonutil import canonical_dumps
from .core import (
    Grid,
    block_samples,
    fd_derivative_batch,
    weight,
)
from .errors import InvalidArgumentError

DEFAULT_BOX_HALF_WIDTH = 10.0
DEFAULT_BOX_POINTS = 41
DEFAULT_EXTRA_SAMPLES = 200


@dataclass(frozen=True)
class AmplitudeSpec:
    """Amplitude ``a(x, theta)`` with claimed order and regularity.

    Parameters
    ----------
    dim : int
        Spatial dimension n; x and theta each live in R^n.
    func : callable
        Vectorized evaluator ``(x, theta) -> values`` mapping arrays of
        shape ``(..., n)`` to ``(...)``; may return complex.
    order : float
        Claimed order m of the class.
    rho : int
        Claimed regularity, 0 or 1.
    derivative : callable, optional
        Exact-derivative oracle ``(alpha, beta) -> evaluator or None``.
        When present it is preferred over finite differences.
    """

    dim: int
    func: Callable = field(repr=False)
    order: float
    rho: int
    name: str = "amplitude"
    derivative: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        if self.rho not in (0, 1):
            raise InvalidArgumentError("rho must be 0 or 1")

    def __call__(self, x, theta):
        return self.func(np.asarray(x, float), np.asarray(theta, float))

    def scaled(self, c: complex) -> "AmplitudeSpec":
        """Amplitude ``c * a`` with the same claimed class."""
        base = self

        def deriv(alpha, beta):
            ev = base.deriv_evaluator(alpha, beta)
            if ev is None:
                return None
            return lambda x, th: c * np.asarray(ev(x, th))

        return AmplitudeSpec(
            dim=base.dim,
            func=lambda x, th: c * np.asarray(base.func(x, th)),
            order=base.order, rho=base.rho,
            name=f"{base.name}*{c}",
            derivative=deriv if base.derivative is not None else None)

    def deriv_evaluator(self, alpha, beta):
        if self.derivative is None:
            return None
        return self.derivative(tuple(alpha), tuple(beta))

    def self_test(self, n_points: int = 100, seed: int = 1234,
                  box: float = 5.0, tol: float = 1e-4) -> dict:
        """Check exact-derivative oracles against finite differences at
        random points; returns max relative discrepancy per multi-index."""
        if self.derivative is None:
            return {"checked": False}
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-box, box, size=(n_points, 2 * self.dim))
        report = {}
        for alpha, beta in _multi_index_pairs(self.dim, 2):
            ev = self.deriv_evaluator(alpha, beta)
            if ev is None:
                continue
            exact = np.asarray(ev(pts[:, :self.dim], pts[:, self.dim:]),
                               dtype=complex)
            fd = fd_derivative_batch(
                lambda q: self.func(q[..., :self.dim], q[..., self.dim:]),
                pts, alpha + beta)
            scale = 1.0 + np.abs(exact)
            disc = float(np.max(np.abs(exact - fd) / scale))
            report[(alpha, beta)] = disc
        worst = max(report.values()) if report else 0.0
        return {"checked": True, "max_discrepancy": worst,
                "passed": worst <= tol, "per_index": report}


def _multi_index_pairs(n: int, k: int):
    """All (alpha, beta) with alpha, beta in N^n and |alpha|+|beta| <= k,
    in deterministic lexicographic order."""
    def multis(total):
        if n == 1:
            return [(total,)]
        return [(i, total - i) for i in range(total + 1)]

    pairs = []
    for ka in range(k + 1):
        for kb in range(k + 1 - ka):
            for alpha in multis(ka):
                for beta in multis(kb):
                    pairs.append((alpha, beta))
    return pairs


@dataclass(frozen=True)
class SeminormTable:
    """Estimated class constants per multi-index pair, with witnesses."""

    max_order: int
    order: float
    rho: int
    entries: dict = field(repr=False)  # (alpha, beta) -> (C, witness)
    box_half_width: float = DEFAULT_BOX_HALF_WIDTH

    def constant(self, alpha, beta) -> float:
        return self.entries[(tuple(alpha), tuple(beta))][0]

    def max_constant(self) -> float:
        return max(c for c, _ in self.entries.values())

    def to_jsonable(self) -> dict:
        entries = [
            {"alpha": list(a), "beta": list(b), "C": c,
             "witness": list(w)}
            for (a, b), (c, w) in sorted(self.entries.items())
        ]
        return {"k": self.max_order, "entries": entries}

    def to_json(self) -> str:
        return canonical_dumps(self.to_jsonable())


@dataclass(frozen=True)
class MembershipVerdict:
    """Outcome of a box-sampled class-membership check."""

    member: bool
    scope: str
    c_max: float
    violation: Optional[tuple] = None  # ((alpha, beta), C, witness)


def _sample_points(a: AmplitudeSpec, box: Grid | None):
    if box is None:
        half = DEFAULT_BOX_HALF_WIDTH
        pts_axis = DEFAULT_BOX_POINTS
    else:
        half = box.half_width
        pts_axis = box.points_per_axis
    return block_samples(2 * a.dim, half, pts_axis,
                         extra=DEFAULT_EXTRA_SAMPLES), half


def estimate_seminorms(a: AmplitudeSpec, box: Grid | None = None,
                       k: int = 2) -> SeminormTable:
    """Estimate every class constant ``C_{alpha,beta}`` with
    ``|alpha| + |beta| <= k`` as a sup over the sampled box.

    Deterministic for a fixed box (mesh plus Halton interior points).
    Exact-derivative oracles are used when the amplitude provides them,
    otherwise Richardson-extrapolated central differences.
    """
    if k > 4:
        raise InvalidArgumentError("derivative order capped at 4")
    pts, half = _sample_points(a, box)
    x, th = pts[:, :a.dim], pts[:, a.dim:]
    lam = weight(pts)
    entries = {}
    for alpha, beta in _multi_index_pairs(a.dim, k):
        ev = a.deriv_evaluator(alpha, beta)
        if ev is not None:
            vals = np.asarray(ev(x, th), dtype=complex)
        else:
            vals = fd_derivative_batch(
                lambda q: a.func(q[..., :a.dim], q[..., a.dim:]),
                pts, alpha + beta)
        expo = a.order - a.rho * (sum(alpha) + sum(beta))
        ratio = np.abs(vals) * lam ** (-expo)
        i = int(np.argmax(ratio))
        entries[(alpha, beta)] = (float(ratio[i]), tuple(pts[i]))
    return SeminormTable(max_order=k, order=a.order, rho=a.rho,
                         entries=entries, box_half_width=half)


def check_membership(a: AmplitudeSpec, box: Grid | None = None, k: int = 2,
                     tolerance_c_max: float = 1e3) -> MembershipVerdict:
    """Class membership on the sampled box: member iff every estimated
    constant stays below ``tolerance_c_max``; otherwise report the first
    violating multi-index with its witness point."""
    table = estimate_seminorms(a, box, k)
    worst_key = max(table.entries, key=lambda key: table.entries[key][0])
    c, witness = table.entries[worst_key]
    if c <= tolerance_c_max:
        return MembershipVerdict(member=True, scope="sampled box only",
                                 c_max=c)
    return MembershipVerdict(member=False, scope="sampled box only",
                             c_max=c, violation=(worst_key, c, witness))
