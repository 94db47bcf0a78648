"""Phase-function catalog and empirical validation of the generating-
function hypotheses.

A phase ``S(x, theta)`` on R^n x R^n is admissible when

* (G1) it is smooth and real valued,
* (G2) ``|d^alpha_x d^beta_theta S| <= C_{alpha,beta} * lam(x,theta)^(2-|alpha|-|beta|)``,
* (G3) ``inf |det d2S/dx dtheta| >= delta0 > 0``.

The full phase of the operator is ``phi(x, theta, y) = S(x, theta) - y.theta``;
admissibility of S implies the oscillatory-integral hypotheses (H1)-(H3*)
for phi, and a separation inequality
``|x - x'| <= C2 |dS/dtheta(x,theta) - dS/dtheta(x',theta)|``.

Verification is empirical on sampled boxes.  Constants that keep growing
when the box doubles mark a hypothesis failure (with a witness point);
stable constants mark a pass.  Thresholds for "keeps growing" are
calibration constants recorded in every report.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._jsonutil import canonical_dumps
from .core import Grid, block_samples, fd_derivative_batch, weight
from .errors import (
    InvalidArgumentError,
    JacobianSingularError,
    LemmaViolatedError,
    SolverError,
)
from .symbols import _multi_index_pairs

# Calibration constants for trend-based verdicts (recorded in reports):
# a constant is "growing" if doubling the box multiplies it by more than
# GROWTH_RATIO_MAX; a lower bound is "vanishing" if halving the box
# multiplies it by less than VANISH_RATIO_MIN.
GROWTH_RATIO_MAX = 1.6
VANISH_RATIO_MIN = 0.7

NEWTON_MAX_ITER = 50
NEWTON_RTOL = 1e-10


@dataclass(frozen=True)
class PhaseSpec:
    """Generating function with derivative oracles.

    ``func`` and the gradient oracles are vectorized: ``(..., n)`` point
    batches in, ``(...)`` (or ``(..., n)`` / ``(..., n, n)``) out.
    ``mixed_hessian[i, j] = d^2 S / dx_i dtheta_j``.
    """

    dim: int
    func: Callable = field(repr=False)
    grad_x: Callable = field(repr=False)
    grad_theta: Callable = field(repr=False)
    mixed_hessian: Callable = field(repr=False)
    delta0: float
    name: str = "phase"
    derivative: Optional[Callable] = field(default=None, repr=False)

    def __call__(self, x, theta):
        return self.func(np.asarray(x, float), np.asarray(theta, float))

    def deriv_evaluator(self, alpha, beta):
        if self.derivative is None:
            return None
        return self.derivative(tuple(alpha), tuple(beta))

    def self_test(self, n_points: int = 100, seed: int = 1234,
                  box: float = 5.0, tol: float = 1e-4) -> dict:
        """Consistency of gradient/Hessian oracles with finite differences."""
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-box, box, size=(n_points, 2 * self.dim))
        x, th = pts[:, :self.dim], pts[:, self.dim:]
        worst = 0.0

        def fd(orders):
            return fd_derivative_batch(
                lambda q: self.func(q[..., :self.dim], q[..., self.dim:]),
                pts, orders)

        gx = np.asarray(self.grad_x(x, th), float).reshape(n_points, self.dim)
        gt = np.asarray(self.grad_theta(x, th), float).reshape(
            n_points, self.dim)
        H = np.asarray(self.mixed_hessian(x, th), float).reshape(
            n_points, self.dim, self.dim)
        for i in range(self.dim):
            ex = [0] * (2 * self.dim)
            ex[i] = 1
            worst = max(worst, float(np.max(np.abs(
                gx[:, i] - fd(ex).real) / (1 + np.abs(gx[:, i])))))
            et = [0] * (2 * self.dim)
            et[self.dim + i] = 1
            worst = max(worst, float(np.max(np.abs(
                gt[:, i] - fd(et).real) / (1 + np.abs(gt[:, i])))))
            for j in range(self.dim):
                em = [0] * (2 * self.dim)
                em[i] = 1
                em[self.dim + j] += 1
                worst = max(worst, float(np.max(np.abs(
                    H[:, i, j] - fd(em).real) / (1 + np.abs(H[:, i, j])))))
        return {"max_discrepancy": worst, "passed": worst <= tol}


@dataclass(frozen=True)
class QuadraticPhase:
    """Quadratic family ``S = x.A.x/2 + x.B.theta + theta.C.theta/2``.

    A and C symmetric; the mixed Hessian is B everywhere, so (G3) holds
    exactly when ``|det B| > 0``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, float))
        B = np.atleast_2d(np.asarray(self.B, float))
        C = np.atleast_2d(np.asarray(self.C, float))
        n = B.shape[0]
        if A.shape != (n, n) or B.shape != (n, n) or C.shape != (n, n):
            raise InvalidArgumentError("A, B, C must be square of equal size")
        if not (np.allclose(A, A.T) and np.allclose(C, C.T)):
            raise InvalidArgumentError("A and C must be symmetric")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def dim(self) -> int:
        return self.B.shape[0]

    def to_phase_spec(self, name: str = "quadratic") -> PhaseSpec:
        A, B, C = self.A, self.B, self.C
        n = self.dim
        delta0 = float(abs(np.linalg.det(B)))

        def S(x, th):
            x = np.asarray(x, float)
            th = np.asarray(th, float)
            return (0.5 * np.einsum("...i,ij,...j->...", x, A, x)
                    + np.einsum("...i,ij,...j->...", x, B, th)
                    + 0.5 * np.einsum("...i,ij,...j->...", th, C, th))

        def gx(x, th):
            return np.einsum("ij,...j->...i", A, np.asarray(x, float)) \
                + np.einsum("ij,...j->...i", B, np.asarray(th, float))

        def gt(x, th):
            return np.einsum("ji,...j->...i", B, np.asarray(x, float)) \
                + np.einsum("ij,...j->...i", C, np.asarray(th, float))

        def H(x, th):
            x = np.asarray(x, float)
            shape = x.shape[:-1] + (n, n)
            return np.broadcast_to(B, shape).copy()

        def derivative(alpha, beta):
            ka, kb = sum(alpha), sum(beta)
            if ka + kb > 2:
                return lambda x, th: np.zeros(np.asarray(x).shape[:-1])
            if ka + kb == 0:
                return S
            if (ka, kb) == (1, 0):
                i = alpha.index(1)
                return lambda x, th: gx(x, th)[..., i]
            if (ka, kb) == (0, 1):
                j = beta.index(1)
                return lambda x, th: gt(x, th)[..., j]
            if (ka, kb) == (1, 1):
                i, j = alpha.index(1), beta.index(1)
                return lambda x, th: np.full(np.asarray(x).shape[:-1],
                                             B[i, j])
            if (ka, kb) == (2, 0):
                idx = [i for i, o in enumerate(alpha) for _ in range(o)]
                return lambda x, th: np.full(np.asarray(x).shape[:-1],
                                             A[idx[0], idx[1]])
            idx = [j for j, o in enumerate(beta) for _ in range(o)]
            return lambda x, th: np.full(np.asarray(x).shape[:-1],
                                         C[idx[0], idx[1]])

        return PhaseSpec(dim=n, func=S, grad_x=gx, grad_theta=gt,
                         mixed_hessian=H, delta0=delta0, name=name,
                         derivative=derivative)


@dataclass(frozen=True)
class HypothesisResult:
    hypothesis: str
    verdict: bool
    constant: float
    witness: Optional[tuple] = None
    detail: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ValidationReport:
    """Per-hypothesis verdicts with extremal constants and witnesses."""

    phase_name: str
    results: tuple
    seed: int
    box_half_width: float

    @property
    def passed(self) -> bool:
        return all(r.verdict for r in self.results)

    def result(self, name: str) -> HypothesisResult:
        for r in self.results:
            if r.hypothesis == name:
                return r
        raise KeyError(name)

    def to_jsonable(self) -> dict:
        return {
            "phase": self.phase_name,
            "seed": self.seed,
            "box_half_width": self.box_half_width,
            "growth_ratio_max": GROWTH_RATIO_MAX,
            "vanish_ratio_min": VANISH_RATIO_MIN,
            "results": [
                {"hypothesis": r.hypothesis, "verdict": r.verdict,
                 "constant": r.constant,
                 "witness": list(r.witness) if r.witness is not None else None,
                 "detail": r.detail}
                for r in self.results],
        }

    def to_json(self) -> str:
        return canonical_dumps(self.to_jsonable())


def _phase_samples(S: PhaseSpec, half_width: float, points_axis: int,
                   seed: int):
    pts = block_samples(2 * S.dim, half_width, points_axis, extra=200)
    return pts[:, :S.dim], pts[:, S.dim:], pts


def _g2_constants(S: PhaseSpec, half_width: float, points_axis: int, k: int,
                  seed: int):
    """Sup of |d^alpha_x d^beta_theta S| / lam^(2-|alpha|-|beta|) per pair."""
    x, th, pts = _phase_samples(S, half_width, points_axis, seed)
    lam = weight(pts)
    out = {}
    for alpha, beta in _multi_index_pairs(S.dim, k):
        ev = S.deriv_evaluator(alpha, beta)
        if ev is not None:
            vals = np.asarray(ev(x, th), dtype=float)
        else:
            vals = fd_derivative_batch(
                lambda q: S.func(q[..., :S.dim], q[..., S.dim:]),
                pts, alpha + beta).real
        ratio = np.abs(vals) * lam ** (-(2.0 - sum(alpha) - sum(beta)))
        i = int(np.argmax(ratio))
        out[(alpha, beta)] = (float(ratio[i]), tuple(pts[i]))
    return out


def validate_G(S: PhaseSpec, box: Grid | None = None, k: int = 2,
               seed: int = 1234) -> ValidationReport:
    """Check (G1)-(G3) on a sampled box.

    (G2) constants are estimated on the box and on the half-size box:
    a pair whose constant keeps growing (beyond the recorded calibration
    ratio) fails with the box witness.  (G3) reports the sampled minimum
    of ``|det d2S/dx dtheta|`` as the delta0 estimate; the verdict
    compares it against the claimed delta0.
    """
    if k > 4:
        raise InvalidArgumentError("derivative order capped at 4")
    half = box.half_width if box is not None else 10.0
    pts_axis = box.points_per_axis if box is not None else 41
    results = []

    # (G1): real and finite on the box.
    x, th, pts = _phase_samples(S, half, pts_axis, seed)
    vals = np.asarray(S.func(x, th))
    real_ok = bool(np.all(np.isfinite(vals)) and
                   np.all(np.abs(np.imag(vals)) == 0))
    iworst = int(np.argmax(np.abs(np.imag(vals)))) if vals.size else 0
    results.append(HypothesisResult(
        "G1", real_ok, 0.0,
        witness=None if real_ok else tuple(pts[iworst])))

    # (G2): growth-trend comparison of sampled constants.
    c_full = _g2_constants(S, half, pts_axis, k, seed)
    c_half = _g2_constants(S, half / 2.0, pts_axis, k, seed)
    worst_ratio, worst_pair = 0.0, None
    for pair, (c1, _) in c_full.items():
        c0 = c_half[pair][0]
        ratio = c1 / max(c0, 1e-30)
        if ratio > worst_ratio:
            worst_ratio, worst_pair = ratio, pair
    g2_ok = worst_ratio <= GROWTH_RATIO_MAX
    witness = None if g2_ok else c_full[worst_pair][1]
    results.append(HypothesisResult(
        "G2", g2_ok, max(c for c, _ in c_full.values()),
        witness=witness,
        detail={"constants": {str(pair): c for pair, (c, _) in
                              c_full.items()},
                "worst_growth_ratio": worst_ratio,
                "worst_pair": str(worst_pair)}))

    # (G3): minimum |det| of the mixed Hessian.
    H = np.asarray(S.mixed_hessian(x, th), float).reshape(
        -1, S.dim, S.dim)
    dets = np.abs(np.linalg.det(H))
    i = int(np.argmin(dets))
    delta0_est = float(dets[i])
    g3_ok = delta0_est >= S.delta0 * (1.0 - 1e-9) and S.delta0 > 0
    results.append(HypothesisResult(
        "G3", g3_ok, delta0_est,
        witness=None if g3_ok else tuple(pts[i]),
        detail={"claimed_delta0": S.delta0}))

    return ValidationReport(S.name, tuple(results), seed, half)


def _h_ratios(S: PhaseSpec, half: float, n_samples: int, seed: int):
    """Extremes of the (H3)/(H3*) weight-comparability ratios on a
    sampled (x, theta, y) box, with phi = S - y.theta."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-half, half, size=(n_samples, 3 * S.dim))
    x = pts[:, :S.dim]
    th = pts[:, S.dim:2 * S.dim]
    y = pts[:, 2 * S.dim:]
    gt = np.asarray(S.grad_theta(x, th), float).reshape(-1, S.dim)
    gx = np.asarray(S.grad_x(x, th), float).reshape(-1, S.dim)
    lam_all = weight(pts)
    # (H3): lam(d_y phi, d_theta phi, y) = lam(-theta, dS/dtheta - y, y)
    r3 = weight(np.concatenate([-th, gt - y, y], axis=-1)) / lam_all
    # (H3*): lam(x, d_theta phi, d_x phi) = lam(x, dS/dtheta - y, dS/dx)
    r3s = weight(np.concatenate([x, gt - y, gx], axis=-1)) / lam_all
    return (float(r3.min()), float(r3.max()),
            float(r3s.min()), float(r3s.max()),
            pts[int(np.argmin(r3))], pts[int(np.argmin(r3s))])


def validate_H_via_lemma(S: PhaseSpec, box: Grid | None = None,
                         n_samples: int = 60_000,
                         seed: int = 1234) -> ValidationReport:
    """Empirical (H1)-(H3*) for ``phi = S - y.theta``.

    K1, K2 (resp. K1*, K2*) are sampled extremes of the weight ratios;
    the verdict fails when a lower bound keeps shrinking as the box
    doubles (vanishing trend), or when (G3) already failed on this box
    (the lemma only applies to admissible phases).
    """
    half = box.half_width if box is not None else 10.0
    g_report = validate_G(S, box, k=2, seed=seed)
    g3_ok = g_report.result("G3").verdict

    k1_h, k2_h, k1s_h, k2s_h, _, _ = _h_ratios(S, half / 2.0,
                                               n_samples, seed)
    k1, k2, k1s, k2s, w1, w1s = _h_ratios(S, half, n_samples, seed + 1)
    trend_ok = (k1 >= VANISH_RATIO_MIN * k1_h
                and k1s >= VANISH_RATIO_MIN * k1s_h)
    verdict = bool(g3_ok and k1 > 0 and trend_ok)
    results = (
        HypothesisResult("H-via-lemma", verdict, k1,
                         witness=None if verdict else tuple(w1s),
                         detail={"K1": k1, "K2": k2, "K1*": k1s,
                                 "K2*": k2s,
                                 "K1_half_box": k1_h, "K1*_half_box": k1s_h,
                                 "G3_passed": bool(g3_ok)}),
    )
    return ValidationReport(S.name, results, seed, half)


def check_separation(S: PhaseSpec, box: Grid | None = None,
                     samples: int = 20_000, seed: int = 1234):
    """Empirical separation constant C2 of the theta-gradient map.

    Over random pairs (x, x', theta) returns the max of
    ``|x - x'| / |dS/dtheta(x,theta) - dS/dtheta(x',theta)|`` with the
    witness of the max.  Zero denominators with x != x' violate the
    separation inequality and raise.
    """
    half = box.half_width if box is not None else 10.0
    rng = np.random.default_rng(seed)
    x = rng.uniform(-half, half, size=(samples, S.dim))
    xp = rng.uniform(-half, half, size=(samples, S.dim))
    th = rng.uniform(-half, half, size=(samples, S.dim))
    num = np.linalg.norm(x - xp, axis=-1)
    g1 = np.asarray(S.grad_theta(x, th), float).reshape(-1, S.dim)
    g2 = np.asarray(S.grad_theta(xp, th), float).reshape(-1, S.dim)
    den = np.linalg.norm(g1 - g2, axis=-1)
    bad = (den == 0.0) & (num > 0.0)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise LemmaViolatedError(
            "theta-gradient map identifies distinct x at fixed theta",
            witness=(tuple(x[i]), tuple(xp[i]), tuple(th[i])))
    mask = num > 0
    ratio = np.zeros_like(num)
    ratio[mask] = num[mask] / den[mask]
    i = int(np.argmax(ratio))
    return {"C2": float(ratio[i]),
            "witness": (tuple(x[i]), tuple(xp[i]), tuple(th[i])),
            "samples": samples, "seed": seed}


def omega_region_check(S: PhaseSpec, eps0: float, box: Grid | None = None,
                       n_samples: int = 100_000, seed: int = 1234) -> dict:
    """Sample the near-diagonal region
    ``{ |dS/dtheta(x,theta) - y|^2 < eps0 (|x|^2+|y|^2+|theta|^2) }``
    and report the |y| <= C4 lam(x,theta) bound plus the two-sided
    comparability of lam(x,theta,y) with lam(x,theta) over members."""
    if eps0 < 0:
        raise InvalidArgumentError("eps0 must be >= 0")
    half = box.half_width if box is not None else 10.0
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-half, half, size=(n_samples, 3 * S.dim))
    x = pts[:, :S.dim]
    th = pts[:, S.dim:2 * S.dim]
    y = pts[:, 2 * S.dim:]
    gt = np.asarray(S.grad_theta(x, th), float).reshape(-1, S.dim)
    lhs = np.sum((gt - y) ** 2, axis=-1)
    rhs = eps0 * (np.sum(x * x, -1) + np.sum(y * y, -1) + np.sum(th * th, -1))
    member = lhs < rhs
    count = int(member.sum())
    if count == 0:
        return {"members": 0, "empty": True, "C4": None,
                "ratio_min": None, "ratio_max": None, "seed": seed}
    lam_xt = weight(np.concatenate([x, th], axis=-1))[member]
    lam_xty = weight(pts)[member]
    ynorm = np.linalg.norm(y, axis=-1)[member]
    c4 = float(np.max(ynorm / lam_xt))
    ratio = lam_xty / lam_xt
    return {"members": count, "empty": False, "C4": c4,
            "ratio_min": float(ratio.min()), "ratio_max": float(ratio.max()),
            "seed": seed}


def _newton(residual, jacobian, z0, rtol_scale, max_iter=NEWTON_MAX_ITER):
    """Batched Newton iteration; z has shape (batch, n)."""
    z = np.array(z0, dtype=float)
    target = NEWTON_RTOL * rtol_scale
    for _ in range(max_iter):
        F = residual(z)
        if np.all(np.linalg.norm(F, axis=-1) <= target):
            return z
        J = jacobian(z)
        dets = np.abs(np.linalg.det(J))
        if np.any(dets < 1e-14):
            raise JacobianSingularError(
                "singular mixed Hessian during Newton inversion",
                last_iterate=z)
        z = z - np.linalg.solve(J, F[..., None])[..., 0]
    F = residual(z)
    if np.all(np.linalg.norm(F, axis=-1) <= target):
        return z
    raise SolverError("Newton inversion did not converge", last_iterate=z)


def invert_dxS(S: PhaseSpec, x, xi, theta_init=None) -> np.ndarray:
    """Solve ``dS/dx(x, theta) = xi`` for theta (batched Newton).

    Uses the exact mixed Hessian as the Jacobian; (G3) keeps it
    invertible.  Shapes: x, xi ``(..., n)`` -> theta ``(..., n)``.
    """
    x = np.atleast_2d(np.asarray(x, float))
    xi = np.atleast_2d(np.asarray(xi, float))
    x, xi = np.broadcast_arrays(x, xi)
    th0 = np.zeros_like(xi) if theta_init is None else \
        np.broadcast_to(np.asarray(theta_init, float), xi.shape).copy()
    scale = 1.0 + np.linalg.norm(xi, axis=-1)

    def residual(th):
        return np.asarray(S.grad_x(x, th), float).reshape(th.shape) - xi

    def jacobian(th):
        # dF_i/dtheta_j = d2S/dx_i dtheta_j
        return np.asarray(S.mixed_hessian(x, th), float).reshape(
            th.shape + (S.dim,))

    return _newton(residual, jacobian, th0, scale)


def invert_dthetaS(S: PhaseSpec, theta, y, x_init=None) -> np.ndarray:
    """Solve ``dS/dtheta(x, theta) = y`` for x (mirror of invert_dxS)."""
    theta = np.atleast_2d(np.asarray(theta, float))
    y = np.atleast_2d(np.asarray(y, float))
    theta, y = np.broadcast_arrays(theta, y)
    x0 = np.zeros_like(y) if x_init is None else \
        np.broadcast_to(np.asarray(x_init, float), y.shape).copy()
    scale = 1.0 + np.linalg.norm(y, axis=-1)

    def residual(x):
        return np.asarray(S.grad_theta(x, theta), float).reshape(x.shape) - y

    def jacobian(x):
        # dF_i/dx_j = d2S/dtheta_i dx_j = (mixed Hessian)^T
        H = np.asarray(S.mixed_hessian(x, theta), float).reshape(
            x.shape + (S.dim,))
        return np.swapaxes(H, -1, -2)

    return _newton(residual, jacobian, x0, scale)
