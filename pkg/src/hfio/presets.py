"""Preset catalog: named phases, named amplitudes, bundled test fields.

Phases enter either through the quadratic coefficient family or as named
presets with hand-coded exact derivatives; the growth hypothesis (G2)
forces at-most-quadratic growth, so this small catalog plus the quadratic
family covers the admissible class.  There is deliberately no expression
parser.
"""

from __future__ import annotations

import numpy as np

from .core import Grid, ScalarField, weight
from .errors import InvalidArgumentError
from .phase import PhaseSpec, QuadraticPhase
from .symbols import AmplitudeSpec

PHASE_PRESETS = ("identity", "chirp", "fresnel", "kinetic", "scaled")
AMPLITUDE_PRESETS = ("one", "lambda_m", "gaussian_theta")


def identity_phase(n: int = 1) -> PhaseSpec:
    """S = x.theta (the h-Fourier transform phase)."""
    eye = np.eye(n)
    return QuadraticPhase(0 * eye, eye, 0 * eye).to_phase_spec("identity")


def scaled_phase(factor: float = 2.0, n: int = 1) -> PhaseSpec:
    """S = c * x.theta; mixed Hessian c*I, determinant factor c^n."""
    eye = np.eye(n)
    return QuadraticPhase(0 * eye, factor * eye,
                          0 * eye).to_phase_spec(f"scaled[{factor}]")


def chirp_phase(n: int = 1) -> PhaseSpec:
    """S = x.theta + |x|^2 / 2 (multiplication by a unit chirp)."""
    eye = np.eye(n)
    return QuadraticPhase(eye, eye, 0 * eye).to_phase_spec("chirp")


def fresnel_phase(n: int = 1) -> PhaseSpec:
    """S = x.theta + |theta|^2 / 2 (free semiclassical propagator)."""
    eye = np.eye(n)
    return QuadraticPhase(0 * eye, eye, eye).to_phase_spec("fresnel")


def kinetic_phase(n: int = 1) -> PhaseSpec:
    """S = x.theta + sqrt(1 + |theta|^2).

    The relativistic-energy term has bounded theta-derivatives of every
    order, so the order <= 2 growth bounds hold; third derivatives decay
    in theta only, not in the joint weight, so strict (G2) checks at
    order >= 3 flag it.  Exact derivative oracles are provided through
    order 4 for n = 1.
    """
    def f(th):
        return np.sqrt(1.0 + np.sum(th * th, axis=-1))

    def S(x, th):
        x, th = np.asarray(x, float), np.asarray(th, float)
        return np.sum(x * th, axis=-1) + f(th)

    def gx(x, th):
        return np.asarray(th, float) + 0.0 * np.asarray(x, float)

    def gt(x, th):
        th = np.asarray(th, float)
        return np.asarray(x, float) + th / f(th)[..., None]

    def H(x, th):
        x = np.asarray(x, float)
        shape = x.shape[:-1] + (n, n)
        return np.broadcast_to(np.eye(n), shape).copy()

    derivative = None
    if n == 1:
        def derivative(alpha, beta):
            ka, kb = sum(alpha), sum(beta)

            def ft(th):
                return np.sqrt(1.0 + np.asarray(th, float)[..., 0] ** 2)

            def t1(th):
                return np.asarray(th, float)[..., 0]

            table = {
                (0, 0): lambda x, th: S(x, th),
                (1, 0): lambda x, th: gx(x, th)[..., 0],
                (0, 1): lambda x, th: gt(x, th)[..., 0],
                (1, 1): lambda x, th: np.ones(np.asarray(x).shape[:-1]),
                (2, 0): lambda x, th: np.zeros(np.asarray(x).shape[:-1]),
                (0, 2): lambda x, th: ft(th) ** -3,
                (0, 3): lambda x, th: -3.0 * t1(th) * ft(th) ** -5,
                (0, 4): lambda x, th: (12.0 * t1(th) ** 2 - 3.0)
                * ft(th) ** -7,
            }
            if (ka, kb) in table:
                return table[(ka, kb)]
            if ka >= 1 and ka + kb >= 3 or ka >= 2:
                return lambda x, th: np.zeros(np.asarray(x).shape[:-1])
            return None

    return PhaseSpec(dim=n, func=S, grad_x=gx, grad_theta=gt,
                     mixed_hessian=H, delta0=1.0, name="kinetic",
                     derivative=derivative)


def phase_preset(name: str, n: int = 1, **kwargs) -> PhaseSpec:
    builders = {
        "identity": identity_phase,
        "chirp": chirp_phase,
        "fresnel": fresnel_phase,
        "kinetic": kinetic_phase,
        "scaled": scaled_phase,
    }
    if name not in builders:
        raise InvalidArgumentError(
            f"unknown phase preset {name!r}; choose from {PHASE_PRESETS}")
    if name == "scaled":
        return scaled_phase(kwargs.get("factor", 2.0), n)
    return builders[name](n)


def _pair_shape(x, th):
    return np.broadcast_shapes(np.asarray(x).shape[:-1],
                               np.asarray(th).shape[:-1])


def one_amplitude(n: int = 1) -> AmplitudeSpec:
    """a = 1; order 0, all derivatives vanish."""
    def deriv(alpha, beta):
        if sum(alpha) + sum(beta) == 0:
            return lambda x, th: np.ones(_pair_shape(x, th))
        return lambda x, th: np.zeros(_pair_shape(x, th))

    return AmplitudeSpec(dim=n, func=lambda x, th: np.ones(
        _pair_shape(x, th)), order=0.0, rho=0, name="one",
        derivative=deriv)


def lambda_m_amplitude(m: float, n: int = 1) -> AmplitudeSpec:
    """a = lam(x, theta)^m; the canonical weight-power family.

    Exact derivatives through order 2 (the chain-rule closed forms);
    higher orders fall back to finite differences.
    """
    def lam(x, th):
        return weight(np.concatenate(
            [np.atleast_2d(np.asarray(x, float)),
             np.atleast_2d(np.asarray(th, float))], axis=-1))

    def a(x, th):
        x = np.asarray(x, float)
        th = np.asarray(th, float)
        lam2 = 1.0 + np.sum(x * x, -1) + np.sum(th * th, -1)
        return lam2 ** (m / 2.0)

    def coord(x, th, idx):
        q = np.concatenate([np.asarray(x, float), np.asarray(th, float)],
                           axis=-1)
        return q[..., idx]

    def deriv(alpha, beta):
        orders = tuple(alpha) + tuple(beta)
        total = sum(orders)
        if total == 0:
            return a
        if total == 1:
            i = orders.index(1)
            return lambda x, th: m * coord(x, th, i) * a(x, th) / (
                lam(x, th) ** 2)
        if total == 2:
            nz = [i for i, o in enumerate(orders) for _ in range(o)]
            i, j = nz[0], nz[1]

            def second(x, th):
                L2 = lam(x, th) ** 2
                base = a(x, th)
                term = m * (m - 2.0) * coord(x, th, i) * coord(x, th, j) \
                    * base / L2 ** 2
                if i == j:
                    term = term + m * base / L2
                return term

            return second
        return None

    return AmplitudeSpec(dim=n, func=a, order=float(m), rho=1,
                         name=f"lambda^{m}", derivative=deriv)


def gaussian_theta_amplitude(n: int = 1) -> AmplitudeSpec:
    """a = exp(-|theta|^2); bounded with bounded derivatives (order 0).

    The derivative decay is in theta only, not in the joint weight, so
    the honest regularity claim is rho = 0.
    """
    def a(x, th):
        th = np.asarray(th, float)
        out = np.exp(-np.sum(th * th, axis=-1))
        return np.broadcast_to(out, _pair_shape(x, th)).copy()

    return AmplitudeSpec(dim=n, func=a, order=0.0, rho=0,
                         name="gaussian_theta")


def coordinate_x_amplitude(n: int = 1) -> AmplitudeSpec:
    """a = x_1; order 1 (unbounded symbol, the boundedness counterexample)."""
    def deriv(alpha, beta):
        orders = tuple(alpha) + tuple(beta)
        if sum(orders) == 0:
            return lambda x, th: np.broadcast_to(
                np.asarray(x, float)[..., 0], _pair_shape(x, th)).copy()
        if orders[0] == 1 and sum(orders) == 1:
            return lambda x, th: np.ones(_pair_shape(x, th))
        return lambda x, th: np.zeros(_pair_shape(x, th))

    return AmplitudeSpec(dim=n, func=lambda x, th: np.broadcast_to(
        np.asarray(x, float)[..., 0], _pair_shape(x, th)).copy(),
        order=1.0, rho=1, name="coordinate_x",
        derivative=deriv)


def amplitude_preset(name: str, n: int = 1, m: float = -1.0) -> AmplitudeSpec:
    if name == "one":
        return one_amplitude(n)
    if name == "lambda_m":
        return lambda_m_amplitude(m, n)
    if name == "gaussian_theta":
        return gaussian_theta_amplitude(n)
    raise InvalidArgumentError(
        f"unknown amplitude preset {name!r}; choose from {AMPLITUDE_PRESETS}")


def bundled_test_fields(grid: Grid) -> list[ScalarField]:
    """Three reference inputs: a unit Gaussian, a shifted Gaussian and a
    chirped Gaussian.  All are band-limited well inside the resolution of
    the default grids (bandwidth <~ 8)."""
    if grid.dim != 1:
        raise InvalidArgumentError("bundled test fields are 1-D")
    x = grid.axis
    fields = [
        np.exp(-x ** 2 / 2.0),
        np.exp(-(x - 2.0) ** 2 / 2.0),
        np.exp(1j * x ** 2 / 2.0) * np.exp(-x ** 2 / 2.0),
    ]
    return [ScalarField(grid, f.astype(complex)) for f in fields]
