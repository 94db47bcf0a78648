import numpy as np
import pytest

from hfio.core import make_grid
from hfio.errors import (
    EvaluationError,
    InvalidArgumentError,
    UnsupportedDimensionError,
)
from hfio.oscillatory import (
    CutoffSpec,
    IBPSpec,
    cutoff_independence_test,
    osc_integral,
)

GRID = make_grid(1, 24.0, 4001)
CUT = CutoffSpec(k_max=14)

# frozen analytic oracles
GAUSS_LINEAR = np.sqrt(np.pi) * np.exp(-1.0)           # phase 2t, amp e^-t^2
FRESNEL_H = 0.5
FRESNEL = np.sqrt(2 * np.pi * FRESNEL_H) * np.exp(1j * np.pi / 4)


def gauss_phase(t):
    return 2.0 * t[..., 0]


def gauss_amp(t):
    return np.exp(-t[..., 0] ** 2)


def fresnel_phase(t):
    return t[..., 0] ** 2 / 2.0


def unit_amp(t):
    return np.ones(t.shape[:-1])


class TestOscIntegral:
    def test_gaussian_linear_phase(self):
        res = osc_integral(gauss_phase, gauss_amp, 1.0, GRID, CUT)
        assert res.converged
        assert abs(res.value - GAUSS_LINEAR) <= 1e-6

    def test_fresnel_with_ibp(self):
        grid = make_grid(1, 24.0, 12001)
        res = osc_integral(fresnel_phase, unit_amp, FRESNEL_H, grid, CUT,
                           IBPSpec(enabled=True, q=2),
                           phase_grad=lambda t: t)
        assert res.converged
        assert res.ibp_applied
        assert abs(res.value - FRESNEL) <= 1e-5

    def test_zero_amplitude(self):
        res = osc_integral(gauss_phase, lambda t: np.zeros(t.shape[:-1]),
                           1.0, GRID, CutoffSpec())
        assert res.value == 0
        assert res.converged
        assert res.k_used == 0

    def test_residual_contract(self):
        res = osc_integral(gauss_phase, gauss_amp, 1.0, GRID, CUT)
        assert res.residual <= CUT.tol * (1.0 + abs(res.value))

    def test_box_must_contain_sigma0(self):
        with pytest.raises(InvalidArgumentError):
            osc_integral(gauss_phase, gauss_amp, 1.0,
                         make_grid(1, 2.0, 101), CutoffSpec(sigma0=4.0))

    def test_resolution_warning_flag(self):
        coarse = make_grid(1, 24.0, 101)
        with pytest.warns(Warning):
            res = osc_integral(gauss_phase, gauss_amp, 0.05, coarse,
                               CutoffSpec(k_max=2))
        assert res.resolution_warning

    def test_nonfinite_amplitude_raises(self):
        def bad(t):
            out = np.ones(t.shape[:-1])
            out[t[..., 0] > 10] = np.inf
            return out

        with pytest.raises(EvaluationError):
            osc_integral(gauss_phase, bad, 1.0, GRID, CutoffSpec(k_max=1))

    def test_ibp_2d_unsupported(self):
        g2 = make_grid(2, 6.0, 41)
        with pytest.raises(UnsupportedDimensionError):
            osc_integral(lambda t: t[..., 0], lambda t: np.exp(
                -np.sum(t * t, -1)), 1.0, g2, CutoffSpec(),
                IBPSpec(enabled=True))

    def test_2d_plain_gaussian(self):
        # separable 2-D oracle: (sqrt(pi) e^-1)^2 for phase 2(t1+t2)
        g2 = make_grid(2, 12.0, 385)
        res = osc_integral(lambda t: 2.0 * (t[..., 0] + t[..., 1]),
                           lambda t: np.exp(-np.sum(t * t, -1)),
                           1.0, g2, CutoffSpec(k_max=12))
        assert abs(res.value - GAUSS_LINEAR ** 2) <= 1e-6


class TestProperties:
    def test_linearity(self):
        cut = CutoffSpec(k_max=12)
        a1 = gauss_amp
        a2 = lambda t: t[..., 0] * np.exp(-t[..., 0] ** 2)
        combo = lambda t: 2.0 * a1(t) + (1.0 - 1j) * a2(t)
        r1 = osc_integral(gauss_phase, a1, 1.0, GRID, cut)
        r2 = osc_integral(gauss_phase, a2, 1.0, GRID, cut)
        rc = osc_integral(gauss_phase, combo, 1.0, GRID, cut)
        assert abs(rc.value - (2.0 * r1.value + (1.0 - 1j) * r2.value)) \
            <= 2.0 * cut.tol * (1.0 + abs(rc.value))

    def test_conjugation_exact(self):
        # flipping the phase sign and conjugating the amplitude conjugates
        # the quadrature sum exactly (summation order is identical)
        amp = lambda t: np.exp(-t[..., 0] ** 2) * (1.0 + 0.5j)
        camp = lambda t: np.conj(amp(t))
        r = osc_integral(gauss_phase, amp, 1.0, GRID, CUT)
        rc = osc_integral(lambda t: -gauss_phase(t), camp, 1.0, GRID, CUT)
        assert rc.value == np.conj(r.value)

    def test_successive_differences_eventually_decreasing(self):
        res = osc_integral(gauss_phase, gauss_amp, 1.0, GRID,
                           CutoffSpec(k_max=10, tol=1e-15))
        tail = res.diffs[-3:]
        assert len(tail) == 3
        assert tail[0] > tail[1] > tail[2]

    def test_ibp_consistency_nonstationary(self):
        # linear phase has no stationary point: IBP on and off agree
        cut = CutoffSpec(k_max=14)
        plain = osc_integral(gauss_phase, gauss_amp, 1.0, GRID, cut)
        accel = osc_integral(gauss_phase, gauss_amp, 1.0, GRID, cut,
                             IBPSpec(enabled=True, q=2),
                             phase_grad=lambda t: 2.0 + 0.0 * t[..., 0])
        assert plain.converged and accel.converged
        assert abs(plain.value - accel.value) <= \
            10.0 * cut.tol * (1.0 + abs(plain.value))


class TestCutoffIndependence:
    def test_gaussian_linear(self):
        res = cutoff_independence_test(gauss_phase, gauss_amp, 1.0, GRID,
                                       CUT)
        assert res.status == "pass"
        assert res.discrepancy <= 1e-7

    def test_fresnel(self):
        grid = make_grid(1, 24.0, 12001)
        res = cutoff_independence_test(fresnel_phase, unit_amp, FRESNEL_H,
                                       grid, CUT, IBPSpec(enabled=True),
                                       phase_grad=lambda t: t)
        assert res.status == "pass"
        assert res.discrepancy <= 1e-6

    def test_zero(self):
        res = cutoff_independence_test(gauss_phase,
                                       lambda t: np.zeros(t.shape[:-1]),
                                       1.0, GRID, CutoffSpec())
        assert res.status == "pass"
        assert res.discrepancy == 0.0

    def test_inconclusive_when_unconverged(self):
        tight = CutoffSpec(k_max=1, tol=1e-14)
        res = cutoff_independence_test(gauss_phase, gauss_amp, 1.0, GRID,
                                       tight)
        assert res.status == "inconclusive"
