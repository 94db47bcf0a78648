import numpy as np
import pytest

from hfio.calculus import (
    compare_symbols,
    cv_bound_check,
    cv_seminorm,
    extract_symbol,
    predicted_symbol,
)
from hfio.core import make_grid
from hfio.operator import FIOSpec, compose_ffstar
from hfio.presets import amplitude_preset, phase_preset

IDENT = phase_preset("identity")
ONE = amplitude_preset("one")
LAM1 = amplitude_preset("lambda_m", m=-1.0)

pytestmark = pytest.mark.filterwarnings(
    "ignore::hfio.errors.KernelUnconvergedWarning",
    "ignore::hfio.errors.WindowWarning")


def symbol_grid(h, L=12.0, theta_target=10.0 / 3.0):
    spacing = 0.5 * h / theta_target
    return make_grid(1, L, int(np.ceil(2 * L / spacing)) + 1)


def oversampled_grid(h):
    # theta band 1.5x wider than the trusted xi range needs, so the
    # band-edge smearing of data-limited edge rows stays negligible
    return symbol_grid(h, theta_target=5.0)


class TestPredictedSymbol:
    def test_identity_unit(self):
        s = predicted_symbol(IDENT, ONE, "FFstar", np.linspace(-5, 5, 11),
                             np.linspace(-2, 2, 9))
        assert np.allclose(s.values.real, 1.0)
        assert np.allclose(s.values.imag, 0.0)

    def test_scaled_half(self):
        scaled = phase_preset("scaled", factor=2.0)
        s = predicted_symbol(scaled, ONE, "FFstar",
                             np.linspace(-5, 5, 11), np.linspace(-2, 2, 9))
        assert np.allclose(s.values.real, 0.5)

    def test_lambda_symbol_formula(self):
        xs = np.linspace(-3, 3, 7)
        xis = np.linspace(-2, 2, 5)
        s = predicted_symbol(IDENT, LAM1, "FFstar", xs, xis)
        X, XI = np.meshgrid(xs, xis, indexing="ij")
        assert np.allclose(s.values.real, 1.0 / (1 + X ** 2 + XI ** 2))

    def test_positivity(self):
        chirp = phase_preset("chirp")
        s = predicted_symbol(chirp, LAM1, "FFstar",
                             np.linspace(-4, 4, 9), np.linspace(-3, 3, 9))
        assert np.all(s.values.real >= 0)
        assert np.all(s.values.imag == 0)

    def test_ffstar_fstarf_coincide_for_identity_phase(self):
        # theta(x, x, xi) = xi and x(theta, y) = y identify the two sides
        xs = np.linspace(-4, 4, 9)
        xis = np.linspace(-2, 2, 7)
        a = predicted_symbol(IDENT, LAM1, "FFstar", xs, xis)
        b = predicted_symbol(IDENT, LAM1, "FstarF", xs, xis)
        assert np.allclose(a.values, b.values)

    def test_quadratic_amplitude_covariance(self):
        xs = np.linspace(-4, 4, 9)
        xis = np.linspace(-2, 2, 7)
        base = predicted_symbol(IDENT, LAM1, "FFstar", xs, xis)
        scaled = predicted_symbol(IDENT, LAM1.scaled(2.0), "FFstar", xs, xis)
        assert np.allclose(scaled.values, 4.0 * base.values)


class TestExtraction:
    def test_identity_symbol_is_one(self):
        h = 0.25
        grid = oversampled_grid(h)
        C = compose_ffstar(FIOSpec(IDENT, ONE, h), grid, grid,
                           route="direct")
        ext = extract_symbol(C, h)
        xm = np.abs(ext.x_nodes) <= 0.6 * grid.half_width
        mm = np.abs(ext.xi_nodes) <= 2.0
        vals = ext.values[np.ix_(xm, mm)]
        assert np.max(np.abs(vals - 1.0)) <= 1e-3

    def test_chirp_fstarf_symbol_is_one(self):
        # on the F*F side the chirp factor conjugates out exactly, so the
        # composition kernel matches the plain band projection and the
        # extracted symbol is flat
        h = 0.25
        grid = oversampled_grid(h)
        from hfio.operator import compose_fstarf
        C = compose_fstarf(FIOSpec(phase_preset("chirp"), ONE, h),
                           grid, grid)
        ext = extract_symbol(C, h)
        xm = np.abs(ext.x_nodes) <= 0.5 * grid.half_width
        mm = np.abs(ext.xi_nodes) <= 2.0
        vals = ext.values[np.ix_(xm, mm)]
        assert np.max(np.abs(vals - 1.0)) <= 5e-3

    def test_chirp_ffstar_symbol_one_up_to_edge_shear(self):
        # conjugating the sharp momentum-band projection by the chirp
        # shears the band edge to |xi - x| = Theta; the interior symbol
        # is 1 up to Fresnel edge ringing of size ~ sqrt(h/2pi)/dist
        h = 0.1
        grid = oversampled_grid(h)   # band half-width 5
        C = compose_ffstar(FIOSpec(phase_preset("chirp"), ONE, h),
                           grid, grid, route="direct")
        ext = extract_symbol(C, h)
        xm = np.abs(ext.x_nodes) <= 1.0
        mm = np.abs(ext.xi_nodes) <= 0.5
        vals = ext.values[np.ix_(xm, mm)]
        dist = 5.0 - 1.5
        ringing = np.sqrt(h / (2 * np.pi)) / dist
        assert np.max(np.abs(vals - 1.0)) <= 3.0 * ringing

    def test_extracted_scaling_quadratic(self):
        h = 0.25
        grid = symbol_grid(h)
        base = compose_ffstar(FIOSpec(IDENT, LAM1, h), grid, grid,
                              route="direct")
        scaled = compose_ffstar(FIOSpec(IDENT, LAM1.scaled(2.0), h),
                                grid, grid, route="direct")
        e1 = extract_symbol(base, h)
        e2 = extract_symbol(scaled, h)
        assert np.allclose(e2.values, 4.0 * e1.values, rtol=1e-10,
                           atol=1e-12)

    def test_window_flags_recorded(self):
        h = 0.25
        grid = symbol_grid(h)
        C = compose_ffstar(FIOSpec(IDENT, ONE, h), grid, grid,
                           route="direct")
        ext = extract_symbol(C, h)
        assert "window_max_loss" in ext.meta
        assert ext.meta["window_flat"] < ext.meta["window_zero"]


class TestCompare:
    def test_identity_exact_case(self):
        runs = [(h, oversampled_grid(h)) for h in (0.4, 0.2)]
        rep = compare_symbols(IDENT, ONE, runs, xi_cap=2.0)
        assert rep.passed
        assert all(e <= 1e-3 for e in rep.errors)
        assert rep.slope is None

    def test_lambda_slope(self):
        runs = [(h, symbol_grid(h)) for h in (0.4, 0.2, 0.1)]
        rep = compare_symbols(IDENT, LAM1, runs)
        assert rep.passed
        assert rep.slope >= 0.8
        assert rep.errors[-1] <= 5e-2

    def test_json_fields(self):
        runs = [(0.4, symbol_grid(0.4))]
        rep = compare_symbols(IDENT, ONE, runs)
        doc = rep.to_jsonable()
        for key in ("h", "max_error", "slope", "trusted_box", "passed"):
            assert key in doc


class TestCvSeminorm:
    def test_constant_symbol(self):
        q = cv_seminorm(lambda x, th: np.ones(np.broadcast_shapes(
            np.asarray(x).shape[:-1], np.asarray(th).shape[:-1])), k=2)
        assert q == pytest.approx(1.0, abs=1e-9)

    def test_lambda_squared_range(self):
        # sympy brute-force oracle: Q_2 = 6.8916 on the L=10 box
        def sig(x, th):
            x = np.asarray(x, float)
            th = np.asarray(th, float)
            return 1.0 / (1.0 + np.sum(x * x, -1) + np.sum(th * th, -1))

        q = cv_seminorm(sig, k=2)
        assert 1.0 <= q <= 10.0
        assert q == pytest.approx(6.8916, abs=0.2)

    def test_unbounded_symbol_grows_with_box(self):
        def sig(x, th):
            return np.asarray(x, float)[..., 0] \
                + 0.0 * np.asarray(th, float)[..., 0]

        q10 = cv_seminorm(sig, k=0, box=make_grid(2, 10.0, 41))
        q20 = cv_seminorm(sig, k=0, box=make_grid(2, 20.0, 41))
        assert q10 == pytest.approx(10.0, rel=1e-6)
        assert q20 == pytest.approx(2.0 * q10, rel=1e-6)

    def test_monotone_in_k(self):
        def sig(x, th):
            x = np.asarray(x, float)
            th = np.asarray(th, float)
            return 1.0 / (1.0 + np.sum(x * x, -1) + np.sum(th * th, -1))

        qs = [cv_seminorm(sig, k=k) for k in (0, 1, 2)]
        assert qs[0] <= qs[1] <= qs[2]


class TestCvBound:
    def test_identity_one(self):
        grid = make_grid(1, 12.0, 256)
        res = cv_bound_check(IDENT, ONE, [0.5], grid, grid, k=2, gamma=1.0)
        assert res.passed
        assert res.seminorm == pytest.approx(1.0, abs=1e-9)
        assert max(res.norms.values()) <= 1.001

    def test_order_restriction(self):
        grid = make_grid(1, 12.0, 64)
        amp = amplitude_preset("lambda_m", m=1.0)
        from hfio.errors import InvalidArgumentError
        with pytest.raises(InvalidArgumentError):
            cv_bound_check(IDENT, amp, [0.5], grid, grid)
