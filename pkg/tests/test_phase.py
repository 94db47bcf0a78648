import numpy as np
import pytest

from hfio.core import make_grid
from hfio.errors import LemmaViolatedError
from hfio.phase import (
    QuadraticPhase,
    check_separation,
    invert_dthetaS,
    invert_dxS,
    omega_region_check,
    validate_G,
    validate_H_via_lemma,
)
from hfio.presets import (
    chirp_phase,
    fresnel_phase,
    identity_phase,
    kinetic_phase,
    phase_preset,
    scaled_phase,
)

BOX = make_grid(2, 10.0, 41)


def quadratic(a, b, c, name="quad"):
    return QuadraticPhase([[a]], [[b]], [[c]]).to_phase_spec(name)


class TestValidateG:
    def test_identity_passes(self):
        rep = validate_G(identity_phase(), BOX, k=2)
        assert rep.passed
        g3 = rep.result("G3")
        assert g3.constant == pytest.approx(1.0, abs=1e-12)
        g2 = rep.result("G2")
        assert g2.detail["constants"]["((1,), (1,))"] == pytest.approx(1.0)

    def test_degenerate_fails_g3(self):
        rep = validate_G(quadratic(0.5, 0.0, 0.0, "half-x2"), BOX)
        g3 = rep.result("G3")
        assert not g3.verdict
        assert g3.constant == 0.0

    def test_quartic_growth_fails_g2(self):
        # S = x^2 theta^2: the order-(0,0) constant quadruples when the
        # box doubles (12.25 at L=5 vs 49.75 at L=10), witness at a corner
        bad = QuadraticPhase([[0.0]], [[1.0]], [[0.0]]).to_phase_spec()

        def S(x, th):
            return (np.asarray(x, float)[..., 0]
                    * np.asarray(th, float)[..., 0]) ** 2

        from hfio.phase import PhaseSpec
        spec = PhaseSpec(
            dim=1, func=S,
            grad_x=lambda x, th: (2 * np.asarray(x, float)
                                  * np.asarray(th, float)[..., 0:1] ** 2),
            grad_theta=lambda x, th: (2 * np.asarray(th, float)
                                      * np.asarray(x, float)[..., 0:1] ** 2),
            mixed_hessian=lambda x, th: (4 * np.asarray(x, float)[..., 0]
                                         * np.asarray(th, float)[..., 0]
                                         )[..., None, None],
            delta0=0.0, name="x2t2")
        rep = validate_G(spec, BOX, k=0)
        g2 = rep.result("G2")
        assert not g2.verdict
        assert g2.witness is not None
        assert max(abs(c) for c in g2.witness) > 8.0

    def test_quadratic_delta0_exact(self):
        rep = validate_G(quadratic(0.3, 1.2, -0.4), BOX)
        assert rep.result("G3").constant == pytest.approx(1.2, abs=1e-10)

    def test_kinetic_passes_low_order(self):
        rep = validate_G(kinetic_phase(), BOX, k=2)
        assert rep.passed

    def test_kinetic_fails_strict_third_order(self):
        # third theta-derivative of sqrt(1+theta^2) decays in theta only,
        # not in the joint weight, so the strict order-3 bound fails
        rep = validate_G(kinetic_phase(), BOX, k=3)
        assert not rep.result("G2").verdict


class TestValidateH:
    def test_identity_ratio_bounds(self):
        # brute-force 41^3 sampling gives ratios within [1/sqrt3, sqrt3]
        rep = validate_H_via_lemma(identity_phase(), BOX)
        assert rep.passed
        d = rep.results[0].detail
        assert d["K1"] >= 1.0 / np.sqrt(3.0) - 1e-9
        assert d["K2"] <= np.sqrt(3.0) + 1e-9

    def test_chirp_positive(self):
        rep = validate_H_via_lemma(chirp_phase(), BOX)
        assert rep.passed
        assert rep.results[0].detail["K1"] > 0

    def test_degenerate_fails(self):
        # S = x^2/2: the H3* lower bound halves when the box doubles
        rep = validate_H_via_lemma(quadratic(1.0, 0.0, 0.0), BOX)
        assert not rep.passed

    def test_never_passes_when_g3_fails(self):
        rep = validate_H_via_lemma(quadratic(0.0, 0.0, 1.0), BOX)
        assert not rep.passed
        assert rep.results[0].detail["G3_passed"] is False


class TestSeparation:
    def test_identity(self):
        assert check_separation(identity_phase())["C2"] == \
            pytest.approx(1.0, abs=1e-12)

    def test_scaled(self):
        assert check_separation(scaled_phase(2.0))["C2"] == \
            pytest.approx(0.5, abs=1e-12)

    def test_fresnel_theta_part_cancels(self):
        assert check_separation(fresnel_phase())["C2"] == \
            pytest.approx(1.0, abs=1e-6)

    def test_lower_bound_from_operator_norm(self):
        # C2 >= 1/|B| for the quadratic family
        for b in (0.5, 1.0, 2.0, 3.0):
            c2 = check_separation(quadratic(0.2, b, 0.1))["C2"]
            assert c2 >= 1.0 / b - 1e-9

    def test_violation_raises_with_witness(self):
        with pytest.raises(LemmaViolatedError) as err:
            check_separation(quadratic(1.0, 0.0, 0.0))
        assert err.value.witness is not None


class TestOmegaRegion:
    def test_identity_bounds(self):
        # 1e5-triple sampling: C4 <= 1.2 and the two-sided weight
        # equivalence within [1, sqrt(1+C4^2)+0.1]
        rep = omega_region_check(identity_phase(), 0.01, BOX)
        assert rep["members"] > 0
        assert rep["C4"] <= 1.2
        assert rep["ratio_min"] >= 1.0 - 1e-12
        assert rep["ratio_max"] <= np.sqrt(1 + rep["C4"] ** 2) + 0.1

    def test_empty_for_zero_eps(self):
        rep = omega_region_check(identity_phase(), 0.0, BOX)
        assert rep["empty"]
        assert rep["members"] == 0


class TestInversion:
    def test_identity_dx(self):
        th = invert_dxS(identity_phase(), [[1.5]], [[3.0]])
        assert th[0, 0] == pytest.approx(3.0, abs=1e-10)

    def test_chirp_dx(self):
        # dS/dx = theta + x -> theta = xi - x
        th = invert_dxS(chirp_phase(), [[2.0]], [[5.0]])
        assert th[0, 0] == pytest.approx(3.0, abs=1e-10)

    def test_scaled_dx(self):
        th = invert_dxS(scaled_phase(2.0), [[0.7]], [[3.0]])
        assert th[0, 0] == pytest.approx(1.5, abs=1e-10)

    def test_identity_dtheta(self):
        x = invert_dthetaS(identity_phase(), [[2.0]], [[4.0]])
        assert x[0, 0] == pytest.approx(4.0, abs=1e-10)

    def test_fresnel_dtheta(self):
        # dS/dtheta = x + theta -> x = y - theta
        x = invert_dthetaS(fresnel_phase(), [[1.0]], [[4.0]])
        assert x[0, 0] == pytest.approx(3.0, abs=1e-10)

    @pytest.mark.parametrize("phase", ["identity", "chirp", "fresnel",
                                       "kinetic"])
    def test_round_trip(self, phase):
        S = phase_preset(phase)
        rng = np.random.default_rng(5)
        x = rng.uniform(-5, 5, (40, 1))
        th = rng.uniform(-5, 5, (40, 1))
        xi = np.asarray(S.grad_x(x, th), float).reshape(40, 1)
        back = invert_dxS(S, x, xi, theta_init=th + 0.3)
        assert np.max(np.abs(back - th)) <= 1e-8
        y = np.asarray(S.grad_theta(x, th), float).reshape(40, 1)
        xback = invert_dthetaS(S, th, y, x_init=x + 0.3)
        assert np.max(np.abs(xback - x)) <= 1e-8


class TestOracleConsistency:
    @pytest.mark.parametrize("name", ["identity", "chirp", "fresnel",
                                      "kinetic"])
    def test_gradients_match_fd(self, name):
        rep = phase_preset(name).self_test()
        assert rep["passed"], rep
