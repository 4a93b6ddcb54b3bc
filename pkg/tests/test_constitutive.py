"""Constitutive law tests against independent numeric oracles.

The closed-form conjugate g is checked against a golden-section
supremum search; gradients are checked against central differences.
"""

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from phflow.constitutive import (
    ConstitutiveLaw,
    IsentropicLaw,
    IsothermalAlphaLaw,
    law_from_dict,
)
from phflow.errors import DomainError, SchemaError


def isentropic(c=0.5, lam=0.0):
    return ConstitutiveLaw(IsentropicLaw(c), lam)


def isothermal(lam=0.0):
    return ConstitutiveLaw(IsothermalAlphaLaw(R=518.0, T=283.0, alpha=-3e-8,
                                              rho_star=1.0), lam)


def legendre_supremum(law, rho, m, half_width=10.0):
    """Numeric conjugate: maximize m*v - h(rho, v) by golden section."""
    center = 0.0

    def neg(v):
        return -(m * v - law.h(rho, v))

    res = minimize_scalar(neg, bracket=None,
                          bounds=(center - half_width, center + half_width),
                          method="bounded",
                          options={"xatol": 1e-12})
    return -res.fun


class TestConjugate:
    def test_value_against_supremum_oracle_isentropic(self):
        law = isentropic()
        assert law.g(1.0, 0.0) == pytest.approx(-0.5, abs=1e-10)
        assert legendre_supremum(law, 1.0, 0.0) == pytest.approx(-0.5, abs=1e-8)
        assert law.g(2.0, 4.0) == pytest.approx(2.0, abs=1e-10)
        assert legendre_supremum(law, 2.0, 4.0) == pytest.approx(2.0, abs=1e-8)

    def test_zero_flux_gives_negative_potential(self):
        for law in (isentropic(), isothermal()):
            for rho in (0.8, 2.0, 50.0):
                if not law.admissible(rho):
                    continue
                assert law.g(rho, 0.0) == pytest.approx(-float(law.pressure.P(rho)),
                                                        rel=1e-13)

    @pytest.mark.parametrize("make_law,n", [(isentropic, 100), (isothermal, 100)])
    def test_supremum_oracle_matches_closed_form(self, make_law, n):
        law = make_law()
        rng = np.random.default_rng(42)
        (r_lo, r_hi), (m_lo, m_hi) = law.pressure.sampling_box
        rhos = rng.uniform(r_lo, r_hi, n)
        ms = rng.uniform(m_lo, m_hi, n)
        for rho, m in zip(rhos, ms):
            half_width = abs(m) / rho + 10.0
            num = legendre_supremum(law, rho, m, half_width=half_width)
            exact = float(law.g(rho, m))
            assert num == pytest.approx(exact, rel=1e-8, abs=1e-8)


class TestGradients:
    def test_velocity_component(self):
        law = isentropic()
        _, d_m = law.grad_g(2.0, 4.0)
        assert d_m == pytest.approx(2.0)

    def test_density_component_example(self):
        law = isentropic()
        d_rho, _ = law.grad_g(1.0, 1.0)
        assert d_rho == pytest.approx(-1.5, abs=1e-12)
        # finite-difference cross-check, step 1e-6
        h = 1e-6
        fd = (law.g(1.0 + h, 1.0) - law.g(1.0 - h, 1.0)) / (2 * h)
        assert d_rho == pytest.approx(fd, abs=1e-8)

    def test_zero_flux_gradient_is_pressure_slope(self):
        for law in (isentropic(), isothermal()):
            rho = 2.0 if isinstance(law.pressure, IsentropicLaw) else 50.0
            d_rho, d_m = law.grad_g(rho, 0.0)
            assert d_m == 0.0
            assert d_rho == pytest.approx(-float(law.pressure.P_prime(rho)), rel=1e-13)

    @pytest.mark.parametrize("make_law", [isentropic, isothermal])
    def test_gradient_matches_finite_differences(self, make_law):
        law = make_law()
        rng = np.random.default_rng(7)
        (r_lo, r_hi), (m_lo, m_hi) = law.pressure.sampling_box
        for _ in range(100):
            rho = rng.uniform(r_lo, r_hi)
            m = rng.uniform(m_lo, m_hi)
            d_rho, d_m = law.grad_g(rho, m)
            h_r = 1e-6 * max(1.0, abs(rho))
            # g is exactly quadratic in m, so the central difference has no
            # truncation error; a larger step only reduces cancellation
            h_m = 1.0 + abs(m)
            fd_rho = (law.g(rho + h_r, m) - law.g(rho - h_r, m)) / (2 * h_r)
            fd_m = (law.g(rho, m + h_m) - law.g(rho, m - h_m)) / (2 * h_m)
            assert fd_rho == pytest.approx(d_rho, rel=1e-6, abs=1e-6)
            assert fd_m == pytest.approx(d_m, rel=1e-6, abs=1e-6)


class TestVariableTransform:
    def test_roundtrip_example(self):
        law = isentropic()
        rho, v = law.z_hat(2.0, 4.0)
        back = law.a_hat(rho, v)
        assert float(back[0]) == 2.0 and float(back[1]) == pytest.approx(4.0)

    def test_fixed_point_and_velocity(self):
        law = isentropic()
        assert law.z_hat(1.0, 0.0)[1] == pytest.approx(0.0)
        assert law.z_hat(0.5, 1.0)[1] == pytest.approx(2.0)

    @pytest.mark.parametrize("make_law", [isentropic, isothermal])
    def test_roundtrip_sampled(self, make_law):
        law = make_law()
        rng = np.random.default_rng(3)
        (r_lo, r_hi), (m_lo, m_hi) = law.pressure.sampling_box
        rho = rng.uniform(r_lo, r_hi, 200)
        m = rng.uniform(m_lo, m_hi, 200)
        back_rho, back_m = law.a_hat(*law.z_hat(rho, m))
        np.testing.assert_allclose(back_rho, rho, rtol=1e-12)
        np.testing.assert_allclose(back_m, m, rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize("make_law", [isentropic, isothermal])
    def test_conjugacy_identity(self, make_law):
        # h(z_hat(a)) == d_m g(a) * m - g(a) pointwise
        law = make_law()
        rng = np.random.default_rng(11)
        (r_lo, r_hi), (m_lo, m_hi) = law.pressure.sampling_box
        rho = rng.uniform(r_lo, r_hi, 100)
        m = rng.uniform(m_lo, m_hi, 100)
        lhs = law.h(*law.z_hat(rho, m))
        rhs = law.grad_g(rho, m)[1] * m - law.g(rho, m)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize("make_law", [isentropic, isothermal])
    def test_strict_monotonicity_in_flux(self, make_law):
        law = make_law()
        rng = np.random.default_rng(5)
        (r_lo, r_hi), (m_lo, m_hi) = law.pressure.sampling_box
        for _ in range(50):
            rho = rng.uniform(r_lo, r_hi)
            m_a, m_b = rng.uniform(m_lo, m_hi, 2)
            if m_a == m_b:
                continue
            diff = (law.grad_g(rho, m_a)[1] - law.grad_g(rho, m_b)[1]) * (m_a - m_b)
            assert diff > 0


class TestEnergyDensity:
    def test_values(self):
        law = isentropic()
        assert law.hamiltonian_density(1.0, 0.0) == pytest.approx(0.5)
        assert law.hamiltonian_density(2.0, 4.0) == pytest.approx(6.0)

    def test_rest_state_is_potential(self):
        for law, rho in ((isentropic(), 1.7), (isothermal(), 55.0)):
            assert law.hamiltonian_density(rho, 0.0) == pytest.approx(
                float(law.pressure.P(rho)), rel=1e-13)

    def test_even_in_flux(self):
        law = isothermal()
        assert law.hamiltonian_density(50.0, 300.0) == pytest.approx(
            law.hamiltonian_density(50.0, -300.0), rel=1e-14)


class TestPressureLaws:
    @pytest.mark.parametrize("make_law", [isentropic, isothermal])
    def test_potential_relation(self, make_law):
        # P''(rho) must equal p'(rho)/rho; checked in closed form and by
        # finite differences of P'
        law = make_law().pressure
        rng = np.random.default_rng(13)
        lo, hi = (0.5, 3.5) if isinstance(law, IsentropicLaw) else (30.0, 70.0)
        rhos = rng.uniform(lo, hi, 50)
        np.testing.assert_allclose(law.P_second(rhos), law.p_prime(rhos) / rhos,
                                   rtol=1e-8)
        h = 1e-6 * np.maximum(1.0, rhos)
        fd = (law.P_prime(rhos + h) - law.P_prime(rhos - h)) / (2 * h)
        np.testing.assert_allclose(fd, law.P_second(rhos), rtol=1e-6)

    def test_pressure_slope_positive(self):
        for law, box in ((isentropic().pressure, (0.1, 10.0)),
                         (isothermal().pressure, (1.0, 100.0))):
            rhos = np.linspace(*box, 50)
            assert np.all(law.p_prime(rhos) > 0)

    def test_law_from_dict_roundtrip(self):
        law = law_from_dict({
            "pressure": {"type": "isothermal_alpha", "R": 518, "T": 283,
                         "alpha": -3e-8, "rho_star": 1},
            "lambda": 0.01,
        })
        assert isinstance(law.pressure, IsothermalAlphaLaw)
        assert law.lam == 0.01
        again = law_from_dict(law.to_dict())
        assert again.pressure.to_dict() == law.pressure.to_dict()


class TestFriction:
    def test_zero_friction_factor(self):
        law = isentropic(lam=0.0)
        assert law.friction(1.0, 5.0, 1.0) == 0.0

    def test_value_and_sign_symmetry(self):
        law = isentropic(lam=0.01)
        assert law.friction(1.0, -2.0, 1.0) == pytest.approx(0.01)
        assert law.friction(1.0, 2.0, 1.0) == pytest.approx(law.friction(1.0, -2.0, 1.0))

    def test_zero_flux(self):
        law = isothermal(lam=0.01)
        assert law.friction(50.0, 0.0, 0.8) == 0.0


class TestDomain:
    def test_inadmissible_density_raises(self):
        law = isothermal()
        with pytest.raises(DomainError):
            law.g(0.0, 1.0)
        with pytest.raises(DomainError):
            law.grad_g(-1.0, 0.0)

    def test_positive_alpha_upper_bound(self):
        law = ConstitutiveLaw(IsothermalAlphaLaw(R=500.0, T=300.0, alpha=1e-7))
        hi = law.rho_max
        assert np.isfinite(hi)
        assert law.admissible(0.9 * hi)
        with pytest.raises(DomainError):
            law.g(1.1 * hi, 0.0)

    def test_negative_friction_rejected(self):
        with pytest.raises(SchemaError):
            ConstitutiveLaw(IsentropicLaw(0.5), lam=-1.0)

    def test_spd_margin_signs(self):
        law = isentropic()
        # subsonic: v below the sound speed sqrt(2 c rho) = sqrt(rho)
        assert law.spd_margin(1.0, 0.5) > 0
        # supersonic: margin flips sign
        assert law.spd_margin(1.0, 2.0) < 0
