import math

import numpy as np
import pytest

from sparse_index_lab.hermite import (
    LinkSpec,
    gauss_hermite_expect,
    he_eval,
    information_exponent,
    link_from_hermite,
    link_from_monomial,
    normalize_link,
    relu_shift_coeff,
    to_hermite,
    to_monomial,
)


def test_he_eval_small_values():
    assert he_eval(2, 1.0) == 0.0
    assert he_eval(0, 7.3) == 1.0
    # He_4(t) = t^4 - 6 t^2 + 3 from expanding the recurrence
    assert he_eval(4, 0.0) == 3.0


def test_he_eval_vectorized_matches_scalar():
    t = np.linspace(-3, 3, 7)
    got = he_eval(5, t)
    want = [he_eval(5, float(x)) for x in t]
    np.testing.assert_allclose(got, want, rtol=0, atol=0)


def test_he_eval_rejects_negative_degree():
    with pytest.raises(ValueError):
        he_eval(-1, 0.0)


def test_relu_shift_coeffs_at_zero():
    invsq = 1.0 / math.sqrt(2.0 * math.pi)
    assert relu_shift_coeff(1, 0.0) == pytest.approx(0.5, abs=1e-15)
    assert relu_shift_coeff(2, 0.0) == pytest.approx(invsq, abs=1e-15)
    assert relu_shift_coeff(3, 0.0) == 0.0
    assert relu_shift_coeff(4, 0.0) == pytest.approx(-invsq, abs=1e-15)
    assert relu_shift_coeff(6, 0.0) == pytest.approx(3.0 * invsq, abs=1e-15)


def test_relu_shift_coeff_via_quadrature():
    # series definition: rho_k(b) = E[phi(Z + b) He_k(Z)].  Gauss-Hermite
    # converges poorly on the kink, so integrate the smooth piece over
    # [-b, hi] with Gauss-Legendre instead.
    x_gl, w_gl = np.polynomial.legendre.leggauss(400)
    for b in (-1.2, 0.0, 0.7):
        lo, hi = -b, 12.0
        t = 0.5 * (hi - lo) * x_gl + 0.5 * (hi + lo)
        scale = 0.5 * (hi - lo)
        for k in (1, 2, 3, 5):
            integrand = (t + b) * he_eval(k, t) * np.exp(-t * t / 2) / math.sqrt(2 * math.pi)
            want = float(scale * (w_gl @ integrand))
            assert relu_shift_coeff(k, b) == pytest.approx(want, abs=5e-9)


def test_to_hermite_t_squared():
    # t^2 = He_2 + He_0, and the 1/k! convention makes gamma_2 = 2
    assert to_hermite([0, 0, 1]) == [1.0, 0.0, 2.0]


def test_to_hermite_t_linear():
    assert to_hermite([0, 1]) == [0.0, 1.0]


def test_to_hermite_t_cubed():
    # t^3 = He_3 + 3 He_1
    assert to_hermite([0, 0, 0, 1]) == [0.0, 3.0, 0.0, 6.0]


def test_to_hermite_matches_quadrature_projection():
    # gamma_k = E[sigma(Z) He_k(Z)] for the 1/k! convention
    rng = np.random.default_rng(5)
    coeffs = rng.standard_normal(6)
    gam = to_hermite(coeffs)
    link = link_from_monomial(coeffs)
    for k in range(6):
        proj = gauss_hermite_expect(lambda t: link.eval(t) * he_eval(k, t), 32)
        assert gam[k] == pytest.approx(proj, abs=1e-9)


def test_roundtrip_monomial_hermite_eval():
    rng = np.random.default_rng(11)
    coeffs = rng.standard_normal(8)
    gam = to_hermite(coeffs)
    back = to_monomial(gam)
    ts = rng.standard_normal(100)
    direct = np.polynomial.polynomial.polyval(ts, coeffs)
    via = np.polynomial.polynomial.polyval(ts, back)
    np.testing.assert_allclose(via, direct, atol=1e-9)


def test_roundtrip_at_16_sample_points_linkspec():
    rng = np.random.default_rng(3)
    coeffs = rng.standard_normal(5)
    link = link_from_monomial(coeffs)
    ts = np.linspace(-2.5, 2.5, 16)
    series = sum(
        (g / math.factorial(k)) * he_eval(k, ts) for k, g in enumerate(link.hermite_coeffs)
    )
    np.testing.assert_allclose(series, link.eval(ts), atol=1e-10)


def test_normalize_he2_scale():
    # gamma_2 = 2 is exactly He_2; E[He_2^2] = 2, so normalization divides by sqrt(2)
    link = link_from_hermite([0.0, 0.0, 2.0])
    norm = normalize_link(link)
    assert norm.hermite_coeffs[2] == pytest.approx(math.sqrt(2.0), abs=1e-12)
    # already-normalized input is a fixed point
    again = normalize_link(norm)
    np.testing.assert_allclose(again.hermite_coeffs, norm.hermite_coeffs, atol=1e-15)


def test_normalize_t_squared_centering_and_scaling():
    norm = normalize_link(link_from_monomial([0, 0, 1]))
    mean = gauss_hermite_expect(norm.eval, 32)
    second = gauss_hermite_expect(lambda t: norm.eval(t) ** 2, 32)
    assert mean == pytest.approx(0.0, abs=1e-12)
    assert second == pytest.approx(1.0, abs=1e-12)
    # t^2 centers and scales to He_2 / sqrt(2)
    assert norm.hermite_coeffs[2] == pytest.approx(math.sqrt(2.0), abs=1e-12)


def test_normalize_invariants():
    rng = np.random.default_rng(8)
    for _ in range(5):
        link = normalize_link(link_from_monomial(rng.standard_normal(7)))
        g = link.hermite_coeffs
        assert g[0] == 0.0
        total = sum(gk * gk / math.factorial(k) for k, gk in enumerate(g) if k >= 1)
        assert total == pytest.approx(1.0, abs=1e-12)


def test_normalize_rejects_constant():
    with pytest.raises(ValueError):
        normalize_link(link_from_monomial([3.0]))


def test_information_exponent():
    assert information_exponent(link_from_hermite([0, 0, 1])) == 2
    assert information_exponent(link_from_hermite([0, 1, 0, 0.5])) == 1
    # quadratic+quartic mixture keeps exponent 2
    mix = link_from_hermite([0, 0, 1 / math.sqrt(2), 0, 2 * math.sqrt(3) / math.sqrt(24)])
    assert information_exponent(mix) == 2
    with pytest.raises(ValueError):
        information_exponent(link_from_monomial([1.0]))


def test_info_exponent_tolerance_is_relative():
    # a coefficient at 1e-13 of the largest counts as zero by default
    link = link_from_hermite([0.0, 1e-13, 1.0])
    assert link.info_exponent == 2


def test_gauss_hermite_basics():
    assert gauss_hermite_expect(lambda t: t**2, 8) == pytest.approx(1.0, abs=1e-12)
    assert gauss_hermite_expect(lambda t: he_eval(3, t) ** 2, 16) == pytest.approx(6.0, abs=1e-10)
    assert gauss_hermite_expect(lambda t: he_eval(2, t) * he_eval(4, t), 16) == pytest.approx(
        0.0, abs=1e-10
    )
    with pytest.raises(ValueError):
        gauss_hermite_expect(lambda t: t, 1)


def test_orthogonality_table():
    # E[He_j He_k] = k! delta_jk for j, k <= 10 at 32 nodes
    for j in range(11):
        for k in range(j, 11):
            val = gauss_hermite_expect(lambda t: he_eval(j, t) * he_eval(k, t), 32)
            want = math.factorial(k) if j == k else 0.0
            assert val == pytest.approx(want, abs=1e-8 * max(1.0, want))


def test_derivative_recurrence_finite_differences():
    # He_k'(t) = k He_{k-1}(t)
    h = 1e-6
    ts = np.linspace(-2.0, 2.0, 10)
    for k in range(1, 9):
        fd = (he_eval(k, ts + h) - he_eval(k, ts - h)) / (2 * h)
        want = k * he_eval(k - 1, ts)
        np.testing.assert_allclose(fd, want, rtol=1e-6, atol=1e-5)


def test_shifted_relu_derivative_energy_bounded():
    # E[phi'(Z + b)^2] = P[Z > -b] <= 1; quadrature on an indicator is slow
    # to converge, so only a loose agreement check on the value itself
    for b in (-2.0, 0.0, 2.0):
        val = gauss_hermite_expect(lambda t: ((t + b) > 0).astype(float), 400)
        assert val <= 1.0 + 1e-9
        assert val == pytest.approx(0.5 * math.erfc(-b / math.sqrt(2)), abs=2e-2)


def test_linkspec_is_hashable_and_frozen():
    link = link_from_monomial([0, 1])
    assert isinstance(hash(link), int)
    with pytest.raises(AttributeError):
        link.degree = 3
