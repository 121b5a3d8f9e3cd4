import math

import numpy as np
import pytest

from sparse_index_lab.hermite import link_from_hermite, link_from_monomial, normalize_link, relu_shift_coeff
from sparse_index_lab.model import IndexModel, make_sparse_direction, make_sparse_frame
from sparse_index_lab.oracle import (
    CANCEL_EPS,
    FixtureTable,
    fixtures_to_csv,
    mc_population_grad,
    pathological_fixtures,
    population_grad_additive,
    population_grad_multi_leading,
    population_grad_single,
    population_grad_single_evenodd,
)

HE2 = link_from_monomial([-1, 0, 1])  # plain He_2, gamma_2 = 2
HE2N = normalize_link(HE2)


def test_examplegrad_coefficients():
    # plain quadratic link at basis probes: sqrt(2/pi) <v,e_i> v - (1/sqrt(2 pi)) <v,e_i>^2 e_i
    d, s = 16, 4
    v = make_sparse_direction(d, s, "flat")
    for i in (0, 3, 9):
        w = np.eye(d)[i]
        got = population_grad_single(HE2, v, w, 0.0)
        want = math.sqrt(2 / math.pi) * v[i] * v - (1 / math.sqrt(2 * math.pi)) * v[i] ** 2 * w
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_orthogonal_probe_zero_for_higher_exponent():
    d = 8
    v = np.eye(d)[0]
    w = np.eye(d)[3]
    out = population_grad_single(HE2N, v, w, 0.7)
    np.testing.assert_array_equal(out, np.zeros(d))


def test_unit_vector_validation():
    v = np.ones(4)
    with pytest.raises(ValueError):
        population_grad_single(HE2, v, np.eye(4)[0], 0.0)
    with pytest.raises(ValueError):
        population_grad_single_evenodd(HE2, np.eye(4)[0], 2 * np.eye(4)[1], 0.0, "+")


def test_series_termination_padding_invariance():
    rng = np.random.default_rng(2)
    coeffs = [0.1, -0.4, 0.9, 0.2]
    link = link_from_monomial(coeffs)
    padded = link_from_monomial(coeffs + [0.0, 0.0, 0.0])
    v = rng.standard_normal(12)
    v /= np.linalg.norm(v)
    w = rng.standard_normal(12)
    w /= np.linalg.norm(w)
    a = population_grad_single(link, v, w, 0.3)
    b = population_grad_single(padded, v, w, 0.3)
    assert np.array_equal(a, b)


def test_evenodd_decomposition_exact():
    rng = np.random.default_rng(5)
    link = link_from_monomial(rng.standard_normal(6))
    v = rng.standard_normal(10)
    v /= np.linalg.norm(v)
    w = rng.standard_normal(10)
    w /= np.linalg.norm(w)
    for b in (-0.8, 0.0, 1.1):
        full = population_grad_single(link, v, w, b)
        plus = population_grad_single_evenodd(link, v, w, b, "+")
        minus = population_grad_single_evenodd(link, v, w, b, "-")
        np.testing.assert_allclose(plus + minus, full, atol=1e-15)


def test_evenodd_he1_minus_is_first_coefficient_term():
    # at b = 0 the odd part of a pure first-Hermite link is rho_1(0) v exactly
    d = 8
    rng = np.random.default_rng(6)
    he1 = link_from_monomial([0, 1])
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    w = rng.standard_normal(d)
    w /= np.linalg.norm(w)
    minus = population_grad_single_evenodd(he1, v, w, 0.0, "-")
    np.testing.assert_allclose(minus, 0.5 * v, atol=1e-15)
    # at an orthogonal probe the identity holds for every bias
    w_perp = w - (w @ v) * v
    w_perp /= np.linalg.norm(w_perp)
    minus_b = population_grad_single_evenodd(he1, v, w_perp, 0.9, "-")
    np.testing.assert_allclose(minus_b, relu_shift_coeff(1, 0.9) * v, atol=1e-14)


def test_evenodd_he2_minus_vanishes_at_orthogonal_probe():
    d = 6
    v, w = np.eye(d)[0], np.eye(d)[4]
    out = population_grad_single_evenodd(HE2N, v, w, 0.5, "-")
    np.testing.assert_array_equal(out, np.zeros(d))


def test_mc_agrees_with_exact_on_random_fixtures():
    rng = np.random.default_rng(9)
    d = 32
    for trial in range(3):
        link = normalize_link(link_from_monomial(rng.standard_normal(5)))
        v = rng.standard_normal(d)
        v /= np.linalg.norm(v)
        w = rng.standard_normal(d)
        w /= np.linalg.norm(w)
        b = float(rng.standard_normal())
        model = IndexModel(V=v[:, None], links=(link,), noise_delta=0.0)
        mc, se = mc_population_grad(model, w, b, 10**5, seed=100 + trial)
        exact = population_grad_single(link, v, w, b)
        assert np.max(np.abs(mc - exact)) <= 4 * se


def test_mc_noise_changes_stderr_not_mean():
    d = 16
    v = make_sparse_direction(d, 4, "flat")
    w = np.eye(d)[0]
    clean = IndexModel(V=v[:, None], links=(HE2N,), noise_delta=0.0)
    noisy = IndexModel(V=v[:, None], links=(HE2N,), noise_delta=1.0)
    m0, s0 = mc_population_grad(clean, w, 0.0, 10**5, seed=4)
    m1, s1 = mc_population_grad(noisy, w, 0.0, 10**5, seed=5)
    assert s1 > s0
    np.testing.assert_allclose(m0, m1, atol=4 * (s0 + s1))


def test_mc_stderr_scaling():
    d = 8
    v = np.eye(d)[0]
    model = IndexModel(V=v[:, None], links=(HE2N,), noise_delta=0.0)
    _, s1 = mc_population_grad(model, np.eye(d)[1], 0.0, 10**4, seed=6)
    _, s2 = mc_population_grad(model, np.eye(d)[1], 0.0, 4 * 10**4, seed=6)
    assert s2 == pytest.approx(s1 / 2, rel=0.15)
    with pytest.raises(ValueError):
        mc_population_grad(model, np.eye(d)[1], 0.0, 100, seed=0)


def test_pathological_tables_match_oracle():
    for tab in pathological_fixtures():
        d = tab.model.d
        for (i, c), expected in tab.expected_gradients.items():
            w = np.zeros(d)
            if c == 1.0:
                w[i] = 1.0
            else:
                w[i] = c
                w[d - 1] = math.sqrt(1 - c * c)
            got = -population_grad_additive(tab.model, w, 0.0)
            np.testing.assert_allclose(got, expected, atol=1e-10)


def test_pathological_first_fixture_values():
    tab = next(t for t in pathological_fixtures() if t.name == "two_quadratics")
    kappa = 1 / (2 * math.sqrt(math.pi))
    d = tab.model.d
    np.testing.assert_allclose(tab.expected_gradients[(0, 1.0)], -kappa * np.eye(d)[0], atol=1e-15)
    assert kappa == pytest.approx(0.2820947917738781, abs=1e-15)


def test_pathological_second_fixture_norm_inversion():
    # support probes carry SMALLER norms: ||grad|| at i in {0,1} equals the
    # norm at i > 1 divided by sqrt(2)
    tab = next(t for t in pathological_fixtures() if t.name == "quadratics_plus_linear")
    n0 = np.linalg.norm(tab.expected_gradients[(0, 1.0)])
    n1 = np.linalg.norm(tab.expected_gradients[(1, 1.0)])
    n_out = np.linalg.norm(tab.expected_gradients[(2, 1.0)])
    assert n0 == pytest.approx(n1, abs=1e-15)
    assert n0 == pytest.approx(n_out / math.sqrt(2), abs=1e-15)


def test_cancellation_fixture_cancels_at_top_coordinate():
    tab = next(t for t in pathological_fixtures() if t.name == "dominated_cancellation")
    model = tab.model
    d = model.d
    # unshifted probe at the dominant coordinate: informative and extra
    # terms cancel to within 1%
    v = model.V[:, 0]
    link = model.links[0]
    g = link.hermite_coeffs
    z = v[0]
    informative_e1 = (
        relu_shift_coeff(2, 0) * g[2] * z + relu_shift_coeff(4, 0) * g[4] / 6 * z**3
    ) * v[0]
    extra_e1 = relu_shift_coeff(4, 0) * g[2] / 2 * z**2 + relu_shift_coeff(6, 0) * g[4] / 24 * z**4
    assert abs(informative_e1 + extra_e1) <= 0.01 * max(abs(informative_e1), abs(extra_e1))
    # the stored gradient at the dominant coordinate is correspondingly tiny
    grad = tab.expected_gradients[(0, 1.0)]
    assert abs(grad[0]) < 0.01 * np.linalg.norm(grad) + 1e-3


def test_shifted_probe_suppresses_extra_term():
    # the probe-aligned bias term carries one more factor of c than the
    # informative term: the leading-piece ratio scales exactly like c, and
    # the full-series ratio shrinks monotonically with c
    tab = next(t for t in pathological_fixtures() if t.name == "dominated_cancellation")
    model = tab.model
    v = model.V[:, 0]
    link = model.links[0]
    g = link.hermite_coeffs
    d = model.d

    def leading_ratio(c):
        z = c * v[0]
        informative = relu_shift_coeff(2, 0) * g[2] * z
        extra = relu_shift_coeff(4, 0) * g[2] / 2 * z**2
        return abs(extra) / abs(informative)

    cs = [0.5, 0.25, 0.125]
    ratios = [leading_ratio(c) for c in cs]
    slope = np.polyfit(np.log(cs), np.log(ratios), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.1)

    def full_ratio(c):
        w = np.zeros(d)
        w[0] = c
        w[d - 1] = math.sqrt(1 - c * c)
        v_sum = sum(
            g[k + 1] * relu_shift_coeff(k + 1, 0) / math.factorial(k) * (c * v[0]) ** k
            for k in range(len(g) - 1)
        )
        w_sum = sum(
            g[k] * relu_shift_coeff(k + 2, 0) / math.factorial(k) * (c * v[0]) ** k
            for k in range(1, len(g))
        )
        return abs(w_sum) / abs(v_sum)

    fr = [full_ratio(c) for c in [1.0, 0.5, 0.25, 0.125]]
    assert fr[0] > fr[1] > fr[2] > fr[3]


def test_multi_leading_r1_consistency():
    d = 16
    rng = np.random.default_rng(12)
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    w = np.zeros(d)
    w[:4] = rng.standard_normal(4)
    w /= np.linalg.norm(w)
    b = 0.2
    lead, _ = population_grad_multi_leading((HE2N,), v[:, None], w, b, mc_samples=400_000, seed=8)
    k1 = relu_shift_coeff(2, b) * HE2N.hermite_coeffs[2] * (v @ w) * v
    J = np.flatnonzero(w)
    np.testing.assert_allclose(lead[J], k1[J], atol=5e-3)
    assert np.all(lead[np.setdiff1d(np.arange(d), J)] == 0)


def test_multi_leading_alignment_and_residual_decay():
    # additive quadratic family: leading term points along the first column
    # when the probe aligns with it, and the gap to the MC gradient shrinks
    # as ||V^T w|| -> 0
    d, r, s = 32, 2, 4
    V = make_sparse_frame(d, r, s, seed=3)
    gam = math.sqrt(math.factorial(2) / r)
    link = link_from_hermite([0.0, 0.0, gam])
    links = (link, link)
    J = np.flatnonzero(V[:, 0])

    gaps = []
    for scale in (0.5, 0.1, 0.02):
        w = np.zeros(d)
        w[J] = V[J, 0] * scale
        # fill the rest of the norm with a direction orthogonal to V inside J
        filler = np.zeros(d)
        filler[J[0]], filler[J[1]] = 1.0, -1.0
        filler -= (filler @ V[:, 0]) * V[:, 0]
        filler /= np.linalg.norm(filler)
        w = scale * V[:, 0] + math.sqrt(1 - scale**2) * filler
        lead, mc = population_grad_multi_leading(links, V, w, 0.1, mc_samples=10**6, seed=21)
        gaps.append(np.linalg.norm((mc - lead)[J]))
        if scale == 0.5:
            # the leading term concentrates on the first column's support
            proj = abs(lead[J] @ V[J, 0]) / np.linalg.norm(lead[J])
            assert proj > 0.9
    assert gaps[0] > gaps[-1]


def test_fixture_csv_export(tmp_path):
    tabs = pathological_fixtures()
    path = tmp_path / "fixtures.csv"
    fixtures_to_csv(tabs, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "fixture,i,c,coord,value"
    name, i, c, coord, value = lines[1].split(",")
    float(c), int(i), int(coord), float(value)
    assert sum(1 for ln in lines if ln.startswith("two_quadratics")) == 3 * 16
