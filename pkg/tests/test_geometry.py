import numpy as np
import pytest

from dyson_laguerre import (
    DomainError,
    ModelParams,
    ParticleState,
    Polynomial,
    SizeMismatch,
    carre_du_champ,
    carre_du_champ2,
    cd_certificate,
    edl_gamma2,
    gamma2_definitional,
    gamma2_explicit,
    geodesic_point,
    riemannian_distance,
)
from dyson_laguerre.geometry import random_ordered_state, random_test_function
from dyson_laguerre.simulate import RngStream


def _phi(n):
    f = Polynomial.zero(n)
    for i in range(n):
        f = f + Polynomial.coordinate(n, i)
    return f


def test_distance_hand_values():
    # d(x, y) = 2||sqrt x - sqrt y||
    assert riemannian_distance([1.0], [4.0]) == pytest.approx(2.0)
    assert riemannian_distance([0.0, 1.0], [0.0, 4.0]) == pytest.approx(2.0)
    assert riemannian_distance([1.0, 4.0], [1.0, 4.0]) == 0.0
    with pytest.raises(SizeMismatch):
        riemannian_distance([1.0], [1.0, 2.0])


def test_geodesic_endpoints_and_speed():
    x = np.array([0.5, 2.0, 5.0])
    y = np.array([1.0, 3.0, 4.0])
    assert np.allclose(geodesic_point(x, y, 0.0).as_array(), x, atol=1e-15)
    assert np.allclose(geodesic_point(x, y, 1.0).as_array(), y, atol=1e-15)
    # constant speed: distance from x to gamma(t) is t * d(x, y)
    d = riemannian_distance(x, y)
    for t in (0.25, 0.5, 0.75):
        mid = geodesic_point(x, y, t)
        assert riemannian_distance(x, mid.as_array()) == pytest.approx(t * d, abs=1e-12)
    with pytest.raises(DomainError):
        geodesic_point(x, y, 1.5)


def test_carre_du_champ_phi():
    # Gamma(phi) = sum_i x_i
    n = 4
    f = _phi(n)
    x = np.array([0.5, 1.0, 2.0, 3.0])
    assert carre_du_champ(f, x) == pytest.approx(x.sum())
    g = Polynomial.coordinate(n, 0)
    assert carre_du_champ2(f, g, x) == pytest.approx(x[0])


def test_gamma2_of_phi_closed_form():
    # Gamma_2(phi) = (alpha n)/2 + phi/2, from the eigenfunction relation
    params = ModelParams(4, 6.0, 2.0)
    f = _phi(4)
    rng = np.random.default_rng(3)
    for _ in range(10):
        state = random_ordered_state(params, rng)
        want = 0.5 * params.alpha * params.n + 0.5 * state.as_array().sum()
        assert gamma2_explicit(f, state, params) == pytest.approx(want, rel=1e-12)
        assert gamma2_definitional(f, state, params) == pytest.approx(want, rel=1e-9)


def test_gamma2_explicit_matches_definitional():
    # the closed form against the raw definition through the generator
    rng = np.random.default_rng(5)
    for n, beta in [(2, 1.0), (3, 2.0), (4, 4.0)]:
        params = ModelParams(n, 2.0 + (n - 1) * beta / 2.0, beta)
        for _ in range(25):
            state = random_ordered_state(params, rng, min_gap=1e-3)
            f = random_test_function(n, rng, degree=2)
            a = gamma2_explicit(f, state, params)
            b = gamma2_definitional(f, state, params)
            scale = max(1.0, abs(a), abs(b))
            assert abs(a - b) <= 1e-9 * scale


def test_gamma2_single_particle_hand_case():
    # n = 1, f(x) = x^2: Gamma_2 = delta/2*(2x)^2 + x/2*(2x)^2 + x^2*4 + x*2x*2
    params = ModelParams(1, 2.0, 0.0)
    f = Polynomial.coordinate(1, 0) * Polynomial.coordinate(1, 0)
    x = 1.7
    want = 0.5 * 2.0 * 4 * x**2 + 0.5 * 4 * x**3 + 4 * x**2 + 4 * x**2
    got = gamma2_explicit(f, ParticleState([x]), params)
    assert got == pytest.approx(want, rel=1e-12)


def test_edl_gamma2_single_particle_hand_case():
    # n = 1, f(y) = y: ||Hess||^2 = 0, so Gamma_2 = 1/2 + (2 delta - 1)/y^2
    params = ModelParams(1, 2.5, 0.0)
    f = Polynomial.coordinate(1, 0)
    y = 1.3
    want = 0.5 + (2 * 2.5 - 1.0) / y**2
    assert edl_gamma2(f, np.array([y]), params) == pytest.approx(want, rel=1e-12)


def test_edl_gamma2_dominates_half_gamma():
    # additive-noise curvature: Gamma_2 >= 1/2 |grad f|^2 holds pointwise
    rng = np.random.default_rng(7)
    params = ModelParams(3, 5.0, 2.0)
    for _ in range(50):
        state = random_ordered_state(params, rng, min_gap=1e-3)
        y = 2.0 * np.sqrt(state.as_array())
        f = random_test_function(3, rng, degree=2)
        g2 = edl_gamma2(f, y, params)
        gam = float(np.sum(f.gradient(y) ** 2))
        assert g2 >= 0.5 * gam - 1e-10 * max(1.0, abs(g2))


def test_cd_certificate_reports_clean_gap():
    params = ModelParams(3, 4.0, 2.0)
    report = cd_certificate(params, 0.5, 200, RngStream(11, 0))
    assert report.samples == 200
    assert not report.violated()
    assert report.min_gap >= -1e-8 * report.scale
    assert "state" in report.worst_case
    payload = report.to_json()
    assert '"rho": 0.5' in payload


def test_cd_certificate_detects_false_bound():
    # an absurdly large rho must be violated by random search
    params = ModelParams(3, 4.0, 2.0)
    report = cd_certificate(params, 1e6, 200, RngStream(12, 0))
    assert report.violated()


def test_random_ordered_state_respects_gap():
    params = ModelParams(6, 9.0, 2.0)
    rng = np.random.default_rng(13)
    for _ in range(20):
        s = random_ordered_state(params, rng, min_gap=1e-4)
        assert s.min_gap() >= 1e-4 * (1 - 1e-12)
        assert np.all(s.as_array() > 0)
