import math

import numpy as np
import pytest
from scipy import stats

from dyson_laguerre import (
    DomainError,
    MatrixParams,
    MatrixState,
    ModelParams,
    ParticleState,
    RngStream,
    StepRejected,
    cir_exact_transition,
    default_dt,
    dl_path,
    dl_paths_batch,
    matrix_dl_path,
    rect_ou_transition,
    spectral_projection,
    step_dl_sqrt,
)


def test_rng_stream_reproducible():
    a = RngStream(42, 3).generator().standard_normal(5)
    b = RngStream(42, 3).generator().standard_normal(5)
    c = RngStream(42, 4).generator().standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_default_dt_follows_spacing():
    assert default_dt(np.array([1.0])) == pytest.approx(1e-3)
    # tight spacing shrinks the step, with a floor at a tenth of the scale
    assert default_dt(np.array([0.0, 0.001, 0.002])) == pytest.approx(1e-4)
    # wide spacing is capped at the base scale
    assert default_dt(np.array([0.0, 5.0, 10.0])) == pytest.approx(1e-3)


# one-particle (beta = 0) closed forms:
#   E[x_t] = x0 e^-t + a (1 - e^-t)
#   Var[x_t] = 2 x0 e^-t (1 - e^-t) + a (1 - e^-t)^2
def test_cir_exact_transition_moments():
    rng = np.random.default_rng(5)
    x0, t, a = 3.0, 0.8, 2.5
    draws = cir_exact_transition(np.full(200_000, x0), t, a, rng)
    ec = math.exp(-t)
    c = 1.0 - ec
    mean = x0 * ec + a * c
    var = 2 * x0 * ec * c + a * c * c
    se_mean = math.sqrt(var / draws.size)
    assert abs(draws.mean() - mean) < 3.5 * se_mean
    m4 = stats.moment(draws, 4)
    se_var = math.sqrt((m4 - var**2) / draws.size)
    assert abs(draws.var() - var) < 3.5 * se_var


def test_cir_exact_transition_stationarity():
    # Gamma(a, 1) is invariant for the exact transition
    rng = np.random.default_rng(6)
    a = 2.2
    x0 = rng.standard_gamma(a, 30_000)
    xt = cir_exact_transition(x0, 1.3, a, rng)
    assert stats.kstest(xt, "gamma", args=(a,)).pvalue > 0.01


def test_cir_exact_transition_semigroup():
    # stepping s then t must match stepping s + t in law
    rng = np.random.default_rng(7)
    a, x0 = 3.0, 1.5
    n = 30_000
    two_step = cir_exact_transition(
        cir_exact_transition(np.full(n, x0), 0.4, a, rng), 0.9, a, rng
    )
    one_step = cir_exact_transition(np.full(n, x0), 1.3, a, rng)
    assert stats.ks_2samp(two_step, one_step).pvalue > 0.01


def test_cir_exact_transition_edges():
    rng = np.random.default_rng(8)
    assert cir_exact_transition(2.0, 0.0, 3.0, rng) == 2.0
    with pytest.raises(DomainError):
        cir_exact_transition(1.0, -0.5, 3.0, rng)
    with pytest.raises(DomainError):
        cir_exact_transition(1.0, 1.0, 0.0, rng)


def test_step_rejects_when_drift_overshoots():
    # a huge coordinate with a large dt overshoots the -6 sqrt(2 dt)
    # threshold deterministically (drift ~ -y/2, so y(1 - dt/2) is far
    # below -tau at dt = 4), independent of the noise draw
    params = ModelParams(1, 2.0, 0.0)
    x = ParticleState([1e8])
    with pytest.raises(StepRejected):
        step_dl_sqrt(x, 4.0, params, np.random.default_rng(0))


def test_path_driver_recovers_by_halving():
    # the same start succeeds through the path driver, which halves dt on
    # rejection until the proposal is admissible
    params = ModelParams(1, 2.0, 0.0)
    out = dl_paths_batch((ParticleState([1e8]), 2), [4.0], params, RngStream(0, 0), dt=4.0)
    assert np.all(np.isfinite(out))
    assert np.all(out > 0)


def test_step_small_dt_accepted():
    params = ModelParams(3, 4.0, 2.0)
    x = ParticleState([0.5, 1.0, 1.5])
    out = step_dl_sqrt(x, 1e-4, params, np.random.default_rng(0))
    assert out.n == 3
    assert out.min_gap() > 0


def test_paths_shapes_and_reproducibility():
    params = ModelParams(4, 6.0, 2.0)
    x0 = ParticleState([1.0, 2.0, 3.0, 4.0])
    times = [0.0, 0.1, 0.3]
    a = dl_paths_batch((x0, 5), times, params, RngStream(1, 0), dt=1e-3)
    b = dl_paths_batch((x0, 5), times, params, RngStream(1, 0), dt=1e-3)
    assert a.shape == (3, 5, 4)
    assert np.array_equal(a, b)
    assert np.allclose(a[0], x0.as_array())  # t=0 returns the start
    # order preserved along every path
    assert np.all(np.diff(a, axis=2) >= 0)


def test_dl_path_phi_series():
    params = ModelParams(3, 4.0, 1.0)
    p = dl_path([0.5, 1.0, 2.0], [0.0, 0.2], params, RngStream(2, 0))
    phi = p.phi_series()
    assert phi.shape == (2,)
    assert phi[0] == pytest.approx(3.5)


def test_paths_match_exact_law_beta_zero():
    # with beta = 0 the coordinates are independent one-particle diffusions,
    # so the Euler scheme must reproduce the exact transition law
    params = ModelParams(1, 2.0, 0.0)
    x0 = 1.2
    t = 0.7
    sim = dl_paths_batch(
        (ParticleState([x0]), 4000), [t], params, RngStream(3, 0), dt=1e-3
    )[0, :, 0]
    exact = cir_exact_transition(np.full(4000, x0), t, 2.0, np.random.default_rng(4))
    assert stats.ks_2samp(sim, exact).pvalue > 0.01


def test_matrix_params_bru():
    mp = MatrixParams.bru(3, 5)
    assert mp.kappa == pytest.approx(math.sqrt(2.5))
    assert mp.gamma == pytest.approx(0.5)
    assert mp.space_scale == pytest.approx(1.0 / 5.0)
    assert mp.time_scale == pytest.approx(1.0)
    induced = mp.induced_model()
    assert induced.alpha == pytest.approx(2.5)
    assert induced.n == 3
    with pytest.raises(Exception):
        MatrixParams.bru(5, 3)  # needs m >= n


def test_rect_ou_transition_moments():
    # entries are independent OU: mean M0 e^{-gamma t}, var kappa^2(1-e^{-2 gamma t})/(2 gamma)
    mp = MatrixParams.bru(2, 4)
    M0 = np.full((2, 4), 3.0)
    t = 0.9
    reps = 20_000
    rng = np.random.default_rng(11)
    draws = np.array([rect_ou_transition(M0, t, mp, rng).entries for _ in range(reps)])
    mean = 3.0 * math.exp(-mp.gamma * t)
    var = mp.kappa**2 * (1 - math.exp(-2 * mp.gamma * t)) / (2 * mp.gamma)
    assert np.allclose(draws.mean(axis=0), mean, atol=4 * math.sqrt(var / reps))
    assert np.allclose(draws.var(axis=0), var, rtol=0.1)


def test_spectral_projection_known_matrix():
    # M = diag(2, 3) padded to 2x4: MM^T has eigenvalues 4, 9
    M = np.zeros((2, 4))
    M[0, 0], M[1, 1] = 2.0, 3.0
    x = spectral_projection(MatrixState(M))
    assert np.allclose(x.as_array(), [4.0, 9.0], atol=1e-12)


def test_matrix_path_stationary_pushforward():
    # started from the stationary matrix law, the canonical projection at any
    # time has the equilibrium phi pushforward Gamma(alpha n, 1)
    n, m = 3, 6
    mp = MatrixParams.bru(n, m)
    reps = 3000
    rng = np.random.default_rng(13)
    phis = np.empty(reps)
    for r in range(reps):
        M0 = math.sqrt(m / 2.0) * rng.standard_normal((n, m))
        path = matrix_dl_path(MatrixState(M0), [0.6], mp, RngStream(17, r), canonical=True)
        phis[r] = float(np.sum(path.states[0].as_array()))
    a = mp.induced_model().phi_mean
    assert stats.kstest(phis, "gamma", args=(a,)).pvalue > 0.01


def test_matrix_path_start_is_projected_exactly():
    mp = MatrixParams.bru(2, 3)
    M0 = np.zeros((2, 3))
    M0[0, 0], M0[1, 1] = 1.0, 2.0
    path = matrix_dl_path(MatrixState(M0), [0.0], mp, RngStream(5, 0), canonical=True)
    want = mp.space_scale * spectral_projection(MatrixState(M0)).as_array()
    assert np.allclose(path.states[0].as_array(), want, atol=1e-12)


def test_matrix_state_frozen_and_frobenius():
    s = MatrixState(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert s.frobenius_sq() == pytest.approx(30.0)
    with pytest.raises(ValueError):
        s.entries[0, 0] = 9.0
