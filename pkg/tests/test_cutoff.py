import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyson_laguerre import (
    DomainError,
    ModelParams,
    OUParams,
    ParticleState,
    UnsupportedRegime,
    cutoff_predict,
    duhamel_variance,
    kl_upper_bound_chain,
    lb_l2_witness,
    lift_matrix_bounds,
    mixing_time_ou,
    run_cutoff_profile,
    tv_lower_bound_formula,
)
from dyson_laguerre.cutoff import CutoffProfile, ProfileRow, kl_chain_best


def test_mixing_time_hand_values():
    # theta = sigma = 1, |z0|^2 = 4e, one entry:
    #   TV branch log(4e/4) = 1 beats log(1/4), so t = 1/2
    p = OUParams(1, 1, kappa=1.0, gamma=1.0, z0_norm_sq=4.0 * math.e)
    assert mixing_time_ou("TV", p) == pytest.approx(0.5, abs=1e-12)
    assert mixing_time_ou("KL", p) == pytest.approx((1.0 + math.log(4.0)) / 2.0)
    assert mixing_time_ou("L2", p) == pytest.approx((1.0 + math.log(8.0)) / 2.0)
    assert mixing_time_ou("W", p) == pytest.approx((1.0 + math.log(4.0)) / 2.0)


def test_mixing_time_dimensional_branch():
    # centered start leaves only the dimensional branch
    p = OUParams(4, 4, kappa=1.0, gamma=1.0, z0_norm_sq=0.0)
    assert mixing_time_ou("TV", p) == pytest.approx(math.log(4.0) / 2.0)
    assert mixing_time_ou("TV", p, nm_override=64) == pytest.approx(math.log(16.0) / 2.0)


def test_mixing_time_vacuous_raises():
    p = OUParams(1, 1, kappa=1.0, gamma=1.0, z0_norm_sq=0.0)
    with pytest.raises(DomainError):
        mixing_time_ou("TV", p, nm_override=0)
    with pytest.raises(DomainError):
        mixing_time_ou("huh", p)


def test_mixing_time_aliases():
    p = OUParams(2, 2, kappa=1.0, gamma=0.5, z0_norm_sq=3.0)
    assert mixing_time_ou("w2", p) == mixing_time_ou("W", p)
    assert mixing_time_ou("wasserstein", p) == mixing_time_ou("W", p)


def test_cutoff_predict_sde_route():
    # start with phi at its mean: witness drops, dimensional floor rules
    params = ModelParams(4, 3.5, 1.0)
    pred = cutoff_predict("TV", ParticleState([2.0, 3.0, 4.0, 5.0]), params)
    assert pred.c_lower == pytest.approx(0.5 * math.log(14.0))
    assert pred.c_upper == pytest.approx(math.log(14.0))
    assert pred.source["lower"] == "dimensional-floor"
    assert not pred.flagged


def test_cutoff_predict_matrix_route_zero_start():
    from dyson_laguerre import MatrixParams

    mp = MatrixParams.bru(4, 4)
    params = mp.induced_model()
    pred = cutoff_predict("TV", ParticleState(np.zeros(4)), params, matrix=mp)
    assert pred.c_lower == pytest.approx(0.5 * math.log(8.0))
    assert pred.c_upper == pytest.approx(math.log(4.0))
    assert pred.source["upper"] == "matrix-dimension"


def test_cutoff_predict_flags_inversion():
    # tiny N with a huge start: the witness lower edges past the upper
    params = ModelParams(1, 0.9, 0.0)
    pred = cutoff_predict("TV", ParticleState([1e6]), params)
    assert pred.flagged
    assert pred.c_lower <= pred.c_upper


def test_cutoff_predict_flags_uncertified_lower():
    params = ModelParams(1, 0.5, 0.0)
    pred = cutoff_predict("TV", ParticleState([0.5]), params)
    assert pred.flagged
    assert "certify" in pred.flag_reason


@given(
    st.integers(min_value=1, max_value=6),
    st.floats(min_value=0.1, max_value=50.0),
    st.sampled_from(["TV", "KL", "L2", "W"]),
)
@settings(max_examples=80, deadline=None)
def test_cutoff_predict_bracket_never_inverted(n, x_scale, kind):
    params = ModelParams(n, 2.0 + (n - 1), 2.0) if n > 1 else ModelParams(1, 3.0, 0.0)
    x0 = ParticleState(np.arange(1.0, n + 1.0) * x_scale)
    pred = cutoff_predict(kind, x0, params)
    assert pred.c_lower <= pred.c_upper + 1e-12


def test_duhamel_variance_hand_value():
    params = ModelParams(2, 4.0, 2.0)  # N = 8
    x0 = ParticleState([4.0, 6.0])  # phi_raw = 10
    c = 1.0 - math.exp(-1.0)
    want = 8.0 * c**2 + 2.0 * 10.0 * c * math.exp(-1.0)
    assert duhamel_variance(x0, 1.0, params) == pytest.approx(want, rel=1e-12)
    assert duhamel_variance(x0, 0.0, params) == 0.0
    # long horizon: variance tends to the equilibrium value N
    assert duhamel_variance(x0, 50.0, params) == pytest.approx(8.0, rel=1e-9)


def test_lb_l2_witness():
    params = ModelParams(2, 4.0, 2.0)  # N = 8
    x0 = ParticleState([5.0, 7.0])  # phi_centered = 4
    assert lb_l2_witness(x0, 0.0, params) == pytest.approx(16.0 / 8.0)
    assert lb_l2_witness(x0, 1.0, params) == pytest.approx(2.0 * math.exp(-2.0))
    assert lb_l2_witness(ParticleState([3.0, 5.0]), 1.0, params) == 0.0


def test_tv_lower_bound_clamped():
    params = ModelParams(2, 4.0, 2.0)
    far = ParticleState([100.0, 200.0])
    near = ParticleState([3.0, 5.0])  # centered
    assert tv_lower_bound_formula(far, 0.0, params) > 0.9
    assert tv_lower_bound_formula(near, 1.0, params) == 0.0
    assert tv_lower_bound_formula(far, 50.0, params) == 0.0  # clamped at zero
    vals = [tv_lower_bound_formula(far, t, params) for t in np.linspace(0, 3, 10)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_lift_matrix_bounds():
    assert lift_matrix_bounds("TV", 0.3, 2, 3) == 1.0
    assert lift_matrix_bounds("TV", 0.1, 2, 3) == pytest.approx(0.6)
    assert lift_matrix_bounds("KL", 0.3, 2, 3) == pytest.approx(1.8)
    want_l2 = math.sqrt((1.0 + 0.09) ** 6 - 1.0)
    assert lift_matrix_bounds("L2", 0.3, 2, 3) == pytest.approx(want_l2, rel=1e-12)
    assert lift_matrix_bounds("L2", 10.0, 20, 20) == math.inf
    assert lift_matrix_bounds("W", 0.5, 4, 9) == pytest.approx(2.0 * 2.0 * 0.5)
    assert lift_matrix_bounds("W", 0.5, 4, 9, statement_constant=True) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        lift_matrix_bounds("TV", -0.1, 2, 2)
    with pytest.raises(DomainError):
        lift_matrix_bounds("TV", math.inf, 2, 2)


def test_kl_chain_hand_value():
    params = ModelParams(2, 4.0, 2.0)  # N = 8
    x0 = ParticleState([4.0, 6.0])  # phi_raw = 10
    ratio = math.exp(-0.5) / (1.0 - math.exp(-0.5))
    want = ratio * 18.0 * math.exp(-1.0)
    assert kl_upper_bound_chain(x0, 1.0, 0.5, params) == pytest.approx(want, rel=1e-12)
    with pytest.raises(DomainError):
        kl_upper_bound_chain(x0, 1.0, 0.0, params)
    assert kl_chain_best(x0, 1.5, params) == pytest.approx(
        kl_upper_bound_chain(x0, 0.0, 1.5, params)
    )


def test_kl_chain_decays_subexponentially():
    # beyond t = 1 the optimized bound decays at least like e^{-t}
    params = ModelParams(4, 6.0, 2.0)
    x0 = ParticleState([1.0, 2.0, 3.0, 4.0])
    ts = np.linspace(1.0, 6.0, 11)
    vals = np.array([kl_chain_best(x0, t, params) for t in ts])
    ratios = vals[1:] / vals[:-1]
    step = ts[1] - ts[0]
    assert np.all(ratios <= math.exp(-step) * 1.0000001)


def test_tv_window_on_synthetic_rows():
    rows = [
        ProfileRow(8, 0.0, "TV", 1.0, 0.0, 0.9, 1.0, 1.0, 2.0),
        ProfileRow(8, 1.0, "TV", 0.8, 0.0, 0.7, 1.0, 1.0, 2.0),
        ProfileRow(8, 2.0, "TV", 0.4, 0.0, 0.3, 0.9, 1.0, 2.0),
        ProfileRow(8, 3.0, "TV", 0.05, 0.0, 0.0, 0.5, 1.0, 2.0),
    ]
    prof = CutoffProfile(rows=rows, predictions={}, critical_times={8: 2.0}, route="matrix")
    win = prof.tv_window(8)
    assert win["t_hi"] == pytest.approx(0.5)  # crosses 0.9 between 0 and 1
    assert win["t_lo"] == pytest.approx(2.0 + 0.3 / 0.35)
    assert win["width"] == pytest.approx(win["t_lo"] - win["t_hi"])
    assert win["ratio"] == pytest.approx(win["width"] / 2.0)
    with pytest.raises(DomainError):
        prof.tv_window(9)


def test_profile_matrix_route_small():
    config = {
        "mode": "cutoff-profile",
        "n": 8,
        "m": 8,
        "times": [0.5, 0.9, 1.3],
        "replicas": 600,
        "distances": ["TV", "KL"],
        "seed": 7,
    }
    prof = run_cutoff_profile(config)
    assert prof.route == "matrix"
    assert set(prof.critical_times) == {8}
    tv_rows = prof.rows_for(n=8, kind="TV")
    kl_rows = prof.rows_for(n=8, kind="KL")
    assert len(tv_rows) == 3 and len(kl_rows) == 3
    for r in tv_rows + kl_rows:
        assert r.bound_lower <= r.bound_upper + 1e-12
        assert r.stderr >= 0
        assert np.isfinite(r.value)
    # witness values decrease along the ladder of times
    assert tv_rows[0].value > tv_rows[-1].value
    # sandwich within 3 stderr on every row
    for r in tv_rows:
        assert r.bound_lower - 3 * r.stderr <= r.value <= r.bound_upper + 3 * r.stderr
    assert prof.predictions[8]["TV"].c_upper == pytest.approx(prof.critical_times[8])


def test_profile_sde_route_small():
    config = {
        "mode": "cutoff-profile",
        "n": 3,
        "alpha": 4.0,
        "beta": 1.0,
        "times": [0.8, 1.2],
        "replicas": 300,
        "distances": ["TV"],
        "seed": 1,
    }
    prof = run_cutoff_profile(config)
    assert prof.route == "sde"
    assert len(prof.rows_for(n=3, kind="TV")) == 2


def test_profile_rejects_wasserstein():
    config = {
        "mode": "cutoff-profile",
        "n": 8,
        "times": [1.0],
        "replicas": 200,
        "distances": ["W"],
        "seed": 0,
    }
    with pytest.raises(UnsupportedRegime):
        run_cutoff_profile(config)
