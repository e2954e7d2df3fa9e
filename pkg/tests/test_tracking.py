import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isac6d.errors import InvalidObservation, SingularInnovation
from isac6d.estimation import Observation6D
from isac6d.motion import TargetState6D
from isac6d.tracking import (
    MAX_COAST,
    KalmanModel,
    Prediction,
    TrackState,
    TrackStepError,
    diverging,
    disturbance_matrix,
    kf_coast,
    kf_init,
    kf_predict,
    kf_update,
    track_sequence,
    transition_matrix,
    unwrap_angles,
)

X0 = np.array([100.0, np.pi / 2, 0.9599, 8.0, 0.0, 0.1396])
# single-shot RMSEs at 0 dB (r, theta, phi, v_r, omega_theta, omega_phi)
RMSE = np.array([0.0031, np.deg2rad(0.0097), np.deg2rad(0.0097), 0.0267, np.deg2rad(0.2208), np.deg2rad(0.2208)])


def _truth(n, t, x0=X0, accel=None):
    phi, b = transition_matrix(t), disturbance_matrix(t)
    xs = [np.array(x0, dtype=float)]
    for k in range(n - 1):
        x = phi @ xs[-1]
        if accel is not None:
            x = x + b @ accel[k]
        xs.append(x)
    return np.array(xs)


def test_block_forms():
    t = 0.2
    phi, b = transition_matrix(t), disturbance_matrix(t)
    assert np.array_equal(phi[:3, :3], np.eye(3)) and np.array_equal(phi[3:, 3:], np.eye(3))
    assert np.array_equal(phi[:3, 3:], -t * np.eye(3)) and not np.any(phi[3:, :3])
    assert np.allclose(b[:3], -0.5 * t * t * np.eye(3)) and np.allclose(b[3:], -t * np.eye(3))
    assert np.array_equal(KalmanModel(t, np.eye(6)).g, np.eye(6))


def test_model_validation_and_q():
    with pytest.raises(ValueError):
        KalmanModel(0.2, np.eye(5))
    with pytest.raises(ValueError):
        KalmanModel(0.2, np.triu(np.ones((6, 6))))
    m = KalmanModel(0.2, np.eye(6), sigma_u=(1.0, 0.5, 0.1))
    assert np.allclose(m.q, m.q.T) and np.min(np.linalg.eigvalsh(m.q)) > 0
    assert not np.any(KalmanModel(0.2, np.eye(6), literal=True).q)
    r = KalmanModel.from_rmse(0.2, [0.0, 1.0, 2.0, 0, 0, 0]).r_cov
    assert r[0, 0] == 1e-12 and r[2, 2] == 4.0


def test_init():
    ts = kf_init(Observation6D(*X0))
    assert np.array_equal(ts.estimate, X0)
    assert np.array_equal(ts.covariance, np.eye(6))
    assert ts.step == 0 and np.trace(ts.covariance) == 6
    with pytest.raises(InvalidObservation):
        kf_init(Observation6D(*X0, valid=(True,) * 5 + (False,)))


def test_predict_example():
    pred = kf_predict(kf_init(X0), KalmanModel(0.2, np.eye(6), literal=True))
    assert pred.state_pred == pytest.approx([98.4, np.pi / 2, 0.93198, 8.0, 0.0, 0.1396], abs=1e-12)
    assert np.array_equal(pred.obs_pred, pred.state_pred)
    phi = transition_matrix(0.2)
    assert np.allclose(pred.p_pred, phi @ phi.T)


def test_predict_static_state():
    x = np.array([50.0, 1.0, 0.3, 0.0, 0.0, 0.0])
    pred = kf_predict(kf_init(x), KalmanModel(0.5, np.eye(6)))
    assert np.array_equal(pred.state_pred, x)


@pytest.mark.parametrize("r_scale, target", [(1e-12, "obs"), (1e12, "pred")])
def test_update_limits(r_scale, target):
    z = X0 + np.random.default_rng(5).standard_normal(6)
    model = KalmanModel(0.2, r_scale * np.eye(6))
    ts = kf_init(X0)
    pred = kf_predict(ts, model)
    post = kf_update(ts, pred, z, model)
    assert np.max(np.abs(post.estimate - (z if target == "obs" else pred.state_pred))) < 1e-6
    assert post.step == 1


def test_update_half_gain_midpoint():
    pred = Prediction(X0.copy(), X0.copy(), np.eye(6))
    z = X0 + np.arange(6.0)
    post = kf_update(kf_init(X0), pred, z, KalmanModel(0.2, np.eye(6)))
    assert np.allclose(post.estimate, 0.5 * (X0 + z))
    assert np.allclose(post.covariance, 0.5 * np.eye(6))


@settings(max_examples=60)
@given(
    st.lists(st.floats(1e-3, 1e3), min_size=6, max_size=6),
    st.lists(st.floats(1e-3, 1e3), min_size=6, max_size=6),
    st.lists(st.floats(-10, 10), min_size=6, max_size=6),
)
def test_update_is_componentwise_convex(p_diag, r_diag, dz):
    pred = Prediction(X0.copy(), X0.copy(), np.diag(p_diag))
    z = X0 + np.array(dz)
    post = kf_update(kf_init(X0), pred, z, KalmanModel(0.2, np.diag(r_diag)))
    lo, hi = np.minimum(X0, z), np.maximum(X0, z)
    assert np.all(post.estimate >= lo - 1e-9) and np.all(post.estimate <= hi + 1e-9)


def test_singular_innovation():
    pred = Prediction(X0.copy(), X0.copy(), np.zeros((6, 6)))
    r = np.diag([1.0, 1.0, 1.0, 1.0, 1.0, 1e-14])
    with pytest.raises(SingularInnovation):
        kf_update(kf_init(X0), pred, X0, KalmanModel(0.2, r))


def test_covariance_stays_symmetric_psd():
    rng = np.random.default_rng(1)
    model = KalmanModel.from_rmse(0.2, RMSE, sigma_u=(0.5, 0.01, 0.01))
    ts = kf_init(X0)
    for _ in range(10_000):
        pred = kf_predict(ts, model)
        ts = kf_update(ts, pred, pred.state_pred + RMSE * rng.standard_normal(6), model)
        p = ts.covariance
        assert np.max(np.abs(p - p.T)) < 1e-10
        assert np.min(np.linalg.eigvalsh(p)) > -1e-10


def test_single_observation_sequence():
    hist = track_sequence([Observation6D(*X0)], KalmanModel(0.2, np.eye(6)))
    assert len(hist) == 1 and np.array_equal(hist[0].estimate, X0)
    with pytest.raises(ValueError):
        track_sequence([], KalmanModel(0.2, np.eye(6)))


def test_noiseless_convergence():
    truth = _truth(30, 0.2)
    obs = [Observation6D(*x) for x in truth]
    start = truth[0] + np.array([0.5, 0.01, -0.01, 0.3, 0.02, -0.02])
    obs[0] = Observation6D(*start)
    hist = track_sequence(obs, KalmanModel.from_rmse(0.2, RMSE))
    err_r = np.abs([h.estimate[0] for h in hist] - truth[:, 0])
    assert np.all(np.diff(err_r[5:]) <= 1e-12)
    assert np.max(np.abs(hist[-1].estimate - truth[-1])) < 1e-6


def test_noiseless_exact_start_stays_on_truth():
    truth = _truth(10, 0.2)
    hist = track_sequence([Observation6D(*x) for x in truth], KalmanModel.from_rmse(0.2, RMSE))
    assert np.max(np.abs(hist[5].estimate - truth[5])) < 1e-6


def test_filter_beats_single_shot_rates():
    rng = np.random.default_rng(3)
    truth = _truth(40, 0.2)
    z = truth + RMSE * rng.standard_normal(truth.shape)
    hist = track_sequence([Observation6D(*x) for x in z], KalmanModel.from_rmse(0.2, RMSE))
    est = np.array([h.estimate for h in hist])
    half = slice(20, None)
    single = np.sqrt(np.mean((z[half, 5] - truth[half, 5]) ** 2))
    filtered = np.sqrt(np.mean((est[half, 5] - truth[half, 5]) ** 2))
    assert filtered < single


def test_literal_mode_diverges_under_manoeuvre():
    rng = np.random.default_rng(8)
    sigma_u = np.array([2.0, 0.05, 0.05])
    truth = _truth(60, 0.2, accel=sigma_u * rng.standard_normal((59, 3)))
    z = truth + RMSE * rng.standard_normal(truth.shape)
    obs = [Observation6D(*x) for x in z]
    literal = track_sequence(obs, KalmanModel.from_rmse(0.2, RMSE, sigma_u, literal=True))
    augmented = track_sequence(obs, KalmanModel.from_rmse(0.2, RMSE, sigma_u))
    assert any(diverging(literal[: k + 1]) for k in range(len(literal)))
    assert not any(diverging(augmented[: k + 1]) for k in range(len(augmented)))


def test_coast_then_drop():
    truth = _truth(10, 0.2)
    obs = [Observation6D(*truth[0])] + [None] * (MAX_COAST + 2)
    hist = track_sequence(obs, KalmanModel.from_rmse(0.2, RMSE))
    assert [h.status for h in hist[1:]] == ["coasted"] * MAX_COAST + ["dropped"]
    assert np.allclose(hist[MAX_COAST].estimate, truth[MAX_COAST])


def test_coast_resets_after_update():
    truth = _truth(6, 0.2)
    bad = Observation6D(*truth[1], valid=(False,) + (True,) * 5)
    obs = [Observation6D(*truth[0]), bad, Observation6D(*truth[2]), None]
    hist = track_sequence(obs, KalmanModel.from_rmse(0.2, RMSE))
    assert [h.missed for h in hist] == [0, 1, 0, 1]
    ts = TrackState(X0, np.eye(6), missed=MAX_COAST)
    assert kf_coast(ts, kf_predict(ts, KalmanModel(0.2, np.eye(6)))).status == "dropped"


def test_step_errors_carry_index():
    obs = [Observation6D(*X0), Observation6D(*X0)]
    model = KalmanModel(0.2, np.diag([1.0] * 5 + [1e-14]), literal=True)
    ts = TrackState(X0, np.zeros((6, 6)))
    with pytest.raises(SingularInnovation):
        kf_update(ts, kf_predict(ts, model), X0, model)
    hist_err = None
    try:
        track_sequence([Observation6D(*X0, valid=(False,) * 6)] + obs, model)
    except TrackStepError as exc:
        hist_err = exc
    assert hist_err is not None and hist_err.step == 0
    assert isinstance(hist_err.cause, InvalidObservation)


def test_unwrap_angles():
    seq = [TargetState6D(10.0, 3.1, 0.1), TargetState6D(10.0, 3.1 + 0.1 - 2 * np.pi, 0.1), None, TargetState6D(10.0, 3.3 - 2 * np.pi, 0.1)]
    out = unwrap_angles(seq)
    thetas = [s.theta for s in out if s is not None]
    assert thetas == pytest.approx([3.1, 3.2, 3.3])
    assert out[2] is None
    assert np.all(np.abs(np.diff(thetas)) < np.pi)
