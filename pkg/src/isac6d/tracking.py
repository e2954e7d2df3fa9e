"""Linear Kalman tracking of the six-parameter target state across tracking slots."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidObservation, SensingError, SingularInnovation
from .estimation import Observation6D
from .motion import TargetState6D

Q_FLOOR = 1e-9
R_FLOOR = 1e-12
MAX_COAST = 3
# chi-square 0.999 quantile for 6 degrees of freedom
NIS_LIMIT = 22.46
NIS_WINDOW = 5


def transition_matrix(t: float) -> np.ndarray:
    eye = np.eye(3)
    return np.block([[eye, -t * eye], [np.zeros((3, 3)), eye]])


def disturbance_matrix(t: float) -> np.ndarray:
    eye = np.eye(3)
    return np.vstack([-0.5 * t * t * eye, -t * eye])


@dataclass
class KalmanModel:
    """Constant-velocity model in ``(r, theta, phi, v_r, omega_theta, omega_phi)``.

    Parameters
    ----------
    t : float
        Tracking interval, seconds.
    r_cov : ndarray
        6x6 measurement noise covariance.
    sigma_u : array_like
        Std of the random accelerations ``(u_r, u_theta, u_phi)``.
    literal : bool
        Predict the covariance as ``Phi P Phi^T`` with no process noise.
    """

    t: float
    r_cov: np.ndarray
    sigma_u: np.ndarray = field(default_factory=lambda: np.zeros(3))
    literal: bool = False
    q_floor: float = Q_FLOOR

    def __post_init__(self):
        self.r_cov = np.asarray(self.r_cov, dtype=float)
        self.sigma_u = np.asarray(self.sigma_u, dtype=float)
        if self.r_cov.shape != (6, 6):
            raise ValueError("measurement covariance must be 6x6")
        if not np.allclose(self.r_cov, self.r_cov.T):
            raise ValueError("measurement covariance must be symmetric")

    @property
    def phi(self) -> np.ndarray:
        return transition_matrix(self.t)

    @property
    def b(self) -> np.ndarray:
        return disturbance_matrix(self.t)

    @property
    def g(self) -> np.ndarray:
        return np.eye(6)

    @property
    def q(self) -> np.ndarray:
        if self.literal:
            return np.zeros((6, 6))
        b = self.b
        return b @ np.diag(self.sigma_u**2) @ b.T + self.q_floor * np.eye(6)

    @classmethod
    def from_rmse(cls, t: float, rmse, sigma_u=(0.0, 0.0, 0.0), literal: bool = False) -> "KalmanModel":
        """Diagonal measurement covariance from per-field single-shot RMSEs."""
        var = np.maximum(np.asarray(rmse, dtype=float) ** 2, R_FLOOR)
        return cls(t, np.diag(var), np.asarray(sigma_u, dtype=float), literal)


@dataclass
class TrackState:
    estimate: np.ndarray
    covariance: np.ndarray
    step: int = 0
    status: str = "updated"
    missed: int = 0
    nis: float | None = None

    @property
    def state(self) -> TargetState6D:
        return TargetState6D.from_vector(self.estimate)


@dataclass(frozen=True)
class Prediction:
    state_pred: np.ndarray
    obs_pred: np.ndarray
    p_pred: np.ndarray


def _vector(z) -> np.ndarray:
    if isinstance(z, Observation6D):
        if not z.fully_valid:
            bad = [k for k, ok in z.validity().items() if not ok]
            raise InvalidObservation(f"observation has invalid fields: {bad}")
        return z.as_vector()
    if isinstance(z, TargetState6D):
        return z.as_vector()
    return np.asarray(z, dtype=float)


def kf_init(s0) -> TrackState:
    """Start a track at ``s0`` with identity covariance."""
    return TrackState(_vector(s0).copy(), np.eye(6), 0)


def kf_predict(ts: TrackState, model: KalmanModel) -> Prediction:
    phi = model.phi
    x = phi @ ts.estimate
    p = phi @ ts.covariance @ phi.T + model.q
    return Prediction(x, model.g @ x, 0.5 * (p + p.T))


def kf_update(ts: TrackState, pred: Prediction, z, model: KalmanModel) -> TrackState:
    """Measurement update with observation ``z`` (all six fields must be valid).

    Raises
    ------
    SingularInnovation
        If the innovation covariance has condition number above 1e12.
    """
    zv = _vector(z)
    g = model.g
    s = g @ pred.p_pred @ g.T + model.r_cov
    if not np.all(np.isfinite(s)) or np.linalg.cond(s) > 1e12:
        raise SingularInnovation("innovation covariance is ill-conditioned")
    gain = pred.p_pred @ g.T @ np.linalg.inv(s)
    innov = zv - pred.obs_pred
    x = pred.state_pred + gain @ innov
    p = (np.eye(6) - gain @ g) @ pred.p_pred
    p = 0.5 * (p + p.T)
    nis = float(innov @ np.linalg.solve(s, innov))
    return TrackState(x, p, ts.step + 1, "updated", 0, nis)


def kf_coast(ts: TrackState, pred: Prediction) -> TrackState:
    """Prediction-only step for a slot without a usable observation."""
    missed = ts.missed + 1
    status = "dropped" if missed > MAX_COAST else "coasted"
    return TrackState(pred.state_pred.copy(), pred.p_pred.copy(), ts.step + 1, status, missed, None)


def unwrap_angles(observations: list) -> list:
    """Remove 2 pi jumps from the theta and phi sequences of the observations."""
    out = []
    prev = {}
    for z in observations:
        if z is None:
            out.append(None)
            continue
        vals = {}
        for name in ("theta", "phi"):
            v = getattr(z, name)
            if name in prev and np.isfinite(v):
                v = prev[name] + (np.angle(np.exp(1j * (v - prev[name]))))
            if np.isfinite(v):
                prev[name] = v
            vals[name] = v
        if isinstance(z, Observation6D):
            out.append(Observation6D(z.r, vals["theta"], vals["phi"], z.v_r, z.omega_theta, z.omega_phi, z.valid, z.diagnostics))
        else:
            out.append(type(z)(z.r, vals["theta"], vals["phi"], z.v_r, z.omega_theta, z.omega_phi))
    return out


def diverging(history: list[TrackState], window: int = NIS_WINDOW, limit: float = NIS_LIMIT) -> bool:
    """True when the mean normalised innovation over the last ``window`` updates exceeds ``limit``."""
    nis = [h.nis for h in history if h.nis is not None][-window:]
    return len(nis) == window and float(np.mean(nis)) > limit


class TrackStepError(SensingError):
    def __init__(self, step: int, cause: Exception):
        super().__init__(f"tracking failed at step {step}: {cause}")
        self.step = step
        self.cause = cause


def track_sequence(observations: list, model: KalmanModel) -> list[TrackState]:
    """Initialise on the first observation and filter the rest.

    ``None`` or partially invalid observations after the first are coasted
    through; after more than three in a row the track is dropped and the
    sequence ends.
    """
    if not observations:
        raise ValueError("need at least one observation")
    obs = unwrap_angles(list(observations))
    try:
        ts = kf_init(obs[0])
    except SensingError as exc:
        raise TrackStepError(0, exc) from exc
    history = [ts]
    for l, z in enumerate(obs[1:], start=1):
        try:
            pred = kf_predict(ts, model)
            if z is None or (isinstance(z, Observation6D) and not z.fully_valid):
                ts = kf_coast(ts, pred)
            else:
                ts = kf_update(ts, pred, z, model)
        except SensingError as exc:
            raise TrackStepError(l, exc) from exc
        history.append(ts)
        if ts.status == "dropped":
            break
    return history
