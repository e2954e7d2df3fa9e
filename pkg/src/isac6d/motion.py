"""Kinematics of point targets over tracking slots and OFDM symbols.

Velocities follow the sign convention of the target model: a positive radial
velocity decreases ``r`` and positive angular velocities decrease ``theta`` and
``phi``.
"""

from __future__ import annotations

from dataclasses import astuple, dataclass, replace

import numpy as np

from .errors import StateEscaped

STATE_FIELDS = ("r", "theta", "phi", "v_r", "omega_theta", "omega_phi")


@dataclass(frozen=True)
class TargetState6D:
    r: float
    theta: float
    phi: float
    v_r: float = 0.0
    omega_theta: float = 0.0
    omega_phi: float = 0.0

    def as_vector(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_vector(cls, v) -> "TargetState6D":
        return cls(*(float(x) for x in np.asarray(v, dtype=float)))

    def in_service_area(self) -> bool:
        return (
            self.r > 0
            and 0.0 <= self.theta <= np.pi
            and -np.pi / 2 <= self.phi <= np.pi / 2
        )

    @classmethod
    def from_degrees(cls, r, theta_deg, phi_deg, v_r=0.0, omega_theta_dps=0.0, omega_phi_dps=0.0):
        """Build a state from angles in degrees and angular rates in deg/s."""
        return cls(
            float(r),
            np.deg2rad(theta_deg),
            np.deg2rad(phi_deg),
            float(v_r),
            np.deg2rad(omega_theta_dps),
            np.deg2rad(omega_phi_dps),
        )


@dataclass(frozen=True)
class Disturbance3D:
    """Random accelerations over one tracking slot (m/s^2, rad/s^2, rad/s^2)."""

    u_r: float = 0.0
    u_theta: float = 0.0
    u_phi: float = 0.0

    def as_vector(self) -> np.ndarray:
        return np.array([self.u_r, self.u_theta, self.u_phi], dtype=float)


@dataclass(frozen=True)
class FrameTiming:
    """OFDM frame timing for one unit slot (N symbols) and one tracking slot (K unit slots)."""

    delta_f: float
    t_guard: float
    n_symbols: int
    k_targets: int = 1

    @classmethod
    def with_guard_fraction(cls, delta_f: float, n_symbols: int, guard_fraction: float = 0.25, k_targets: int = 1):
        return cls(delta_f, guard_fraction / delta_f, n_symbols, k_targets)

    @property
    def t_sym(self) -> float:
        return 1.0 / self.delta_f

    @property
    def t_s(self) -> float:
        return self.t_sym + self.t_guard

    @property
    def t_uts(self) -> float:
        return self.n_symbols * self.t_s

    @property
    def t_tts(self) -> float:
        return self.k_targets * self.t_uts


def step_long_term(s: TargetState6D, u: Disturbance3D, t_tts: float) -> TargetState6D:
    """Advance a target by one tracking slot of length ``t_tts``.

    Raises
    ------
    StateEscaped
        If the new state has ``r <= 0`` or an angle outside its valid range.
    """
    t = t_tts
    half_t2 = 0.5 * t * t
    out = TargetState6D(
        r=s.r - s.v_r * t - u.u_r * half_t2,
        theta=s.theta - s.omega_theta * t - u.u_theta * half_t2,
        phi=s.phi - s.omega_phi * t - u.u_phi * half_t2,
        v_r=s.v_r - u.u_r * t,
        omega_theta=s.omega_theta - u.u_theta * t,
        omega_phi=s.omega_phi - u.u_phi * t,
    )
    if not out.in_service_area():
        raise StateEscaped(f"target left the service area: {out}")
    return out


def short_term_state(s_long: TargetState6D, n: int, t_s: float) -> TargetState6D:
    """State at OFDM symbol ``n`` of a unit slot; velocities are held constant."""
    dt = n * t_s
    return replace(
        s_long,
        r=s_long.r - s_long.v_r * dt,
        theta=s_long.theta - s_long.omega_theta * dt,
        phi=s_long.phi - s_long.omega_phi * dt,
    )


def short_term_angles(s_long: TargetState6D, n_symbols: int, t_s: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``(theta_n, phi_n)`` for ``n = 0..n_symbols-1``."""
    dt = np.arange(n_symbols) * t_s
    return s_long.theta - s_long.omega_theta * dt, s_long.phi - s_long.omega_phi * dt


def sample_disturbance(rng: np.random.Generator, sigma: Disturbance3D) -> Disturbance3D:
    """Independent zero-mean Gaussian accelerations with per-axis std ``sigma``."""
    std = sigma.as_vector()
    if np.any(std < 0):
        raise ValueError("disturbance standard deviations must be non-negative")
    # keep the stream position independent of which axes are active
    draw = rng.standard_normal(3)
    return Disturbance3D(*(draw * std))
