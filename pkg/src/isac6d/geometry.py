"""Coordinates, spatial-domain directions and UPA steering vectors.

Angles are radians throughout. Antennas of a uniform planar array (UPA) on the
y = 0 plane are addressed either by ``(n_x, n_z)`` or by the linear index
``n = n_x * nz + n_z``, which is the ordering of ``kron(a_x, a_z)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDirection, OutOfRange

SPEED_OF_LIGHT = 3e8
"Propagation speed used by every phase model, m/s."

EPS_CLIP = 1e-9
"Tolerance band for arcsin/arccos arguments that noise pushed past +/-1."


@dataclass(frozen=True)
class SphericalCoord:
    r: float
    theta: float
    phi: float

    def __post_init__(self):
        if self.r < 0:
            raise ValueError(f"distance must be non-negative, got {self.r}")
        if not 0.0 <= self.theta <= np.pi:
            raise ValueError(f"azimuth {self.theta} outside [0, pi]")
        if not -np.pi / 2 <= self.phi <= np.pi / 2:
            raise ValueError(f"pitch {self.phi} outside [-pi/2, pi/2]")


@dataclass(frozen=True)
class CartesianCoord:
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class SpatialDirection:
    """Spatial-domain direction ``psi = cos(phi) cos(theta)``, ``omega = sin(phi)``."""

    psi: float
    omega: float


@dataclass(frozen=True)
class UpaGeometry:
    """Uniform planar array of ``nx * nz`` elements with spacing ``d``.

    ``f0`` is the frequency at which the steering phases are evaluated (the
    lowest subcarrier; beam squint across the band is not modelled).
    """

    nx: int
    nz: int
    d: float
    f0: float

    def __post_init__(self):
        if self.nx < 1 or self.nz < 1:
            raise ValueError("array needs at least one element per axis")
        if self.d > SPEED_OF_LIGHT / (2 * self.f0) * (1 + 1e-12):
            raise ValueError("element spacing exceeds half a wavelength")

    @property
    def n_elements(self) -> int:
        return self.nx * self.nz

    @property
    def phase_per_element(self) -> float:
        """Phase increment per unit of psi (or omega) per element, ``2 pi f0 d / c``."""
        return 2 * np.pi * self.f0 * self.d / SPEED_OF_LIGHT


def spherical_to_cartesian(p: SphericalCoord) -> CartesianCoord:
    cp = np.cos(p.phi)
    return CartesianCoord(
        p.r * cp * np.cos(p.theta), p.r * cp * np.sin(p.theta), p.r * np.sin(p.phi)
    )


def cartesian_to_spherical(c: CartesianCoord) -> SphericalCoord:
    r = float(np.sqrt(c.x**2 + c.y**2 + c.z**2))
    if r == 0.0:
        return SphericalCoord(0.0, np.pi / 2, 0.0)
    # atan2 stays well conditioned near the poles, unlike arcsin(z / r)
    phi = float(np.arctan2(c.z, np.hypot(c.x, c.y)))
    if c.y < -1e-12 * r:
        raise ValueError("point lies behind the array plane (y < 0)")
    theta = float(np.arctan2(max(c.y, 0.0), c.x))
    return SphericalCoord(r, theta, phi)


def direction_to_spatial(theta: float, phi: float) -> SpatialDirection:
    return SpatialDirection(float(np.cos(phi) * np.cos(theta)), float(np.sin(phi)))


def _clip_unit(value: float, what: str) -> float:
    if abs(value) > 1 + EPS_CLIP:
        raise OutOfRange(f"{what} = {value!r} outside [-1, 1]")
    return float(np.clip(value, -1.0, 1.0))


def spatial_to_direction(direction: SpatialDirection) -> tuple[float, float]:
    """Invert :func:`direction_to_spatial`.

    Returns
    -------
    theta, phi : float
        Azimuth in ``[0, pi]`` and pitch in ``[-pi/2, pi/2]``.

    Raises
    ------
    DegenerateDirection
        When ``|omega| = 1``; the azimuth is undefined at the poles.
    OutOfRange
        When ``|omega|`` or ``|psi / cos(phi)|`` exceeds one by more than
        :data:`EPS_CLIP`. Values inside the band are clipped.
    """
    omega = _clip_unit(direction.omega, "omega")
    phi = float(np.arcsin(omega))
    cos_phi = np.sqrt(1.0 - omega**2)
    if cos_phi <= EPS_CLIP:
        raise DegenerateDirection("pitch at +/-90 deg leaves azimuth undefined")
    theta = float(np.arccos(_clip_unit(direction.psi / cos_phi, "psi/cos(phi)")))
    return theta, phi


def axis_steering(n: int, phase_step: float | np.ndarray) -> np.ndarray:
    """``[1, e^{j s}, ..., e^{j s (n-1)}]`` for scalar or array ``phase_step``.

    An array of steps yields one vector per step along the last axis.
    """
    step = np.asarray(phase_step, dtype=float)
    return np.exp(1j * step[..., None] * np.arange(n))


def steering_factors(geom: UpaGeometry, direction: SpatialDirection) -> tuple[np.ndarray, np.ndarray]:
    """The x-axis factor ``a^x(psi)`` and z-axis factor ``a^z(omega)``."""
    k = geom.phase_per_element
    return axis_steering(geom.nx, k * direction.psi), axis_steering(geom.nz, k * direction.omega)


def steering_vector(geom: UpaGeometry, direction: SpatialDirection) -> np.ndarray:
    """UPA steering vector ``a^x(psi) kron a^z(omega)`` of length ``nx * nz``."""
    ax, az = steering_factors(geom, direction)
    return np.kron(ax, az)


def element_positions(geom: UpaGeometry) -> np.ndarray:
    """Cartesian element positions, shape ``(nx * nz, 3)``, in linear-index order."""
    nx, nz = np.meshgrid(np.arange(geom.nx), np.arange(geom.nz), indexing="ij")
    pos = np.zeros((geom.n_elements, 3))
    pos[:, 0] = geom.d * nx.ravel()
    pos[:, 2] = geom.d * nz.ravel()
    return pos
