"""Frequency-domain echo channels of moving targets and static clutter.

Steering and Doppler phases are evaluated at the lowest carrier ``f0``; only the
distance phase uses the subcarrier frequency ``f_m`` (narrowband model, no beam
squint).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    SPEED_OF_LIGHT,
    UpaGeometry,
    direction_to_spatial,
    steering_vector,
)
from .motion import TargetState6D, short_term_state


@dataclass(frozen=True)
class FadingAmplitude:
    """Complex channel fading factor and the RCS draw it came from."""

    alpha: complex
    sigma: float = 0.0


def path_loss_magnitude(r: float, wavelength: float) -> float:
    """``sqrt(lambda^2 / ((4 pi)^3 r^4))``, the two-way free-space amplitude factor."""
    if r <= 0:
        raise ValueError(f"distance must be positive, got {r}")
    return float(np.sqrt(wavelength**2 / ((4 * np.pi) ** 3 * r**4)))


def path_loss_alpha(
    r: float,
    wavelength: float,
    rcs_mean: float,
    rng: np.random.Generator | None = None,
    deterministic: bool = False,
    amplitude_law: str = "literal",
) -> FadingAmplitude:
    """Draw the fading factor of one target for one unit slot.

    Parameters
    ----------
    r : float
        Distance at the start of the slot, meters.
    wavelength : float
        Carrier wavelength, meters.
    rcs_mean : float
        Mean radar cross section. Under Swerling I the RCS is exponential with
        this mean; in deterministic mode it is used as is and the phase is 0.
    rng : numpy.random.Generator, optional
        Required unless ``deterministic``.
    amplitude_law : {"literal", "sqrt"}
        ``"literal"`` multiplies the path-loss factor by sigma, ``"sqrt"`` by
        sqrt(sigma) (amplitude proportional to the square root of the RCS).
    """
    if rcs_mean < 0:
        raise ValueError("mean RCS must be non-negative")
    if deterministic:
        sigma, phase = float(rcs_mean), 0.0
    else:
        if rng is None:
            raise ValueError("a random generator is needed for Swerling draws")
        sigma = float(rng.exponential(rcs_mean)) if rcs_mean > 0 else 0.0
        phase = float(rng.uniform(0.0, 2 * np.pi))
    if amplitude_law == "literal":
        scale = sigma
    elif amplitude_law == "sqrt":
        scale = np.sqrt(sigma)
    else:
        raise ValueError(f"unknown amplitude law {amplitude_law!r}")
    return FadingAmplitude(path_loss_magnitude(r, wavelength) * scale * np.exp(1j * phase), sigma)


def target_channel(
    s_long: TargetState6D,
    alpha: complex,
    tx: UpaGeometry,
    rx: UpaGeometry,
    f_m: float,
    n: int = 0,
    t_s: float = 0.0,
) -> np.ndarray:
    """Echo channel matrix ``H`` (``N_R x N_H``) of one target at symbol ``n``.

    The distance phase uses the slot-start distance ``s_long.r`` at ``f_m``,
    the Doppler phase advances with ``n * t_s`` at ``tx.f0``, and both steering
    vectors use the short-term direction at symbol ``n``.
    """
    f0 = tx.f0
    s_n = short_term_state(s_long, n, t_s)
    direction = direction_to_spatial(s_n.theta, s_n.phi)
    scalar = (
        complex(alpha)
        * np.exp(-4j * np.pi * f_m * s_long.r / SPEED_OF_LIGHT)
        * np.exp(4j * np.pi * f0 * s_long.v_r * n * t_s / SPEED_OF_LIGHT)
    )
    return scalar * np.outer(steering_vector(rx, direction), steering_vector(tx, direction))


@dataclass(frozen=True)
class ClutterScatterer:
    """A static scattering unit; ``beta`` overrides the path-loss fading factor."""

    r: float
    theta: float
    phi: float
    rcs_mean: float = 1.0
    beta: complex | None = None


@dataclass(frozen=True)
class ClutterConfig:
    mode: str = "gaussian"
    beta: float = 0.0
    scatterers: tuple[ClutterScatterer, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.mode not in ("gaussian", "explicit"):
            raise ValueError(f"unknown clutter mode {self.mode!r}")
        if self.beta < 0:
            raise ValueError("clutter power factor must be non-negative")

    @property
    def enabled(self) -> bool:
        if self.mode == "gaussian":
            return self.beta > 0
        return len(self.scatterers) > 0


@dataclass
class ClutterField:
    """One unit slot's clutter realization; identical for every symbol.

    Gaussian mode stores one ``N_R x N_H`` matrix per subcarrier. Explicit mode
    stores the per-scatterer fading factors and directions and rebuilds the
    matrix on demand.
    """

    mode: str
    freqs: np.ndarray
    gaussian: np.ndarray | None = None
    betas: np.ndarray | None = None
    scatterers: tuple[ClutterScatterer, ...] = ()
    rx: UpaGeometry | None = None
    tx: UpaGeometry | None = None

    def matrix(self, m: int) -> np.ndarray:
        if self.mode == "gaussian":
            return self.gaussian[m]
        h = np.zeros((self.rx.n_elements, self.tx.n_elements), dtype=complex)
        for beta, sc in zip(self.betas, self.scatterers):
            direction = direction_to_spatial(sc.theta, sc.phi)
            h += (
                beta
                * np.exp(-4j * np.pi * self.freqs[m] * sc.r / SPEED_OF_LIGHT)
                * np.outer(steering_vector(self.rx, direction), steering_vector(self.tx, direction))
            )
        return h

    def echo(self, weights: np.ndarray) -> np.ndarray:
        """Clutter echo ``H_m conj(w)`` for every subcarrier, shape ``(M, N_R)``.

        ``weights`` is the transmit vector without its per-symbol data factor.
        """
        wc = np.conj(weights)
        if self.mode == "gaussian":
            return self.gaussian @ wc
        out = np.zeros((len(self.freqs), self.rx.n_elements), dtype=complex)
        for beta, sc in zip(self.betas, self.scatterers):
            direction = direction_to_spatial(sc.theta, sc.phi)
            gain = steering_vector(self.tx, direction) @ wc
            rng_phase = np.exp(-4j * np.pi * self.freqs * sc.r / SPEED_OF_LIGHT)
            out += beta * gain * np.outer(rng_phase, steering_vector(self.rx, direction))
        return out


def draw_clutter(
    cfg: ClutterConfig,
    rx: UpaGeometry,
    tx: UpaGeometry,
    freqs: np.ndarray,
    rng: np.random.Generator,
    wavelength: float | None = None,
    deterministic: bool = False,
) -> ClutterField:
    """Draw the clutter of one unit slot for all subcarriers in ``freqs``.

    Gaussian mode draws an independent standard complex Gaussian matrix per
    subcarrier and scales it by ``cfg.beta``.
    """
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    if cfg.mode == "gaussian":
        shape = (len(freqs), rx.n_elements, tx.n_elements)
        if cfg.beta == 0:
            g = np.zeros(shape, dtype=complex)
        else:
            g = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
            g *= cfg.beta
        return ClutterField("gaussian", freqs, gaussian=g)
    wavelength = SPEED_OF_LIGHT / tx.f0 if wavelength is None else wavelength
    betas = []
    for sc in cfg.scatterers:
        if sc.beta is not None:
            betas.append(complex(sc.beta))
        else:
            betas.append(path_loss_alpha(sc.r, wavelength, sc.rcs_mean, rng, deterministic).alpha)
    return ClutterField(
        "explicit", freqs, betas=np.array(betas, dtype=complex), scatterers=tuple(cfg.scatterers), rx=rx, tx=tx
    )


def clutter_channel(
    cfg: ClutterConfig,
    m: int,
    rx: UpaGeometry,
    tx: UpaGeometry,
    rng: np.random.Generator,
    delta_f: float = 0.0,
) -> np.ndarray:
    """Clutter matrix on subcarrier ``m`` for a fresh unit-slot draw.

    Every symbol of the slot sees this same matrix; use :func:`draw_clutter` to
    hold one realization for a whole cube.
    """
    freq = np.array([tx.f0 + m * delta_f])
    return draw_clutter(cfg, rx, tx, freq, rng).matrix(0)


def sensing_channel(target_matrices, clutter: np.ndarray | None = None, shape=None) -> np.ndarray:
    """Sum of per-target channel matrices plus the clutter matrix."""
    mats = list(target_matrices)
    if clutter is not None:
        mats.append(np.asarray(clutter))
    if not mats:
        if shape is None:
            raise ValueError("shape is required when there is nothing to sum")
        return np.zeros(shape, dtype=complex)
    out = np.zeros_like(mats[0], dtype=complex)
    for h in mats:
        out = out + h
    return out
