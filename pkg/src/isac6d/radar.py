"""Carrier, OFDM and array parameters of the monostatic base station."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SPEED_OF_LIGHT, UpaGeometry
from .motion import FrameTiming


@dataclass(frozen=True)
class RadarConfig:
    """Radar parameters; array shapes are ``(nx, nz)``.

    ``t_guard`` defaults to a quarter of the useful symbol time, so
    ``t_s = 1.25 / delta_f``. ``spacing`` defaults to half a wavelength at ``f0``.
    """

    f0: float = 100e9
    delta_f: float = 480e3
    n_subcarriers: int = 128
    n_symbols: int = 64
    tx_shape: tuple[int, int] = (8, 8)
    rx_shape: tuple[int, int] = (16, 16)
    t_guard: float | None = None
    spacing: float | None = None
    p_t: float = 1.0
    power_fraction: float = 1.0

    def __post_init__(self):
        if self.n_subcarriers < 1 or self.n_symbols < 1:
            raise ValueError("need at least one subcarrier and one symbol")
        if self.t_guard is None:
            object.__setattr__(self, "t_guard", 0.25 / self.delta_f)
        if self.spacing is None:
            object.__setattr__(self, "spacing", self.wavelength / 2)
        object.__setattr__(self, "tx_shape", tuple(int(v) for v in self.tx_shape))
        object.__setattr__(self, "rx_shape", tuple(int(v) for v in self.rx_shape))
        # building the geometries validates spacing against the carrier
        _ = (self.tx, self.rx)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f0

    @property
    def tx(self) -> UpaGeometry:
        return UpaGeometry(self.tx_shape[0], self.tx_shape[1], self.spacing, self.f0)

    @property
    def rx(self) -> UpaGeometry:
        return UpaGeometry(self.rx_shape[0], self.rx_shape[1], self.spacing, self.f0)

    @property
    def timing(self) -> FrameTiming:
        return FrameTiming(self.delta_f, self.t_guard, self.n_symbols)

    @property
    def t_s(self) -> float:
        return 1.0 / self.delta_f + self.t_guard

    @property
    def tx_power(self) -> float:
        """Power assigned to the sensing beam, ``rho * P_t``."""
        return self.power_fraction * self.p_t

    @property
    def cube_shape(self) -> tuple[int, int, int, int]:
        """``(nz, nx, N, M)`` of the receive echo cube."""
        return (self.rx_shape[1], self.rx_shape[0], self.n_symbols, self.n_subcarriers)

    def subcarrier_frequencies(self) -> np.ndarray:
        return self.f0 + self.delta_f * np.arange(self.n_subcarriers)

    @property
    def max_unambiguous_range(self) -> float:
        return SPEED_OF_LIGHT / (4 * self.delta_f)

    @property
    def max_unambiguous_velocity(self) -> float:
        """Largest |virtual velocity| whose Doppler phase per symbol stays below pi."""
        return SPEED_OF_LIGHT / (4 * self.f0 * self.t_s)
