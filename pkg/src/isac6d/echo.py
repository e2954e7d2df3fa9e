"""Transmit beams, received echo cubes, symbol erasure and clutter filtering.

Cube layout is ``[n_z, n_x, n, m]`` (receive z index, receive x index, OFDM
symbol, subcarrier). A receive vector ``y`` in linear antenna order maps to one
``[:, :, n, m]`` slice through ``y.reshape(nx, nz).T``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import ClutterField, target_channel
from .geometry import SPEED_OF_LIGHT, SpatialDirection, UpaGeometry, axis_steering, steering_vector
from .motion import TargetState6D, short_term_angles
from .radar import RadarConfig

KINDS = ("raw", "eec", "dt_eec")


@dataclass(frozen=True)
class TransmitPlan:
    """Sensing beam of one unit slot: direction, power and the ``N x M`` data symbols."""

    direction: SpatialDirection
    power: float
    symbols: np.ndarray

    def __post_init__(self):
        if self.power < 0:
            raise ValueError("transmit power must be non-negative")
        if not np.allclose(np.abs(self.symbols), 1.0, atol=1e-12):
            raise ValueError("transmit symbols must have unit modulus")


def qpsk_symbols(rng: np.random.Generator, n_symbols: int, n_subcarriers: int) -> np.ndarray:
    """Unit-modulus QPSK symbols ``exp(j (pi/4 + k pi/2))``."""
    k = rng.integers(0, 4, size=(n_symbols, n_subcarriers))
    return np.exp(1j * (np.pi / 4 + k * np.pi / 2))


def make_transmit_vector(plan: TransmitPlan, tx: UpaGeometry) -> np.ndarray:
    """Beamforming vector ``sqrt(power / N_H) a_H(direction)`` (data symbol not applied)."""
    return np.sqrt(plan.power / tx.n_elements) * steering_vector(tx, plan.direction)


@dataclass(frozen=True)
class SceneTarget:
    state: TargetState6D
    alpha: complex


@dataclass
class Scene:
    """Everything random about one unit slot except the receiver noise."""

    targets: list[SceneTarget] = field(default_factory=list)
    clutter: ClutterField | None = None


@dataclass
class EchoCube:
    data: np.ndarray
    kind: str = "raw"
    zero_doppler_removed: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown cube kind {self.kind!r}")
        if self.data.ndim != 4:
            raise ValueError("echo cube must be 4-D [nz, nx, N, M]")

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class NoiseSpec:
    sigma2: float = 0.0

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError("noise variance must be non-negative")

    @classmethod
    def from_snr(cls, snr_db: float, signal_power: float) -> "NoiseSpec":
        """Noise variance giving ``snr_db`` for a signal of mean power ``signal_power``."""
        return cls(signal_power / 10.0 ** (snr_db / 10.0))


def vector_to_slice(y: np.ndarray, rx: UpaGeometry) -> np.ndarray:
    """Linear-order receive vector to its ``[n_z, n_x]`` matrix."""
    return y.reshape(rx.nx, rx.nz).T


def _target_echo(cfg: RadarConfig, target: SceneTarget, beam: SpatialDirection) -> np.ndarray:
    """Noiseless ``H conj(x)`` of one target with unit data symbols, as a cube array."""
    rx, tx = cfg.rx, cfg.tx
    s = target.state
    n = np.arange(cfg.n_symbols)
    theta_n, phi_n = short_term_angles(s, cfg.n_symbols, cfg.t_s)
    psi_n = np.cos(phi_n) * np.cos(theta_n)
    omega_n = np.sin(phi_n)
    k = rx.phase_per_element

    ax_r = axis_steering(rx.nx, k * psi_n)
    az_r = axis_steering(rx.nz, k * omega_n)
    # transmit array factor a_H(n)^T conj(a_H(beam)) factorises over the axes
    gx = axis_steering(tx.nx, k * psi_n) @ np.conj(axis_steering(tx.nx, k * beam.psi))
    gz = axis_steering(tx.nz, k * omega_n) @ np.conj(axis_steering(tx.nz, k * beam.omega))
    gain = np.sqrt(cfg.tx_power / tx.n_elements) * gx * gz
    doppler = np.exp(4j * np.pi * cfg.f0 * s.v_r * n * cfg.t_s / SPEED_OF_LIGHT)
    ranging = np.exp(-4j * np.pi * cfg.subcarrier_frequencies() * s.r / SPEED_OF_LIGHT)

    per_symbol = target.alpha * gain * doppler
    spatial = az_r.T[:, None, :] * ax_r.T[None, :, :]  # [nz, nx, N]
    return (spatial * per_symbol)[..., None] * ranging


def _clutter_echo(cfg: RadarConfig, clutter: ClutterField, weights: np.ndarray) -> np.ndarray:
    rx = cfg.rx
    per_m = clutter.echo(weights)  # (M, N_R)
    slices = per_m.reshape(cfg.n_subcarriers, rx.nx, rx.nz).transpose(2, 1, 0)
    return np.broadcast_to(slices[:, :, None, :], cfg.cube_shape)


def _matrix_route(scene: Scene, cfg: RadarConfig, plan: TransmitPlan) -> np.ndarray:
    """Direct evaluation of ``y = H x*`` per (n, m); slow, kept as a cross-check."""
    rx, tx = cfg.rx, cfg.tx
    w = make_transmit_vector(plan, tx)
    freqs = cfg.subcarrier_frequencies()
    out = np.zeros(cfg.cube_shape, dtype=complex)
    for n in range(cfg.n_symbols):
        for m in range(cfg.n_subcarriers):
            h = np.zeros((rx.n_elements, tx.n_elements), dtype=complex)
            for t in scene.targets:
                h += target_channel(t.state, t.alpha, tx, rx, freqs[m], n, cfg.t_s)
            if scene.clutter is not None:
                h += scene.clutter.matrix(m)
            x = w * plan.symbols[n, m]
            out[:, :, n, m] = vector_to_slice(h @ np.conj(x), rx)
    return out


def generate_echo_cube(
    scene: Scene,
    cfg: RadarConfig,
    plan: TransmitPlan,
    noise: NoiseSpec | None = None,
    rng: np.random.Generator | None = None,
    method: str = "factored",
) -> EchoCube:
    """Received echo cube ``y = H_sensing conj(x) + noise`` for one unit slot.

    Parameters
    ----------
    method : {"factored", "matrix"}
        ``"factored"`` exploits the rank-one structure of each target channel;
        ``"matrix"`` forms every channel matrix explicitly.
    """
    if plan.symbols.shape != (cfg.n_symbols, cfg.n_subcarriers):
        raise ValueError("symbol grid does not match the radar configuration")
    if method == "matrix":
        data = _matrix_route(scene, cfg, plan)
    elif method == "factored":
        data = np.zeros(cfg.cube_shape, dtype=complex)
        for t in scene.targets:
            data += _target_echo(cfg, t, plan.direction)
        if scene.clutter is not None:
            data += _clutter_echo(cfg, scene.clutter, make_transmit_vector(plan, cfg.tx))
        data *= np.conj(plan.symbols)
    else:
        raise ValueError(f"unknown method {method!r}")
    cube = EchoCube(data, "raw")
    if noise is not None and noise.sigma2 > 0:
        if rng is None:
            raise ValueError("a random generator is needed to add noise")
        cube = add_noise(cube, noise.sigma2, rng)
    return cube


def add_noise(cube: EchoCube, sigma2: float, rng: np.random.Generator) -> EchoCube:
    """Add circular complex Gaussian noise of variance ``sigma2`` per sample."""
    shape = cube.data.shape
    scale = np.sqrt(sigma2 / 2.0)
    noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return replace(cube, data=cube.data + scale * noise)


def erase_symbols(cube: EchoCube, plan: TransmitPlan, conjugate: bool = True) -> EchoCube:
    """Remove the data symbols, giving the equivalent echo channel.

    The echo carries ``conj(s)`` because the channel acts on ``conj(x)``, so by
    default the cube is divided by ``conj(s)``. ``conjugate=False`` divides by
    ``s`` instead, which only cancels real-valued symbols.
    """
    if cube.kind != "raw":
        raise ValueError(f"symbol erasure expects a raw cube, got {cube.kind!r}")
    s = np.conj(plan.symbols) if conjugate else plan.symbols
    return EchoCube(cube.data / s, "eec")


def filter_static_clutter(cube: EchoCube, mode: str = "mean") -> EchoCube:
    """Remove the part of the echo that is constant over the symbols of the slot.

    ``mode="mean"`` subtracts, per antenna and subcarrier, the average over the
    ``N`` symbols; ``mode="none"`` relabels the cube without touching it (for
    clutter-free scenes, where the subtraction would only bias the estimates).
    """
    if cube.kind == "dt_eec":
        # already filtered; the projection is idempotent
        if mode == "mean" and not cube.zero_doppler_removed:
            return filter_static_clutter(EchoCube(cube.data, "eec"), mode)
        return cube
    if cube.kind != "eec":
        raise ValueError(f"clutter filtering expects an EEC cube, got {cube.kind!r}")
    if mode == "none":
        return EchoCube(cube.data, "dt_eec", zero_doppler_removed=False)
    if mode != "mean":
        raise ValueError(f"unknown clutter filter {mode!r}")
    if cube.shape[2] < 2:
        raise ValueError("clutter filtering needs at least two symbols")
    data = cube.data - cube.data.mean(axis=2, keepdims=True)
    return EchoCube(data, "dt_eec", zero_doppler_removed=True)


def mean_power(cube: EchoCube) -> float:
    return float(np.mean(np.abs(cube.data) ** 2))


_MAGIC = b"ISACCUBE"
_HEADER = struct.Struct("<5I")


def write_cube(path, cube: EchoCube) -> None:
    """Binary dump: magic, ``<nz, nx, N, M, kind>`` as LE uint32, then LE complex128 data."""
    nz, nx, n, m = cube.shape
    with open(Path(path), "wb") as fh:
        fh.write(_MAGIC)
        fh.write(_HEADER.pack(nz, nx, n, m, KINDS.index(cube.kind)))
        fh.write(np.ascontiguousarray(cube.data, dtype="<c16").tobytes())


def read_cube(path) -> EchoCube:
    raw = Path(path).read_bytes()
    if raw[: len(_MAGIC)] != _MAGIC:
        raise ValueError(f"{path} is not an echo cube dump")
    off = len(_MAGIC)
    nz, nx, n, m, kind = _HEADER.unpack_from(raw, off)
    off += _HEADER.size
    data = np.frombuffer(raw, dtype="<c16", offset=off, count=nz * nx * n * m)
    return EchoCube(data.reshape(nz, nx, n, m).astype(complex), KINDS[kind])
