"""Experiment configuration files (YAML) and the bundled presets.

Angles are given in degrees and angular rates in deg/s in the files; they are
converted to radians on load.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .channel import ClutterConfig, ClutterScatterer
from .motion import Disturbance3D, TargetState6D
from .radar import RadarConfig

PRESETS = ("paper", "desk")


@dataclass(frozen=True)
class TargetSpec:
    state: TargetState6D
    rcs_mean: float = 1.0


@dataclass(frozen=True)
class ChannelOptions:
    rcs_model: str = "swerling1"  # or "deterministic"
    amplitude_law: str = "literal"  # or "sqrt"
    symbols: str = "qpsk"  # or "ones"

    def __post_init__(self):
        if self.rcs_model not in ("swerling1", "deterministic"):
            raise ValueError(f"unknown rcs_model {self.rcs_model!r}")
        if self.amplitude_law not in ("literal", "sqrt"):
            raise ValueError(f"unknown amplitude_law {self.amplitude_law!r}")
        if self.symbols not in ("qpsk", "ones"):
            raise ValueError(f"unknown symbols {self.symbols!r}")


@dataclass(frozen=True)
class SweepConfig:
    snr_db: tuple[float, ...] = (0.0, 10.0, 20.0)
    trials: int = 500
    seed: int = 2024


@dataclass(frozen=True)
class TrackingConfig:
    target: TargetSpec | None = None
    duration: float = 8.0
    updates: int = 40
    snr_db: float | None = 0.0  # None: noiseless observations
    disturbance_std: Disturbance3D = Disturbance3D()
    process_noise: str = "augmented"  # or "literal"
    calibration_trials: int = 20
    measurement_std: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.process_noise not in ("augmented", "literal"):
            raise ValueError(f"unknown process_noise {self.process_noise!r}")
        if self.updates < 1 or self.duration <= 0:
            raise ValueError("tracking needs a positive duration and at least one update")

    @property
    def interval(self) -> float:
        return self.duration / self.updates


@dataclass(frozen=True)
class ExperimentConfig:
    radar: RadarConfig = RadarConfig()
    targets: tuple[TargetSpec, ...] = ()
    clutter: ClutterConfig = ClutterConfig()
    clutter_filter: str = "auto"  # auto | mean | none
    channel: ChannelOptions = ChannelOptions()
    sweep: SweepConfig = SweepConfig()
    tracking: TrackingConfig = TrackingConfig()
    reference: str = "start"
    name: str = "custom"

    def __post_init__(self):
        if self.clutter_filter not in ("auto", "mean", "none"):
            raise ValueError(f"unknown clutter_filter {self.clutter_filter!r}")

    @property
    def filter_mode(self) -> str:
        if self.clutter_filter == "auto":
            return "mean" if self.clutter.enabled else "none"
        return self.clutter_filter


def _target(d: dict) -> TargetSpec:
    state = TargetState6D.from_degrees(
        d["r_m"],
        d.get("theta_deg", 90.0),
        d.get("phi_deg", 0.0),
        d.get("v_r_mps", 0.0),
        d.get("omega_theta_dps", 0.0),
        d.get("omega_phi_dps", 0.0),
    )
    return TargetSpec(state, float(d.get("rcs_mean_m2", 1.0)))


def _radar(d: dict) -> RadarConfig:
    f0 = float(d.get("f0_hz", 100e9))
    delta_f = float(d.get("delta_f_hz", 480e3))
    spacing = d.get("spacing_wavelengths", 0.5) * 3e8 / f0
    return RadarConfig(
        f0=f0,
        delta_f=delta_f,
        n_subcarriers=int(d.get("subcarriers", 128)),
        n_symbols=int(d.get("symbols", 64)),
        tx_shape=tuple(d.get("tx_array", (8, 8))),
        rx_shape=tuple(d.get("rx_array", (16, 16))),
        t_guard=float(d.get("guard_fraction", 0.25)) / delta_f,
        spacing=spacing,
        p_t=float(d.get("tx_power_w", 1.0)),
        power_fraction=float(d.get("power_fraction", 1.0)),
    )


def _clutter(d: dict) -> tuple[ClutterConfig, str]:
    scatterers = tuple(
        ClutterScatterer(
            float(s["r_m"]),
            np.deg2rad(s.get("theta_deg", 90.0)),
            np.deg2rad(s.get("phi_deg", 0.0)),
            float(s.get("rcs_mean_m2", 1.0)),
        )
        for s in d.get("scatterers", []) or []
    )
    cfg = ClutterConfig(d.get("mode", "gaussian"), float(d.get("beta", 0.0)), scatterers)
    return cfg, d.get("filter", "auto")


def _tracking(d: dict) -> TrackingConfig:
    dist = d.get("disturbance_std", {}) or {}
    std = d.get("measurement_std")
    snr = d.get("snr_db", 0.0)
    if std is not None:
        # file units: m, deg, deg, m/s, deg/s, deg/s
        std = tuple(float(v) for v in std)
        std = (std[0], np.deg2rad(std[1]), np.deg2rad(std[2]), std[3], np.deg2rad(std[4]), np.deg2rad(std[5]))
    return TrackingConfig(
        target=_target(d["target"]) if d.get("target") else None,
        duration=float(d.get("duration_s", 8.0)),
        updates=int(d.get("updates", 40)),
        snr_db=None if snr is None else float(snr),
        disturbance_std=Disturbance3D(
            float(dist.get("u_r", 0.0)),
            np.deg2rad(float(dist.get("u_theta_dps2", 0.0))),
            np.deg2rad(float(dist.get("u_phi_dps2", 0.0))),
        ),
        process_noise=d.get("process_noise", "augmented"),
        calibration_trials=int(d.get("calibration_trials", 20)),
        measurement_std=std,
    )


def config_from_dict(d: dict, name: str = "custom") -> ExperimentConfig:
    clutter, filt = _clutter(d.get("clutter", {}) or {})
    sweep = d.get("sweep", {}) or {}
    ch = d.get("channel", {}) or {}
    return ExperimentConfig(
        radar=_radar(d.get("radar", {}) or {}),
        targets=tuple(_target(t) for t in (d.get("scene", {}) or {}).get("targets", [])),
        clutter=clutter,
        clutter_filter=filt,
        channel=ChannelOptions(**ch),
        sweep=SweepConfig(
            tuple(float(v) for v in sweep.get("snr_db", (0.0, 10.0, 20.0))),
            int(sweep.get("trials", 500)),
            int(sweep.get("seed", 2024)),
        ),
        tracking=_tracking(d.get("tracking", {}) or {}),
        reference=(d.get("estimation", {}) or {}).get("reference", "start"),
        name=d.get("name", name),
    )


def preset_dict(name: str) -> dict:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("isac6d.presets").joinpath(f"{name}.preset").read_text()
    return yaml.safe_load(text)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path=None, preset: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Load a config file, optionally layered on top of a named preset.

    A file may also name its base with a top-level ``preset:`` key.
    """
    data: dict = {}
    name = preset or "custom"
    if path is not None:
        data = yaml.safe_load(Path(path).read_text()) or {}
        preset = data.pop("preset", preset)
        name = data.get("name", Path(path).stem)
    base = preset_dict(preset) if preset else {}
    merged = _merge(base, data)
    if overrides:
        merged = _merge(merged, overrides)
    if path is not None:
        merged["name"] = name
    return config_from_dict(merged, name=merged.get("name", name))


def load_preset(name: str, **overrides) -> ExperimentConfig:
    return load_config(preset=name, overrides=overrides or None)
