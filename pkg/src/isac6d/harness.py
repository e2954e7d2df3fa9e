"""Monte-Carlo experiments, RMSE reports, tracking runs and the noiseless self-check.

SNR convention: ``snr_db = 10 log10(P_sig / sigma^2)`` where ``P_sig`` is the
mean squared magnitude of the noiseless, target-only DT-EEC samples of the
trial and ``sigma^2`` the per-sample receiver noise variance.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import draw_clutter, path_loss_alpha
from .config import ExperimentConfig, TargetSpec
from .echo import (
    EchoCube,
    NoiseSpec,
    Scene,
    SceneTarget,
    TransmitPlan,
    add_noise,
    erase_symbols,
    filter_static_clutter,
    generate_echo_cube,
    mean_power,
    qpsk_symbols,
)
from .errors import SensingError, StateEscaped, TargetLost
from .estimation import Observation6D, single_shot_sense
from .geometry import SpatialDirection, direction_to_spatial
from .motion import STATE_FIELDS, TargetState6D, sample_disturbance, step_long_term
from .tracking import (
    KalmanModel,
    diverging,
    kf_coast,
    kf_init,
    kf_predict,
    kf_update,
)

SNR_DEFINITION = (
    "snr_db = 10*log10(P_sig/sigma2); P_sig = mean |noiseless target-only DT-EEC sample|^2 "
    "of the trial, sigma2 = complex noise variance per received sample"
)

# reported parameters: (name, state field, scale to report units)
PARAMETERS = (
    ("r_m", "r", 1.0),
    ("theta_deg", "theta", 180 / np.pi),
    ("phi_deg", "phi", 180 / np.pi),
    ("v_r_mps", "v_r", 1.0),
    ("omega_theta_dps", "omega_theta", 180 / np.pi),
    ("omega_phi_dps", "omega_phi", 180 / np.pi),
)


def compute_rmse(estimates, truth) -> float:
    """Root mean square error of ``estimates`` against a scalar ``truth``."""
    e = np.asarray(estimates, dtype=float)
    if e.size == 0:
        raise ValueError("need at least one estimate")
    return float(np.sqrt(np.mean((e - truth) ** 2)))


# ---------------------------------------------------------------------------
# one unit slot


def _alpha(cfg: ExperimentConfig, spec: TargetSpec, rng) -> complex:
    ch = cfg.channel
    return path_loss_alpha(
        spec.state.r,
        cfg.radar.wavelength,
        spec.rcs_mean,
        rng,
        deterministic=ch.rcs_model == "deterministic",
        amplitude_law=ch.amplitude_law,
    ).alpha


def _symbols(cfg: ExperimentConfig, rng) -> np.ndarray:
    radar = cfg.radar
    if cfg.channel.symbols == "ones":
        return np.ones((radar.n_symbols, radar.n_subcarriers), dtype=complex)
    return qpsk_symbols(rng, radar.n_symbols, radar.n_subcarriers)


@dataclass
class UnitSlot:
    cube: EchoCube
    plan: TransmitPlan
    sigma2: float
    signal_power: float


def synthesize_unit_slot(
    cfg: ExperimentConfig,
    spec: TargetSpec,
    snr_db: float | None,
    rng: np.random.Generator,
    beam: SpatialDirection | None = None,
    others: tuple[TargetSpec, ...] = (),
) -> UnitSlot:
    """Draw one unit slot and return its DT-EEC.

    The beam points at ``beam`` (default: the target's true direction).
    ``snr_db=None`` gives a noiseless cube. Random draws happen in a fixed
    order (RCS, symbols, clutter, noise) so results depend only on ``rng``.
    """
    radar = cfg.radar
    state = spec.state
    if beam is None:
        beam = direction_to_spatial(state.theta, state.phi)
    alpha = _alpha(cfg, spec, rng)
    other_alphas = [_alpha(cfg, o, rng) for o in others]
    plan = TransmitPlan(beam, radar.tx_power, _symbols(cfg, rng))
    clutter = None
    if cfg.clutter.enabled:
        clutter = draw_clutter(cfg.clutter, radar.rx, radar.tx, radar.subcarrier_frequencies(), rng, radar.wavelength)
    mode = cfg.filter_mode

    target_raw = generate_echo_cube(Scene([SceneTarget(state, alpha)]), radar, plan)
    signal = mean_power(filter_static_clutter(erase_symbols(target_raw, plan), mode))
    rest = Scene([SceneTarget(o.state, a) for o, a in zip(others, other_alphas)], clutter)
    raw = target_raw
    if rest.targets or rest.clutter is not None:
        raw = EchoCube(target_raw.data + generate_echo_cube(rest, radar, plan).data, "raw")
    sigma2 = 0.0
    if snr_db is not None:
        sigma2 = NoiseSpec.from_snr(snr_db, signal).sigma2
        raw = add_noise(raw, sigma2, rng)
    dt = filter_static_clutter(erase_symbols(raw, plan), mode)
    return UnitSlot(dt, plan, sigma2, signal)


def _errors(obs: Observation6D, truth: TargetState6D) -> dict:
    out = {}
    for name, fld, scale in PARAMETERS:
        ok = obs.validity()[fld]
        out[name] = (getattr(obs, fld) - getattr(truth, fld)) * scale if ok else None
    return out


# ---------------------------------------------------------------------------
# single-shot Monte Carlo


@dataclass
class RmseReport:
    """RMSE per (SNR, parameter) in report units (m, deg, m/s, deg/s)."""

    snr_db: list[float]
    rmse: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    trials: int = 0
    lost: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    header: dict = field(default_factory=dict)

    def get(self, snr: float, parameter: str) -> float:
        return self.rmse[(float(snr), parameter)]

    def failure_rate(self, snr: float) -> float:
        return self.lost.get(float(snr), 0) / self.trials if self.trials else 0.0

    def rows(self):
        for snr in self.snr_db:
            for name, _, _ in PARAMETERS:
                key = (float(snr), name)
                yield {
                    "snr_db": snr,
                    "parameter": name,
                    "rmse": self.rmse.get(key, float("nan")),
                    "trials": self.counts.get(key, 0),
                    "failures": self.failures.get(key, 0),
                }

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(f"# {SNR_DEFINITION}\n")
            for k, v in self.header.items():
                fh.write(f"# {k}: {v}\n")
            fh.write(f"# wall_clock_s: {self.wall_clock:.3f}\n")
            w = csv.DictWriter(fh, fieldnames=["snr_db", "parameter", "rmse", "trials", "failures"])
            w.writeheader()
            for row in self.rows():
                w.writerow(row)

    def summary(self) -> str:
        lines = [f"# {SNR_DEFINITION}"]
        for snr in self.snr_db:
            parts = [f"{n}={self.rmse.get((float(snr), n), float('nan')):.4g}" for n, _, _ in PARAMETERS]
            lost = self.lost.get(float(snr), 0)
            lines.append(f"SNR {snr:+.1f} dB  " + "  ".join(parts) + f"  lost={lost}/{self.trials}")
        return "\n".join(lines)


def trial_seed(seed: int, snr_index: int, trial: int) -> list[int]:
    return [int(seed), int(snr_index), int(trial)]


def run_trial(cfg: ExperimentConfig, snr_index: int, snr_db: float | None, trial: int) -> dict:
    """One Monte-Carlo trial on the first scene target; returns a JSON-ready record."""
    rng = np.random.default_rng(trial_seed(cfg.sweep.seed, snr_index, trial))
    spec = cfg.targets[0]
    slot = synthesize_unit_slot(cfg, spec, snr_db, rng, others=cfg.targets[1:])
    rec = {"trial": trial, "snr_db": snr_db, "sigma2": slot.sigma2, "signal_power": slot.signal_power}
    try:
        obs = single_shot_sense(slot.cube, cfg.radar, slot.plan.direction, cfg.reference)
    except TargetLost as exc:
        rec.update(status="lost", error=str(exc))
        return rec
    except SensingError as exc:
        rec.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        return rec
    rec.update(status="ok", estimate=obs.to_record(), errors=_errors(obs, spec.state))
    return rec


def _trial_job(args):
    return run_trial(*args)


def _map(jobs, workers: int):
    if workers <= 1:
        return [_trial_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trial_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def run_single_shot_experiment(
    cfg: ExperimentConfig,
    workers: int = 1,
    dump_path=None,
    trials: int | None = None,
    snr_db=None,
) -> RmseReport:
    """SNR sweep of single-shot sensing on the first target of the scene.

    Trials whose pitch, azimuth or distance stage finds only noise are counted
    as lost and excluded from the RMSE; individually invalid fields are
    excluded from that field's RMSE and counted in its ``failures``.
    """
    t0 = time.perf_counter()
    trials = cfg.sweep.trials if trials is None else int(trials)
    snrs = [float(s) for s in (cfg.sweep.snr_db if snr_db is None else snr_db)]
    report = RmseReport(snrs, trials=trials)
    report.header = {
        "config": cfg.name,
        "seed": cfg.sweep.seed,
        "target": {k: float(v) for k, v in zip(STATE_FIELDS, cfg.targets[0].state.as_vector())} if cfg.targets else None,
        "clutter_filter": cfg.filter_mode,
    }
    if trials == 0 or not snrs:
        report.wall_clock = time.perf_counter() - t0
        return report
    if not cfg.targets:
        raise ValueError("the scene has no target")
    dump = open(dump_path, "w") if dump_path else None
    try:
        for i, snr in enumerate(snrs):
            records = _map([(cfg, i, snr, t) for t in range(trials)], workers)
            if dump:
                for rec in records:
                    dump.write(json.dumps(rec) + "\n")
            report.lost[snr] = sum(rec["status"] != "ok" for rec in records)
            for name, _, _ in PARAMETERS:
                errs = [rec["errors"][name] for rec in records if rec["status"] == "ok" and rec["errors"][name] is not None]
                report.counts[(snr, name)] = len(errs)
                report.failures[(snr, name)] = trials - len(errs)
                report.rmse[(snr, name)] = compute_rmse(errs, 0.0) if errs else float("nan")
    finally:
        if dump:
            dump.close()
    report.wall_clock = time.perf_counter() - t0
    return report


# ---------------------------------------------------------------------------
# tracking


@dataclass
class TrackingResult:
    logs: list[dict]
    events: list[dict]
    rmse_single: dict
    rmse_filtered: dict
    rmse_single_last_half: dict
    rmse_filtered_last_half: dict
    diverged: bool
    dropped: bool
    measurement_std: list[float]

    def to_jsonl(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            for rec in self.logs:
                fh.write(json.dumps(rec) + "\n")

    def summary(self) -> str:
        lines = []
        for title, single, filt in (
            ("all steps", self.rmse_single, self.rmse_filtered),
            ("last half", self.rmse_single_last_half, self.rmse_filtered_last_half),
        ):
            lines.append(f"[{title}]")
            for name, _, _ in PARAMETERS:
                lines.append(f"  {name:16s} single={single.get(name, float('nan')):.4g}  filtered={filt.get(name, float('nan')):.4g}")
        lines.append(f"diverged={self.diverged} dropped={self.dropped} events={len(self.events)}")
        return "\n".join(lines)


def _to_report_units(vec) -> dict:
    return {name: float(vec[i] * scale) for i, (name, _, scale) in enumerate(PARAMETERS)}


def calibrate_measurement_std(cfg: ExperimentConfig, spec: TargetSpec, snr_db: float, trials: int, seed: int) -> np.ndarray:
    """Single-shot RMSE per state field (SI units) at the operating SNR."""
    errs = []
    for t in range(trials):
        rng = np.random.default_rng([seed, 10_000, t])
        slot = synthesize_unit_slot(cfg, spec, snr_db, rng)
        try:
            obs = single_shot_sense(slot.cube, cfg.radar, slot.plan.direction, cfg.reference)
        except SensingError:
            continue
        if obs.fully_valid:
            errs.append(obs.as_vector() - spec.state.as_vector())
    if not errs:
        raise TargetLost("no valid calibration observations")
    return np.sqrt(np.mean(np.square(errs), axis=0))


def _beam_direction(x: np.ndarray) -> SpatialDirection:
    theta = float(np.clip(x[1], 0.0, np.pi))
    phi = float(np.clip(x[2], -np.pi / 2, np.pi / 2))
    return direction_to_spatial(theta, phi)


def _wrap_towards(value: float, reference: float) -> float:
    return reference + float(np.angle(np.exp(1j * (value - reference))))


def run_tracking_experiment(cfg: ExperimentConfig, seed: int | None = None) -> TrackingResult:
    """Track one target through ``updates`` tracking slots at the configured SNR.

    The track starts from a single-shot estimate taken with the beam on the
    true direction (standing in for the initial beam scan); afterwards the
    beam follows the predicted direction.
    """
    tc = cfg.tracking
    spec = tc.target or (cfg.targets[0] if cfg.targets else None)
    if spec is None:
        raise ValueError("no tracking target configured")
    seed = cfg.sweep.seed if seed is None else seed
    if tc.measurement_std is not None:
        std = np.asarray(tc.measurement_std, dtype=float)
    else:
        std = calibrate_measurement_std(cfg, spec, tc.snr_db, tc.calibration_trials, seed)
    model = KalmanModel.from_rmse(
        tc.interval, std, tc.disturbance_std.as_vector(), literal=tc.process_noise == "literal"
    )
    rng_motion = np.random.default_rng([seed, 20_000])
    truth = spec.state
    logs, events, history = [], [], []
    single_err, filt_err, steps = [], [], []
    ts = None
    diverged = dropped = False

    for l in range(tc.updates + 1):
        if l > 0:
            u = sample_disturbance(rng_motion, tc.disturbance_std)
            try:
                truth = step_long_term(truth, u, tc.interval)
            except StateEscaped as exc:
                events.append({"step": l, "event": "target_escaped", "detail": str(exc)})
                break
        pred = kf_predict(ts, model) if ts is not None else None
        beam = _beam_direction(pred.state_pred) if pred is not None else None
        rng = np.random.default_rng([seed, 30_000, l])
        slot = synthesize_unit_slot(cfg, replace(spec, state=truth), tc.snr_db, rng, beam=beam)
        obs = None
        try:
            obs = single_shot_sense(slot.cube, cfg.radar, slot.plan.direction, cfg.reference)
        except SensingError as exc:
            events.append({"step": l, "event": "observation_failed", "detail": f"{type(exc).__name__}: {exc}"})
        if obs is not None and pred is not None:
            # keep angles on the branch of the prediction
            obs.theta = _wrap_towards(obs.theta, pred.obs_pred[1]) if np.isfinite(obs.theta) else obs.theta
            obs.phi = _wrap_towards(obs.phi, pred.obs_pred[2]) if np.isfinite(obs.phi) else obs.phi

        if ts is None:
            if obs is None or not obs.fully_valid:
                events.append({"step": l, "event": "init_failed"})
                continue
            ts = kf_init(obs)
        elif obs is None or not obs.fully_valid:
            ts = kf_coast(ts, pred)
            if ts.status == "dropped":
                events.append({"step": l, "event": "track_dropped"})
                dropped = True
        else:
            try:
                ts = kf_update(ts, pred, obs, model)
            except SensingError as exc:
                events.append({"step": l, "event": "update_failed", "detail": str(exc)})
                ts = kf_coast(ts, pred)
        history.append(ts)
        if not diverged and diverging(history):
            diverged = True
            events.append({"step": l, "event": "divergence", "detail": "mean NIS over the last updates above the 0.999 chi-square bound"})

        truth_v = truth.as_vector()
        rec = {
            "step": l,
            "time_s": l * tc.interval,
            "truth": _to_report_units(truth_v),
            "predicted": _to_report_units(pred.state_pred) if pred is not None else None,
            "observed": obs.to_record() if obs is not None else None,
            "filtered": _to_report_units(ts.estimate),
            "covariance_trace": float(np.trace(ts.covariance)),
            "status": ts.status,
            "nis": ts.nis,
        }
        logs.append(rec)
        if obs is not None and obs.fully_valid:
            steps.append(l)
            single_err.append(obs.as_vector() - truth_v)
            filt_err.append(ts.estimate - truth_v)
        if dropped:
            break

    def rmse_of(errs):
        if not errs:
            return {}
        return _to_report_units(np.sqrt(np.mean(np.square(errs), axis=0)))

    half = (tc.updates + 1) // 2
    last = [i for i, s in enumerate(steps) if s >= half]
    return TrackingResult(
        logs,
        events,
        rmse_of(single_err),
        rmse_of(filt_err),
        rmse_of([single_err[i] for i in last]),
        rmse_of([filt_err[i] for i in last]),
        diverged,
        dropped,
        [float(v) for v in std],
    )


# ---------------------------------------------------------------------------
# parameter scaling


SWEEPABLE = {
    "subcarriers": lambda radar, v: replace(radar, n_subcarriers=int(v)),
    "symbols": lambda radar, v: replace(radar, n_symbols=int(v)),
    "rx_side": lambda radar, v: replace(radar, rx_shape=(int(v), int(v))),
}


def scaling_sweep(
    cfg: ExperimentConfig,
    parameter: str,
    values,
    snr_db: float,
    trials: int,
    workers: int = 1,
) -> dict:
    """RMSE at one SNR as one radar dimension varies; returns ``{value: RmseReport}``."""
    if parameter not in SWEEPABLE:
        raise ValueError(f"cannot sweep {parameter!r}; choose from {sorted(SWEEPABLE)}")
    out = {}
    for v in values:
        sub = replace(cfg, radar=SWEEPABLE[parameter](cfg.radar, v))
        out[v] = run_single_shot_experiment(sub, workers=workers, trials=trials, snr_db=[snr_db])
    return out


def count_inversions(sequence) -> int:
    """Number of adjacent increases in a sequence that should be nonincreasing."""
    seq = np.asarray(sequence, dtype=float)
    return int(np.count_nonzero(np.diff(seq) > 0))
