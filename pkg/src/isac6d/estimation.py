"""Single-frame estimation of the six motion parameters from a DT-EEC cube.

Four one-dimensional subspace problems are solved with TLS-ESPRIT: the pitch
from the receive z axis, the azimuth from the x axis, the distance from the
subcarrier axis, and one virtual velocity per receive antenna from the symbol
axis. A least-squares plane through the virtual velocities yields the radial
and angular velocities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .echo import EchoCube
from .errors import (
    AllNoise,
    AmbiguousRange,
    DegenerateDirection,
    OutOfRange,
    RankDeficient,
    SensingError,
    SingularBlock,
    TargetLost,
    TooManyInvalidCells,
)
from .geometry import EPS_CLIP, SPEED_OF_LIGHT, SpatialDirection
from .motion import STATE_FIELDS, TargetState6D
from .radar import RadarConfig

SINGULAR_COND = 1e12
MAX_INVALID_FRACTION = 0.10
# fraction of the unambiguous window treated as "near the wrap"
RANGE_GUARD = 0.98
VELOCITY_GUARD = 0.9
DEGENERATE_SIN = 1e-6


@dataclass(frozen=True)
class SpaceValueSet:
    """ESPRIT phases ``kappa`` (radians, in (-pi, pi]) and the order they were extracted at.

    ``detected_order`` is the MDL estimate when detection ran, otherwise the
    forced order.
    """

    order: int
    kappas: tuple[float, ...]
    detected_order: int | None = None


@dataclass(frozen=True)
class VelocityPlane:
    a: float
    b: float
    c: float
    residual_rms: float = 0.0
    n_cells: int = 0

    def evaluate(self, nx, nz):
        return self.a + self.b * np.asarray(nx) + self.c * np.asarray(nz)


@dataclass
class Observation6D:
    """Single-shot estimate with one validity flag per field (order of ``STATE_FIELDS``)."""

    r: float
    theta: float
    phi: float
    v_r: float
    omega_theta: float
    omega_phi: float
    valid: tuple[bool, ...] = (True,) * 6
    diagnostics: dict = field(default_factory=dict)

    @property
    def fully_valid(self) -> bool:
        return all(self.valid)

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in STATE_FIELDS], dtype=float)

    def as_state(self) -> TargetState6D:
        return TargetState6D.from_vector(self.as_vector())

    def validity(self) -> dict:
        return dict(zip(STATE_FIELDS, self.valid))

    def to_record(self) -> dict:
        """JSON-friendly record; angles in degrees, angular rates in deg/s."""
        rec = {
            "r": self.r,
            "theta_deg": float(np.rad2deg(self.theta)),
            "phi_deg": float(np.rad2deg(self.phi)),
            "v_r": self.v_r,
            "omega_theta_dps": float(np.rad2deg(self.omega_theta)),
            "omega_phi_dps": float(np.rad2deg(self.omega_phi)),
            "valid": self.validity(),
        }
        return {k: (None if isinstance(v, float) and not np.isfinite(v) else v) for k, v in rec.items()}

    @classmethod
    def from_state(cls, s: TargetState6D) -> "Observation6D":
        return cls(*s.as_vector())


# ---------------------------------------------------------------------------
# model order and ESPRIT


def _floor_eigenvalues(eigenvalues: np.ndarray) -> np.ndarray:
    lam = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    top = lam[0] if lam.size else 0.0
    # numerical rank: anything this small relative to the top is round-off
    tol = max(top * lam.size * 100 * np.finfo(float).eps, np.finfo(float).tiny)
    return np.maximum(lam, tol)


def mdl_scores(eigenvalues, n_snapshots: int, max_order: int | None = None) -> np.ndarray:
    """Wax-Kailath MDL score for every candidate order ``k = 0..max_order``."""
    lam = _floor_eigenvalues(eigenvalues)
    p = lam.size
    if max_order is None:
        max_order = max(p - 2, 1)
    max_order = min(max_order, p - 1)
    n = float(n_snapshots)
    log_lam = np.log(lam)
    scores = np.empty(max_order + 1)
    for k in range(max_order + 1):
        tail = lam[k:]
        log_geo = log_lam[k:].mean()
        log_ari = np.log(tail.mean())
        scores[k] = -n * (p - k) * (log_geo - log_ari) + 0.5 * k * (2 * p - k) * np.log(n)
    return scores


def mdl_order(eigenvalues, n_snapshots: int, max_order: int | None = None) -> int:
    """Number of signal components by minimum description length.

    Raises
    ------
    AllNoise
        If the minimum is at ``k = 0``.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size < 2:
        raise ValueError("need at least two eigenvalues")
    if np.any(np.diff(lam) > 1e-12 * max(abs(lam[0]), 1.0)):
        raise ValueError("eigenvalues must be sorted in descending order")
    if n_snapshots < 1:
        raise ValueError("need at least one snapshot")
    k = int(np.argmin(mdl_scores(lam, n_snapshots, max_order)))
    if k == 0:
        raise AllNoise("no signal component above the noise floor")
    return k


def sample_covariance(y: np.ndarray) -> np.ndarray:
    return (y @ y.conj().T) / y.shape[1]


def _tls_rotation(us: np.ndarray) -> np.ndarray:
    """Rotation operator ``-U_a U_b^{-1}`` from a ``p x K`` signal subspace."""
    k = us.shape[1]
    u1 = np.hstack([us[:-1], us[1:]])
    _, vecs = np.linalg.eigh(u1.conj().T @ u1)
    vecs = vecs[:, ::-1]
    ua, ub = vecs[:k, k:], vecs[k:, k:]
    if not np.all(np.isfinite(ub)) or np.linalg.cond(ub) > SINGULAR_COND:
        raise SingularBlock("ESPRIT block U_b is numerically singular")
    return -ua @ np.linalg.inv(ub)


def esprit_from_subspace(us: np.ndarray) -> tuple[float, ...]:
    """Space values of a ``p x K`` signal subspace, sorted by eigenvalue modulus."""
    lam = np.linalg.eigvals(_tls_rotation(us))
    lam = lam[np.argsort(-np.abs(lam), kind="stable")]
    return tuple(float(np.angle(v)) for v in lam)


def esprit_space_values(y: np.ndarray, forced_order: int | None = None, max_order: int | None = None) -> SpaceValueSet:
    """TLS-ESPRIT phases of the ``p x q`` snapshot matrix ``y``.

    Parameters
    ----------
    y : ndarray, shape (p, q)
        Snapshots in columns; row ``i`` is array element ``i``.
    forced_order : int, optional
        Skip MDL and use this many signal components.
    max_order : int, optional
        Largest order MDL may select (default ``p - 2``).

    Returns
    -------
    SpaceValueSet
        Phases ``kappa_i = angle(lambda_i)`` of the rotation eigenvalues,
        ordered by decreasing modulus.

    Raises
    ------
    AllNoise
        MDL found no signal.
    SingularBlock
        The eigenvector block to invert has condition number above 1e12.
    """
    y = np.asarray(y)
    p, q = y.shape
    if p < 2:
        raise ValueError("ESPRIT needs at least two array elements")
    if forced_order is not None and not 1 <= forced_order <= p - 1:
        raise ValueError(f"forced order must lie in [1, {p - 1}]")
    lam, vecs = np.linalg.eigh(sample_covariance(y))
    lam, vecs = lam[::-1], vecs[:, ::-1]
    if forced_order is None:
        order = mdl_order(lam, q, max_order)
        detected = order
    else:
        order = detected = forced_order
    return SpaceValueSet(order, esprit_from_subspace(vecs[:, :order]), detected)


def _principal_kappa(y: np.ndarray) -> tuple[float, int]:
    """Detect with MDL, then extract the dominant component at order one.

    The sensing beam isolates one target per unit slot, so the dominant phase
    is the target's; MDL guards against noise-only frames.
    """
    lam, vecs = np.linalg.eigh(sample_covariance(y))
    lam, vecs = lam[::-1], vecs[:, ::-1]
    detected = mdl_order(lam, y.shape[1])
    return esprit_from_subspace(vecs[:, :1])[0], detected


# ---------------------------------------------------------------------------
# snapshot layouts


def omega_matrix(cube: EchoCube) -> np.ndarray:
    """``N_R^z x (N_R^x N M)``: rows are receive z indices."""
    return cube.data.reshape(cube.shape[0], -1)


def psi_matrix(cube: EchoCube) -> np.ndarray:
    """``N_R^x x (N_R^z N M)``: rows are receive x indices."""
    return np.moveaxis(cube.data, 1, 0).reshape(cube.shape[1], -1)


def range_matrix(cube: EchoCube) -> np.ndarray:
    """``M x (N_R^z N_R^x N)``: rows are subcarriers."""
    return cube.data.reshape(-1, cube.shape[3]).T


def velocity_matrices(cube: EchoCube) -> np.ndarray:
    """Per-antenna ``N x M`` blocks, shape ``(nz, nx, N, M)`` (a view of the cube)."""
    return cube.data


def _require_dt_eec(cube: EchoCube):
    if cube.kind != "dt_eec":
        raise ValueError(f"estimation expects a DT-EEC cube, got {cube.kind!r}")


# ---------------------------------------------------------------------------
# angles and distance


def kappa_to_spatial(kappa: float, cfg: RadarConfig) -> float:
    return kappa * SPEED_OF_LIGHT / (2 * np.pi * cfg.f0 * cfg.spacing)


def _unit_checked(value: float, what: str) -> float:
    if abs(value) > 1 + EPS_CLIP:
        raise OutOfRange(f"{what} = {value!r} outside [-1, 1]")
    return float(np.clip(value, -1.0, 1.0))


def estimate_pitch(cube: EchoCube, cfg: RadarConfig) -> tuple[float, float]:
    """Pitch ``phi`` from the z-axis space value; returns ``(phi, kappa)``."""
    _require_dt_eec(cube)
    kappa, _ = _principal_kappa(omega_matrix(cube))
    omega = _unit_checked(kappa_to_spatial(kappa, cfg), "Omega")
    return float(np.arcsin(omega)), kappa


def azimuth_from_psi(psi: float, phi: float) -> float:
    cos_phi = np.cos(phi)
    if cos_phi <= EPS_CLIP:
        raise DegenerateDirection("cos(phi) ~ 0 leaves azimuth undefined")
    return float(np.arccos(_unit_checked(psi / cos_phi, "Psi/cos(phi)")))


def estimate_azimuth(cube: EchoCube, phi_hat: float, cfg: RadarConfig) -> tuple[float, float]:
    """Azimuth ``theta`` from the x-axis space value and the pitch estimate."""
    _require_dt_eec(cube)
    kappa, _ = _principal_kappa(psi_matrix(cube))
    psi = kappa_to_spatial(kappa, cfg)
    return azimuth_from_psi(psi, phi_hat), kappa


def distance_from_kappa(kappa: float, cfg: RadarConfig) -> float:
    """``r = -c kappa / (4 pi delta_f)``, raising when the phase has wrapped."""
    r = -SPEED_OF_LIGHT * kappa / (4 * np.pi * cfg.delta_f)
    if r < 0 or r > RANGE_GUARD * cfg.max_unambiguous_range:
        raise AmbiguousRange(
            f"distance phase {kappa:.4f} rad maps to {r:.3f} m, outside "
            f"[0, {RANGE_GUARD * cfg.max_unambiguous_range:.2f}) m"
        )
    return float(r)


def estimate_distance(cube: EchoCube, cfg: RadarConfig) -> tuple[float, float]:
    """Distance from the subcarrier-axis space value; returns ``(r, kappa)``."""
    _require_dt_eec(cube)
    kappa, _ = _principal_kappa(range_matrix(cube))
    return distance_from_kappa(kappa, cfg), kappa


# ---------------------------------------------------------------------------
# virtual velocities


@dataclass
class VirtualVelocityGrid:
    """Per-antenna virtual velocities, shape ``(nz, nx)``; invalid cells are NaN."""

    v: np.ndarray
    kappa: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.v)


def _batched_order1_kappa(blocks: np.ndarray, with_dc: bool) -> np.ndarray:
    """Order-one TLS-ESPRIT over a stack of ``N x M`` snapshot blocks.

    With ``with_dc`` the signal subspace is augmented by the constant vector,
    which is what a per-row mean removal leaves behind next to the Doppler
    steering vector; of the two resulting roots the one further from 1 is kept.
    """
    nb, n, m = blocks.shape
    cov = blocks @ np.conj(np.swapaxes(blocks, 1, 2)) / m
    _, vecs = np.linalg.eigh(cov)
    u = vecs[:, :, -1]
    out = np.full(nb, np.nan)
    if not with_dc:
        u1 = np.stack([u[:, :-1], u[:, 1:]], axis=2)
        small = np.conj(np.swapaxes(u1, 1, 2)) @ u1
        _, w = np.linalg.eigh(small)
        ua, ub = w[:, 0, 0], w[:, 1, 0]  # column of the smallest eigenvalue
        ok = np.abs(ub) > 1.0 / SINGULAR_COND
        out[ok] = np.angle(-ua[ok] / ub[ok])
        return out
    ones = np.full(n, 1.0 / np.sqrt(n))
    for i in range(nb):
        basis = np.column_stack([u[i], ones])
        q_mat, _ = np.linalg.qr(basis)
        try:
            kap = esprit_from_subspace(q_mat)
        except SingularBlock:
            continue
        roots = np.exp(1j * np.array(kap))
        out[i] = kap[int(np.argmax(np.abs(roots - 1.0)))]
    return out


def estimate_virtual_velocities(cube: EchoCube, cfg: RadarConfig) -> VirtualVelocityGrid:
    """One virtual velocity per receive antenna from its symbol-axis phase.

    Raises
    ------
    TooManyInvalidCells
        More than 10% of the antennas produced no usable estimate.
    """
    _require_dt_eec(cube)
    nz, nx, n, m = cube.shape
    if n < 2:
        raise ValueError("virtual velocities need at least two symbols")
    blocks = velocity_matrices(cube).reshape(nz * nx, n, m)
    kappa = _batched_order1_kappa(blocks, cube.zero_doppler_removed).reshape(nz, nx)
    kappa[~np.isfinite(kappa)] = np.nan
    v = SPEED_OF_LIGHT * kappa / (4 * np.pi * cfg.f0 * cfg.t_s)
    invalid = np.count_nonzero(~np.isfinite(v))
    if invalid > MAX_INVALID_FRACTION * v.size:
        raise TooManyInvalidCells(f"{invalid} of {v.size} antennas gave no virtual velocity")
    return VirtualVelocityGrid(v, kappa)


def fit_velocity_plane(grid) -> VelocityPlane:
    """Least-squares plane ``v = A + B n_x + C n_z`` through the valid cells.

    ``grid`` is an ``(nz, nx)`` array (NaN marks invalid cells) or a
    :class:`VirtualVelocityGrid`.
    """
    v = grid.v if isinstance(grid, VirtualVelocityGrid) else np.asarray(grid, dtype=float)
    nz_idx, nx_idx = np.indices(v.shape)
    ok = np.isfinite(v)
    design = np.column_stack([np.ones(ok.sum()), nx_idx[ok], nz_idx[ok]])
    if design.shape[0] < 3 or np.linalg.matrix_rank(design) < 3:
        raise RankDeficient("plane fit needs three non-collinear antennas")
    coef, *_ = np.linalg.lstsq(design, v[ok], rcond=None)
    resid = v[ok] - design @ coef
    return VelocityPlane(
        float(coef[0]), float(coef[1]), float(coef[2]), float(np.sqrt(np.mean(resid**2))), int(ok.sum())
    )


def plane_from_velocities(v_r, omega_theta, omega_phi, theta, phi, cfg: RadarConfig) -> VelocityPlane:
    """Plane coefficients a target with these velocities produces (forward model)."""
    d = cfg.spacing
    nhx, nhz = cfg.tx_shape
    sp, cp = np.sin(phi), np.cos(phi)
    st, ct = np.sin(theta), np.cos(theta)
    a = (
        v_r
        - d / 4 * ((nhz - 1) * cp - (nhx - 1) * sp * ct) * omega_phi
        + d / 4 * (nhx - 1) * cp * st * omega_theta
    )
    b = d / 2 * (sp * ct * omega_phi + cp * st * omega_theta)
    c = -d / 2 * cp * omega_phi
    return VelocityPlane(float(a), float(b), float(c))


def recover_velocities(plane: VelocityPlane, theta_hat: float, phi_hat: float, cfg: RadarConfig):
    """Invert the plane coefficients into ``(v_r, omega_theta, omega_phi)``.

    ``omega_theta`` is NaN when ``sin(theta)`` is ~0 (target in the x-z plane);
    the other two are still returned.

    Raises
    ------
    DegenerateDirection
        If ``cos(phi)`` is ~0.
    """
    d = cfg.spacing
    nhx, nhz = cfg.tx_shape
    sp, cp = np.sin(phi_hat), np.cos(phi_hat)
    st, ct = np.sin(theta_hat), np.cos(theta_hat)
    if abs(cp) < DEGENERATE_SIN:
        raise DegenerateDirection("cos(phi) ~ 0: pitch rate is unobservable")
    omega_phi = -2 * plane.c / (d * cp)
    if abs(st) < DEGENERATE_SIN:
        omega_theta = np.nan
        theta_term = 0.0
    else:
        omega_theta = (2 * plane.b / d - sp * ct * omega_phi) / (cp * st)
        theta_term = d / 4 * (nhx - 1) * cp * st * omega_theta
    v_r = plane.a + d / 4 * ((nhz - 1) * cp - (nhx - 1) * sp * ct) * omega_phi - theta_term
    return float(v_r), float(omega_theta), float(omega_phi)


# ---------------------------------------------------------------------------
# frame reference


def effective_symbol_offset(cube: EchoCube, cfg: RadarConfig, kappa_v: float) -> float:
    """Symbol index at which the spatial estimates effectively sample the direction.

    Over one frame the direction drifts linearly with the symbol index, and the
    spatial covariance averages it with weights set by the per-symbol signal.
    For an unfiltered frame that is the frame centre ``(N-1)/2``; mean removal
    reweights the symbols, which this accounts for using the Doppler phase
    ``kappa_v``.
    """
    n = np.arange(cfg.n_symbols)
    e = np.exp(1j * kappa_v * n)
    ne = n * e
    if cube.zero_doppler_removed:
        e = e - e.mean()
        ne = ne - ne.mean()
    energy = np.vdot(e, e).real
    if energy <= 0:
        return (cfg.n_symbols - 1) / 2
    return float(np.vdot(e, ne).real / energy)


def _reference_shift(plane: VelocityPlane, cfg: RadarConfig, offset: float) -> tuple[float, float]:
    """Change of ``(Psi, Omega)`` between symbol 0 and symbol ``offset``."""
    scale = 2 * cfg.t_s * offset / cfg.spacing
    return scale * plane.b, scale * plane.c


# ---------------------------------------------------------------------------
# full single-shot pipeline


def single_shot_sense(
    cube: EchoCube,
    cfg: RadarConfig,
    predicted_direction: SpatialDirection | None = None,
    reference: str = "start",
) -> Observation6D:
    """Estimate all six parameters of the beam-illuminated target.

    Parameters
    ----------
    cube : EchoCube
        DT-EEC of one unit slot.
    predicted_direction : SpatialDirection, optional
        Where the beam pointed; only recorded in the diagnostics.
    reference : {"start", "mid"}
        ``"start"`` reports the direction at the first symbol of the frame,
        matching the slot-start state the distance and velocities refer to.
        ``"mid"`` reports the frame-averaged direction as the ESPRIT stages see
        it.

    Raises
    ------
    TargetLost
        The pitch, azimuth or distance stage found only noise.
    """
    _require_dt_eec(cube)
    if reference not in ("start", "mid"):
        raise ValueError(f"unknown reference {reference!r}")
    diag: dict = {}
    if predicted_direction is not None:
        diag["beam"] = (predicted_direction.psi, predicted_direction.omega)
    try:
        kappa_omega, diag["order_omega"] = _principal_kappa(omega_matrix(cube))
        kappa_psi, diag["order_psi"] = _principal_kappa(psi_matrix(cube))
        kappa_r, diag["order_r"] = _principal_kappa(range_matrix(cube))
    except AllNoise as exc:
        raise TargetLost(str(exc)) from exc
    except SingularBlock as exc:
        raise TargetLost(f"subspace estimate failed: {exc}") from exc
    diag.update(kappa_omega=kappa_omega, kappa_psi=kappa_psi, kappa_r=kappa_r)

    valid = dict.fromkeys(STATE_FIELDS, True)
    omega_bar = kappa_to_spatial(kappa_omega, cfg)
    psi_bar = kappa_to_spatial(kappa_psi, cfg)

    try:
        r = distance_from_kappa(kappa_r, cfg)
    except AmbiguousRange as exc:
        r = -SPEED_OF_LIGHT * kappa_r / (4 * np.pi * cfg.delta_f)
        valid["r"] = False
        diag["range_error"] = str(exc)

    plane = None
    try:
        grid = estimate_virtual_velocities(cube, cfg)
        plane = fit_velocity_plane(grid)
        diag["plane"] = (plane.a, plane.b, plane.c, plane.residual_rms)
        kappa_v = float(np.nanmean(grid.kappa))
        if np.nanmax(np.abs(grid.kappa)) > VELOCITY_GUARD * np.pi:
            diag["velocity_error"] = "virtual velocity phase near the wrap"
            for f in ("v_r", "omega_theta", "omega_phi"):
                valid[f] = False
    except (TooManyInvalidCells, RankDeficient) as exc:
        diag["velocity_error"] = str(exc)
        for f in ("v_r", "omega_theta", "omega_phi"):
            valid[f] = False

    if plane is not None and reference == "start":
        offset = effective_symbol_offset(cube, cfg, kappa_v)
        d_psi, d_omega = _reference_shift(plane, cfg, offset)
        diag["symbol_offset"] = offset
        psi0, omega0 = psi_bar - d_psi, omega_bar - d_omega
    else:
        psi0, omega0 = psi_bar, omega_bar

    theta = phi = np.nan
    try:
        phi = float(np.arcsin(_unit_checked(omega0, "Omega")))
    except OutOfRange as exc:
        valid["phi"] = valid["theta"] = False
        diag["angle_error"] = str(exc)
    if np.isfinite(phi):
        try:
            theta = azimuth_from_psi(psi0, phi)
        except (OutOfRange, DegenerateDirection) as exc:
            valid["theta"] = False
            diag["angle_error"] = str(exc)

    v_r = omega_theta = omega_phi = np.nan
    if plane is not None and np.isfinite(phi):
        try:
            v_r, omega_theta, omega_phi = recover_velocities(
                plane, theta if np.isfinite(theta) else np.pi / 2, phi, cfg
            )
        except DegenerateDirection as exc:
            diag["velocity_error"] = str(exc)
    for f, val in (("v_r", v_r), ("omega_theta", omega_theta), ("omega_phi", omega_phi)):
        if not np.isfinite(val):
            valid[f] = False
    if not np.isfinite(theta):
        valid["omega_theta"] = False

    return Observation6D(
        r=float(r),
        theta=float(theta),
        phi=float(phi),
        v_r=float(v_r),
        omega_theta=float(omega_theta),
        omega_phi=float(omega_phi),
        valid=tuple(valid[f] for f in STATE_FIELDS),
        diagnostics=diag,
    )


__all__ = [
    "SpaceValueSet",
    "VelocityPlane",
    "Observation6D",
    "VirtualVelocityGrid",
    "mdl_order",
    "mdl_scores",
    "esprit_space_values",
    "esprit_from_subspace",
    "estimate_pitch",
    "estimate_azimuth",
    "estimate_distance",
    "estimate_virtual_velocities",
    "fit_velocity_plane",
    "plane_from_velocities",
    "recover_velocities",
    "single_shot_sense",
    "SensingError",
]
