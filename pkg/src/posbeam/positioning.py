"""Pilot-based DoA/ToA measurement generation and EKF tracking.

Every pilot interval the device is observed by the two closest LoS TRPs.
The filter state is [x y z vx vy vz rho alpha d_1 ... d_K]: position,
velocity, device clock offset rho, device clock drift alpha, and one
constant clock offset per TRP met so far (appended lazily, DoA&ToA mode
only).  Two variants share the same prediction model: DoA-only fuses
azimuth/elevation, DoA&ToA additionally fuses arrival times corrupted by
the device and TRP clocks.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import RadioConfig, link_geometry, noise_power_dbm, path_loss_db, snr_db
from .scenario import TrajectorySample, TrpSite, WorldGeometry
from .util import SPEED_OF_LIGHT, fmt_g, rng_for, watts_to_dbm, wrap_angle

log = logging.getLogger(__name__)


class EkfError(RuntimeError):
    """Raised when the covariance loses positive definiteness."""


@dataclass(frozen=True)
class PilotConfig:
    """Uplink positioning pilots: 40 subcarriers at 15 kHz, 3 MHz effective band."""

    interval_s: float = 0.010
    n_subcarriers: int = 40
    subcarrier_spacing_hz: float = 15e3
    effective_bandwidth_hz: float = 3e6
    carrier_hz: float = 3.5e9
    tx_power_w: float = 0.2
    noise_figure_db: float = 3.0

    def __post_init__(self):
        if self.interval_s <= 0 or self.effective_bandwidth_hz <= 0:
            raise ValueError("pilot interval and bandwidth must be positive")

    @property
    def radio(self) -> RadioConfig:
        return RadioConfig(
            carrier_hz=self.carrier_hz,
            bandwidth_hz=self.effective_bandwidth_hz,
            subcarrier_spacing_hz=self.subcarrier_spacing_hz,
            tx_power_w=self.tx_power_w,
            noise_figure_db=self.noise_figure_db,
        )


@dataclass(frozen=True)
class MeasurementNoise:
    """Calibrated measurement error model (the paper's ray tracer is not reproduced).

    ToA noise scales inversely with the amplitude SNR and is floored:
    sigma_toa = max(floor, sigma0 / sqrt(snr_linear)), with sigma0 set for
    ~3 m ranging error at 0 dB SNR in the 3 MHz pilot band.
    """

    sigma_az_rad: float = math.radians(2.0)
    sigma_el_rad: float = math.radians(2.0)
    toa_sigma0_s: float = 3.0 / SPEED_OF_LIGHT
    toa_sigma_min_s: float = 2e-9

    def toa_sigma(self, snr_db_value: float) -> float:
        return max(self.toa_sigma_min_s,
                   self.toa_sigma0_s / math.sqrt(10.0 ** (snr_db_value / 10.0)))


@dataclass(frozen=True)
class EkfConfig:
    accel_std: float = 2.0                 # white-acceleration std, m/s^2
    clock_drift_rw_std: float = 1e-9       # alpha random walk, s/s per sqrt(s)
    init_pos_var: float = 100.0            # m^2
    init_vel_var: float = 25.0             # (m/s)^2
    init_rho_var: float = 1e-10            # s^2 (covers +-10 us offsets)
    init_alpha_var: float = 1e-14          # (s/s)^2
    trp_offset_prior_var: float = (1e-5) ** 2 / 3.0   # var of U(-10 us, 10 us)


@dataclass(frozen=True)
class Measurement:
    t: float
    trp_id: int
    azimuth: float
    elevation: float
    toa: float | None
    snr_db: float


@dataclass
class EkfState:
    x: np.ndarray                 # (8 + K,)
    P: np.ndarray                 # (8 + K, 8 + K)
    trp_ids: list[int] = field(default_factory=list)
    mode: str = "doa_toa"

    @property
    def dim(self) -> int:
        return self.x.shape[0]

    @property
    def position(self) -> np.ndarray:
        return self.x[0:3].copy()

    @property
    def velocity(self) -> np.ndarray:
        return self.x[3:6].copy()

    @property
    def clock_offset(self) -> float:
        return float(self.x[6])

    @property
    def clock_drift(self) -> float:
        return float(self.x[7])

    @property
    def trp_clock_offsets(self) -> dict[int, float]:
        return {tid: float(self.x[8 + i]) for i, tid in enumerate(self.trp_ids)}

    def offset_index(self, trp_id: int) -> int:
        return 8 + self.trp_ids.index(trp_id)

    def copy(self) -> "EkfState":
        return EkfState(self.x.copy(), self.P.copy(), list(self.trp_ids), self.mode)


def process_matrices(dim: int, dt: float, cfg: EkfConfig) -> tuple[np.ndarray, np.ndarray]:
    """Transition F and process noise Q for the constant-velocity + clock model."""
    F = np.eye(dim)
    for i in range(3):
        F[i, 3 + i] = dt
    F[6, 7] = dt

    Q = np.zeros((dim, dim))
    qa = cfg.accel_std ** 2
    for i in range(3):
        Q[i, i] = qa * dt ** 4 / 4.0
        Q[i, 3 + i] = Q[3 + i, i] = qa * dt ** 3 / 2.0
        Q[3 + i, 3 + i] = qa * dt ** 2
    qc = cfg.clock_drift_rw_std ** 2
    Q[6, 6] = qc * dt ** 3 / 3.0
    Q[6, 7] = Q[7, 6] = qc * dt ** 2 / 2.0
    Q[7, 7] = qc * dt
    return F, Q


def _assert_pd(P: np.ndarray, what: str) -> None:
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError as exc:
        eig_min = float(np.linalg.eigvalsh(P).min())
        raise EkfError(f"covariance not positive definite after {what} "
                       f"(min eigenvalue {eig_min:.3e})") from exc


def ekf_predict(state: EkfState, dt: float, cfg: EkfConfig) -> EkfState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    F, Q = process_matrices(state.dim, dt, cfg)
    x = F @ state.x
    P = F @ state.P @ F.T + Q
    P = 0.5 * (P + P.T)
    _assert_pd(P, "predict")
    return EkfState(x, P, list(state.trp_ids), state.mode)


def measurement_model(x: np.ndarray, trp_position: np.ndarray, offset_index: int | None,
                      include_toa: bool) -> tuple[np.ndarray, np.ndarray]:
    """h(x) and its Jacobian for one TRP: rows az, el[, toa]."""
    dim = x.shape[0]
    dx, dy, dz = x[0:3] - np.asarray(trp_position, dtype=float)
    d2sq = dx * dx + dy * dy
    d2 = math.sqrt(d2sq)
    d3sq = d2sq + dz * dz
    d3 = math.sqrt(d3sq)
    if d2 < 1e-6:
        raise EkfError("device directly above TRP; azimuth undefined")

    n_rows = 3 if include_toa else 2
    h = np.empty(n_rows)
    H = np.zeros((n_rows, dim))

    h[0] = math.atan2(dy, dx)
    H[0, 0] = -dy / d2sq
    H[0, 1] = dx / d2sq

    h[1] = math.atan2(dz, d2)
    H[1, 0] = -dz * dx / (d2 * d3sq)
    H[1, 1] = -dz * dy / (d2 * d3sq)
    H[1, 2] = d2 / d3sq

    if include_toa:
        if offset_index is None:
            raise ValueError("toa row needs the TRP offset index")
        h[2] = d3 / SPEED_OF_LIGHT + x[6] + x[offset_index]
        H[2, 0] = dx / (SPEED_OF_LIGHT * d3)
        H[2, 1] = dy / (SPEED_OF_LIGHT * d3)
        H[2, 2] = dz / (SPEED_OF_LIGHT * d3)
        H[2, 6] = 1.0
        H[2, offset_index] = 1.0
    return h, H


def _extend_for_trp(state: EkfState, trp_id: int, cfg: EkfConfig) -> EkfState:
    x = np.append(state.x, 0.0)
    P = np.zeros((state.dim + 1, state.dim + 1))
    P[:state.dim, :state.dim] = state.P
    P[-1, -1] = cfg.trp_offset_prior_var
    return EkfState(x, P, state.trp_ids + [trp_id], state.mode)


def _stack_measurements(x, measurements, include_toa, noise, trps_by_id, offset_idx):
    rows_h, rows_H, angle_rows = [], [], []
    base = 0
    for m in measurements:
        h, H = measurement_model(x, trps_by_id[m.trp_id].position,
                                 offset_idx[m.trp_id] if include_toa else None,
                                 include_toa)
        angle_rows += [base, base + 1]
        base += h.shape[0]
        rows_h.append(h)
        rows_H.append(H)
    return np.concatenate(rows_h), np.vstack(rows_H), angle_rows


def ekf_update(state: EkfState, measurements: list[Measurement], mode: str,
               noise: MeasurementNoise, trps_by_id: dict[int, TrpSite],
               cfg: EkfConfig, iterations: int = 3) -> EkfState:
    """Joseph-form iterated (Gauss-Newton) update over one epoch's measurements.

    Re-linearizing at the posterior keeps the update sane during close TRP
    passes, where the angle model is strongly nonlinear; with small
    innovations the iterations converge immediately and the step equals the
    standard EKF.  Angle innovations are wrapped to (-pi, pi]; a singular
    innovation covariance skips the update (logged) rather than aborting.
    """
    if not measurements:
        return state
    st = state.copy()
    include_toa = mode == "doa_toa"
    if include_toa:
        for m in measurements:
            if m.trp_id not in st.trp_ids:
                st = _extend_for_trp(st, m.trp_id, cfg)
    offset_idx = {tid: 8 + i for i, tid in enumerate(st.trp_ids)}

    rows_z, rows_r = [], []
    for m in measurements:
        rows_z += [m.azimuth, m.elevation] + ([m.toa] if include_toa else [])
        rows_r += [noise.sigma_az_rad ** 2, noise.sigma_el_rad ** 2]
        if include_toa:
            rows_r.append(noise.toa_sigma(m.snr_db) ** 2)
    z = np.array(rows_z)
    R = np.diag(rows_r)

    x0, P0 = st.x, st.P
    xi = x0
    K = H = None
    for _ in range(max(1, iterations)):
        h, H, angle_rows = _stack_measurements(xi, measurements, include_toa,
                                               noise, trps_by_id, offset_idx)
        resid = z - h
        resid[angle_rows] = wrap_angle(resid[angle_rows])
        S = H @ P0 @ H.T + R
        try:
            K = np.linalg.solve(S.T, (P0 @ H.T).T).T
        except np.linalg.LinAlgError:
            log.warning("singular innovation covariance at epoch t=%.3f; update skipped",
                        measurements[0].t)
            return st
        x_next = x0 + K @ (resid - H @ (x0 - xi))
        if np.linalg.norm(x_next - xi) < 1e-12:
            xi = x_next
            break
        xi = x_next

    I_KH = np.eye(st.dim) - K @ H
    P = I_KH @ P0 @ I_KH.T + K @ R @ K.T
    P = 0.5 * (P + P.T)
    return EkfState(xi, P, list(st.trp_ids), st.mode)


def select_serving_trps(world: WorldGeometry, trps: list[TrpSite], device_pos,
                        count: int = 2) -> list[TrpSite]:
    """The `count` closest TRPs in LoS (3D distance, ties by lower id)."""
    device_pos = np.asarray(device_pos, dtype=float)
    ranked = sorted(trps, key=lambda s: (float(np.linalg.norm(s.position - device_pos)), s.id))
    chosen = []
    for site in ranked:
        from .channel import is_los
        if is_los(world, site.position, device_pos):
            chosen.append(site)
            if len(chosen) == count:
                break
    return chosen


def pilot_snr_db(geom, pilot: PilotConfig) -> float:
    """Uplink pilot link budget with omnidirectional ends (no shadowing)."""
    pl = path_loss_db(geom, pilot.radio)
    return snr_db(pilot.tx_power_w, 0.0, 0.0, pl, noise_power_dbm(pilot.radio))


def generate_measurement(geom, trp: TrpSite, device_clock: tuple[float, float], t: float,
                         noise: MeasurementNoise, rng_angles: np.random.Generator,
                         rng_toa: np.random.Generator, snr_db_value: float,
                         include_toa: bool) -> Measurement:
    """Perturb the true geometry at one LoS TRP.

    toa = d3d/c + rho + trp offset + noise; rho is the device clock offset
    at time t.  Angle and ToA noise come from separate streams so the
    DoA-only and DoA&ToA variants see identical angle realizations.
    """
    if not geom.los:
        raise ValueError("measurements are only generated for LoS TRPs")
    az = wrap_angle(geom.azimuth_at_trp + rng_angles.normal(0.0, noise.sigma_az_rad))
    el = float(np.clip(geom.elevation_at_trp + rng_angles.normal(0.0, noise.sigma_el_rad),
                       -math.pi / 2, math.pi / 2))
    toa = None
    if include_toa:
        rho, _alpha = device_clock
        toa = (geom.d3d / SPEED_OF_LIGHT + rho + trp.clock_offset_s
               + rng_toa.normal(0.0, noise.toa_sigma(snr_db_value)))
    return Measurement(t, trp.id, float(az), el, toa, float(snr_db_value))


def simulate_device_clock(n_epochs: int, dt: float, rng: np.random.Generator,
                          offset_bound_s: float = 1e-5, drift_init_std: float = 1e-8,
                          drift_rw_std: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Truth for the time-varying device clock: offset rho(t) and drift alpha(t)."""
    rho = np.empty(n_epochs)
    alpha = np.empty(n_epochs)
    rho[0] = rng.uniform(-offset_bound_s, offset_bound_s)
    alpha[0] = rng.normal(0.0, drift_init_std)
    steps = rng.normal(0.0, drift_rw_std * math.sqrt(dt), size=n_epochs - 1)
    for k in range(n_epochs - 1):
        rho[k + 1] = rho[k] + alpha[k] * dt
        alpha[k + 1] = alpha[k] + steps[k]
    return rho, alpha


@dataclass(frozen=True)
class EstimateRecord:
    t: float
    position: np.ndarray
    velocity: np.ndarray
    p_trace: float
    mode: str
    p_pos: np.ndarray | None = None   # 3x3 position covariance (not serialized)


def triangulate_position(measurements: list[Measurement],
                         trps_by_id: dict[int, TrpSite]) -> np.ndarray:
    """Rough 3D fix from bearings only, used to seed the filter."""
    if len(measurements) == 1:
        m = measurements[0]
        p = trps_by_id[m.trp_id].position
        r0 = 15.0
        return np.array([p[0] + r0 * math.cos(m.azimuth),
                         p[1] + r0 * math.sin(m.azimuth),
                         p[2] + r0 * math.tan(m.elevation)])
    A = np.zeros((2, 2))
    b = np.zeros(2)
    for m in measurements:
        u = np.array([math.cos(m.azimuth), math.sin(m.azimuth)])
        proj = np.eye(2) - np.outer(u, u)
        p = trps_by_id[m.trp_id].position[:2]
        A += proj
        b += proj @ p
    xy, *_ = np.linalg.lstsq(A, b, rcond=None)
    zs = []
    for m in measurements:
        p = trps_by_id[m.trp_id].position
        d2 = float(np.hypot(*(xy - p[:2])))
        zs.append(p[2] + d2 * math.tan(m.elevation))
    return np.array([xy[0], xy[1], float(np.mean(zs))])


def initial_state(measurements: list[Measurement], trps_by_id: dict[int, TrpSite],
                  mode: str, cfg: EkfConfig) -> EkfState:
    pos = triangulate_position(measurements, trps_by_id)
    x = np.zeros(8)
    x[0:3] = pos
    P = np.diag([cfg.init_pos_var] * 3 + [cfg.init_vel_var] * 3
                + [cfg.init_rho_var, cfg.init_alpha_var])
    return EkfState(x, P, [], mode)


def run_tracking(
    trajectory: list[TrajectorySample],
    trps: list[TrpSite],
    world: WorldGeometry,
    mode: str,
    pilot: PilotConfig,
    seed: int,
    noise: MeasurementNoise = MeasurementNoise(),
    cfg: EkfConfig = EkfConfig(),
) -> list[EstimateRecord]:
    """Phase-1 loop: serving-TRP selection, measurement generation, predict/update.

    Returns one estimate per pilot epoch from first fix onward; epochs where
    the filter errors out are skipped and logged.
    """
    if mode not in ("doa_only", "doa_toa"):
        raise ValueError(f"unknown tracking mode {mode!r}")
    dt_traj = trajectory[1].t - trajectory[0].t
    stride = int(round(pilot.interval_s / dt_traj))
    if stride < 1 or abs(stride * dt_traj - pilot.interval_s) > 1e-9:
        raise ValueError("trajectory sampling must divide the pilot interval")
    epochs = trajectory[::stride]

    trps_by_id = {s.id: s for s in trps}
    rng_angles = rng_for(seed, "doa-noise")
    rng_toa = rng_for(seed, "toa-noise")
    rho, alpha = simulate_device_clock(len(epochs), pilot.interval_s,
                                       rng_for(seed, "device-clock"))

    include_toa = mode == "doa_toa"
    state: EkfState | None = None
    last_epoch = -1
    records: list[EstimateRecord] = []

    for k, sample in enumerate(epochs):
        serving = select_serving_trps(world, trps, sample.position)
        measurements = []
        for site in serving:
            geom = link_geometry(world, site.position, sample.position)
            snr = pilot_snr_db(geom, pilot)
            measurements.append(
                generate_measurement(geom, site, (rho[k], alpha[k]), sample.t,
                                     noise, rng_angles, rng_toa, snr, include_toa)
            )
        try:
            if state is None:
                if not measurements:
                    continue
                advanced = initial_state(measurements, trps_by_id, mode, cfg)
            else:
                advanced = ekf_predict(state, (k - last_epoch) * pilot.interval_s, cfg)
            advanced = ekf_update(advanced, measurements, mode, noise, trps_by_id, cfg)
        except EkfError as exc:
            log.warning("epoch t=%.3f skipped: %s", sample.t, exc)
            continue
        state = advanced
        last_epoch = k

        records.append(
            EstimateRecord(sample.t, state.position, state.velocity,
                           float(np.trace(state.P)), mode,
                           state.P[0:3, 0:3].copy())
        )
    return records


ESTIMATE_COLUMNS = ["t", "x", "y", "z", "vx", "vy", "vz", "p_trace", "mode"]


def write_estimates(path, records: list[EstimateRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ESTIMATE_COLUMNS)
        for r in records:
            w.writerow([fmt_g(r.t), *(fmt_g(v) for v in r.position),
                        *(fmt_g(v) for v in r.velocity), fmt_g(r.p_trace), r.mode])


def read_estimates(path) -> list[EstimateRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append(
                EstimateRecord(
                    float(row["t"]),
                    np.array([float(row["x"]), float(row["y"]), float(row["z"])]),
                    np.array([float(row["vx"]), float(row["vy"]), float(row["vz"])]),
                    float(row["p_trace"]),
                    row["mode"],
                )
            )
    return records
