"""Phase-2 time loop: per-TTI SNR and Shannon rate under each strategy.

The loop runs per sweep interval and is vectorized over the TTIs inside it:
association and shadowing are fixed within an interval, so per-TTI work
reduces to array-factor evaluations against the serving TRP.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .antenna import BeamCodebook, codebook_gains_dbi
from .beam_mgmt import (OUTAGE_TRP, STRATEGIES, SweepSchedule, exhaustive_sweep,
                        sweep_overhead_fraction)
from .channel import (RadioConfig, ShadowingField, noise_power_dbm, path_loss_db_batch,
                      segments_clear)
from .positioning import EstimateRecord
from .scenario import TrajectorySample, TrpSite, WorldGeometry
from .util import watts_to_dbm, wrap_angle

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinkRecord:
    t: float
    strategy: str
    trp_id: int
    snr_db: float
    rate_bps: float
    los: bool


@dataclass(frozen=True)
class AssignmentRecord:
    t: float
    strategy: str
    trp_id: int
    trp_beam: int
    device_beam: int
    snr_db: float


def shannon_rate(snr_db_value, bandwidth_hz: float, overhead_fraction: float,
                 se_cap_bps_hz: float | None = 7.8):
    """(1 - overhead) * B * log2(1 + SNR), spectral efficiency capped."""
    if not 0.0 <= overhead_fraction < 1.0:
        raise ValueError("overhead fraction must be in [0, 1)")
    se = np.log2(1.0 + 10.0 ** (np.asarray(snr_db_value, dtype=float) / 10.0))
    if se_cap_bps_hz is not None:
        se = np.minimum(se, se_cap_bps_hz)
    rate = (1.0 - overhead_fraction) * bandwidth_hz * se
    return float(rate) if np.ndim(snr_db_value) == 0 else rate


@dataclass(frozen=True)
class LinkSimConfig:
    tti_s: float = 0.010
    beacon_interval_s: float = 0.010
    se_cap_bps_hz: float | None = 7.8
    discovery_radius_factor: float = 2.0   # times ISD
    stale_beacons: int = 3


@dataclass
class RunContext:
    world: WorldGeometry
    trps: list[TrpSite]
    trp_codebook: BeamCodebook
    device_codebook: BeamCodebook
    radio: RadioConfig
    schedule: SweepSchedule
    shadowing: ShadowingField
    link: LinkSimConfig
    discovery_radius_m: float
    trps_by_id: dict = field(init=False)

    def __post_init__(self):
        self.trps_by_id = {s.id: s for s in self.trps}


def _align_estimates(estimates: list[EstimateRecord], times: np.ndarray,
                     tti: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Latest estimate at or before each TTI: positions, velocities, age in seconds."""
    n = times.shape[0]
    pos = np.zeros((n, 3))
    vel = np.zeros((n, 3))
    age = np.full(n, np.inf)
    ts = np.array([r.t for r in estimates])
    order = np.searchsorted(ts, times + 1e-9, side="right") - 1
    have = order >= 0
    if have.any():
        pts = np.array([r.position for r in estimates])
        vls = np.array([r.velocity for r in estimates])
        pos[have] = pts[order[have]]
        vel[have] = vls[order[have]]
        age[have] = times[have] - ts[order[have]]
    return pos, vel, age


def _ffill_int(values: np.ndarray, fresh: np.ndarray, first_fallback: int) -> np.ndarray:
    """Forward-fill integer choices where `fresh` is False."""
    if fresh.all():
        return values
    out = values.copy()
    last = first_fallback
    for i in range(out.shape[0]):
        if fresh[i]:
            last = out[i]
        else:
            out[i] = last
    return out


def simulate_run(
    ctx: RunContext,
    trajectory: list[TrajectorySample],
    estimates: list[EstimateRecord] | None,
    strategies: tuple[str, ...] = STRATEGIES,
    assignment_sink: list | None = None,
) -> list[LinkRecord]:
    """One deterministic phase-2 run; all requested strategies share sweeps,
    association, and shadowing so their records are directly comparable.

    Pass a list as `assignment_sink` to additionally collect per-TTI
    AssignmentRecord rows (beam indices) for the plotting pipeline."""
    unknown = set(strategies) - set(STRATEGIES)
    if unknown:
        raise ValueError(f"unknown strategies: {sorted(unknown)}")
    needs_estimates = {"proposed", "reference"} & set(strategies)
    if needs_estimates and not estimates:
        raise ValueError("proposed/reference strategies need an estimate stream")

    times = np.array([s.t for s in trajectory])
    pos = np.array([s.position for s in trajectory])
    heading_az = np.array([math.atan2(s.heading[1], s.heading[0]) for s in trajectory])
    n = times.shape[0]
    tti = ctx.link.tti_s
    if abs(times[1] - times[0] - tti) > 1e-9:
        raise ValueError("trajectory must be sampled at the TTI")

    if needs_estimates:
        est_pos, est_vel, est_age = _align_estimates(estimates, times, tti)
        est_heading_az = np.arctan2(est_vel[:, 1], est_vel[:, 0])
        stale = est_age > ctx.link.stale_beacons * ctx.link.beacon_interval_s
        if stale.any():
            log.info("%d TTIs with stale estimates (fallback to previous beams)",
                     int(stale.sum()))

    overhead = sweep_overhead_fraction(ctx.schedule)
    noise_dbm = noise_power_dbm(ctx.radio)
    tx_dbm = watts_to_dbm(ctx.radio.tx_power_w)
    stride = int(round(ctx.schedule.period_s / tti))

    per_strategy: dict[str, list[tuple]] = {s: [] for s in strategies}
    last_bt_p = last_bd_p = last_bt_r = 0

    for k, i0 in enumerate(range(0, n, stride)):
        i1 = min(i0 + stride, n)
        sl = slice(i0, i1)
        m = i1 - i0
        assign, _sweep_snr = exhaustive_sweep(
            pos[i0], trajectory[i0].heading, ctx.trps, ctx.world,
            ctx.trp_codebook, ctx.device_codebook, ctx.radio, ctx.shadowing, k,
            times[i0], ctx.discovery_radius_m)

        if assign.outage:
            neg = np.full(m, -np.inf)
            zero = np.zeros(m)
            for s in strategies:
                per_strategy[s].append(
                    (times[sl], np.full(m, OUTAGE_TRP), neg, zero, np.zeros(m, bool)))
                if assignment_sink is not None:
                    for j in range(m):
                        assignment_sink.append(AssignmentRecord(
                            float(times[i0 + j]), s, OUTAGE_TRP, -1, -1, float("-inf")))
            continue

        site = ctx.trps_by_id[assign.trp_id]
        delta = pos[sl] - site.position
        d2d = np.hypot(delta[:, 0], delta[:, 1])
        d3d = np.linalg.norm(delta, axis=1)
        az_at_trp = np.arctan2(delta[:, 1], delta[:, 0])
        el_at_trp = np.arctan2(delta[:, 2], d2d)
        az_at_dev = np.arctan2(-delta[:, 1], -delta[:, 0])
        el_at_dev = np.arctan2(-delta[:, 2], d2d)

        los = segments_clear(ctx.world, pos[sl], np.broadcast_to(site.position, (m, 3)))
        shadow = ctx.shadowing.shadow_db(site.id, k, los)
        pl = path_loss_db_batch(d2d, d3d, los, float(site.position[2]),
                                float(pos[i0, 2]), ctx.radio.carrier_hz, shadow)
        base = tx_dbm - pl - noise_dbm

        g_trp_true = codebook_gains_dbi(
            ctx.trp_codebook,
            (wrap_angle(az_at_trp - site.boresight_az), el_at_trp))       # (m, 16)
        g_dev_true = codebook_gains_dbi(
            ctx.device_codebook,
            (wrap_angle(az_at_dev - heading_az[sl]), el_at_dev))          # (m, 8)

        rows = np.arange(m)
        choices: dict[str, tuple[np.ndarray, np.ndarray]] = {}

        if "baseline" in strategies:
            choices["baseline"] = (np.full(m, assign.trp_beam),
                                   np.full(m, assign.device_beam))
        if "hypothetical" in strategies:
            choices["hypothetical"] = (np.argmax(g_trp_true, axis=1),
                                       np.argmax(g_dev_true, axis=1))
        if needs_estimates:
            edelta = est_pos[sl] - site.position
            ed2d = np.hypot(edelta[:, 0], edelta[:, 1])
            eaz_trp = np.arctan2(edelta[:, 1], edelta[:, 0])
            eel_trp = np.arctan2(edelta[:, 2], ed2d)
            g_trp_est = codebook_gains_dbi(
                ctx.trp_codebook,
                (wrap_angle(eaz_trp - site.boresight_az), eel_trp))
            bt_est = np.argmax(g_trp_est, axis=1)
            bt_est = _ffill_int(bt_est, ~stale[sl], last_bt_p)
            last_bt_p = int(bt_est[-1])

            if "proposed" in strategies:
                eaz_dev = np.arctan2(-edelta[:, 1], -edelta[:, 0])
                eel_dev = np.arctan2(-edelta[:, 2], ed2d)
                g_dev_est = codebook_gains_dbi(
                    ctx.device_codebook,
                    (wrap_angle(eaz_dev - est_heading_az[sl]), eel_dev))
                bd_est = np.argmax(g_dev_est, axis=1)
                bd_est = _ffill_int(bd_est, ~stale[sl], last_bd_p)
                last_bd_p = int(bd_est[-1])
                choices["proposed"] = (bt_est, bd_est)
            if "reference" in strategies:
                choices["reference"] = (bt_est, np.full(m, assign.device_beam))

        for s in strategies:
            bt, bd = choices[s]
            snr = (base + g_trp_true[rows, bt] + g_dev_true[rows, bd])
            per_strategy[s].append(
                (times[sl], np.full(m, assign.trp_id), snr,
                 shannon_rate(snr, ctx.radio.bandwidth_hz, overhead,
                              ctx.link.se_cap_bps_hz), los))
            if assignment_sink is not None:
                bt_arr = np.broadcast_to(bt, (m,))
                bd_arr = np.broadcast_to(bd, (m,))
                for j in range(m):
                    assignment_sink.append(AssignmentRecord(
                        float(times[i0 + j]), s, assign.trp_id,
                        int(bt_arr[j]), int(bd_arr[j]), float(snr[j])))

    records: list[LinkRecord] = []
    for s in strategies:
        for ts, tid, snr, rate, los in per_strategy[s]:
            for j in range(ts.shape[0]):
                records.append(LinkRecord(float(ts[j]), s, int(tid[j]),
                                          float(snr[j]), float(rate[j]), bool(los[j])))
    return records
