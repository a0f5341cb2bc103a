"""Beam/TRP selection strategies and sweep overhead accounting.

Four strategies are compared on identical channel realizations:

* baseline      - beams locked between periodic exhaustive sweeps
* proposed      - both ends re-steer from the position estimate each beacon
* reference     - TRP side re-steers from the estimate, device side stays
                  locked until the next sweep (approximation of the
                  comparison scheme; its exact rule is not published)
* hypothetical  - genie beams from the true position/heading, every TTI

TRP association is refreshed only at sweeps for every strategy, so the
differences isolate beam alignment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .antenna import BeamCodebook, best_beam_geometric, codebook_gains_dbi
from .channel import (RadioConfig, ShadowingField, link_geometry, noise_power_dbm,
                      path_loss_db, snr_db)
from .scenario import TrpSite, WorldGeometry
from .util import wrap_angle

STRATEGIES = ("baseline", "proposed", "reference", "hypothetical")

OUTAGE_TRP = -1


@dataclass(frozen=True)
class BeamAssignment:
    trp_id: int            # OUTAGE_TRP when no TRP is reachable
    trp_beam: int
    device_beam: int
    assigned_at: float
    strategy: str

    @property
    def outage(self) -> bool:
        return self.trp_id == OUTAGE_TRP


@dataclass(frozen=True)
class SweepSchedule:
    period_s: float
    subframe_s: float = 0.000125
    combos: int = 128            # 16 TRP beams x 8 device beams

    def __post_init__(self):
        if self.period_s <= self.sweep_duration_s:
            raise ValueError("sweep period must exceed the sweep duration")

    @property
    def sweep_duration_s(self) -> float:
        return self.combos * self.subframe_s


def sweep_overhead_fraction(schedule: SweepSchedule) -> float:
    """Fraction of airtime burned on beam training."""
    return schedule.combos * schedule.subframe_s / schedule.period_s


def heading_azimuth(heading) -> float:
    return math.atan2(heading[1], heading[0])


def exhaustive_sweep(
    device_pos,
    device_heading,
    trps: list[TrpSite],
    world: WorldGeometry,
    trp_codebook: BeamCodebook,
    device_codebook: BeamCodebook,
    radio: RadioConfig,
    shadowing: ShadowingField,
    interval_index: int,
    t: float,
    discovery_radius_m: float,
) -> tuple[BeamAssignment, float]:
    """Try every (TRP, TRP beam, device beam) triple over nearby TRPs.

    Uses the true geometry and the current shadowing interval (a sweep
    measures real signals).  Returns the max-SNR assignment and its SNR;
    ties break toward the lowest (trp_id, trp_beam, device_beam).
    """
    device_pos = np.asarray(device_pos, dtype=float)
    noise_dbm = noise_power_dbm(radio)
    dev_az = heading_azimuth(device_heading)

    best: tuple[BeamAssignment, float] | None = None
    for site in sorted(trps, key=lambda s: s.id):
        if np.linalg.norm(site.position - device_pos) > discovery_radius_m:
            continue
        geom = link_geometry(world, site.position, device_pos)
        pl = path_loss_db(geom, radio,
                          shadowing.shadow_db(site.id, interval_index, geom.los))
        g_trp = codebook_gains_dbi(
            trp_codebook,
            (wrap_angle(geom.azimuth_at_trp - site.boresight_az), geom.elevation_at_trp))
        g_dev = codebook_gains_dbi(
            device_codebook,
            (wrap_angle(geom.azimuth_at_device - dev_az), geom.elevation_at_device))
        grid = snr_db(radio.tx_power_w, g_trp[:, None], g_dev[None, :], pl, noise_dbm)
        bt, bd = np.unravel_index(int(np.argmax(grid)), grid.shape)
        s = float(grid[bt, bd])
        if best is None or s > best[1]:
            best = (BeamAssignment(site.id, int(bt), int(bd), t, "baseline"), s)
    if best is None:
        return BeamAssignment(OUTAGE_TRP, 0, 0, t, "baseline"), float("-inf")
    return best


def position_aided_assignment(
    estimate_pos,
    estimate_vel,
    serving_trp: TrpSite,
    trp_codebook: BeamCodebook,
    device_codebook: BeamCodebook,
    t: float,
) -> BeamAssignment:
    """Re-steer both ends from the estimated position; device frame from estimated heading."""
    est = np.asarray(estimate_pos, dtype=float)
    delta = est - serving_trp.position
    d2d = math.hypot(delta[0], delta[1])
    az_trp = math.atan2(delta[1], delta[0])
    el_trp = math.atan2(delta[2], d2d)
    bt = best_beam_geometric(
        trp_codebook, (wrap_angle(az_trp - serving_trp.boresight_az), el_trp))

    est_heading_az = math.atan2(estimate_vel[1], estimate_vel[0])
    az_dev = math.atan2(-delta[1], -delta[0])
    el_dev = math.atan2(-delta[2], d2d)
    bd = best_beam_geometric(
        device_codebook, (wrap_angle(az_dev - est_heading_az), el_dev))
    return BeamAssignment(serving_trp.id, bt, bd, t, "proposed")


def hypothetical_assignment(
    true_pos,
    true_heading,
    serving_trp: TrpSite,
    trp_codebook: BeamCodebook,
    device_codebook: BeamCodebook,
    t: float,
) -> BeamAssignment:
    """Genie variant: position-aided selection fed with the exact state."""
    speed_dir = np.asarray(true_heading, dtype=float)
    a = position_aided_assignment(true_pos, speed_dir, serving_trp,
                                  trp_codebook, device_codebook, t)
    return BeamAssignment(a.trp_id, a.trp_beam, a.device_beam, t, "hypothetical")


def reference_assignment(
    estimate_pos,
    serving_trp: TrpSite,
    trp_codebook: BeamCodebook,
    locked_device_beam: int,
    t: float,
) -> BeamAssignment:
    """TRP-side refresh only; the device keeps its last swept beam."""
    est = np.asarray(estimate_pos, dtype=float)
    delta = est - serving_trp.position
    d2d = math.hypot(delta[0], delta[1])
    az_trp = math.atan2(delta[1], delta[0])
    el_trp = math.atan2(delta[2], d2d)
    bt = best_beam_geometric(
        trp_codebook, (wrap_angle(az_trp - serving_trp.boresight_az), el_trp))
    return BeamAssignment(serving_trp.id, bt, locked_device_beam, t, "reference")
