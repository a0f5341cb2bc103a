"""Experiment orchestration: materialize the run matrix and write outputs.

Phase 1 (`position`) writes per-run estimate and error CSVs plus the
positioning-error CDF files; phase 2 (`simulate`) consumes the stored
estimate files, replays the trajectories at TTI granularity and writes
per-run link records plus rate aggregates.  Every stochastic draw traces to
(case seed, stream label), so reruns are byte-identical regardless of the
worker pool size.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .antenna import default_device_codebook, default_trp_codebook
from .beam_mgmt import SweepSchedule
from .channel import RadioConfig, ShadowingField
from .config import ExperimentConfig
from .link_sim import LinkSimConfig, RunContext, simulate_run
from .metrics import (position_errors, read_error_csv, read_link_records,
                      summarize_rates, write_error_csv, write_link_records,
                      write_pos_cdf, write_rates_csv, write_trace_csv)
from .positioning import (EkfConfig, MeasurementNoise, PilotConfig, read_estimates,
                          run_tracking, write_estimates)
from .scenario import (DEVICE_CLASSES, DeviceClass, GridConfig, build_line_world,
                       build_manhattan_grid, deploy_trps, generate_trajectory)
from .util import SPEED_OF_LIGHT, fmt_g

log = logging.getLogger(__name__)


class RunnerError(RuntimeError):
    pass


# ---------------------------------------------------------------- builders

def build_world(cfg: ExperimentConfig):
    sc = cfg.scenario
    if sc.world == "line":
        return build_line_world(sc.line_length_m)
    return build_manhattan_grid(GridConfig(sc.blocks_x, sc.blocks_y, sc.block_size_m,
                                           sc.street_width_m, sc.building_height_m))


def build_trps(cfg: ExperimentConfig, world, isd_m: float, seed: int):
    layout = "line" if cfg.scenario.world == "line" else "street_furniture_grid"
    return deploy_trps(world, isd_m, layout, seed=seed,
                       trp_height_m=cfg.scenario.trp_height_m,
                       clock_offset_bound_s=cfg.scenario.trp_clock_offset_bound_s)


def build_trajectory(cfg: ExperimentConfig, world, device: DeviceClass, seed: int):
    sc = cfg.scenario
    mode = sc.mobility if sc.world == "manhattan" else "straight_line"
    return generate_trajectory(world, device, sc.duration_s, cfg.link.tti_s, seed,
                               mode=mode, line_offset_m=sc.line_offset_m)


def pilot_from(cfg: ExperimentConfig) -> PilotConfig:
    p = cfg.positioning
    return PilotConfig(p.pilot_interval_s, p.pilot_subcarriers,
                       p.pilot_subcarrier_spacing_hz, p.pilot_bandwidth_hz,
                       p.pilot_carrier_hz, cfg.radio.tx_power_w,
                       cfg.radio.noise_figure_db)


def noise_from(cfg: ExperimentConfig) -> MeasurementNoise:
    p = cfg.positioning
    return MeasurementNoise(math.radians(p.sigma_az_deg), math.radians(p.sigma_el_deg),
                            p.toa_sigma0_m / SPEED_OF_LIGHT,
                            p.toa_sigma_min_m / SPEED_OF_LIGHT)


def ekf_from(cfg: ExperimentConfig, class_name: str) -> EkfConfig:
    p = cfg.positioning
    accel = {"pedestrian": p.accel_std_pedestrian, "vehicle": p.accel_std_vehicle,
             "drone": p.accel_std_drone}.get(class_name, p.accel_std_drone)
    return EkfConfig(accel_std=accel, clock_drift_rw_std=p.clock_drift_rw_std)


def radio_from(cfg: ExperimentConfig) -> RadioConfig:
    r = cfg.radio
    return RadioConfig(r.carrier_hz, r.bandwidth_hz, r.subcarrier_spacing_hz,
                       r.tx_power_w, r.noise_figure_db)


def run_context(cfg: ExperimentConfig, world, trps, isd_m: float, period_s: float,
                seed: int) -> RunContext:
    b = cfg.beam
    schedule = SweepSchedule(period_s, b.sweep_subframe_s,
                             b.trp_beams * b.device_beams)
    shadowing = ShadowingField(seed, cfg.radio.shadowing_sigma_los_db,
                               cfg.radio.shadowing_sigma_nlos_db,
                               enabled=cfg.radio.shadowing)
    link = LinkSimConfig(cfg.link.tti_s, cfg.positioning.pilot_interval_s,
                         cfg.link.se_cap_bps_hz, b.discovery_radius_factor)
    return RunContext(world, trps,
                      default_trp_codebook(b.trp_rows, b.trp_cols, b.trp_beams,
                                           b.trp_sector_deg),
                      default_device_codebook(b.device_rows, b.device_cols,
                                              b.device_beams),
                      radio_from(cfg), schedule, shadowing, link,
                      b.discovery_radius_factor * isd_m)


# ------------------------------------------------------------- single cases

def positioning_case(cfg: ExperimentConfig, device: DeviceClass, isd_m: float,
                     mode: str, seed: int):
    """Phase-1 run for one (device, ISD, EKF mode, seed)."""
    world = build_world(cfg)
    trps = build_trps(cfg, world, isd_m, seed)
    trajectory = build_trajectory(cfg, world, device, seed)
    estimates = run_tracking(trajectory, trps, world, mode, pilot_from(cfg), seed,
                             noise_from(cfg), ekf_from(cfg, device.name))
    ts, errs = position_errors(trajectory, estimates, warmup_s=0.0)
    return estimates, ts, errs


def link_case(cfg: ExperimentConfig, device: DeviceClass, isd_m: float,
              period_s: float, seed: int, estimates, strategies,
              assignment_sink=None):
    """Phase-2 run for one (device, ISD, sweep period, seed)."""
    world = build_world(cfg)
    trps = build_trps(cfg, world, isd_m, seed)
    trajectory = build_trajectory(cfg, world, device, seed)
    ctx = run_context(cfg, world, trps, isd_m, period_s, seed)
    return simulate_run(ctx, trajectory, estimates, tuple(strategies), assignment_sink)


# ------------------------------------------------------------ file naming

def est_path(out: Path, cls: str, mode: str, isd: float, seed: int) -> Path:
    return out / "estimates" / f"est_{cls}_{mode}_isd{isd:g}_seed{seed}.csv"


def err_path(out: Path, cls: str, mode: str, isd: float, seed: int) -> Path:
    return out / "errors" / f"err_{cls}_{mode}_isd{isd:g}_seed{seed}.csv"


def link_path(out: Path, cls: str, period: float, isd: float, seed: int) -> Path:
    return out / "links" / f"link_{cls}_p{period:g}_isd{isd:g}_seed{seed}.csv"


# ------------------------------------------------------------- worker fns

def _position_worker(args):
    cfg, cls, isd, mode, seed, out_dir = args
    try:
        device = DEVICE_CLASSES[cls]
        estimates, ts, errs = positioning_case(cfg, device, isd, mode, seed)
        out = Path(out_dir)
        write_estimates(est_path(out, cls, mode, isd, seed), estimates)
        write_error_csv(err_path(out, cls, mode, isd, seed), ts, errs)
        return ("ok", (cls, isd, mode, seed))
    except Exception as exc:  # matrix keeps going; failure recorded
        return ("error", (cls, isd, mode, seed), f"{type(exc).__name__}: {exc}")


def _link_worker(args):
    cfg, cls, isd, period, seed, out_dir, strategies, record_assignments = args
    try:
        out = Path(out_dir)
        device = DEVICE_CLASSES[cls]
        estimates = None
        if {"proposed", "reference"} & set(strategies):
            path = est_path(out, cls, cfg.matrix.est_mode, isd, seed)
            if not path.exists():
                raise RunnerError(f"estimate file missing: {path}; "
                                  "run the position phase first")
            estimates = read_estimates(path)
        sink = [] if record_assignments else None
        records = link_case(cfg, device, isd, period, seed, estimates, strategies, sink)
        if sink is not None:
            write_assignments_csv(out / "assignments_line.csv", sink)
        write_link_records(link_path(out, cls, period, isd, seed), records)
        means = {}
        for s in strategies:
            rates = [r.rate_bps for r in records if r.strategy == s]
            means[s] = float(np.mean(rates))
        return ("ok", (cls, isd, period, seed), means)
    except Exception as exc:
        return ("error", (cls, isd, period, seed), f"{type(exc).__name__}: {exc}")


def _execute(worker, arglist, jobs: int):
    if jobs <= 1 or len(arglist) <= 1:
        return [worker(a) for a in arglist]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, arglist))


# ----------------------------------------------------------------- phases

def _seeds(cfg: ExperimentConfig, seed_offset: int) -> list[int]:
    return [cfg.matrix.base_seed + seed_offset + i for i in range(cfg.matrix.n_seeds)]


def run_position_phase(cfg: ExperimentConfig, out_dir, jobs: int = 1,
                       seed_offset: int = 0) -> None:
    out = Path(out_dir)
    (out / "estimates").mkdir(parents=True, exist_ok=True)
    (out / "errors").mkdir(parents=True, exist_ok=True)
    m = cfg.matrix
    cases = [(cfg, cls, isd, mode, seed, str(out))
             for cls in m.classes for isd in m.isds_m for mode in m.modes
             for seed in _seeds(cfg, seed_offset)]
    results = _execute(_position_worker, cases, jobs)
    for r in results:
        if r[0] == "error":
            log.error("positioning case %s failed: %s", r[1], r[2])
        else:
            log.info("positioning case %s done", r[1])
    aggregate_position(cfg, out)


def aggregate_position(cfg: ExperimentConfig, out: Path) -> None:
    """pos_cdf_<mode>_<isd>.csv from the stored per-run error files."""
    m = cfg.matrix
    warmup = cfg.positioning.warmup_s
    wrote = 0
    for mode in m.modes:
        for isd in m.isds_m:
            samples = []
            for cls in m.classes:
                for path in sorted((out / "errors").glob(
                        f"err_{cls}_{mode}_isd{isd:g}_seed*.csv")):
                    ts, errs = read_error_csv(path)
                    samples.append(errs[ts >= warmup])
            if samples:
                pooled = np.concatenate(samples)
                if pooled.size == 0:
                    log.warning("no post-warmup samples for %s isd %g "
                                "(run shorter than warmup_s?)", mode, isd)
                    continue
                write_pos_cdf(out / f"pos_cdf_{mode}_{isd:g}.csv", pooled)
                wrote += 1
    if wrote == 0:
        raise RunnerError(f"no error files found under {out / 'errors'}")


def run_link_phase(cfg: ExperimentConfig, out_dir, jobs: int = 1,
                   seed_offset: int = 0) -> None:
    out = Path(out_dir)
    m = cfg.matrix
    if not m.strategies or not m.periods_s:
        log.info("no strategies/periods configured; skipping link phase")
        return
    strategies = tuple(m.strategies)
    if {"proposed", "reference"} & set(strategies):
        missing = [est_path(out, cls, m.est_mode, isd, seed)
                   for cls in m.classes for isd in m.isds_m
                   for seed in _seeds(cfg, seed_offset)
                   if not est_path(out, cls, m.est_mode, isd, seed).exists()]
        if missing:
            raise RunnerError(
                f"{len(missing)} estimate file(s) missing (first: {missing[0]}); "
                "run the position phase first")
    (out / "links").mkdir(parents=True, exist_ok=True)
    seed0 = cfg.matrix.base_seed + seed_offset
    first_case = (m.classes[0], m.isds_m[0], m.periods_s[0], seed0)
    cases = [(cfg, cls, isd, period, seed, str(out), strategies,
              cfg.scenario.world == "line" and (cls, isd, period, seed) == first_case)
             for cls in m.classes for isd in m.isds_m for period in m.periods_s
             for seed in _seeds(cfg, seed_offset)]
    results = _execute(_link_worker, cases, jobs)
    failed = [r for r in results if r[0] == "error"]
    for r in failed:
        log.error("link case %s failed: %s", r[1], r[2])
    aggregate_link(cfg, out, seed_offset)


def aggregate_link(cfg: ExperimentConfig, out: Path, seed_offset: int = 0) -> None:
    """rates_<period>.csv, run_means_<period>.csv and (line worlds) trace files."""
    m = cfg.matrix
    if not m.strategies or not m.periods_s:
        return
    bandwidth = cfg.radio.bandwidth_hz
    found_any = False
    for period in m.periods_s:
        summaries = []
        mean_rows = []
        for strategy in m.strategies:
            for cls in m.classes:
                per_seed = []
                for isd in m.isds_m:
                    for seed in _seeds(cfg, seed_offset):
                        path = link_path(out, cls, period, isd, seed)
                        if not path.exists():
                            continue
                        recs = [r for r in read_link_records(path)
                                if r.strategy == strategy]
                        if recs:
                            per_seed.append(recs)
                            mean_rows.append(
                                (strategy, cls, seed,
                                 float(np.mean([r.rate_bps for r in recs]))))
                if per_seed:
                    found_any = True
                    summaries.append(summarize_rates(per_seed, bandwidth, cls, period))
        if summaries:
            write_rates_csv(out / f"rates_{period:g}.csv", summaries)
            with open(out / f"run_means_{period:g}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["strategy", "class", "seed", "mean_mbps"])
                for strategy, cls, seed, mean in mean_rows:
                    w.writerow([strategy, cls, seed, fmt_g(mean / 1e6)])
    if not found_any:
        raise RunnerError(f"no link record files found under {out / 'links'}")

    if cfg.scenario.world == "line":
        seed0 = cfg.matrix.base_seed + seed_offset
        for strategy in m.strategies:
            recs = []
            path = link_path(out, m.classes[0], m.periods_s[0], m.isds_m[0], seed0)
            if path.exists():
                recs = [r for r in read_link_records(path) if r.strategy == strategy]
            if recs:
                write_trace_csv(out / f"trace_line_{strategy}.csv", recs)


def run_experiment_matrix(cfg: ExperimentConfig, out_dir, jobs: int = 1,
                          seed_offset: int = 0) -> None:
    """Both phases over strategy x class x period x ISD x seed."""
    run_position_phase(cfg, out_dir, jobs, seed_offset)
    run_link_phase(cfg, out_dir, jobs, seed_offset)


def run_report(cfg: ExperimentConfig, out_dir, seed_offset: int = 0) -> None:
    """Re-aggregate existing raw CSVs without re-simulating."""
    out = Path(out_dir)
    if not (out / "errors").exists() and not (out / "links").exists():
        raise RunnerError(f"nothing to report under {out}")
    if (out / "errors").exists():
        aggregate_position(cfg, out)
    if (out / "links").exists() and cfg.matrix.strategies and cfg.matrix.periods_s:
        aggregate_link(cfg, out, seed_offset)
