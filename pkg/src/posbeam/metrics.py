"""Result views: positioning-error CDFs, average-rate summaries, time traces.

Everything is written as long-format CSV so any plotting stack applies.
Positioning statistics exclude a configurable warm-up window (filter
convergence); rate statistics average over TTIs per seed, then across seeds.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .link_sim import LinkRecord
from .positioning import EstimateRecord
from .scenario import TrajectorySample
from .util import fmt_g

DEFAULT_WARMUP_S = 5.0


class ErrorCdf:
    """Empirical CDF over error samples with interpolated quantiles."""

    def __init__(self, samples):
        samples = np.asarray(samples, dtype=float)
        if samples.size == 0:
            raise ValueError("cannot build a CDF from no samples")
        self.samples = np.sort(samples)

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.samples, q))

    def fraction_below(self, threshold: float) -> float:
        if threshold < 0:
            raise ValueError("threshold must be non-negative")
        return float(np.searchsorted(self.samples, threshold, side="right")
                     / self.samples.size)


def build_cdf(errors) -> ErrorCdf:
    return ErrorCdf(errors)


def fraction_below(cdf: ErrorCdf, threshold: float) -> float:
    return cdf.fraction_below(threshold)


def position_errors(trajectory: list[TrajectorySample],
                    estimates: list[EstimateRecord],
                    warmup_s: float = DEFAULT_WARMUP_S) -> tuple[np.ndarray, np.ndarray]:
    """(t, 3D error) per estimate epoch after warm-up, truth matched by timestamp."""
    truth_by_t = {round(s.t, 9): s.position for s in trajectory}
    ts, errs = [], []
    for r in estimates:
        if r.t < warmup_s:
            continue
        p = truth_by_t.get(round(r.t, 9))
        if p is None:
            continue
        ts.append(r.t)
        errs.append(float(np.linalg.norm(r.position - p)))
    return np.array(ts), np.array(errs)


@dataclass(frozen=True)
class RateSummary:
    strategy: str
    device_class: str
    sweep_period_s: float
    mean_rate_bps: float
    mean_spectral_efficiency: float
    std_error_bps: float
    n_seeds: int


def summarize_rates(per_seed_records: list[list[LinkRecord]], bandwidth_hz: float,
                    device_class: str = "", sweep_period_s: float = 0.0) -> RateSummary:
    """Mean rate over TTIs and seeds; standard error across the per-seed means."""
    if not per_seed_records or not per_seed_records[0]:
        raise ValueError("no records to summarize")
    strategies = {r.strategy for run in per_seed_records for r in run}
    if len(strategies) != 1:
        raise ValueError(f"mixed strategies in one summary: {sorted(strategies)}")
    means = np.array([np.mean([r.rate_bps for r in run]) for run in per_seed_records])
    mean = float(means.mean())
    se = float(means.std(ddof=1) / np.sqrt(means.size)) if means.size > 1 else 0.0
    return RateSummary(strategies.pop(), device_class, sweep_period_s, mean,
                       mean / bandwidth_hz, se, means.size)


def write_pos_cdf(path, errors) -> None:
    cdf = build_cdf(errors)
    n = cdf.samples.size
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["error_m", "cdf"])
        for i, e in enumerate(cdf.samples):
            w.writerow([fmt_g(e), fmt_g((i + 1) / n)])


def read_error_samples(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return np.array([float(row["error_m"]) for row in reader])


def write_rates_csv(path, summaries: list[RateSummary]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["strategy", "class", "mean_mbps", "se"])
        for s in summaries:
            w.writerow([s.strategy, s.device_class, fmt_g(s.mean_rate_bps / 1e6),
                        fmt_g(s.std_error_bps / 1e6)])


def write_trace_csv(path, records: list[LinkRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "snr_db", "rate_mbps"])
        for r in sorted(records, key=lambda r: r.t):
            w.writerow([fmt_g(r.t), fmt_g(r.snr_db), fmt_g(r.rate_bps / 1e6)])


LINK_COLUMNS = ["t", "strategy", "trp_id", "snr_db", "rate_bps", "los"]


def write_link_records(path, records: list[LinkRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LINK_COLUMNS)
        for r in records:
            w.writerow([fmt_g(r.t), r.strategy, r.trp_id, fmt_g(r.snr_db),
                        fmt_g(r.rate_bps), int(r.los)])


def read_link_records(path) -> list[LinkRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(LinkRecord(float(row["t"]), row["strategy"], int(row["trp_id"]),
                                  float(row["snr_db"]), float(row["rate_bps"]),
                                  bool(int(row["los"]))))
    return out


def write_assignments_csv(path, assignments) -> None:
    """Beam-assignment trace: t, strategy, trp_id, beams, snr_db."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "strategy", "trp_id", "trp_beam", "device_beam", "snr_db"])
        for a in assignments:
            w.writerow([fmt_g(a.t), a.strategy, a.trp_id, a.trp_beam, a.device_beam,
                        fmt_g(a.snr_db)])


def write_error_csv(path, times, errors) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "error_m"])
        for t, e in zip(times, errors):
            w.writerow([fmt_g(t), fmt_g(e)])


def read_error_csv(path) -> tuple[np.ndarray, np.ndarray]:
    ts, es = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            ts.append(float(row["t"]))
            es.append(float(row["error_m"]))
    return np.array(ts), np.array(es)
