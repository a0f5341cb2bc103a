"""Experiment configuration: INI sections with strict keys and defaults.

An empty file is a valid config (all defaults); unknown sections or keys,
or values of the wrong type, raise ConfigError naming the offender.
parse -> serialize -> parse round-trips to an equal config.
"""

import configparser
import dataclasses
import io
import typing
from dataclasses import dataclass, field, fields

from .scenario import DEVICE_CLASSES


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    world: str = "manhattan"            # manhattan | line
    blocks_x: int = 3
    blocks_y: int = 3
    block_size_m: float = 120.0
    street_width_m: float = 21.0
    building_height_m: float = 28.0
    trp_height_m: float = 7.0
    trp_clock_offset_bound_s: float = 1e-5
    line_length_m: float = 360.0
    line_offset_m: float = 10.0
    duration_s: float = 30.0
    mobility: str = "street_random_walk"   # street_random_walk | straight_line


@dataclass
class RadioSection:
    carrier_hz: float = 28e9
    bandwidth_hz: float = 100e6
    subcarrier_spacing_hz: float = 120e3
    tx_power_w: float = 0.2
    noise_figure_db: float = 3.0
    shadowing: bool = True
    shadowing_sigma_los_db: float = 4.0
    shadowing_sigma_nlos_db: float = 7.82


@dataclass
class PositioningSection:
    pilot_interval_s: float = 0.010
    pilot_subcarriers: int = 40
    pilot_subcarrier_spacing_hz: float = 15e3
    pilot_bandwidth_hz: float = 3e6
    pilot_carrier_hz: float = 3.5e9
    sigma_az_deg: float = 2.0
    sigma_el_deg: float = 2.0
    toa_sigma0_m: float = 3.0
    toa_sigma_min_m: float = 0.6
    accel_std_pedestrian: float = 1.0
    accel_std_vehicle: float = 8.0
    accel_std_drone: float = 2.0
    clock_drift_rw_std: float = 1e-9
    warmup_s: float = 5.0


@dataclass
class BeamSection:
    trp_rows: int = 8
    trp_cols: int = 8
    trp_beams: int = 16
    trp_sector_deg: float = 120.0
    device_rows: int = 4
    device_cols: int = 4
    device_beams: int = 8
    sweep_subframe_s: float = 0.000125
    discovery_radius_factor: float = 2.0


@dataclass
class LinkSection:
    tti_s: float = 0.010
    se_cap_bps_hz: float = 7.8


@dataclass
class MatrixSection:
    modes: list[str] = field(default_factory=lambda: ["doa_toa"])
    isds_m: list[float] = field(default_factory=lambda: [50.0])
    classes: list[str] = field(default_factory=lambda: ["drone"])
    periods_s: list[float] = field(default_factory=lambda: [1.0])
    strategies: list[str] = field(default_factory=lambda: list(("baseline", "proposed",
                                                                "reference", "hypothetical")))
    est_mode: str = "doa_toa"
    n_seeds: int = 1
    base_seed: int = 1


@dataclass
class OutputSection:
    dir: str = "out"


@dataclass
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    radio: RadioSection = field(default_factory=RadioSection)
    positioning: PositioningSection = field(default_factory=PositioningSection)
    beam: BeamSection = field(default_factory=BeamSection)
    link: LinkSection = field(default_factory=LinkSection)
    matrix: MatrixSection = field(default_factory=MatrixSection)
    output: OutputSection = field(default_factory=OutputSection)


_SECTIONS = {f.name: f.type for f in fields(ExperimentConfig)}


def _parse_scalar(section: str, key: str, raw: str, target_type):
    path = f"[{section}] {key}"
    raw = raw.strip()
    try:
        if target_type is bool:
            if raw.lower() in ("true", "yes", "1", "on"):
                return True
            if raw.lower() in ("false", "no", "0", "off"):
                return False
            raise ValueError
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        if target_type is str:
            return raw
    except ValueError:
        raise ConfigError(f"{path}: expected {target_type.__name__}, got {raw!r}") from None
    raise ConfigError(f"{path}: unsupported type {target_type}")


def _parse_list(section: str, key: str, raw: str, elem_type):
    items = [p.strip() for p in raw.split(",") if p.strip()]
    return [_parse_scalar(section, key, p, elem_type) for p in items]


def _list_elem_type(f):
    if typing.get_origin(f.type) is list:
        return typing.get_args(f.type)[0]
    return None


def parse_config_text(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    cfg = ExperimentConfig()
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        target = getattr(cfg, section)
        known = {f.name: f for f in fields(target)}
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            f = known[key]
            elem = _list_elem_type(f)
            if elem is not None:
                value = _parse_list(section, key, raw, elem)
            else:
                value = _parse_scalar(section, key, raw, f.type)
            setattr(target, key, value)
    _validate(cfg)
    return cfg


def parse_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config_text(fh.read())


def serialize_config(cfg: ExperimentConfig) -> str:
    out = io.StringIO()
    parser = configparser.ConfigParser()
    for section_name in _SECTIONS:
        target = getattr(cfg, section_name)
        parser[section_name] = {}
        for f in fields(target):
            v = getattr(target, f.name)
            if isinstance(v, list):
                parser[section_name][f.name] = ", ".join(
                    repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                parser[section_name][f.name] = repr(v)
            else:
                parser[section_name][f.name] = str(v)
    parser.write(out)
    return out.getvalue()


def _validate(cfg: ExperimentConfig) -> None:
    sc = cfg.scenario
    if sc.world not in ("manhattan", "line"):
        raise ConfigError(f"[scenario] world: unknown value {sc.world!r}")
    if sc.mobility not in ("street_random_walk", "straight_line"):
        raise ConfigError(f"[scenario] mobility: unknown value {sc.mobility!r}")
    for name, value in [("block_size_m", sc.block_size_m),
                        ("street_width_m", sc.street_width_m),
                        ("building_height_m", sc.building_height_m),
                        ("duration_s", sc.duration_s),
                        ("trp_height_m", sc.trp_height_m),
                        ("line_length_m", sc.line_length_m)]:
        if value <= 0:
            raise ConfigError(f"[scenario] {name} must be positive, got {value}")
    m = cfg.matrix
    for isd in m.isds_m:
        if isd <= 0:
            raise ConfigError(f"[matrix] isds_m entries must be positive, got {isd}")
    for mode in m.modes + [m.est_mode]:
        if mode not in ("doa_only", "doa_toa"):
            raise ConfigError(f"[matrix] unknown tracking mode {mode!r}")
    for cls in m.classes:
        if cls not in DEVICE_CLASSES:
            raise ConfigError(f"[matrix] unknown device class {cls!r}")
    for strat in m.strategies:
        if strat not in ("baseline", "proposed", "reference", "hypothetical"):
            raise ConfigError(f"[matrix] unknown strategy {strat!r}")
    for period in m.periods_s:
        if period <= 0:
            raise ConfigError(f"[matrix] periods_s must be positive, got {period}")
    if m.n_seeds < 1:
        raise ConfigError("[matrix] n_seeds must be >= 1")
    if cfg.link.tti_s > cfg.positioning.pilot_interval_s + 1e-12:
        raise ConfigError("[link] tti_s must not exceed the positioning beacon interval")
    if cfg.beam.trp_beams < 1 or cfg.beam.device_beams < 1:
        raise ConfigError("[beam] beam counts must be >= 1")


def config_equal(a: ExperimentConfig, b: ExperimentConfig) -> bool:
    return dataclasses.asdict(a) == dataclasses.asdict(b)
