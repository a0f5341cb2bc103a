"""Simulated worlds and device mobility.

A Manhattan-style lattice of rectangular building blocks separated by
streets, TRPs deployed on street furniture along the centerlines (or on a
dedicated line for the drive-by scenario), and constant-speed device
trajectories for the three device classes.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .util import rng_for

log = logging.getLogger(__name__)

DEFAULT_TRP_HEIGHT_M = 7.0


@dataclass(frozen=True)
class Building:
    """Axis-aligned footprint with a height; occupies z in [0, height]."""

    x0: float
    y0: float
    x1: float
    y1: float
    height: float

    def contains_xy(self, x: float, y: float) -> bool:
        """Strict-interior test (boundary points are outside)."""
        return self.x0 < x < self.x1 and self.y0 < y < self.y1


@dataclass(frozen=True)
class StreetSegment:
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def length(self) -> float:
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)


@dataclass
class WorldGeometry:
    buildings: list[Building]
    streets: list[StreetSegment]          # graph edges between adjacent intersections
    street_lines: list[StreetSegment]     # full centerlines (TRP placement)
    bounds: tuple[float, float, float, float]
    _boxes: np.ndarray | None = field(default=None, repr=False, compare=False)

    def building_boxes(self) -> np.ndarray:
        """(n, 6) array of [x0 y0 z0 x1 y1 z1], cached."""
        if self._boxes is None:
            if self.buildings:
                self._boxes = np.array(
                    [[b.x0, b.y0, 0.0, b.x1, b.y1, b.height] for b in self.buildings]
                )
            else:
                self._boxes = np.zeros((0, 6))
        return self._boxes


@dataclass(frozen=True)
class TrpSite:
    id: int
    position: np.ndarray          # (3,), z at TRP height
    clock_offset_s: float         # constant for the lifetime of a run
    boresight_az: float           # antenna panel orientation, rad

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))


@dataclass(frozen=True)
class DeviceClass:
    name: str
    speed_mps: float
    antenna_height_m: float


PEDESTRIAN = DeviceClass("pedestrian", 6.0 / 3.6, 1.2)
VEHICLE = DeviceClass("vehicle", 40.0 / 3.6, 1.5)
DRONE = DeviceClass("drone", 20.0 / 3.6, 5.0)
DEVICE_CLASSES = {c.name: c for c in (PEDESTRIAN, VEHICLE, DRONE)}


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    position: np.ndarray   # (3,)
    velocity: np.ndarray   # (3,)
    heading: np.ndarray    # unit vector, = velocity / |velocity|


@dataclass(frozen=True)
class GridConfig:
    blocks_x: int = 3
    blocks_y: int = 3
    block_size_m: float = 120.0
    street_width_m: float = 21.0
    building_height_m: float = 28.0


def build_manhattan_grid(cfg: GridConfig) -> WorldGeometry:
    """Rectangular lattice of blocks separated by streets.

    Street centerlines run between block rows/columns plus a ring road on
    the outer boundary; the graph nodes are the line crossings.
    """
    if min(cfg.blocks_x, cfg.blocks_y) < 1 or min(
        cfg.block_size_m, cfg.street_width_m, cfg.building_height_m
    ) <= 0:
        raise ValueError("grid dimensions must be positive")

    b, s = cfg.block_size_m, cfg.street_width_m
    width = cfg.blocks_x * b + (cfg.blocks_x - 1) * s
    height = cfg.blocks_y * b + (cfg.blocks_y - 1) * s

    buildings = [
        Building(i * (b + s), j * (b + s), i * (b + s) + b, j * (b + s) + b,
                 cfg.building_height_m)
        for j in range(cfg.blocks_y)
        for i in range(cfg.blocks_x)
    ]

    x_lines = [0.0] + [i * (b + s) + b + s / 2 for i in range(cfg.blocks_x - 1)] + [width]
    y_lines = [0.0] + [j * (b + s) + b + s / 2 for j in range(cfg.blocks_y - 1)] + [height]

    streets = []
    for y in y_lines:
        for xa, xb in zip(x_lines[:-1], x_lines[1:]):
            streets.append(StreetSegment(xa, y, xb, y))
    for x in x_lines:
        for ya, yb in zip(y_lines[:-1], y_lines[1:]):
            streets.append(StreetSegment(x, ya, x, yb))

    lines = [StreetSegment(0.0, y, width, y) for y in y_lines]
    lines += [StreetSegment(x, 0.0, x, height) for x in x_lines]

    return WorldGeometry(buildings, streets, lines, (0.0, 0.0, width, height))


def build_line_world(length_m: float, lateral_margin_m: float = 12.0) -> WorldGeometry:
    """Building-free strip with a single TRP line along y = 0."""
    if length_m <= 0:
        raise ValueError("length must be positive")
    line = StreetSegment(0.0, 0.0, length_m, 0.0)
    bounds = (0.0, -lateral_margin_m, length_m, lateral_margin_m)
    return WorldGeometry([], [line], [line], bounds)


def street_adjacency(world: WorldGeometry) -> dict:
    """node -> sorted neighbor nodes, nodes keyed by rounded (x, y)."""
    key = lambda x, y: (round(x, 6), round(y, 6))
    adj = defaultdict(set)
    for seg in world.streets:
        a, b = key(seg.x0, seg.y0), key(seg.x1, seg.y1)
        adj[a].add(b)
        adj[b].add(a)
    return {n: sorted(nb) for n, nb in sorted(adj.items())}


def deploy_trps(
    world: WorldGeometry,
    isd_m: float,
    layout: str,
    seed: int = 0,
    trp_height_m: float = DEFAULT_TRP_HEIGHT_M,
    clock_offset_bound_s: float = 1e-5,
) -> list[TrpSite]:
    """Place TRPs every isd along street centerlines (grid) or on the line.

    Grid boresights alternate along the street so consecutive sites face
    opposite travel directions; line boresights face the +y side where the
    drive-by trajectory runs.  Clock offsets are uniform in +-bound.
    """
    if isd_m <= 0:
        raise ValueError("isd must be positive")
    if layout not in ("street_furniture_grid", "line"):
        raise ValueError(f"unknown layout {layout!r}")

    positions: list[tuple[float, float]] = []
    boresights: list[float] = []
    seen = set()

    lines = world.street_lines if layout == "street_furniture_grid" else world.street_lines[:1]
    for ln in lines:
        ux, uy = ln.x1 - ln.x0, ln.y1 - ln.y0
        length = math.hypot(ux, uy)
        ux, uy = ux / length, uy / length
        n_sites = int(math.floor(length / isd_m + 1e-9)) + 1
        if isd_m > length:
            log.warning("isd %.1f m exceeds street length %.1f m; placing one TRP", isd_m, length)
            n_sites = 1
        along_az = math.atan2(uy, ux)
        for k in range(n_sites):
            x, y = ln.x0 + k * isd_m * ux, ln.y0 + k * isd_m * uy
            node = (round(x, 6), round(y, 6))
            if node in seen:
                continue
            seen.add(node)
            positions.append((x, y))
            if layout == "line":
                boresights.append(along_az + math.pi / 2)  # face the device side
            else:
                boresights.append(along_az if k % 2 == 0 else along_az + math.pi)

    rng = rng_for(seed, "trp-clocks")
    offsets = rng.uniform(-clock_offset_bound_s, clock_offset_bound_s, size=len(positions))
    return [
        TrpSite(i, np.array([x, y, trp_height_m]), float(offsets[i]), boresights[i])
        for i, (x, y) in enumerate(positions)
    ]


def generate_trajectory(
    world: WorldGeometry,
    device: DeviceClass,
    duration_s: float,
    dt_s: float,
    seed: int,
    mode: str = "street_random_walk",
    line_offset_m: float = 10.0,
) -> list[TrajectorySample]:
    """Constant-speed motion sampled at uniform dt; identical seed => identical output."""
    if dt_s <= 0 or duration_s < dt_s:
        raise ValueError("need dt > 0 and duration >= dt")
    n = int(round(duration_s / dt_s)) + 1
    if mode == "street_random_walk":
        return _random_walk(world, device, n, dt_s, seed)
    if mode == "straight_line":
        return _straight_line(world, device, n, dt_s, line_offset_m)
    raise ValueError(f"unknown trajectory mode {mode!r}")


def _random_walk(world, device, n, dt, seed):
    if not world.streets:
        raise ValueError("empty street graph")
    adj = street_adjacency(world)
    rng = rng_for(seed, "traj", device.name)

    seg = world.streets[int(rng.integers(len(world.streets)))]
    a = (round(seg.x0, 6), round(seg.y0, 6))
    b = (round(seg.x1, 6), round(seg.y1, 6))
    if rng.integers(2):
        a, b = b, a
    frac = float(rng.uniform())
    cur = np.array([a[0] + frac * (b[0] - a[0]), a[1] + frac * (b[1] - a[1])])
    came_from, target = a, b

    z = device.antenna_height_m
    speed = device.speed_mps
    samples = []
    for k in range(n):
        tvec = np.array([target[0], target[1]]) - cur
        dist = float(np.hypot(*tvec))
        u = tvec / dist if dist > 1e-12 else np.zeros(2)
        vel = np.array([speed * u[0], speed * u[1], 0.0])
        heading = np.array([u[0], u[1], 0.0])
        samples.append(
            TrajectorySample(k * dt, np.array([cur[0], cur[1], z]), vel, heading)
        )
        remaining = speed * dt
        while remaining >= dist - 1e-12:
            remaining -= dist
            cur = np.array([float(target[0]), float(target[1])])
            choices = [nb for nb in adj[target] if nb != came_from]
            if not choices:
                choices = list(adj[target])
            nxt = choices[int(rng.integers(len(choices)))]
            came_from, target = target, nxt
            tvec = np.array([target[0], target[1]]) - cur
            dist = float(np.hypot(*tvec))
        u = (np.array([target[0], target[1]]) - cur) / dist
        cur = cur + remaining * u
    return samples


def _straight_line(world, device, n, dt, offset):
    """Drive-by path parallel to the TRP line, ping-ponging inside the bounds."""
    if not world.street_lines:
        raise ValueError("world has no reference line")
    ln = world.street_lines[0]
    ux, uy = ln.x1 - ln.x0, ln.y1 - ln.y0
    length = math.hypot(ux, uy)
    ux, uy = ux / length, uy / length
    nx, ny = -uy, ux  # left normal; positive offset on that side
    z = device.antenna_height_m
    speed = device.speed_mps

    samples = []
    for k in range(n):
        s_raw = speed * k * dt
        # triangle wave over [0, length]
        period = 2.0 * length
        s_mod = math.fmod(s_raw, period)
        if s_mod <= length:
            s, sign = s_mod, 1.0
        else:
            s, sign = period - s_mod, -1.0
        x = ln.x0 + s * ux + offset * nx
        y = ln.y0 + s * uy + offset * ny
        vel = np.array([sign * speed * ux, sign * speed * uy, 0.0])
        heading = np.array([sign * ux, sign * uy, 0.0])
        samples.append(TrajectorySample(k * dt, np.array([x, y, z]), vel, heading))
    return samples


def world_to_json(world: WorldGeometry) -> dict:
    """Plain-dict dump for debugging/plotting."""
    return {
        "bounds": list(world.bounds),
        "buildings": [
            {"x0": b.x0, "y0": b.y0, "x1": b.x1, "y1": b.y1, "height": b.height}
            for b in world.buildings
        ],
        "streets": [[s.x0, s.y0, s.x1, s.y1] for s in world.streets],
    }
