import math

import numpy as np
import pytest

from posbeam.scenario import (DEVICE_CLASSES, DRONE, VEHICLE, GridConfig,
                              build_line_world, build_manhattan_grid, deploy_trps,
                              generate_trajectory, street_adjacency)


def test_grid_arithmetic_3x3(small_world):
    assert len(small_world.buildings) == 9
    assert small_world.bounds == (0.0, 0.0, 340.0, 340.0)


def test_grid_1x1_is_ring():
    w = build_manhattan_grid(GridConfig(1, 1, 100.0, 20.0, 28.0))
    assert len(w.buildings) == 1
    assert len(w.streets) == 4
    adj = street_adjacency(w)
    assert len(adj) == 4
    assert all(len(nb) == 2 for nb in adj.values())


def test_default_grid_connected_by_bfs(default_world):
    adj = street_adjacency(default_world)
    nodes = list(adj)
    seen = {nodes[0]}
    frontier = [nodes[0]]
    while frontier:
        nxt = []
        for n in frontier:
            for nb in adj[n]:
                if nb not in seen:
                    seen.add(nb)
                    nxt.append(nb)
        frontier = nxt
    assert seen == set(nodes)


def test_grid_rejects_nonpositive():
    with pytest.raises(ValueError):
        build_manhattan_grid(GridConfig(block_size_m=-1.0))
    with pytest.raises(ValueError):
        build_manhattan_grid(GridConfig(street_width_m=0.0))


def test_line_deploy_positions():
    w = build_line_world(200.0)
    trps = deploy_trps(w, 50.0, "line", seed=0)
    assert len(trps) == 5
    for k, s in enumerate(trps):
        assert np.allclose(s.position, [50.0 * k, 0.0, 7.0])
    assert len({s.id for s in trps}) == 5


def test_grid_isd25_counts_on_100m_street():
    w = build_manhattan_grid(GridConfig(1, 1, 100.0, 20.0, 28.0))
    trps = deploy_trps(w, 25.0, "street_furniture_grid", seed=0)
    bottom = [s for s in trps if s.position[1] == 0.0]
    assert len(bottom) == 5  # 100/25 + 1


def test_deploy_validates_inputs(small_world):
    with pytest.raises(ValueError):
        deploy_trps(small_world, -5.0, "line")
    with pytest.raises(ValueError):
        deploy_trps(small_world, 25.0, "hexagon")


def test_clock_offsets_match_configured_std():
    # bound chosen so that U(-b, b) has std exactly 1 us
    bound = math.sqrt(3.0) * 1e-6
    w = build_line_world(10_000.0)
    trps = deploy_trps(w, 10.0, "line", seed=3, clock_offset_bound_s=bound)
    assert len(trps) >= 1000
    std = np.std([s.clock_offset_s for s in trps])
    assert abs(std - 1e-6) / 1e-6 < 0.20


def test_straight_line_kinematics():
    w = build_line_world(400.0)
    traj = generate_trajectory(w, VEHICLE, 10.0, 0.01, seed=0, mode="straight_line",
                               line_offset_m=10.0)
    assert len(traj) == 1001
    step = 40.0 / 3.6 * 0.01
    for a, b in zip(traj[:-1], traj[1:]):
        assert np.linalg.norm(b.position - a.position) == pytest.approx(step, rel=1e-9)


def test_straight_line_min_distance_to_trps():
    w = build_line_world(360.0)
    trps = deploy_trps(w, 50.0, "line", seed=0)
    traj = generate_trajectory(w, DRONE, 60.0, 0.01, seed=0, mode="straight_line",
                               line_offset_m=10.0)
    dmin = min(np.linalg.norm(s.position - p.position) for p in traj for s in trps[:4])
    expected = math.sqrt(10.0 ** 2 + (7.0 - DRONE.antenna_height_m) ** 2)
    assert dmin == pytest.approx(expected, abs=1e-6)


def test_random_walk_deterministic(small_world):
    a = generate_trajectory(small_world, DRONE, 5.0, 0.01, seed=7)
    b = generate_trajectory(small_world, DRONE, 5.0, 0.01, seed=7)
    assert len(a) == len(b)
    for s, t in zip(a, b):
        assert np.array_equal(s.position, t.position)
        assert np.array_equal(s.velocity, t.velocity)


def test_random_walk_speed_and_containment(default_world):
    for cls in DEVICE_CLASSES.values():
        traj = generate_trajectory(default_world, cls, 20.0, 0.01, seed=11)
        x0, y0, x1, y1 = default_world.bounds
        for s in traj[::7]:
            assert np.linalg.norm(s.velocity) == pytest.approx(cls.speed_mps, rel=1e-9)
            assert s.position[2] == cls.antenna_height_m
            assert x0 - 1e-9 <= s.position[0] <= x1 + 1e-9
            assert y0 - 1e-9 <= s.position[1] <= y1 + 1e-9
            for b in default_world.buildings:
                assert not b.contains_xy(s.position[0], s.position[1])


def test_world_reproducible(small_world):
    a = deploy_trps(small_world, 25.0, "street_furniture_grid", seed=5)
    b = deploy_trps(small_world, 25.0, "street_furniture_grid", seed=5)
    assert [s.clock_offset_s for s in a] == [s.clock_offset_s for s in b]
    assert all(np.array_equal(x.position, y.position) for x, y in zip(a, b))


def test_trajectory_validates(small_world):
    with pytest.raises(ValueError):
        generate_trajectory(small_world, DRONE, 1.0, -0.01, seed=0)
    w = build_line_world(100.0)
    w_empty = type(w)([], [], [], w.bounds)
    with pytest.raises(ValueError):
        generate_trajectory(w_empty, DRONE, 1.0, 0.01, seed=0)
