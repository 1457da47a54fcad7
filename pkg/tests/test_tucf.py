import itertools

import numpy as np
import pytest

from gsrcsim.channel import ChannelDraw, DeadChannel, IdealChannel, RadioChannel, ChannelParams, ScriptedChannel
from gsrcsim.engine import Scheme, make_trajectory, run_episode
from gsrcsim.kinematics import SimClock, TargetTrajectory, VelocitySets
from gsrcsim.tucf import nearest_grid_velocity, tucf_episode, tucf_generate

VS = VelocitySets()
GRID = VS.grid()
T = 1e-3


def exhaustive_best(p, g):
    """Independent scan of the 11x11x1 grid with the documented tie rule."""
    best = None
    for vx, vy, vz in itertools.product(range(-5000, 5001, 1000), range(-5000, 5001, 1000), [0]):
        v = np.array([vx, vy, vz], dtype=float)
        miss = round(float(np.linalg.norm(np.asarray(p) + v * T - np.asarray(g))), 9)
        key = (miss, round(float(np.linalg.norm(v)), 6), (vx, vy, vz))
        if best is None or key < best[0]:
            best = (key, v)
    return best[1]


def test_exact_reach():
    v = nearest_grid_velocity([0, 0, 20], [5, 0, 20], T, GRID)
    assert np.array_equal(v, [5000, 0, 0])


def test_already_there_hovers():
    assert np.array_equal(nearest_grid_velocity([3, 4, 20], [3, 4, 20], T, GRID), [0, 0, 0])


def test_rounding_prefers_closer_speed():
    v = nearest_grid_velocity([0, 0, 20], [4.7, 0, 20], T, GRID)
    assert np.array_equal(v, exhaustive_best([0, 0, 20], [4.7, 0, 20]))
    assert np.array_equal(v, [5000, 0, 0])


def test_tie_goes_to_smaller_speed():
    # 4000 and 5000 both miss by 0.5 m
    assert np.array_equal(nearest_grid_velocity([0, 0, 0], [4.5, 0, 0], T, GRID), [4000, 0, 0])


def test_matches_exhaustive_scan_on_random_targets():
    rng = np.random.default_rng(3)
    for _ in range(200):
        p = rng.uniform(-50, 50, 3)
        g = p + np.append(rng.uniform(-8, 8, 2), rng.uniform(-1, 1))
        assert np.array_equal(nearest_grid_velocity(p, g, T, GRID), exhaustive_best(p, g))


def test_tucf_generate_record():
    clock = SimClock()
    rec = tucf_generate([0, 0, 20], [2, -3, 20], clock, VS, index=4)
    assert rec.index == 4
    assert rec.gen_time == pytest.approx(3e-3)
    assert np.array_equal(rec.payload, [2000, -3000, 0])


def random_traj(clock, seed=1):
    return make_trajectory("random-walk", clock, VS, np.random.default_rng(seed))


def test_ideal_channel_tracks_quantised_path():
    clock = SimClock(T, 12, 9)
    # off-grid target so the quantisation floor is non-trivial
    rng = np.random.default_rng(8)
    w = np.vstack([[0, 0, 20], [0, 0, 20] + np.cumsum(rng.uniform(-4.5, 4.5, (12, 3)) * [1, 1, 0], axis=0)])
    traj = TargetTrajectory(w, T)
    res = tucf_episode(traj, clock, IdealChannel(0.0), VS, np.random.default_rng(0))
    # brute-force replay of nearest-grid tracking
    p = w[0].copy()
    total = 0.0
    for i in range(1, 13):
        v = exhaustive_best(p, w[i])
        for j in range(1, 10):
            a = j / 9
            pos = p + v * T * a
            g = w[i - 1] * (1 - a) + w[i] * a
            total += float(np.sum((pos - g) ** 2))
        p = p + v * T
    assert res.mse == pytest.approx(total / (12 * 9), rel=1e-9)
    assert res.decode_count == 12


def test_dead_channel_never_moves():
    clock = SimClock(T, 20, 9)
    traj = random_traj(clock)
    res = tucf_episode(traj, clock, DeadChannel(), VS, np.random.default_rng(0))
    assert np.allclose(res.log.velocities(), 0.0)
    ts = clock.sample_times().ravel()
    d = traj.target_at(ts) - traj.waypoint(0)
    assert res.mse == pytest.approx(float(np.mean(np.sum(d * d, axis=1))), rel=1e-12)


def test_mid_tti_decode_timeline():
    clock = SimClock(T, 1, 9)
    traj = TargetTrajectory(np.array([[0, 0, 20], [3, 0, 20.0]]), T)
    res = tucf_episode(traj, clock, ScriptedChannel([(True, 4e-4)]), VS, np.random.default_rng(0))
    segs = res.log.segments
    assert len(segs) == 2
    assert np.array_equal(segs[0].velocity, [0, 0, 0])
    assert segs[0].t_end == pytest.approx(4e-4)
    assert np.array_equal(segs[1].velocity, [3000, 0, 0])
    assert segs[1].t_end == pytest.approx(1e-3)
    assert res.latencies[0] == pytest.approx(4e-4)


def test_command_runs_one_tti_then_hovers():
    clock = SimClock(T, 2, 9)
    traj = TargetTrajectory(np.array([[0, 0, 20], [3, 0, 20], [6, 0, 20.0]]), T)
    res = tucf_episode(traj, clock, ScriptedChannel([(True, 2e-4), (False, None)]), VS, np.random.default_rng(0))
    assert res.log.position_at(1.2e-3) == pytest.approx([3, 0, 20])
    assert res.log.position_at(2e-3) == pytest.approx([3, 0, 20])


def test_preemption_by_newer_arrival():
    clock = SimClock(T, 2, 9)
    traj = TargetTrajectory(np.array([[0, 0, 20], [3, 0, 20], [3, 3, 20.0]]), T)
    # m_1 lands late at 0.9 ms, m_2 lands at 1.1 ms and preempts it
    res = tucf_episode(traj, clock, ScriptedChannel([(True, 9e-4), (True, 1e-4)]), VS, np.random.default_rng(0))
    seg = [s for s in res.log.segments if s.t_start == pytest.approx(1.1e-3)]
    assert seg and not np.array_equal(seg[0].velocity, [3000, 0, 0])


def test_velocities_stay_on_grid():
    clock = SimClock()
    traj = random_traj(clock)
    ch = RadioChannel(ChannelParams(bandwidth_hz=1e5), bs_pos=(50, 50, 0))
    res = tucf_episode(traj, clock, ch, VS, np.random.default_rng(4))
    allowed = {tuple(v) for v in GRID} | {(0.0, 0.0, 0.0)}
    assert all(tuple(v) in allowed for v in res.log.velocities())


@pytest.mark.parametrize("bandwidth", [1e6, 1e5, 5e4])
def test_engine_tucf_matches_reference_loop(bandwidth):
    clock = SimClock()
    traj = random_traj(clock, 5)
    ch = RadioChannel(ChannelParams(bandwidth_hz=bandwidth), bs_pos=(50, 50, 0))
    for seed in range(5):
        a = tucf_episode(traj, clock, ch, VS, np.random.default_rng(seed))
        b = run_episode(Scheme.TUCF, traj, clock, ch, np.random.default_rng(seed), vel_sets=VS)
        assert a.mse == b.mse
        assert np.array_equal(a.errors, b.errors)
        assert a.latencies == b.latencies


def test_engine_tucf_ideal_zero_time_equivalence():
    clock = SimClock()
    traj = random_traj(clock, 9)
    a = tucf_episode(traj, clock, IdealChannel(0.0), VS, np.random.default_rng(0))
    b = run_episode(Scheme.TUCF, traj, clock, IdealChannel(0.0), np.random.default_rng(0), vel_sets=VS)
    assert np.array_equal(a.log.velocities(), b.log.velocities())
    assert a.mse == b.mse


def test_channel_draw_is_taken_at_reported_position():
    clock = SimClock(T, 3, 9)
    traj = TargetTrajectory(np.array([[0, 0, 20], [2, 0, 20], [4, 0, 20], [6, 0, 20.0]]), T)
    outcomes = [ChannelDraw(True, 1.0, 10.0, True, 1e-4)] * 3
    ch = ScriptedChannel(outcomes)
    tucf_episode(traj, clock, ch, VS, np.random.default_rng(0))
    # m_1 = 2000 m/s from 0.1 ms: p_1 = 1.8; m_2 = 2000 m/s from 1.1 ms: p_2 = 3.8
    assert np.allclose(ch.positions[1], [1.8, 0, 20])
    assert np.allclose(ch.positions[2], [3.8, 0, 20])
