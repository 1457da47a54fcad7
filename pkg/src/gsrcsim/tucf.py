"""Baseline control loop: periodic C&C, size-one arrival-ordered queue.

Each TTI the BS picks the grid velocity that best reaches the next waypoint
from the last position the UAV reported. A decoded packet preempts whatever
the UAV is executing and runs for one TTI; afterwards the UAV hovers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gsrcsim.channel import Channel
from gsrcsim.kinematics import MotionLog, SimClock, TargetTrajectory, VelocitySets
from gsrcsim.results import EpisodeResult, assemble_result

HOVER = np.zeros(3)


@dataclass
class CncRecord:
    """C&C datum m_i generated at the start of TTI ``index`` (1-based)."""

    index: int
    payload: np.ndarray
    gen_time: float
    arrival_time: float | None = None
    decoded: bool = False

    def __post_init__(self) -> None:
        self.payload = np.asarray(self.payload, dtype=float)


def nearest_grid_velocity(position, target, tti_s: float, grid: np.ndarray) -> np.ndarray:
    """Grid velocity minimising ``|p + v*T - g|``.

    Ties go to the smallest speed, then to the first row of ``grid`` (which
    is lexicographic for grids built by VelocitySets).
    """
    miss = np.linalg.norm(np.asarray(position) + grid * tti_s - np.asarray(target), axis=1)
    speed = np.linalg.norm(grid, axis=1)
    # round so float noise does not break genuine ties
    order = np.lexsort((np.arange(len(grid)), np.round(speed, 6), np.round(miss, 9)))
    return grid[order[0]].copy()


def tucf_generate(
    last_known_pos, target_next, clock: SimClock, vel_sets: VelocitySets, index: int = 1
) -> CncRecord:
    v = nearest_grid_velocity(last_known_pos, target_next, clock.tti_s, vel_sets.grid())
    return CncRecord(index=index, payload=v, gen_time=clock.boundary(index - 1))


def tucf_episode(
    traj: TargetTrajectory,
    clock: SimClock,
    channel: Channel,
    vel_sets: VelocitySets,
    rng: np.random.Generator,
) -> EpisodeResult:
    T = clock.tti_s
    log = MotionLog(traj.waypoint(0))
    velocity = HOVER
    busy_until = -np.inf
    received: list[CncRecord] = []
    decodes = 0

    def run(until: float) -> None:
        now = log.end_time
        stop = min(busy_until, until)
        if stop > now:
            log.append(velocity, now, stop)
            now = stop
        if until > now:
            log.append(HOVER, now, until)

    for i in range(1, clock.n_tti + 1):
        t_start, t_end = clock.boundary(i - 1), clock.boundary(i)
        # ideal uplink: the BS knows p_{i-1} exactly at t_{i-1}
        p_prev = log.position_at(t_start)
        cnc = tucf_generate(p_prev, traj.waypoint(i), clock, vel_sets, index=i)
        draw = channel.draw(p_prev, rng)
        if draw.decoded and draw.tx_time_s is not None:
            decodes += 1
            cnc.arrival_time, cnc.decoded = t_start + draw.tx_time_s, True
            received.append(cnc)
        # everything landing in [t_{i-1}, t_i), oldest arrival first
        landing = sorted(
            (c for c in received if t_start <= c.arrival_time < t_end),
            key=lambda c: (c.arrival_time, c.index),
        )
        for c in landing:
            run(c.arrival_time)
            velocity, busy_until = c.payload, c.arrival_time + T
        run(t_end)

    latencies = [None] * clock.n_tti
    for c in received:
        if c.arrival_time < clock.horizon:
            latencies[c.index - 1] = c.arrival_time - c.gen_time
    return assemble_result(log, traj, clock, clock.n_tti, decodes, latencies)
