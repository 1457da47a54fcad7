"""UAV motion bookkeeping and the trajectory-tracking error metric."""

from __future__ import annotations

import bisect
import itertools
from dataclasses import dataclass, field

import numpy as np

# Absolute slack (seconds) when matching segment boundaries and query times.
TIME_EPS = 1e-12


@dataclass(frozen=True)
class SimClock:
    tti_s: float = 1e-3
    n_tti: int = 99
    n_m: int = 9

    def __post_init__(self) -> None:
        if not self.tti_s > 0:
            raise ValueError("tti_s must be > 0")
        if self.n_tti < 1 or self.n_m < 1:
            raise ValueError("n_tti and n_m must be >= 1")

    @property
    def horizon(self) -> float:
        return self.tti_s * self.n_tti

    def boundary(self, k: int) -> float:
        """Time of the k-th TTI boundary, t_k = k*T."""
        return k * self.tti_s

    def sample_times(self) -> np.ndarray:
        """(n_tti, n_m) grid of metric sampling instants."""
        i = np.arange(self.n_tti)[:, None]
        j = np.arange(1, self.n_m + 1)[None, :]
        return (i + j / self.n_m) * self.tti_s


@dataclass(frozen=True)
class VelocitySets:
    """Per-axis admissible velocities (m/s) for a C&C payload."""

    vx: tuple[float, ...] = tuple(float(v) for v in range(-5000, 5001, 1000))
    vy: tuple[float, ...] = tuple(float(v) for v in range(-5000, 5001, 1000))
    vz: tuple[float, ...] = (0.0,)

    def __post_init__(self) -> None:
        if not (self.vx and self.vy and self.vz):
            raise ValueError("velocity sets must be non-empty")

    def grid(self) -> np.ndarray:
        """All payloads in lexicographic (vx, vy, vz) order, shape (K, 3)."""
        axes = (sorted(self.vx), sorted(self.vy), sorted(self.vz))
        return np.array(list(itertools.product(*axes)), dtype=float)

    @property
    def max_speed(self) -> np.ndarray:
        return np.array([max(abs(v) for v in s) for s in (self.vx, self.vy, self.vz)])


@dataclass(frozen=True)
class Segment:
    t_start: float
    t_end: float
    start_pos: np.ndarray
    velocity: np.ndarray

    def position(self, t: float) -> np.ndarray:
        return self.start_pos + self.velocity * (t - self.t_start)


@dataclass
class MotionLog:
    """Piecewise-constant-velocity record of where the UAV has been."""

    start_pos: np.ndarray
    t0: float = 0.0
    segments: list[Segment] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.start_pos = np.array(self.start_pos, dtype=float)
        self._starts: list[float] = [s.t_start for s in self.segments]

    @property
    def end_time(self) -> float:
        return self.segments[-1].t_end if self.segments else self.t0

    @property
    def end_position(self) -> np.ndarray:
        if not self.segments:
            return self.start_pos.copy()
        last = self.segments[-1]
        return last.position(last.t_end)

    def append(self, velocity, from_t: float, to_t: float) -> None:
        end = self.end_time
        if abs(from_t - end) > TIME_EPS:
            kind = "gap" if from_t > end else "overlap"
            raise ValueError(f"segment starting at {from_t!r} leaves a {kind} after {end!r}")
        if not to_t > end:
            raise ValueError(f"segment must end after it starts ({to_t!r} <= {end!r})")
        seg = Segment(end, float(to_t), self.end_position, np.array(velocity, dtype=float))
        self.segments.append(seg)
        self._starts.append(seg.t_start)

    def _check_time(self, t: float) -> None:
        if t < self.t0 - TIME_EPS or t > self.end_time + TIME_EPS:
            raise ValueError(f"t={t!r} outside logged range [{self.t0!r}, {self.end_time!r}]")

    def position_at(self, t: float) -> np.ndarray:
        self._check_time(t)
        if not self.segments:
            return self.start_pos.copy()
        k = max(bisect.bisect_right(self._starts, t) - 1, 0)
        return self.segments[k].position(t)

    def positions_at(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        flat = ts.ravel()
        if flat.size:
            self._check_time(float(flat.min()))
            self._check_time(float(flat.max()))
        if not self.segments:
            return np.broadcast_to(self.start_pos, flat.shape + (3,)).reshape(ts.shape + (3,)).copy()
        starts = np.array(self._starts)
        k = np.clip(np.searchsorted(starts, flat, side="right") - 1, 0, len(starts) - 1)
        p0 = np.array([s.start_pos for s in self.segments])
        v = np.array([s.velocity for s in self.segments])
        out = p0[k] + v[k] * (flat - starts[k])[:, None]
        return out.reshape(ts.shape + (3,))

    def velocities(self) -> np.ndarray:
        return np.array([s.velocity for s in self.segments]).reshape(-1, 3)


@dataclass(frozen=True)
class TargetTrajectory:
    """Waypoints g_0..g_N at TTI boundaries, linear in between."""

    waypoints: np.ndarray
    tti_s: float

    def __post_init__(self) -> None:
        w = np.array(self.waypoints, dtype=float)
        if w.ndim != 2 or w.shape[1] != 3 or len(w) < 2:
            raise ValueError("waypoints must have shape (N+1, 3) with N >= 1")
        object.__setattr__(self, "waypoints", w)

    @property
    def n_tti(self) -> int:
        return len(self.waypoints) - 1

    def waypoint(self, k: int) -> np.ndarray:
        return self.waypoints[k].copy()

    def check_reachable(self, vel_sets: VelocitySets) -> None:
        steps = np.abs(np.diff(self.waypoints, axis=0))
        limit = vel_sets.max_speed * self.tti_s
        if np.any(steps > limit * (1 + 1e-9) + 1e-12):
            raise ValueError("trajectory step exceeds max speed * T on some axis")

    def target_at(self, t) -> np.ndarray:
        t_arr = np.asarray(t, dtype=float)
        horizon = self.n_tti * self.tti_s
        if np.any(t_arr < -TIME_EPS) or np.any(t_arr > horizon + TIME_EPS):
            raise ValueError(f"t outside trajectory range [0, {horizon!r}]")
        q = np.clip(t_arr / self.tti_s, 0.0, self.n_tti)
        k = np.minimum(np.floor(q).astype(int), self.n_tti - 1)
        frac = (q - k)[..., None]
        return self.waypoints[k] * (1.0 - frac) + self.waypoints[k + 1] * frac


def sample_errors(log: MotionLog, traj: TargetTrajectory, clock: SimClock) -> np.ndarray:
    """Euclidean miss distance on the (n_tti, n_m) metric grid."""
    if log.end_time < clock.horizon - TIME_EPS:
        raise ValueError(f"motion log ends at {log.end_time!r}, before the horizon {clock.horizon!r}")
    ts = clock.sample_times()
    diff = log.positions_at(ts) - traj.target_at(ts)
    return np.sqrt(np.sum(diff * diff, axis=-1))


def mse(log: MotionLog, traj: TargetTrajectory, clock: SimClock) -> float:
    err = sample_errors(log, traj, clock)
    return float(np.mean(err * err))
