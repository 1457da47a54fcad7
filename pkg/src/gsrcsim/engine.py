"""Episode orchestration for the four control schemes.

An episode walks the TTIs in order. At each boundary the BS produces a C&C
datum from the position the UAV just reported, sends it once or with
proactive repetition, and the UAV's queue policy decides what velocity to
fly as packets land. Motion is recorded in a MotionLog that the metric reads.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from gsrcsim.channel import Channel
from gsrcsim.dqn import AgentState, Featurizer, QNetwork
from gsrcsim.kinematics import MotionLog, SimClock, TargetTrajectory, VelocitySets
from gsrcsim.repetition import RepetitionParams, run_proactive
from gsrcsim.results import EpisodeResult, assemble_result
from gsrcsim.tucf import HOVER, CncRecord, nearest_grid_velocity
from gsrcsim.vaqom import SemanticQueue, reorder


class Scheme(str, enum.Enum):
    TUCF = "TUCF"
    VAQOM = "VAQOM"
    DEEPPRO = "DEEPPRO"
    GSRC = "GSRC"

    @classmethod
    def parse(cls, name: str) -> Scheme:
        key = name.strip().upper().replace("-", "").replace("_", "")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown scheme {name!r}; expected one of {[s.value for s in cls]}") from None

    @property
    def uses_agent(self) -> bool:
        return self in (Scheme.DEEPPRO, Scheme.GSRC)

    @property
    def uses_repetition(self) -> bool:
        return self in (Scheme.DEEPPRO, Scheme.GSRC)

    @property
    def semantic_queue(self) -> bool:
        return self in (Scheme.VAQOM, Scheme.GSRC)


class QueuePolicy(Protocol):
    def on_tti_start(self, ep: Episode, t: float) -> None: ...

    def on_arrival(self, ep: Episode, cnc: CncRecord, t: float) -> None: ...


class ArrivalQueue:
    """Size-one queue in arrival order: the newest datum preempts, runs one TTI, then hover."""

    def on_tti_start(self, ep: Episode, t: float) -> None:
        pass

    def on_arrival(self, ep: Episode, cnc: CncRecord, t: float) -> None:
        ep.command(cnc.payload, until=t + ep.clock.tti_s)


class SemanticPolicy:
    """Semantic ordering, refreshed at TTI starts and at each new decode."""

    def __init__(self, q_max: int = 10):
        self.queue = SemanticQueue(q_max)

    def on_tti_start(self, ep: Episode, t: float) -> None:
        self._refresh(ep, t)

    def on_arrival(self, ep: Episode, cnc: CncRecord, t: float) -> None:
        if self.queue.push(cnc):
            self._refresh(ep, t)

    def _refresh(self, ep: Episode, t: float) -> None:
        self.queue = reorder(self.queue, t, ep.position(), ep.history, ep.clock)
        head = self.queue.head
        ep.command(head.cnc.payload if head is not None else HOVER, until=None)


class Episode:
    """Single-episode state machine; also the motion context for repetition."""

    def __init__(
        self,
        traj: TargetTrajectory,
        clock: SimClock,
        channel: Channel,
        policy: QueuePolicy,
        rep: RepetitionParams | None,
        rng: np.random.Generator,
    ):
        if traj.n_tti < clock.n_tti:
            raise ValueError("trajectory is shorter than the episode")
        if rep is not None:
            rep.check(clock)
        self.traj, self.clock, self.channel = traj, clock, channel
        self.policy, self.rep, self.rng = policy, rep, rng
        self.log = MotionLog(traj.waypoint(0))
        self.history: dict[int, np.ndarray] = {0: traj.waypoint(0)}
        self.i = 1
        self._velocity = HOVER
        self._busy_until: float | None = None
        self._pending: dict[int, tuple[float, CncRecord]] = {}
        self.transmissions = 0
        self.decodes = 0
        self.latencies: list[float | None] = [None] * clock.n_tti
        self.rewards: list[float] = []

    @property
    def done(self) -> bool:
        return self.i > self.clock.n_tti

    def state(self) -> AgentState:
        """What the BS knows when deciding m_i: p_{i-1} and t_{i-1}."""
        p = self.history[self.i - 1]
        return AgentState(float(p[0]), float(p[1]), float(p[2]), self.clock.boundary(self.i - 1))

    def last_report(self) -> np.ndarray:
        return self.history[self.i - 1]

    def next_waypoint(self) -> np.ndarray:
        return self.traj.waypoint(self.i)

    # -- motion context -------------------------------------------------
    def position(self) -> np.ndarray:
        return self.log.end_position

    def command(self, velocity, until: float | None) -> None:
        self._velocity = np.asarray(velocity, dtype=float)
        self._busy_until = until

    def offer_arrival(self, cnc: CncRecord, t: float) -> None:
        # a later copy can only move an undelivered arrival earlier
        prev = self._pending.get(cnc.index)
        if prev is None or t < prev[0]:
            self._pending[cnc.index] = (t, cnc)

    def advance_to(self, t: float) -> None:
        """Fly the current command up to ``t``, handling expiries and arrivals before it."""
        while True:
            now = self.log.end_time
            due = [(ta, idx) for idx, (ta, _) in self._pending.items() if ta < t]
            t_arr, key = min(due) if due else (math.inf, None)
            t_exp = self._busy_until if self._busy_until is not None else math.inf
            stop = min(t, t_arr, t_exp)
            if stop > now:
                self.log.append(self._velocity, now, stop)
            if t_exp <= stop:
                self.command(HOVER, None)
            if key is not None and t_arr <= stop:
                _, cnc = self._pending.pop(key)
                cnc.arrival_time, cnc.decoded = t_arr, True
                self.latencies[cnc.index - 1] = t_arr - cnc.gen_time
                self.policy.on_arrival(self, cnc, t_arr)
                continue
            if stop >= t:
                return

    # -- one TTI ------------------------------------------------------------
    def step(self, payload) -> float:
        """Generate, transmit and execute TTI ``i``; returns -|p_i - g_i|."""
        if self.done:
            raise RuntimeError("episode already finished")
        i, clock = self.i, self.clock
        t_start, t_end = clock.boundary(i - 1), clock.boundary(i)
        self.advance_to(t_start)
        self.policy.on_tti_start(self, t_start)
        cnc = CncRecord(index=i, payload=np.asarray(payload, dtype=float), gen_time=t_start)
        if self.rep is not None:
            out = run_proactive(cnc, i, self, self.channel, self.rep, clock, self.rng)
            self.transmissions += out.attempts_made
            self.decodes += sum(d.decoded for d in out.draws)
        else:
            draw = self.channel.draw(self.position(), self.rng)
            self.transmissions += 1
            self.decodes += draw.decoded
            if draw.decoded and draw.tx_time_s is not None:
                self.offer_arrival(cnc, t_start + draw.tx_time_s)
            self.advance_to(t_end)
        p = self.log.end_position
        self.history[i] = p
        reward = -float(np.linalg.norm(p - self.traj.waypoint(i)))
        self.rewards.append(reward)
        self.i += 1
        return reward

    def result(self) -> EpisodeResult:
        if not self.done:
            raise RuntimeError("episode not finished")
        return assemble_result(
            self.log, self.traj, self.clock, self.transmissions, self.decodes, self.latencies, self.rewards
        )


Generator = Callable[[Episode], np.ndarray]


def tucf_generator(vel_sets: VelocitySets) -> Generator:
    grid = vel_sets.grid()

    def generate(ep: Episode) -> np.ndarray:
        return nearest_grid_velocity(ep.last_report(), ep.next_waypoint(), ep.clock.tti_s, grid)

    return generate


@dataclass(frozen=True)
class DqnPolicy:
    """Greedy C&C generator backed by a trained Q-network. Read-only, thread-safe."""

    net: QNetwork
    grid: np.ndarray
    featurizer: Featurizer

    def __post_init__(self) -> None:
        if self.net.n_actions != len(self.grid):
            raise ValueError(f"network has {self.net.n_actions} outputs, action grid has {len(self.grid)}")

    def action(self, state: AgentState) -> int:
        return int(np.argmax(self.net.forward(self.featurizer(state))))

    def __call__(self, ep: Episode) -> np.ndarray:
        return self.grid[self.action(ep.state())]


def make_policy(scheme: Scheme, q_max: int) -> QueuePolicy:
    return SemanticPolicy(q_max) if scheme.semantic_queue else ArrivalQueue()


def simulate(
    traj: TargetTrajectory,
    clock: SimClock,
    channel: Channel,
    generator: Generator,
    policy: QueuePolicy,
    rep: RepetitionParams | None,
    rng: np.random.Generator,
) -> EpisodeResult:
    ep = Episode(traj, clock, channel, policy, rep, rng)
    while not ep.done:
        ep.step(generator(ep))
    return ep.result()


def run_episode(
    scheme: Scheme,
    traj: TargetTrajectory,
    clock: SimClock,
    channel: Channel,
    rng: np.random.Generator,
    rep: RepetitionParams | None = None,
    agent: DqnPolicy | None = None,
    q_max: int = 10,
    vel_sets: VelocitySets | None = None,
) -> EpisodeResult:
    scheme = Scheme(scheme)
    if scheme.uses_agent:
        if agent is None:
            raise ValueError(f"{scheme.value} needs a trained agent")
        generator: Generator = agent
    else:
        if agent is not None:
            raise ValueError(f"{scheme.value} does not take an agent")
        generator = tucf_generator(vel_sets or VelocitySets())
    if scheme.uses_repetition and rep is None:
        raise ValueError(f"{scheme.value} needs repetition parameters")
    return simulate(
        traj, clock, channel, generator, make_policy(scheme, q_max), rep if scheme.uses_repetition else None, rng
    )


class TrainingEnv:
    """Adapter exposing an Episode to the DQN trainer (actions are grid indices)."""

    def __init__(self, ep: Episode, grid: np.ndarray):
        self.ep, self.grid = ep, grid

    @property
    def done(self) -> bool:
        return self.ep.done

    def state(self) -> AgentState:
        return self.ep.state()

    def step(self, action: int) -> float:
        return self.ep.step(self.grid[action])


def env_factory(
    scheme: Scheme,
    traj: TargetTrajectory,
    clock: SimClock,
    channel: Channel,
    rep: RepetitionParams | None,
    q_max: int,
    vel_sets: VelocitySets,
) -> Callable[[np.random.Generator], TrainingEnv]:
    grid = vel_sets.grid()
    rep = rep if scheme.uses_repetition else None

    def make(rng: np.random.Generator) -> TrainingEnv:
        return TrainingEnv(Episode(traj, clock, channel, make_policy(scheme, q_max), rep, rng), grid)

    return make


def episode_rng(base_seed: int, episode: int) -> np.random.Generator:
    """Independent stream per (base_seed, episode); no dependence on run order."""
    return np.random.default_rng(np.random.SeedSequence([base_seed, episode]))


@dataclass(frozen=True)
class BatchSummary:
    scheme: Scheme
    episodes: int
    mse_mean: float
    mse_std: float
    tx_mean: float
    decode_rate: float
    mses: tuple[float, ...]

    @property
    def mse_sem(self) -> float:
        return self.mse_std / math.sqrt(self.episodes)


def _mean(xs) -> float:
    # fsum is exactly rounded, so the result does not depend on summation order
    return math.fsum(xs) / len(xs)


def summarize(scheme: Scheme, results: list[EpisodeResult]) -> BatchSummary:
    if not results:
        raise ValueError("no episodes to summarize")
    mses = [r.mse for r in results]
    m = _mean(mses)
    std = math.sqrt(math.fsum((x - m) ** 2 for x in mses) / (len(mses) - 1)) if len(mses) > 1 else 0.0
    return BatchSummary(
        scheme=Scheme(scheme),
        episodes=len(results),
        mse_mean=m,
        mse_std=std,
        tx_mean=_mean([r.tx_per_cnc for r in results]),
        decode_rate=_mean([r.delivery_rate for r in results]),
        mses=tuple(mses),
    )


def run_batch(
    scheme: Scheme,
    episodes: int,
    base_seed: int,
    traj: TargetTrajectory,
    clock: SimClock,
    channel: Channel,
    rep: RepetitionParams | None = None,
    agent: DqnPolicy | None = None,
    q_max: int = 10,
    vel_sets: VelocitySets | None = None,
    workers: int = 1,
    keep: int = 0,
) -> tuple[BatchSummary, list[EpisodeResult]]:
    """Run ``episodes`` independent episodes; returns the summary and the first ``keep`` results."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")

    def one(e: int) -> EpisodeResult:
        return run_episode(scheme, traj, clock, channel, episode_rng(base_seed, e), rep, agent, q_max, vel_sets)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(episodes)))
    else:
        results = [one(e) for e in range(episodes)]
    return summarize(scheme, results), results[:keep]


def make_trajectory(
    kind: str,
    clock: SimClock,
    vel_sets: VelocitySets | None = None,
    rng: np.random.Generator | None = None,
    start=(80.0, 80.0, 20.0),
    center=(0.0, 0.0),
    radius: float = 200.0,
) -> TargetTrajectory:
    """Target waypoints g_0..g_N starting at ``start``.

    ``waypoint-demo`` is a fixed closed triangle flown at 3 m per TTI per
    axis. ``random-walk`` adds a uniformly drawn grid step v*T each TTI,
    redrawing any step that would leave the horizontal disk of ``radius``
    around ``center``.
    """
    vel_sets = vel_sets or VelocitySets()
    T, n = clock.tti_s, clock.n_tti
    start = np.asarray(start, dtype=float)
    if kind == "waypoint-demo":
        speed = min(3000.0, float(vel_sets.max_speed[:2].min()))
        legs = [(speed, 0.0, 0.0), (0.0, speed, 0.0), (-speed, -speed, 0.0)]
        per_leg = [n // 3 + (1 if k < n % 3 else 0) for k in range(3)]
        steps = np.concatenate([np.tile(np.array(v) * T, (m, 1)) for v, m in zip(legs, per_leg)])
    elif kind == "random-walk":
        if rng is None:
            raise ValueError("random-walk trajectories need an rng")
        grid = vel_sets.grid() * T
        c = np.asarray(center, dtype=float)
        steps = np.empty((n, 3))
        p = start.copy()
        for k in range(n):
            for _ in range(1000):
                step = grid[rng.integers(len(grid))]
                if np.linalg.norm(p[:2] + step[:2] - c) <= radius:
                    break
            else:
                step = np.zeros(3)
            steps[k] = step
            p = p + step
    else:
        raise ValueError(f"unknown trajectory kind {kind!r}")
    waypoints = np.vstack([start, start + np.cumsum(steps, axis=0)])
    traj = TargetTrajectory(waypoints, T)
    traj.check_reachable(vel_sets)
    return traj
