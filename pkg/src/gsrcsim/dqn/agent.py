"""DQN training for the BS-side C&C generator."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Protocol

import numpy as np

from gsrcsim.dqn.network import QNetwork, rmsprop_init, rmsprop_step

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class AgentState:
    """Last reported UAV position and the start time of the TTI being decided."""

    x: float
    y: float
    z: float
    t: float


@dataclass(frozen=True)
class Featurizer:
    """Network input: position relative to ``origin`` over a length scale, time over the horizon."""

    position_scale: float = 100.0
    horizon: float = 0.099
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __call__(self, s: AgentState) -> np.ndarray:
        k = 1.0 / self.position_scale
        o = self.origin
        return np.array([(s.x - o[0]) * k, (s.y - o[1]) * k, (s.z - o[2]) * k, s.t / self.horizon])


@dataclass(frozen=True)
class TrainerConfig:
    gamma: float = 0.1
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.8
    lr: float = 1e-4
    rms_decay: float = 0.99
    rms_eps: float = 1e-8
    replay_capacity: int = 10_000
    batch_size: int = 64
    warmup: int = 500
    target_sync_episodes: int = 10
    episodes: int = 2000
    hidden: tuple[int, ...] = (64, 64)
    position_scale: float = 100.0
    # Q is learned in units of this many metres; the greedy policy is unaffected
    reward_scale: float = 10.0

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        for name in ("epsilon_start", "epsilon_end", "epsilon_decay_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not (self.lr > 0 and 0 <= self.rms_decay < 1 and self.rms_eps > 0):
            raise ValueError("lr, rms_decay, rms_eps out of range")
        if min(self.replay_capacity, self.batch_size, self.target_sync_episodes, self.episodes) < 1:
            raise ValueError("replay_capacity, batch_size, target_sync_episodes, episodes must be >= 1")
        if self.warmup < 1 or self.warmup > self.replay_capacity:
            raise ValueError("warmup must lie in [1, replay_capacity]")
        if self.reward_scale <= 0:
            raise ValueError("reward_scale must be positive")
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden layer sizes must be >= 1")

    def epsilon(self, episode: int) -> float:
        """Linear decay over the first ``epsilon_decay_fraction`` of episodes."""
        span = self.epsilon_decay_fraction * self.episodes
        if span <= 0:
            return self.epsilon_end
        frac = min(episode / span, 1.0)
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac


class Transitions(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray


class ReplayMemory:
    """Ring buffer of transitions, sampled uniformly with replacement."""

    def __init__(self, capacity: int, state_dim: int = 4, warmup: int = 1):
        self.capacity = capacity
        self.warmup = warmup
        self._s = np.zeros((capacity, state_dim))
        self._a = np.zeros(capacity, dtype=np.int64)
        self._r = np.zeros(capacity)
        self._s2 = np.zeros((capacity, state_dim))
        self._d = np.zeros(capacity)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    @property
    def ready(self) -> bool:
        return self._size >= self.warmup

    def push(self, s, a: int, r: float, s_next, done: bool) -> None:
        k = self._next
        self._s[k], self._a[k], self._r[k] = s, a, r
        self._s2[k], self._d[k] = s_next, float(done)
        self._next = (k + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Transitions:
        if self._size < self.warmup:
            raise ValueError(f"replay memory holds {self._size} transitions, needs {self.warmup}")
        idx = rng.integers(0, self._size, size=batch_size)
        return Transitions(self._s[idx], self._a[idx], self._r[idx], self._s2[idx], self._d[idx])

    def contents(self) -> Transitions:
        # oldest first
        order = (np.arange(self._size) + (self._next if self._size == self.capacity else 0)) % self.capacity
        return Transitions(self._s[order], self._a[order], self._r[order], self._s2[order], self._d[order])


def td_targets(target_net: QNetwork, batch: Transitions, gamma: float) -> np.ndarray:
    q_next = target_net.forward(batch.next_states).max(axis=1)
    return batch.rewards + gamma * (1.0 - batch.dones) * q_next


def td_gradient(
    net: QNetwork, target_net: QNetwork, batch: Transitions, gamma: float
) -> tuple[list[np.ndarray], float]:
    """Gradient of 0.5 * mean((y - Q(s, a))^2) with y from the frozen target net.

    Per sample this is -(y - Q(s,a)) * dQ(s,a)/dtheta, so stepping against it
    shrinks the TD error. Returns ``(grads, loss)``.
    """
    y = td_targets(target_net, batch, gamma)
    q, inputs = net.forward_cached(batch.states)
    rows = np.arange(len(y))
    delta = q[rows, batch.actions] - y
    grad_out = np.zeros_like(q)
    grad_out[rows, batch.actions] = delta / len(y)
    return net.backward(inputs, grad_out), 0.5 * float(np.mean(delta * delta))


def select_action(net: QNetwork, features, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; greedy ties go to the lowest action index."""
    if rng.random() < epsilon:
        return int(rng.integers(net.n_actions))
    return int(np.argmax(net.forward(features)))


class Env(Protocol):
    done: bool

    def state(self) -> AgentState: ...

    def step(self, action: int) -> float: ...


@dataclass
class Trainer:
    """Q-network, frozen target copy, optimiser and replay memory."""

    config: TrainerConfig
    n_actions: int
    rng: np.random.Generator
    featurizer: Featurizer = field(default_factory=Featurizer)

    def __post_init__(self) -> None:
        c = self.config
        self.net = QNetwork((4, *c.hidden, self.n_actions), self.rng)
        self.target = self.net.copy()
        self.opt_state = rmsprop_init(self.net.params())
        self.memory = ReplayMemory(c.replay_capacity, 4, c.warmup)
        self.episodes_since_sync = 0

    def learn(self) -> float | None:
        if not self.memory.ready:
            return None
        batch = self.memory.sample(self.config.batch_size, self.rng)
        grads, loss = td_gradient(self.net, self.target, batch, self.config.gamma)
        c = self.config
        rmsprop_step(self.net.params(), grads, self.opt_state, c.lr, c.rms_decay, c.rms_eps)
        return loss

    def end_episode(self) -> bool:
        """Count an episode; copy theta into the target net every N episodes."""
        self.episodes_since_sync += 1
        if self.episodes_since_sync >= self.config.target_sync_episodes:
            self.sync_target()
            return True
        return False

    def sync_target(self) -> None:
        self.target.copy_from(self.net)
        self.episodes_since_sync = 0

    def run_episode(self, env: Env, epsilon: float) -> float:
        s = self.featurizer(env.state())
        total = 0.0
        while not env.done:
            a = select_action(self.net, s, epsilon, self.rng)
            r = env.step(a)
            s_next = self.featurizer(env.state())
            self.memory.push(s, a, r / self.config.reward_scale, s_next, env.done)
            self.learn()
            total += r
            s = s_next
        return total


@dataclass
class LearningCurve:
    rows: list[tuple[int, float, float]] = field(default_factory=list)

    def append(self, episode: int, reward: float, epsilon: float) -> None:
        self.rows.append((episode, reward, epsilon))

    @property
    def rewards(self) -> np.ndarray:
        return np.array([r for _, r, _ in self.rows])


def train(
    make_env: Callable[[np.random.Generator], Env],
    n_actions: int,
    config: TrainerConfig,
    rng: np.random.Generator,
    featurizer: Featurizer | None = None,
) -> tuple[QNetwork, LearningCurve]:
    agent_rng, env_rng = rng.spawn(2)
    trainer = Trainer(config, n_actions, agent_rng, featurizer or Featurizer(config.position_scale))
    curve = LearningCurve()
    for ep in range(config.episodes):
        eps = config.epsilon(ep)
        total = trainer.run_episode(make_env(env_rng), eps)
        trainer.end_episode()
        if not trainer.net.all_finite():
            raise TrainingDiverged(f"non-finite Q-network parameters after episode {ep}")
        curve.append(ep, total, eps)
        if (ep + 1) % 200 == 0:
            log.info("episode %d reward %.3f eps %.3f", ep + 1, total, eps)
    return trainer.net, curve
