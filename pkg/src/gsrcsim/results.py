from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gsrcsim.kinematics import MotionLog, SimClock, TargetTrajectory, sample_errors


@dataclass
class EpisodeResult:
    """Everything one simulated episode produced."""

    log: MotionLog
    errors: np.ndarray
    mse: float
    total_transmissions: int
    decode_count: int
    latencies: list[float | None] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)

    @property
    def n_tti(self) -> int:
        return self.errors.shape[0]

    @property
    def tx_per_cnc(self) -> float:
        return self.total_transmissions / self.n_tti

    @property
    def delivery_rate(self) -> float:
        delivered = sum(1 for lat in self.latencies if lat is not None)
        return delivered / self.n_tti


def assemble_result(
    log: MotionLog,
    traj: TargetTrajectory,
    clock: SimClock,
    total_transmissions: int,
    decode_count: int,
    latencies: list[float | None],
    rewards: list[float] | None = None,
) -> EpisodeResult:
    errors = sample_errors(log, traj, clock)
    return EpisodeResult(
        log=log,
        errors=errors,
        mse=float(np.mean(errors * errors)),
        total_transmissions=total_transmissions,
        decode_count=decode_count,
        latencies=list(latencies),
        rewards=list(rewards or []),
    )
