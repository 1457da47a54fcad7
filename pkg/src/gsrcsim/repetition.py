"""Proactive repetition of one C&C packet within its TTI.

Copies go out every ``t_rep`` seconds starting at the TTI boundary, up to
``k_max`` of them. The uplink is ideal, so the ACK of a decoded copy is back
at the BS the instant that copy lands; any copy scheduled at or after that
instant is never sent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from gsrcsim.channel import Channel, ChannelDraw
from gsrcsim.kinematics import SimClock


@dataclass(frozen=True)
class RepetitionParams:
    k_max: int = 3
    t_rep: float = 5e-5

    def __post_init__(self) -> None:
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max!r}")
        if not self.t_rep > 0:
            raise ValueError(f"t_rep must be > 0, got {self.t_rep!r}")

    def check(self, clock: SimClock) -> None:
        span = (self.k_max - 1) * self.t_rep
        if not span < clock.tti_s:
            raise ValueError(
                f"(k_max - 1) * t_rep = {span!r} s must stay below one TTI ({clock.tti_s!r} s)"
            )

    def send_time(self, t_start: float, k: int) -> float:
        return t_start + (k - 1) * self.t_rep


@dataclass
class RepetitionOutcome:
    attempts_made: int
    draws: list[ChannelDraw] = field(default_factory=list)
    earliest_arrival: float | None = None
    terminated_early: bool = False


class MotionContext(Protocol):
    """What the repetition loop needs from the running episode."""

    def advance_to(self, t: float) -> None: ...

    def position(self) -> np.ndarray: ...

    def offer_arrival(self, cnc, t: float) -> None: ...


def run_proactive(
    cnc,
    i: int,
    ctx: MotionContext,
    channel: Channel,
    rep: RepetitionParams,
    clock: SimClock,
    rng: np.random.Generator,
) -> RepetitionOutcome:
    """Transmit ``cnc`` (generated at t_{i-1}) with proactive repetition.

    ``ctx`` is advanced to each send instant before the channel is drawn, so
    the UAV position used for a copy reflects everything executed so far,
    and finally to the end of the TTI. A copy may land after t_i; it is
    still offered to ``ctx`` and delivered in a later TTI.
    """
    rep.check(clock)
    t_start, t_end = clock.boundary(i - 1), clock.boundary(i)
    out = RepetitionOutcome(attempts_made=0)
    for k in range(1, rep.k_max + 1):
        t_k = rep.send_time(t_start, k)
        if out.earliest_arrival is not None and out.earliest_arrival <= t_k:
            out.terminated_early = True
            break
        ctx.advance_to(t_k)
        draw = channel.draw(ctx.position(), rng)
        out.draws.append(draw)
        out.attempts_made += 1
        if draw.decoded and draw.tx_time_s is not None:
            arrival = t_k + draw.tx_time_s
            if out.earliest_arrival is None or arrival < out.earliest_arrival:
                out.earliest_arrival = arrival
                ctx.offer_arrival(cnc, arrival)
    ctx.advance_to(t_end)
    return out
