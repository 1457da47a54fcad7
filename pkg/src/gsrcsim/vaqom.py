"""Receiver-side queue ordering from the age and value of each C&C datum."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from gsrcsim.kinematics import SimClock
from gsrcsim.tucf import CncRecord

# Relative slack for comparing an age against one TTI; ages of exactly T come
# out of float subtraction a few ulps either side.
_AGE_RTOL = 1e-9
# Snapping window for t/T landing a few ulps off an integer.
_INDEX_RTOL = 1e-12


@dataclass
class QueueEntry:
    cnc: CncRecord
    aoi_s: float = 0.0
    voi: float = 0.0
    si: float = 1.0


@dataclass
class SemanticQueue:
    q_max: int = 10
    entries: list[QueueEntry] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.q_max < 1:
            raise ValueError("q_max must be >= 1")

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, index: int) -> bool:
        return any(e.cnc.index == index for e in self.entries)

    def push(self, cnc: CncRecord) -> bool:
        """Add a newly decoded datum. Duplicates of a stored index are ignored."""
        if cnc.index in self:
            return False
        self.entries.append(QueueEntry(cnc))
        return True

    @property
    def head(self) -> QueueEntry | None:
        return self.entries[0] if self.entries else None


def aoi(entry, now: float) -> float:
    cnc = _record(entry)
    if now < cnc.gen_time:
        raise ValueError(f"now={now!r} precedes generation at {cnc.gen_time!r}")
    return now - cnc.gen_time


def execution_tti_index(now: float, clock: SimClock) -> int:
    """1-based index of the TTI containing ``now``."""
    q = now / clock.tti_s
    k = math.floor(q)
    if abs(q - round(q)) < _INDEX_RTOL * max(1.0, abs(q)):
        k = round(q)
    if not 0 <= k < clock.n_tti:
        raise ValueError(f"t={now!r} is outside the horizon [0, {clock.horizon!r})")
    return k + 1


def is_fresh(age: float, clock: SimClock) -> bool:
    return age < clock.tti_s * (1.0 - _AGE_RTOL)


def _record(entry) -> CncRecord:
    return entry.cnc if isinstance(entry, QueueEntry) else entry


def freshest(entries):
    """Entry with the smallest age; the lower TTI index wins a tie."""
    if not entries:
        raise ValueError("no estimate available: queue is empty")
    return min(entries, key=lambda e: (-_record(e).gen_time, _record(e).index))


def estimate_target(queue, uav_history: Mapping[int, np.ndarray], clock: SimClock) -> np.ndarray:
    """Where the BS last intended the UAV to be: p_{gen} + T * m of the freshest entry."""
    entries = queue.entries if isinstance(queue, SemanticQueue) else list(queue)
    best = _record(freshest(entries))
    return np.asarray(uav_history[best.index - 1], dtype=float) + clock.tti_s * best.payload


def estimate_actual(entry, current_pos, now: float, clock: SimClock) -> np.ndarray:
    """Position at the end of the current TTI if ``entry`` were executed from now."""
    cnc = _record(entry)
    t_next = clock.boundary(execution_tti_index(now, clock))
    return np.asarray(current_pos, dtype=float) + cnc.payload * (t_next - now)


def voi(p_hat, g_hat) -> float:
    d = np.asarray(p_hat, dtype=float) - np.asarray(g_hat, dtype=float)
    return -math.sqrt(float(np.dot(d, d)))


def semantic_info(age: float, value: float, clock: SimClock) -> float:
    # an age of exactly one TTI takes the stale branch
    return 1.0 if is_fresh(age, clock) else math.exp(value)


def reorder(
    queue: SemanticQueue,
    now: float,
    current_pos,
    uav_history: Mapping[int, np.ndarray],
    clock: SimClock,
) -> SemanticQueue:
    """Rescore every entry at ``now`` and sort by semantic information.

    Ties fall to the younger entry, then to the lower TTI index. Entries
    beyond capacity (the lowest-ranked ones) are dropped.
    """
    if not queue.entries:
        return SemanticQueue(queue.q_max)
    entries = queue.entries
    g_hat = estimate_target(queue, uav_history, clock)
    # same arithmetic as estimate_actual/voi, done for all entries at once
    remaining = clock.boundary(execution_tti_index(now, clock)) - now
    payloads = np.array([e.cnc.payload for e in entries])
    d = np.asarray(current_pos, dtype=float) + payloads * remaining - g_hat
    values = -np.sqrt(np.einsum("ij,ij->i", d, d))
    scored = []
    for e, value in zip(entries, values.tolist()):
        age = aoi(e, now)
        scored.append(QueueEntry(e.cnc, age, value, semantic_info(age, value, clock)))
    scored.sort(key=lambda e: (-e.si, e.aoi_s, e.cnc.index))
    return SemanticQueue(queue.q_max, scored[: queue.q_max])
