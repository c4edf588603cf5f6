"""Surrogate safety metrics and the scalar fitness score.

Scores are oriented so that a HIGHER value means a more dangerous scenario
for the ego vehicle; the search maximises it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .road import VehicleState, WorldState

INF = math.inf

PARALLEL_TOL = 1e-9
SPEED_EPS = 1e-6
SD_HORIZON = 3.0


def crossing_point(ev: VehicleState, npc: VehicleState) -> Optional[tuple[float, float]]:
    """Intersection of the two heading lines, or None if they are parallel.

    Direction-vector form; agrees with the tan/cot expressions wherever those
    are defined and stays finite near +-pi/2 and 0/pi.
    """
    d1x, d1y = math.cos(ev.heading), math.sin(ev.heading)
    d2x, d2y = math.cos(npc.heading), math.sin(npc.heading)
    denom = d1x * d2y - d1y * d2x
    if abs(denom) < PARALLEL_TOL:
        return None
    rx, ry = npc.x - ev.x, npc.y - ev.y
    s = (rx * d2y - ry * d2x) / denom
    return (ev.x + s * d1x, ev.y + s * d1y)


def crossing_point_tan_cot(x1, y1, th1, x2, y2, th2) -> tuple[float, float]:
    """Crossing point written with tan/cot of the headings.

    Only meaningful away from the singular angles; used as a cross-check.
    """
    t1, t2 = math.tan(th1), math.tan(th2)
    c1, c2 = 1.0 / t1, 1.0 / t2
    xp = (y2 - y1 + x1 * t1 - x2 * t2) / (t1 - t2)
    yp = (x2 - x1 + y1 * c1 - y2 * c2) / (c1 - c2)
    return xp, yp


def ettc(ev: VehicleState, npc: VehicleState) -> float:
    """Estimated time for the ego to reach the crossing of both heading rays.

    Returns ``inf`` for parallel headings, a crossing behind the ego, or a
    (near) stationary ego.
    """
    if abs(ev.speed) < SPEED_EPS:
        return INF
    d1x, d1y = math.cos(ev.heading), math.sin(ev.heading)
    d2x, d2y = math.cos(npc.heading), math.sin(npc.heading)
    denom = d1x * d2y - d1y * d2x
    if abs(denom) < PARALLEL_TOL:
        return INF
    rx, ry = npc.x - ev.x, npc.y - ev.y
    s = (rx * d2y - ry * d2x) / denom
    if s < 0.0:
        return INF
    return s / abs(ev.speed)


def min_distance(ev: VehicleState, npc: VehicleState) -> float:
    return math.sqrt((npc.x - ev.x) ** 2 + (npc.y - ev.y) ** 2)


def safety_distance(ev: VehicleState, npc: VehicleState, t: float = SD_HORIZON) -> float:
    """Required gap for a ``t``-second manoeuvre window; may be negative."""
    if t <= 0:
        raise ValueError("t must be positive")
    return (ev.speed - npc.speed) * t + 0.5 * (ev.accel - npc.accel) * t * t


@dataclass(frozen=True)
class PairSample:
    ettc: float
    distance: float
    safety_distance: float

    @property
    def sd_violated(self) -> bool:
        return self.distance < self.safety_distance


@dataclass(frozen=True)
class SafetySample:
    time: float
    pairs: tuple[PairSample, ...]

    def to_dict(self) -> dict:
        return {
            "t": self.time,
            "pairs": [[None if math.isinf(p.ettc) else p.ettc, p.distance, p.safety_distance]
                      for p in self.pairs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SafetySample":
        pairs = tuple(PairSample(INF if e is None else e, dist, sd) for e, dist, sd in d["pairs"])
        return cls(d["t"], pairs)


def sample_safety(world: WorldState) -> SafetySample:
    ego = world.ego
    pairs = tuple(
        PairSample(ettc(ego, npc), min_distance(ego, npc), safety_distance(ego, npc))
        for npc in world.npcs
    )
    return SafetySample(world.sim_time, pairs)


@dataclass(frozen=True)
class FitnessWeights:
    w_mettc: float = 1.0
    w_md: float = 1.0
    w_sd: float = 1.0
    w_et: float = 1.0
    ettc_cap: float = 10.0
    d_cap: float = 50.0

    def __post_init__(self):
        ws = (self.w_mettc, self.w_md, self.w_sd, self.w_et)
        if min(ws) < 0 or sum(ws) <= 0:
            raise ValueError("weights must be non-negative with a positive sum")
        if self.ettc_cap <= 0 or self.d_cap <= 0:
            raise ValueError("caps must be positive")

    def scaled(self, factor: float) -> "FitnessWeights":
        return FitnessWeights(self.w_mettc * factor, self.w_md * factor,
                              self.w_sd * factor, self.w_et * factor,
                              self.ettc_cap, self.d_cap)


@dataclass(frozen=True)
class FitnessRecord:
    mettc: float
    md: float
    sd_min: float
    sd_violation: float
    et: float
    collided: bool
    score: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "FitnessRecord":
        return cls(**d)


def _unit(x: float) -> float:
    return min(1.0, max(0.0, x))


def combine_score(mettc: float, md: float, sd_violation: float, et: float,
                  budget: float, w: FitnessWeights) -> float:
    return (w.w_mettc * _unit(1.0 - min(mettc, w.ettc_cap) / w.ettc_cap)
            + w.w_md * _unit(1.0 - min(md, w.d_cap) / w.d_cap)
            + w.w_sd * _unit(sd_violation)
            + w.w_et * _unit(1.0 - et / budget))


def finalize_fitness(samples: Sequence[SafetySample], collided: bool, et: float,
                     budget: float, w: FitnessWeights = FitnessWeights()) -> FitnessRecord:
    """Aggregate a scenario's samples into a FitnessRecord.

    ``et`` is the time of the safety violation when ``collided``, otherwise
    the scenario budget.
    """
    if not samples:
        raise ValueError("finalize_fitness needs at least one sample")
    mettc, md, sd_min, violations = INF, INF, INF, 0
    for s in samples:
        hit = False
        for p in s.pairs:
            mettc = min(mettc, p.ettc)
            md = min(md, p.distance)
            sd_min = min(sd_min, p.distance - p.safety_distance)
            hit = hit or p.sd_violated
        violations += hit
    mettc = min(mettc, w.ettc_cap)
    if math.isinf(md):
        md, sd_min = w.d_cap, 0.0
    frac = violations / len(samples)
    score = combine_score(mettc, md, frac, et, budget, w)
    return FitnessRecord(mettc=mettc, md=md, sd_min=sd_min, sd_violation=frac,
                         et=et, collided=collided, score=score)
