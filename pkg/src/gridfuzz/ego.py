"""Rule-based driving agent used as the system under test.

Layers, highest priority first: emergency braking, adaptive following,
lane change when stuck behind a slow leader, and cruise with lane centering.
The agent perceives other vehicles with a fixed reaction delay; its own
pose and speed are known without delay.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .metrics import ettc
from .road import Control, VehicleState, WorldState, lane_of, wrap_angle, MPH


@dataclass(frozen=True)
class EgoParams:
    cruise_speed: float = 60 * MPH
    time_headway: float = 1.5
    reaction_delay: float = 0.5
    max_brake: float = 6.0
    lane_change_gap: float = 15.0
    lane_keep_gain: float = 0.8
    emergency_ttc: float = 1.5
    standstill_gap: float = 2.0
    gap_gain: float = 0.25
    speed_gain: float = 0.8
    cruise_gain: float = 0.6
    heading_gain: float = 3.0
    accel_max: float = 2.5
    perception_range: float = 120.0
    blocked_fraction: float = 0.6
    blocked_time: float = 2.0

    def __post_init__(self):
        for name in ("cruise_speed", "time_headway", "max_brake", "lane_change_gap",
                     "lane_keep_gain"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.reaction_delay < 0:
            raise ValueError("reaction_delay must be non-negative")

    def delay_steps(self, dt: float) -> int:
        steps = round(self.reaction_delay / dt)
        if abs(steps * dt - self.reaction_delay) > 1e-9:
            raise ValueError("reaction_delay must be a multiple of the physics step")
        return steps


@dataclass
class EgoMemory:
    history: deque = field(default_factory=deque)
    blocked_steps: int = 0
    target_lane: Optional[int] = None
    mode: str = "cruise"


def _perceive(world: WorldState, params: EgoParams, memory: EgoMemory):
    memory.history.append(world.npcs)
    keep = params.delay_steps(world.dt) + 1
    while len(memory.history) > keep:
        memory.history.popleft()
    return memory.history[0]


def _in_lane(road, npc: VehicleState, lanes) -> bool:
    return lane_of(road, npc.position) in lanes


def closing_time(ego: VehicleState, npc: VehicleState) -> float:
    """Time-to-contact for a vehicle ahead: ETTC, or gap over closing speed when headings are parallel."""
    t = ettc(ego, npc)
    if math.isfinite(t):
        return t
    gap = math.hypot(npc.x - ego.x, npc.y - ego.y)
    closing = ego.speed - npc.speed * math.cos(npc.heading - ego.heading)
    return gap / closing if closing > 1e-9 else math.inf


def _leader(ego, npcs, road, lanes, rng_limit):
    best, best_dx = None, rng_limit
    for npc in npcs:
        dx = npc.x - ego.x
        if 0.0 < dx < best_dx and _in_lane(road, npc, lanes):
            best, best_dx = npc, dx
    return best


def _gap_clear(ego, npcs, road, lane, gap) -> bool:
    for npc in npcs:
        if lane_of(road, npc.position) == lane and abs(npc.x - ego.x) < gap:
            return False
    return True


def ego_decide(world: WorldState, params: EgoParams, memory: EgoMemory) -> tuple[Control, EgoMemory]:
    """Compute the ego control for this step.

    ``memory`` is updated in place and returned.
    """
    road, ego, dt = world.road, world.ego, world.dt
    npcs = _perceive(world, params, memory)

    lane = lane_of(road, ego.position)
    if lane is None:
        lane = 0 if ego.y < 0 else road.lane_count - 1
    if memory.target_lane is not None and abs(ego.y - road.lane_center(memory.target_lane)) < 0.2:
        memory.target_lane = None
    target = lane if memory.target_lane is None else memory.target_lane
    watched = {lane, target}

    cruise = min(params.cruise_speed, road.speed_limit)
    accel = params.cruise_gain * (cruise - ego.speed)
    memory.mode = "cruise"

    leader = _leader(ego, npcs, road, watched, params.perception_range)
    emergency = any(
        closing_time(ego, npc) < params.emergency_ttc
        for npc in npcs
        if npc.x > ego.x and _in_lane(road, npc, watched)
    )
    if emergency:
        accel = -params.max_brake
        memory.mode = "emergency"
    elif leader is not None:
        gap = (leader.x - ego.x) - 0.5 * (leader.length + ego.length)
        desired = params.standstill_gap + params.time_headway * ego.speed
        follow = params.gap_gain * (gap - desired) + params.speed_gain * (leader.speed - ego.speed)
        if follow < accel:
            accel = follow
            memory.mode = "follow"

    blocked = leader is not None and ego.speed < params.blocked_fraction * cruise
    memory.blocked_steps = memory.blocked_steps + 1 if blocked else 0
    if (memory.target_lane is None and not emergency
            and memory.blocked_steps * dt > params.blocked_time):
        for cand in (lane + 1, lane - 1):
            if 0 <= cand < road.lane_count and _gap_clear(ego, npcs, road, cand,
                                                          params.lane_change_gap):
                memory.target_lane = target = cand
                memory.blocked_steps = 0
                memory.mode = "lane-change"
                break

    offset = ego.y - road.lane_center(target)
    desired_heading = math.atan2(-params.lane_keep_gain * offset, max(ego.speed, 1.0))
    steer = params.heading_gain * wrap_angle(desired_heading - ego.heading)
    accel = min(max(accel, -params.max_brake), params.accel_max)
    return Control(steer, accel), memory
