"""Fixed-timestep 2D road world with kinematic vehicles.

The road is a straight strip along +x. Lane ``i`` has its centerline at
``y = (i + 0.5) * lane_width``; larger ``y`` is further left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

MPH = 0.44704

DT = 1.0 / 30.0
VEHICLE_LENGTH = 4.7
VEHICLE_WIDTH = 2.0


@dataclass(frozen=True)
class RoadModel:
    lane_count: int = 4
    lane_width: float = 3.5
    road_length: float = 2000.0
    speed_limit: float = 60 * MPH

    def __post_init__(self):
        if self.lane_count < 2:
            raise ValueError("lane_count must be >= 2")
        if self.lane_width <= 0 or self.road_length <= 0 or self.speed_limit <= 0:
            raise ValueError("road dimensions and speed limit must be positive")

    @property
    def width(self) -> float:
        return self.lane_count * self.lane_width

    def lane_center(self, lane: int) -> float:
        return (lane + 0.5) * self.lane_width


@dataclass(frozen=True)
class ControlLimits:
    steer_max: float = 0.6
    accel_max: float = 4.0
    brake_max: float = -10.0


LIMITS = ControlLimits()


@dataclass(frozen=True)
class Control:
    steer: float = 0.0
    accel: float = 0.0

    def clamped(self, limits: ControlLimits = LIMITS) -> "Control":
        steer = min(max(self.steer, -limits.steer_max), limits.steer_max)
        accel = min(max(self.accel, limits.brake_max), limits.accel_max)
        return Control(steer, accel)


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    heading: float = 0.0
    speed: float = 0.0
    accel: float = 0.0
    length: float = VEHICLE_LENGTH
    width: float = VEHICLE_WIDTH

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    def corners(self) -> list[tuple[float, float]]:
        """Footprint corners, counter-clockwise from the front-left."""
        c, s = math.cos(self.heading), math.sin(self.heading)
        hl, hw = 0.5 * self.length, 0.5 * self.width
        pts = []
        for fl, lat in ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)):
            pts.append((self.x + fl * c - lat * s, self.y + fl * s + lat * c))
        return pts


@dataclass(frozen=True)
class WorldState:
    ego: VehicleState
    npcs: tuple[VehicleState, ...]
    road: RoadModel
    step: int = 0
    dt: float = DT

    @property
    def sim_time(self) -> float:
        return self.step * self.dt

    @property
    def vehicles(self) -> tuple[VehicleState, ...]:
        return (self.ego,) + self.npcs


STATIC_OBJECT = "static-object"


@dataclass(frozen=True)
class CollisionEvent:
    time: float
    npc_index: Union[int, str]
    relative_speed: float

    @property
    def off_road(self) -> bool:
        return self.npc_index == STATIC_OBJECT


def wrap_angle(a: float) -> float:
    """Map an angle into (-pi, pi]."""
    if -math.pi < a <= math.pi:
        return a
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def advance_vehicle(v: VehicleState, control: Control, dt: float,
                    limits: ControlLimits = LIMITS) -> VehicleState:
    control = control.clamped(limits)
    heading = wrap_angle(v.heading + control.steer * dt)
    speed = max(0.0, v.speed + control.accel * dt)
    # report the acceleration actually realised, so a stopped car reads 0
    accel = (speed - v.speed) / dt
    x = v.x + speed * dt * math.cos(heading)
    y = v.y + speed * dt * math.sin(heading)
    return replace(v, x=x, y=y, heading=heading, speed=speed, accel=accel)


def step_world(world: WorldState, controls: Sequence[Control], dt: float = DT,
               limits: ControlLimits = LIMITS) -> WorldState:
    """Advance every vehicle by one step. ``controls[0]`` drives the ego."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if len(controls) != 1 + len(world.npcs):
        raise ValueError(f"expected {1 + len(world.npcs)} controls, got {len(controls)}")
    ego = advance_vehicle(world.ego, controls[0], dt, limits)
    npcs = tuple(advance_vehicle(v, c, dt, limits) for v, c in zip(world.npcs, controls[1:]))
    return WorldState(ego=ego, npcs=npcs, road=world.road, step=world.step + 1, dt=dt)


def lane_of(road: RoadModel, position: tuple[float, float]) -> Optional[int]:
    """Lane index containing ``position``, or None when off the road band."""
    y = position[1]
    if not 0.0 <= y < road.width:
        return None
    return min(int(math.floor(y / road.lane_width)), road.lane_count - 1)


def _project(points, ax, ay):
    lo = hi = points[0][0] * ax + points[0][1] * ay
    for px, py in points[1:]:
        p = px * ax + py * ay
        if p < lo:
            lo = p
        elif p > hi:
            hi = p
    return lo, hi


def footprints_overlap(a: VehicleState, b: VehicleState) -> bool:
    """Separating-axis test between two oriented rectangles.

    Touching edges count as overlap.
    """
    reach = 0.5 * (math.hypot(a.length, a.width) + math.hypot(b.length, b.width))
    dx, dy = b.x - a.x, b.y - a.y
    if dx * dx + dy * dy > reach * reach:
        return False
    pa, pb = a.corners(), b.corners()
    for h in (a.heading, b.heading):
        c, s = math.cos(h), math.sin(h)
        for ax, ay in ((c, s), (-s, c)):
            lo_a, hi_a = _project(pa, ax, ay)
            lo_b, hi_b = _project(pb, ax, ay)
            if hi_a < lo_b or hi_b < lo_a:
                return False
    return True


def detect_collision(world: WorldState) -> Optional[CollisionEvent]:
    """First ego/NPC overlap (lowest NPC index), else ego leaving the road."""
    ego = world.ego
    for i, npc in enumerate(world.npcs):
        if footprints_overlap(ego, npc):
            rvx = ego.speed * math.cos(ego.heading) - npc.speed * math.cos(npc.heading)
            rvy = ego.speed * math.sin(ego.heading) - npc.speed * math.sin(npc.heading)
            return CollisionEvent(world.sim_time, i, math.hypot(rvx, rvy))
    if lane_of(world.road, ego.position) is None:
        return CollisionEvent(world.sim_time, STATIC_OBJECT, ego.speed)
    return None


def is_finite_state(world: WorldState) -> bool:
    for v in world.vehicles:
        if not (math.isfinite(v.x) and math.isfinite(v.y)
                and math.isfinite(v.heading) and math.isfinite(v.speed)):
            return False
    return True
