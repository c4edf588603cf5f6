"""Ego-relative 3x3 position grid, Position-Instructions and the NPC controller.

Cells are numbered around the ego in ring order. Seen from above with the
ego (E) driving to the right and left = +y::

    7 8 1
    6 E 2
    5 4 3
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .road import Control, ControlLimits, LIMITS, RoadModel, VehicleState, WorldState, lane_of, wrap_angle

# (forward, left) offsets in cell units
CELL_OFFSETS = {
    1: (1, 1),
    2: (1, 0),
    3: (1, -1),
    4: (0, -1),
    5: (-1, -1),
    6: (-1, 0),
    7: (-1, 1),
    8: (0, 1),
}
CELLS = tuple(range(1, 9))
_OFFSET_TO_CELL = {v: k for k, v in CELL_OFFSETS.items()}


def check_cell(cell: int) -> int:
    if cell not in CELL_OFFSETS:
        raise ValueError(f"grid cell must be in 1..8, got {cell!r}")
    return cell


@dataclass(frozen=True)
class GridFrame:
    x: float
    y: float
    heading: float
    cell_length: float
    cell_width: float

    @classmethod
    def from_world(cls, world: WorldState) -> "GridFrame":
        ego = world.ego
        return cls(ego.x, ego.y, ego.heading, ego.length, world.road.lane_width)

    def to_world(self, forward: float, left: float) -> tuple[float, float]:
        c, s = math.cos(self.heading), math.sin(self.heading)
        return (self.x + forward * c - left * s, self.y + forward * s + left * c)

    def to_local(self, x: float, y: float) -> tuple[float, float]:
        c, s = math.cos(self.heading), math.sin(self.heading)
        dx, dy = x - self.x, y - self.y
        return (dx * c + dy * s, -dx * s + dy * c)


@dataclass(frozen=True)
class PositionInstruction:
    cell: int
    speed: float

    def __post_init__(self):
        check_cell(self.cell)
        if self.speed < 0:
            raise ValueError("target speed must be non-negative")

    def to_list(self) -> list:
        return [self.cell, self.speed]


def cell_center(frame: GridFrame, cell: int) -> tuple[float, float]:
    fwd, left = CELL_OFFSETS[check_cell(cell)]
    return frame.to_world(fwd * frame.cell_length, left * frame.cell_width)


def locate_cell(frame: GridFrame, npc: VehicleState) -> Optional[int]:
    """Cell whose rectangle holds the NPC's center; None outside the grid or in the ego cell."""
    fwd, left = frame.to_local(npc.x, npc.y)
    i = math.floor(fwd / frame.cell_length + 0.5)
    j = math.floor(left / frame.cell_width + 0.5)
    if abs(i) > 1 or abs(j) > 1:
        return None
    return _OFFSET_TO_CELL.get((i, j))


def adjacent_cells(cell: int) -> frozenset[int]:
    check_cell(cell)
    return frozenset({(cell % 8) + 1, ((cell - 2) % 8) + 1})


def cell_on_road(cell: int, world: WorldState) -> bool:
    return lane_of(world.road, cell_center(GridFrame.from_world(world), cell)) is not None


def is_pi_valid(current: int, nxt: int, world: WorldState) -> bool:
    """Whether moving from ``current`` to ``nxt`` is a legal, on-road step.

    Staying in the same cell is a hold and counts as legal.
    """
    if nxt != current and nxt not in adjacent_cells(current):
        return False
    return cell_on_road(nxt, world)


def repair_pi(current: int, proposed: int, world: WorldState, rng) -> int:
    """Replace an illegal target with a random legal neighbour of ``current``.

    Falls back to ``current`` (hold) when no neighbour is on the road.
    """
    if is_pi_valid(current, proposed, world):
        return proposed
    options = sorted(c for c in adjacent_cells(current) if cell_on_road(c, world))
    if not options:
        return current
    if len(options) == 1:
        return options[0]
    return options[0] if rng.random() < 0.5 else options[1]


@dataclass(frozen=True)
class PidGains:
    lateral: tuple[float, float, float] = (2.5, 0.0, 0.5)
    longitudinal: tuple[float, float, float] = (1.5, 0.1, 0.0)
    integrator_clamp: float = 5.0
    # aim point for the heading loop sits at least this far ahead of the NPC
    lookahead_min: float = 6.0
    lookahead_time: float = 0.8

    def __post_init__(self):
        if min(self.lateral + self.longitudinal) < 0 or self.integrator_clamp < 0:
            raise ValueError("PID gains must be non-negative")


@dataclass(frozen=True)
class PidState:
    lat_integral: float = 0.0
    lat_prev: Optional[float] = None
    lon_integral: float = 0.0
    lon_prev: Optional[float] = None


def _pid(error, integral, prev, gains, clamp, dt):
    kp, ki, kd = gains
    integral = min(max(integral + error * dt, -clamp), clamp)
    deriv = 0.0 if prev is None else (error - prev) / dt
    return kp * error + ki * integral + kd * deriv, integral


def pid_control(npc: VehicleState, waypoint: tuple[float, float], target_speed: float,
                gains: PidGains, dt: float, state: PidState = PidState(),
                limits: ControlLimits = LIMITS) -> tuple[Control, PidState]:
    """Steer toward ``waypoint`` and track ``target_speed``.

    The heading loop aims at the waypoint when it is far enough ahead;
    otherwise at a point ``lookahead`` ahead on the waypoint's lateral line,
    so an NPC never turns around to reach a cell beside or behind it.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    dx, dy = waypoint[0] - npc.x, waypoint[1] - npc.y
    # road runs along +x; measure the aim point in road axes
    lookahead = max(gains.lookahead_min, gains.lookahead_time * npc.speed)
    desired = math.atan2(dy, max(dx, lookahead))
    heading_err = wrap_angle(desired - npc.heading)
    steer, lat_i = _pid(heading_err, state.lat_integral, state.lat_prev,
                        gains.lateral, gains.integrator_clamp, dt)
    speed_err = target_speed - npc.speed
    accel, lon_i = _pid(speed_err, state.lon_integral, state.lon_prev,
                        gains.longitudinal, gains.integrator_clamp, dt)
    return (Control(steer, accel).clamped(limits),
            PidState(lat_i, heading_err, lon_i, speed_err))


@dataclass(frozen=True)
class PlanTiming:
    dwell: float = 1.0
    timeout: float = 10.0
    # speed-reference gain on the along-track distance to the target cell (1/s)
    track_gain: float = 0.5


@dataclass(frozen=True)
class PlanState:
    cursor: int = 0
    held_steps: int = 0
    elapsed_steps: int = 0


def advance_plan(plan, state: PlanState, npc: VehicleState, frame: GridFrame,
                 dt: float, timing: PlanTiming = PlanTiming()):
    """Account one step of progress on the active PI and move the cursor on.

    Returns ``(active PI, new state)``. The cursor moves after the NPC has sat
    in its target cell for ``timing.dwell`` seconds, or after
    ``timing.timeout`` seconds regardless. The last PI is held forever.
    """
    if not 0 <= state.cursor < len(plan):
        raise IndexError("plan cursor out of range")
    active = plan[state.cursor]
    held = state.held_steps + 1 if locate_cell(frame, npc) == active.cell else 0
    elapsed = state.elapsed_steps + 1
    last = state.cursor == len(plan) - 1
    # compare in whole steps; tolerance absorbs 1/30-style rounding
    if not last and (held * dt >= timing.dwell - 1e-9 or elapsed * dt >= timing.timeout - 1e-9):
        nxt = PlanState(state.cursor + 1, 0, 0)
        return plan[nxt.cursor], nxt
    return active, PlanState(state.cursor, held, elapsed)


def speed_reference(npc: VehicleState, waypoint: tuple[float, float], frame: GridFrame,
                    pi_speed: float, road: RoadModel, gain: float) -> float:
    """PI speed biased by the along-track distance to the waypoint.

    An NPC whose PI speed equals the ego's converges onto its cell; other
    speeds settle it ahead of or behind the cell in proportion.
    """
    c, s = math.cos(frame.heading), math.sin(frame.heading)
    along = (waypoint[0] - npc.x) * c + (waypoint[1] - npc.y) * s
    return min(max(pi_speed + gain * along, 0.0), road.speed_limit)


def clamp_to_lanes(road: RoadModel, point: tuple[float, float]) -> tuple[float, float]:
    lo, hi = road.lane_center(0), road.lane_center(road.lane_count - 1)
    return (point[0], min(max(point[1], lo), hi))


@dataclass
class PlanFollower:
    """Executes one NPC's PI sequence inside a running scenario.

    ``plan`` is mutated in place when a PI is repaired so the caller can write
    the executed genes back into the genome.
    """

    plan: list
    start_cell: int
    gains: PidGains
    timing: PlanTiming
    rng: object
    plan_state: PlanState = field(default_factory=PlanState)
    pid_state: PidState = field(default_factory=PidState)
    executed: list = field(default_factory=list)
    repairs: int = 0
    _activated: int = -1

    def _activate(self, world: WorldState):
        cursor = self.plan_state.cursor
        prev = self.executed[-1] if self.executed else self.start_cell
        pi = self.plan[cursor]
        cell = repair_pi(prev, pi.cell, world, self.rng)
        if cell != pi.cell:
            self.plan[cursor] = PositionInstruction(cell, pi.speed)
            self.repairs += 1
        self.executed.append(cell)
        self._activated = cursor

    def control(self, world: WorldState, index: int) -> Control:
        npc = world.npcs[index]
        frame = GridFrame.from_world(world)
        if self._activated < 0:
            self._activate(world)
        _, self.plan_state = advance_plan(self.plan, self.plan_state, npc, frame,
                                          world.dt, self.timing)
        if self.plan_state.cursor != self._activated:
            self._activate(world)
        pi = self.plan[self.plan_state.cursor]
        waypoint = clamp_to_lanes(world.road, cell_center(frame, pi.cell))
        v_ref = speed_reference(npc, waypoint, frame, pi.speed, world.road, self.timing.track_gain)
        ctrl, self.pid_state = pid_control(npc, waypoint, v_ref, self.gains, world.dt,
                                           self.pid_state)
        return ctrl
