"""Run one scenario: ego agent plus scripted NPCs until a violation or the time budget."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .ego import EgoMemory, EgoParams, ego_decide
from .grid import PidGains, PlanTiming
from .metrics import FitnessRecord, FitnessWeights, SafetySample, finalize_fitness, sample_safety
from .road import (DT, VEHICLE_LENGTH, VEHICLE_WIDTH, CollisionEvent, RoadModel, VehicleState,
                   WorldState, detect_collision, is_finite_state, step_world)

log = logging.getLogger(__name__)

SAMPLE_EVERY = 5  # 30 Hz physics / 5 = 6 Hz metric sampling

COLLISION = "collision"
OFF_ROAD = "off-road"
TIMEOUT = "timeout"
ERROR = "error"


@dataclass(frozen=True)
class ScenarioTemplate:
    """Everything about a scenario that is not part of the genome."""

    road: RoadModel = field(default_factory=RoadModel)
    ego: EgoParams = field(default_factory=EgoParams)
    weights: FitnessWeights = field(default_factory=FitnessWeights)
    pid: PidGains = field(default_factory=PidGains)
    timing: PlanTiming = field(default_factory=PlanTiming)
    npc_count: int = 2
    ego_lane: int = 1
    ego_start_x: float = 50.0
    vehicle_length: float = VEHICLE_LENGTH
    vehicle_width: float = VEHICLE_WIDTH
    dt: float = DT

    def __post_init__(self):
        if not 0 <= self.ego_lane < self.road.lane_count:
            raise ValueError("ego_lane outside the road")
        if self.npc_count < 1:
            raise ValueError("npc_count must be >= 1")

    def ego_start(self) -> VehicleState:
        return VehicleState(self.ego_start_x, self.road.lane_center(self.ego_lane), 0.0,
                            min(self.ego.cruise_speed, self.road.speed_limit), 0.0,
                            self.vehicle_length, self.vehicle_width)

    def vehicle(self, x: float, y: float, speed: float) -> VehicleState:
        return VehicleState(x, y, 0.0, speed, 0.0, self.vehicle_length, self.vehicle_width)


@dataclass
class ScenarioResult:
    outcome: str
    samples: list
    fitness: FitnessRecord
    event: Optional[CollisionEvent] = None
    frames: Optional[list] = None
    steps: int = 0

    @property
    def collision_time(self) -> Optional[float]:
        return None if self.event is None else self.event.time

    @property
    def sim_time(self) -> float:
        return self.fitness.et


def frame_row(world: WorldState) -> dict:
    return {
        "t": world.sim_time,
        "vehicles": [[v.x, v.y, v.heading, v.speed, v.accel] for v in world.vehicles],
    }


def run_scenario(template: ScenarioTemplate, npcs: Sequence[VehicleState], drivers: Sequence,
                 budget: float, record_frames: bool = False) -> ScenarioResult:
    """Simulate until collision, ego off-road, road end, or ``budget`` seconds.

    Each driver exposes ``control(world, index) -> Control`` and owns its own
    state. Metrics are sampled every 5th step, plus once at the terminating
    event if that step is not already a sampling step.
    """
    dt = template.dt
    world = WorldState(template.ego_start(), tuple(npcs), template.road, 0, dt)
    memory = EgoMemory()
    max_steps = int(round(budget / dt))
    samples: list[SafetySample] = []
    frames = [frame_row(world)] if record_frames else None
    event = None
    outcome = TIMEOUT
    n = 0
    for n in range(1, max_steps + 1):
        ego_ctrl, memory = ego_decide(world, template.ego, memory)
        controls = [ego_ctrl] + [d.control(world, i) for i, d in enumerate(drivers)]
        world = step_world(world, controls, dt)
        if not is_finite_state(world):
            log.warning("non-finite vehicle state at t=%.3f; aborting scenario", world.sim_time)
            outcome = ERROR
            break
        if frames is not None:
            frames.append(frame_row(world))
        event = detect_collision(world)
        if event is not None or n % SAMPLE_EVERY == 0:
            samples.append(sample_safety(world))
        if event is not None:
            outcome = OFF_ROAD if event.off_road else COLLISION
            break
        if world.ego.x >= template.road.road_length:
            # road exhausted: treated like a timeout, no violation
            break

    if outcome == ERROR:
        return ScenarioResult(ERROR, samples, min_score_record(template, budget), None, frames, n)
    if not samples:
        samples.append(sample_safety(world))
    violated = event is not None
    et = event.time if violated else budget
    fitness = finalize_fitness(samples, violated, et, budget, template.weights)
    return ScenarioResult(outcome, samples, fitness, event, frames, n)


def min_score_record(template: ScenarioTemplate, budget: float) -> FitnessRecord:
    return FitnessRecord(mettc=template.weights.ettc_cap, md=template.weights.d_cap, sd_min=0.0,
                         sd_violation=0.0, et=budget, collided=False, score=0.0)
