import math

import pytest
from hypothesis import given, settings, strategies as st
from shapely.geometry import Polygon

from gridfuzz.road import (Control, RoadModel, VehicleState, WorldState, detect_collision,
                           footprints_overlap, lane_of, step_world, wrap_angle)

ROAD = RoadModel()


def world(ego, *npcs, road=ROAD):
    return WorldState(ego, tuple(npcs), road)


def test_straight_line_kinematics():
    w = world(VehicleState(0.0, 1.75, 0.0, 10.0))
    out = step_world(w, [Control()], 0.1)
    assert out.ego.x == pytest.approx(1.0)
    assert out.ego.y == pytest.approx(1.75)
    assert out.sim_time == pytest.approx(0.1)


def test_speed_never_goes_negative():
    w = world(VehicleState(0.0, 1.75, 0.0, 1.0))
    out = step_world(w, [Control(0.0, -20.0)], 0.1)
    assert out.ego.speed == 0.0


def test_axis_aligned_motion():
    w = world(VehicleState(0.0, 0.0, math.pi / 2, 5.0))
    out = step_world(w, [Control()], 0.2)
    assert out.ego.x == pytest.approx(0.0, abs=1e-12)
    assert out.ego.y == pytest.approx(1.0)


def test_controls_are_clamped_not_rejected():
    w = world(VehicleState(0.0, 1.75, 0.0, 10.0))
    out = step_world(w, [Control(100.0, 100.0)], 0.1)
    assert out.ego.heading == pytest.approx(0.06)
    assert out.ego.speed == pytest.approx(10.4)


def test_step_requires_one_control_per_vehicle():
    w = world(VehicleState(0, 1.75), VehicleState(10, 1.75))
    with pytest.raises(ValueError):
        step_world(w, [Control()], 0.1)


def test_coincident_vehicles_collide():
    ev = world(VehicleState(0, 1.75), VehicleState(0, 1.75))
    assert detect_collision(ev).npc_index == 0


def test_distant_vehicles_do_not_collide():
    assert detect_collision(world(VehicleState(0, 1.75, length=5), VehicleState(100, 1.75, length=5))) is None


def _poly(v):
    return Polygon(v.corners())


def test_small_longitudinal_overlap_matches_polygon_oracle():
    a = VehicleState(0.0, 1.75, 0.0, 0.0, 0.0, 5.0, 2.0)
    b = VehicleState(4.9, 1.75, 0.0, 0.0, 0.0, 5.0, 2.0)
    inter = _poly(a).intersection(_poly(b))
    assert inter.area == pytest.approx(0.1 * 2.0)
    assert detect_collision(world(a, b)).npc_index == 0


def test_lowest_index_reported_on_ties():
    ego = VehicleState(0, 1.75)
    assert detect_collision(world(ego, VehicleState(100, 1.75), VehicleState(1, 1.75),
                                  VehicleState(0.5, 1.75))).npc_index == 1


def test_ego_leaving_road_is_a_static_object_event():
    ev = detect_collision(world(VehicleState(0, -0.5), VehicleState(100, 1.75)))
    assert ev.off_road and ev.npc_index == "static-object"


@pytest.mark.parametrize("y,lane", [(1.0, 0), (3.5, 1), (13.99, 3)])
def test_lane_of(y, lane):
    assert lane_of(ROAD, (0.0, y)) == lane


@pytest.mark.parametrize("y", [-0.1, 14.0, 100.0])
def test_lane_of_off_road(y):
    assert lane_of(ROAD, (0.0, y)) is None


def test_invalid_road_rejected():
    with pytest.raises(ValueError):
        RoadModel(lane_count=1)


def test_wrap_angle_range():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)


vehicles = st.builds(
    VehicleState,
    x=st.floats(-8, 8), y=st.floats(-8, 8), heading=st.floats(-math.pi, math.pi),
    speed=st.just(0.0), accel=st.just(0.0),
    length=st.floats(1.0, 6.0), width=st.floats(0.5, 3.0),
)


@settings(max_examples=300, deadline=None)
@given(vehicles, vehicles)
def test_overlap_is_symmetric_and_matches_shapely(a, b):
    assert footprints_overlap(a, b) == footprints_overlap(b, a)
    pa, pb = _poly(a), _poly(b)
    # skip grazing contacts where float rounding decides
    if pa.distance(pb) > 1e-6 or pa.intersection(pb).area > 1e-6:
        assert footprints_overlap(a, b) == pa.intersects(pb)


def _trajectory(controls, dt):
    w = world(VehicleState(0, 5.25, 0.0, 20.0), VehicleState(30, 8.75, 0.1, 15.0))
    out = []
    for c in controls:
        w = step_world(w, c, dt)
        out.append(w)
    return out


def test_determinism_bit_identical():
    controls = [[Control(0.01 * math.sin(i), 0.3), Control(-0.02, -0.1)] for i in range(300)]
    assert _trajectory(controls, 1 / 30) == _trajectory(controls, 1 / 30)


def test_sim_time_is_step_count_times_dt():
    dt = 1 / 30
    w = world(VehicleState(0, 1.75, 0, 10))
    for _ in range(1000):
        w = step_world(w, [Control()], dt)
    assert w.step == 1000
    assert w.sim_time == 1000 * dt


@pytest.mark.parametrize("closing", [5.0, 20.0, 26.8224, 40.0, 2 * 26.8224])
@pytest.mark.parametrize("lateral", [0.0, 0.9, 1.8])
def test_no_tunneling_at_highway_closing_speeds(closing, lateral):
    dt = 1 / 30
    ego = VehicleState(0.0, 5.25, 0.0, closing)
    npc = VehicleState(60.0, 5.25 + lateral, 0.0, 0.0)
    w = world(ego, npc)
    for _ in range(1000):
        w = step_world(w, [Control(), Control()], dt)
        if detect_collision(w):
            break
    else:
        pytest.fail("approach never detected")
    depth = (w.ego.x + w.ego.length / 2) - (w.npcs[0].x - w.npcs[0].length / 2)
    assert 0 <= depth <= w.ego.length / 2
