import random
from collections import deque

import pytest

from trustalloc.allocation import RobotProfile
from trustalloc.errors import Unreachable
from trustalloc.planner import (
    Phase,
    ProductAutomaton,
    SpecAutomaton,
    build_spec,
    build_transition_system,
    plan,
    replan,
)
from trustalloc.world import GridWorld, RobotState


def grid_bfs_distances(width, height, blocked, source):
    """Oracle: plain breadth-first distances over free cells."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        x, y = queue.popleft()
        for nx, ny in ((x, y + 1), (x + 1, y), (x, y - 1), (x - 1, y)):
            if not (0 <= nx < width and 0 <= ny < height):
                continue
            if (nx, ny) in blocked or (nx, ny) in dist:
                continue
            dist[(nx, ny)] = dist[(x, y)] + 1
            queue.append((nx, ny))
    return dist


def make_world(width=5, height=5, obstacles=(), stations=None, radius=2):
    return GridWorld(
        width=width,
        height=height,
        obstacles=frozenset(obstacles),
        stations=stations or {},
        sensing_radius=radius,
        comm_radius=radius,
    )


def make_robot(cell, known=(), reserved=()):
    return RobotState(
        profile=RobotProfile("r1", frozenset("a")),
        cell=cell,
        known_obstacles=set(known),
        neighbor_reserved=set(reserved),
    )


class TestSpec:
    def test_two_phase_with_predecessor(self):
        world = make_world(10, 10, stations={"a": (2, 8), "b": (5, 8)})
        spec = build_spec(world, "b", "a")
        assert [p.kind for p in spec.phases] == ["near", "at"]
        assert spec.phases[0].cell == (2, 8)
        assert spec.phases[0].radius == world.sensing_radius
        assert spec.phases[1].cell == (5, 8)

    def test_single_phase_without_predecessor(self):
        world = make_world(10, 10, stations={"g": (6, 2)})
        spec = build_spec(world, "g", None)
        assert [p.kind for p in spec.phases] == ["at"]

    def test_word_order_predecessor(self):
        world = make_world(10, 10, stations={"b": (5, 8), "c": (8, 8)})
        spec = build_spec(world, "c", "b")
        assert spec.phases[0].symbol == "b"
        assert spec.phases[1].symbol == "c"

    def test_spec_must_end_at_station(self):
        with pytest.raises(ValueError):
            SpecAutomaton((Phase("near", "a", (0, 0), 2),))


class TestTransitionSystem:
    def test_empty_grid_counts(self):
        world = make_world(3, 3)
        ts = build_transition_system(world, make_robot((0, 0)))
        assert ts.cell_count() == 9
        assert ts.move_count() == 24

    def test_center_obstacle_removes_arcs(self):
        world = make_world(3, 3)
        ts = build_transition_system(world, make_robot((0, 0), known={(1, 1)}))
        assert ts.cell_count() == 8
        assert ts.move_count() == 16

    def test_reserved_neighbor_cell_excluded(self):
        world = make_world(3, 3)
        ts = build_transition_system(
            world, make_robot((0, 0), reserved={(1, 0)})
        )
        assert not ts.free((1, 0))

    def test_own_cell_never_blocked(self):
        world = make_world(3, 3)
        ts = build_transition_system(
            world, make_robot((1, 1), reserved={(1, 1)})
        )
        assert ts.free((1, 1))


class TestPlan:
    def test_straight_line(self):
        world = make_world(5, 5, stations={"x": (3, 0)})
        ts = build_transition_system(world, make_robot((0, 0)))
        motion = plan(ts, build_spec(world, "x", None))
        assert motion.cost == 3
        assert motion.cells == ((0, 0), (1, 0), (2, 0), (3, 0))

    def test_two_phase_cost_matches_two_leg_enumeration(self):
        world = make_world(
            7, 7, stations={"p": (1, 5), "x": (5, 1)}, radius=1,
            obstacles={(3, 3), (2, 4)},
        )
        robot = make_robot((0, 0), known={(3, 3), (2, 4)})
        ts = build_transition_system(world, robot)
        motion = plan(ts, build_spec(world, "x", "p"))

        blocked = {(3, 3), (2, 4)}
        from_start = grid_bfs_distances(7, 7, blocked, (0, 0))
        best = None
        for via, d1 in from_start.items():
            if abs(via[0] - 1) + abs(via[1] - 5) > 1:
                continue
            from_via = grid_bfs_distances(7, 7, blocked, via)
            if (5, 1) not in from_via:
                continue
            total = d1 + from_via[(5, 1)]
            best = total if best is None else min(best, total)
        assert motion.cost == best

    def test_goal_enclosed_is_unreachable(self):
        walls = {(2, 1), (2, 3), (1, 2), (3, 2)}
        world = make_world(5, 5, stations={"x": (2, 2)}, obstacles=walls)
        robot = make_robot((0, 0), known=walls)
        ts = build_transition_system(world, robot)
        with pytest.raises(Unreachable):
            plan(ts, build_spec(world, "x", None))

    def test_already_at_goal(self):
        world = make_world(5, 5, stations={"x": (2, 2)})
        ts = build_transition_system(world, make_robot((2, 2)))
        motion = plan(ts, build_spec(world, "x", None))
        assert motion.cells == ((2, 2),)
        assert motion.cost == 0

    def test_plan_avoids_known_obstacles(self):
        world = make_world(5, 5, stations={"x": (4, 0)})
        robot = make_robot((0, 0), known={(2, 0), (2, 1)})
        ts = build_transition_system(world, robot)
        motion = plan(ts, build_spec(world, "x", None))
        assert {(2, 0), (2, 1)}.isdisjoint(motion.cells)
        for a, b in zip(motion.cells, motion.cells[1:]):
            assert abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1


class TestProduct:
    def test_state_bound(self):
        world = make_world(4, 4, stations={"p": (0, 3), "x": (3, 3)}, radius=1)
        ts = build_transition_system(world, make_robot((0, 0)))
        spec = build_spec(world, "x", "p")
        product = ProductAutomaton(ts, spec)
        states = product.reachable_states()
        assert len(states) <= 16 * (len(spec.phases) + 1)

    def test_accepted_runs_respect_phase_order(self):
        world = make_world(6, 6, stations={"p": (1, 4), "x": (5, 0)}, radius=1)
        ts = build_transition_system(world, make_robot((0, 0)))
        spec = build_spec(world, "x", "p")
        motion = plan(ts, spec)
        phase = 0
        for cell in motion.cells:
            phase = spec.advance(phase, cell)
        assert spec.accepting(phase)
        near_index = next(
            i for i, cell in enumerate(motion.cells)
            if spec.phases[0].satisfied(cell)
        )
        assert motion.cells.index((5, 0)) >= near_index

    def test_dot_export(self):
        world = make_world(3, 3, stations={"x": (2, 2)})
        ts = build_transition_system(world, make_robot((0, 0)))
        product = ProductAutomaton(ts, build_spec(world, "x", None))
        dot = product.to_dot()
        assert dot.startswith("digraph") and "doublecircle" in dot


class TestReplan:
    def test_new_obstacle_on_path_triggers_replan(self):
        world = make_world(5, 5, stations={"x": (4, 0)})
        robot = make_robot((0, 0))
        spec = build_spec(world, "x", None)
        ts = build_transition_system(world, robot)
        motion = plan(ts, spec)
        robot.known_obstacles.add((2, 0))
        fresh, avoided = replan(
            motion, (0, 0), {(2, 0)}, world, robot, spec, position_index=0
        )
        assert avoided == 1
        assert (2, 0) not in fresh.cells
        assert fresh.cells[0] == (0, 0) and fresh.cells[-1] == (4, 0)

    def test_off_path_obstacle_keeps_plan(self):
        world = make_world(5, 5, stations={"x": (4, 0)})
        robot = make_robot((0, 0))
        spec = build_spec(world, "x", None)
        motion = plan(build_transition_system(world, robot), spec)
        robot.known_obstacles.add((0, 4))
        same, avoided = replan(
            motion, (0, 0), {(0, 4)}, world, robot, spec, position_index=0
        )
        assert avoided == 0
        assert same is motion

    def test_two_new_obstacles_count_two(self):
        world = make_world(5, 5, stations={"x": (4, 0)})
        robot = make_robot((0, 0))
        spec = build_spec(world, "x", None)
        motion = plan(build_transition_system(world, robot), spec)
        robot.known_obstacles.update({(2, 0), (3, 0)})
        fresh, avoided = replan(
            motion, (0, 0), {(2, 0), (3, 0)}, world, robot, spec, position_index=0
        )
        assert avoided == 2
        assert {(2, 0), (3, 0)}.isdisjoint(fresh.cells)

    def test_idempotent_without_news(self):
        world = make_world(5, 5, stations={"x": (4, 0)})
        robot = make_robot((0, 0))
        spec = build_spec(world, "x", None)
        motion = plan(build_transition_system(world, robot), spec)
        same, avoided = replan(motion, (0, 0), set(), world, robot, spec)
        assert same is motion and avoided == 0


def test_randomized_single_phase_optimality():
    rng = random.Random(99)
    for _ in range(60):
        cells = [(x, y) for x in range(5) for y in range(5)]
        obstacles = set(rng.sample(cells, k=rng.randint(0, 6)))
        free = [c for c in cells if c not in obstacles]
        start, goal = rng.sample(free, k=2)
        world = make_world(5, 5, stations={"x": goal}, obstacles=obstacles)
        robot = make_robot(start, known=obstacles)
        ts = build_transition_system(world, robot)
        spec = build_spec(world, "x", None)
        oracle = grid_bfs_distances(5, 5, obstacles, start)
        if goal not in oracle:
            with pytest.raises(Unreachable):
                plan(ts, spec)
            continue
        motion = plan(ts, spec)
        assert motion.cost == oracle[goal]
        assert motion.cells[0] == start and motion.cells[-1] == goal


def test_randomized_two_phase_optimality():
    rng = random.Random(1234)
    checked = 0
    while checked < 40:
        cells = [(x, y) for x in range(5) for y in range(5)]
        obstacles = set(rng.sample(cells, k=rng.randint(0, 6)))
        free = [c for c in cells if c not in obstacles]
        if len(free) < 3:
            continue
        start, pred, goal = rng.sample(free, k=3)
        world = make_world(
            5, 5, stations={"p": pred, "x": goal}, obstacles=obstacles, radius=1
        )
        robot = make_robot(start, known=obstacles)
        ts = build_transition_system(world, robot)
        spec = build_spec(world, "x", "p")

        from_start = grid_bfs_distances(5, 5, obstacles, start)
        best = None
        for via in free:
            if abs(via[0] - pred[0]) + abs(via[1] - pred[1]) > 1:
                continue
            if via not in from_start:
                continue
            from_via = grid_bfs_distances(5, 5, obstacles, via)
            if goal not in from_via:
                continue
            total = from_start[via] + from_via[goal]
            best = total if best is None else min(best, total)
        if best is None:
            with pytest.raises(Unreachable):
                plan(ts, spec)
        else:
            assert plan(ts, spec).cost == best
        checked += 1
