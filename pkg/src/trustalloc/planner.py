"""Per-robot symbolic motion planning on the grid.

A motion specification is a short phase sequence over reachability
predicates: optionally "get within sensing range of the predecessor's
station" (where completion of the previous action can be read), then
"stand on the own station".  Planning searches the product of the
robot's grid transition system with that phase automaton, so two-phase
routes are minimized jointly rather than leg by leg.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterator

from .errors import Unreachable
from .world import Cell, DIRECTIONS, GridWorld, RobotState, manhattan

_DIRECTION_ORDER = ("N", "E", "S", "W")


@dataclass(frozen=True)
class Phase:
    """One reachability predicate of a motion specification."""

    kind: str  # "near" or "at"
    symbol: str
    cell: Cell
    radius: int = 0

    def satisfied(self, cell: Cell) -> bool:
        if self.kind == "at":
            return cell == self.cell
        return manhattan(cell, self.cell) <= self.radius


@dataclass(frozen=True)
class SpecAutomaton:
    """Acyclic phase sequence; the final phase is always "at own station"."""

    phases: tuple[Phase, ...]

    def __post_init__(self) -> None:
        if not self.phases or self.phases[-1].kind != "at":
            raise ValueError("a motion spec must end at the robot's own station")

    def advance(self, phase_idx: int, cell: Cell) -> int:
        """Largest phase index reachable by evaluating predicates at `cell`."""
        while phase_idx < len(self.phases) and self.phases[phase_idx].satisfied(cell):
            phase_idx += 1
        return phase_idx

    def accepting(self, phase_idx: int) -> bool:
        return phase_idx == len(self.phases)


def build_spec(
    world: GridWorld, symbol: str, predecessor: str | None
) -> SpecAutomaton:
    """Motion spec for performing `symbol`, optionally verifying its predecessor.

    The verification phase targets any cell within sensing range of the
    predecessor's station, which is where the completion state becomes
    readable.
    """
    if symbol not in world.stations:
        raise KeyError(f"no station for action {symbol!r}")
    phases: list[Phase] = []
    if predecessor is not None:
        if predecessor not in world.stations:
            raise KeyError(f"no station for predecessor {predecessor!r}")
        phases.append(
            Phase("near", predecessor, world.stations[predecessor],
                  world.sensing_radius)
        )
    phases.append(Phase("at", symbol, world.stations[symbol]))
    return SpecAutomaton(tuple(phases))


@dataclass
class TransitionSystem:
    """4-connected grid graph minus blocked cells, with per-move cost."""

    width: int
    height: int
    blocked: frozenset[Cell]
    start: Cell
    labels: dict[str, Cell]
    move_cost: float = 1.0

    def __post_init__(self) -> None:
        if self.move_cost < 0:
            raise ValueError("move cost must be nonnegative")
        if self.start in self.blocked:
            raise ValueError("the start cell cannot be blocked")

    def free(self, cell: Cell) -> bool:
        return (
            0 <= cell[0] < self.width
            and 0 <= cell[1] < self.height
            and cell not in self.blocked
        )

    def neighbors(self, cell: Cell) -> Iterator[Cell]:
        for name in _DIRECTION_ORDER:
            dx, dy = DIRECTIONS[name]
            nxt = (cell[0] + dx, cell[1] + dy)
            if self.free(nxt):
                yield nxt

    def cell_count(self) -> int:
        return sum(
            1
            for x in range(self.width)
            for y in range(self.height)
            if (x, y) not in self.blocked
        )

    def move_count(self) -> int:
        return sum(
            1
            for x in range(self.width)
            for y in range(self.height)
            if self.free((x, y))
            for _ in self.neighbors((x, y))
        )


def build_transition_system(world: GridWorld, robot: RobotState) -> TransitionSystem:
    """The robot's current motion graph: known obstacles and neighbors'
    announced next cells are inaccessible; its own cell always remains."""
    blocked = (set(robot.known_obstacles) | set(robot.neighbor_reserved)) - {robot.cell}
    return TransitionSystem(
        width=world.width,
        height=world.height,
        blocked=frozenset(blocked),
        start=robot.cell,
        labels=dict(world.stations),
    )


class ProductAutomaton:
    """Synchronized product of a transition system with a phase spec."""

    def __init__(self, ts: TransitionSystem, spec: SpecAutomaton) -> None:
        self.ts = ts
        self.spec = spec
        self.initial = (ts.start, spec.advance(0, ts.start))

    def successors(self, state: tuple[Cell, int]) -> Iterator[tuple[Cell, int]]:
        cell, phase = state
        for nxt in self.ts.neighbors(cell):
            yield (nxt, self.spec.advance(phase, nxt))

    def accepting(self, state: tuple[Cell, int]) -> bool:
        return self.spec.accepting(state[1])

    def reachable_states(self) -> set[tuple[Cell, int]]:
        seen = {self.initial}
        stack = [self.initial]
        while stack:
            for nxt in self.successors(stack.pop()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    def to_dot(self) -> str:
        lines = ["digraph product {"]
        states = sorted(self.reachable_states())
        index = {s: i for i, s in enumerate(states)}
        for s, i in index.items():
            shape = "doublecircle" if self.accepting(s) else "circle"
            lines.append(f'  n{i} [label="{s[0]},{s[1]}", shape={shape}];')
        for s in states:
            for nxt in self.successors(s):
                lines.append(f"  n{index[s]} -> n{index[nxt]};")
        lines.append("}")
        return "\n".join(lines)


@dataclass(frozen=True)
class MotionPlan:
    """Cell sequence a robot will follow, including its current cell."""

    cells: tuple[Cell, ...]
    cost: float

    def remaining(self, position_index: int) -> tuple[Cell, ...]:
        return self.cells[position_index + 1:]


def plan(ts: TransitionSystem, spec: SpecAutomaton) -> MotionPlan:
    """Minimum-cost accepted run of the product, projected onto cells.

    Equal-cost ties resolve by expansion order N, E, S, W, making the
    returned path deterministic.
    """
    product = ProductAutomaton(ts, spec)
    start = product.initial
    if product.accepting(start):
        return MotionPlan(cells=(ts.start,), cost=0.0)

    counter = 0
    heap = [(0.0, counter, start)]
    parents: dict[tuple[Cell, int], tuple[Cell, int] | None] = {start: None}
    settled: set[tuple[Cell, int]] = set()
    while heap:
        cost, _, state = heapq.heappop(heap)
        if state in settled:
            continue
        settled.add(state)
        if product.accepting(state):
            cells = []
            cursor: tuple[Cell, int] | None = state
            while cursor is not None:
                cells.append(cursor[0])
                cursor = parents[cursor]
            cells.reverse()
            return MotionPlan(cells=tuple(cells), cost=cost)
        for nxt in product.successors(state):
            if nxt in settled or nxt in parents:
                continue
            parents[nxt] = state
            counter += 1
            heapq.heappush(heap, (cost + ts.move_cost, counter, nxt))
    raise Unreachable("no run of the product reaches the goal")


def replan(
    current: MotionPlan,
    position: Cell,
    newly_known: frozenset[Cell] | set[Cell],
    world: GridWorld,
    robot: RobotState,
    spec: SpecAutomaton,
    position_index: int | None = None,
) -> tuple[MotionPlan, int]:
    """Re-plan when fresh obstacle knowledge invalidates the remaining path.

    Returns the (possibly unchanged) plan and the number of newly known
    obstacles that sat on the remaining path, which feeds the robot's
    performance reward.
    """
    if position_index is None:
        try:
            position_index = current.cells.index(position)
        except ValueError as exc:
            raise ValueError(f"{position} is not on the current plan") from exc
    elif current.cells[position_index] != position:
        raise ValueError("position_index does not match position")
    remaining = set(current.remaining(position_index))
    avoided = len(remaining & set(newly_known))
    if avoided == 0:
        return current, 0
    fresh = plan(build_transition_system(world, robot), spec)
    return fresh, avoided
