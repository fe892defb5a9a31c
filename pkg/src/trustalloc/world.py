"""Grid environment, robot state and the scenario file format.

Coordinates are zero-indexed (x = column, y = row) with the origin at the
bottom-left corner; north increments y.  Scenario files are JSON objects
carrying a `schema_version` field; see the bundled `paper_5x3.scn` for a
complete example.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping

from .allocation import RobotProfile
from .automata import Automaton, parse_automaton
from .errors import BlockedMove, CoverageViolation, ParseError, PlacementError
from .trust import TrustParams

Cell = tuple[int, int]

SCHEMA_VERSION = 1

DIRECTIONS: dict[str, Cell] = {
    "N": (0, 1),
    "E": (1, 0),
    "S": (0, -1),
    "W": (-1, 0),
}


def manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


@dataclass
class GridWorld:
    width: int
    height: int
    obstacles: frozenset[Cell]
    stations: dict[str, Cell]
    sensing_radius: int = 2
    comm_radius: int = 2

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def free_cells(self) -> list[Cell]:
        return [
            (x, y)
            for x in range(self.width)
            for y in range(self.height)
            if (x, y) not in self.obstacles
        ]


@dataclass
class RobotState:
    """Mutable per-robot runtime state owned by one session."""

    profile: RobotProfile
    cell: Cell
    battery: float = 1.0
    move_cost: float = 0.005
    low_threshold: float = 0.2
    battery_low: bool = False
    known_obstacles: set[Cell] = field(default_factory=set)
    next_cell: Cell | None = None
    neighbor_reserved: set[Cell] = field(default_factory=set)

    @property
    def id(self) -> str:
        return self.profile.id

    def __post_init__(self) -> None:
        self.battery_low = self.battery < self.low_threshold


@dataclass(frozen=True)
class RobotSpec:
    id: str
    start: Cell
    capabilities: frozenset[str]
    battery: float = 1.0
    prior: Mapping | None = None

    def profile(self) -> RobotProfile:
        return RobotProfile(self.id, self.capabilities)


@dataclass
class ScenarioConfig:
    """Fully validated declarative scenario input."""

    grid: GridWorld
    robots: list[RobotSpec]
    subtask_specs: list[dict]
    trust_raw: dict
    human: dict
    seed: int
    battery_move_cost: float = 0.005
    battery_low_threshold: float = 0.2
    schema_version: int = SCHEMA_VERSION

    def subtasks(self) -> list[Automaton]:
        return [parse_automaton(spec) for spec in self.subtask_specs]

    def profiles(self) -> list[RobotProfile]:
        return [spec.profile() for spec in self.robots]

    def trust_params(self) -> TrustParams:
        return TrustParams.from_dict(self.trust_raw)

    def trust_estimator(self) -> str:
        estimator = self.trust_raw.get("estimator", "mean")
        if estimator not in ("mean", "mode"):
            raise ParseError(f"unknown trust estimator {estimator!r}")
        return estimator

    def prior_spec(self, robot_id: str) -> Mapping | None:
        for spec in self.robots:
            if spec.id == robot_id and spec.prior is not None:
                return spec.prior
        return self.trust_raw.get("prior")

    def make_robot_states(self) -> dict[str, RobotState]:
        return {
            spec.id: RobotState(
                profile=spec.profile(),
                cell=spec.start,
                battery=spec.battery,
                move_cost=self.battery_move_cost,
                low_threshold=self.battery_low_threshold,
            )
            for spec in sorted(self.robots, key=lambda s: s.id)
        }

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "seed": self.seed,
            "grid": {
                "width": self.grid.width,
                "height": self.grid.height,
                "obstacles": [list(c) for c in sorted(self.grid.obstacles)],
                "stations": {k: list(v) for k, v in sorted(self.grid.stations.items())},
                "sensing_radius": self.grid.sensing_radius,
                "comm_radius": self.grid.comm_radius,
            },
            "battery": {
                "move_cost": self.battery_move_cost,
                "low_threshold": self.battery_low_threshold,
            },
            "robots": [
                {
                    "id": spec.id,
                    "start": list(spec.start),
                    "capabilities": sorted(spec.capabilities),
                    "battery": spec.battery,
                    **({"prior": dict(spec.prior)} if spec.prior else {}),
                }
                for spec in self.robots
            ],
            "subtasks": self.subtask_specs,
            "trust": self.trust_raw,
            "human": self.human,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _as_cell(raw, what: str) -> Cell:
    try:
        x, y = int(raw[0]), int(raw[1])
    except (TypeError, ValueError, IndexError) as exc:
        raise ParseError(f"{what} is not an [x, y] pair: {raw!r}") from exc
    return (x, y)


def parse_scenario(raw: Mapping) -> ScenarioConfig:
    """Validate a scenario document already parsed into a mapping."""
    try:
        grid_raw = raw["grid"]
        robots_raw = raw["robots"]
        subtasks_raw = list(raw["subtasks"])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"scenario misses required section: {exc}") from exc

    version = int(raw.get("schema_version", SCHEMA_VERSION))
    if version != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {version}")

    width = int(grid_raw.get("width", 0))
    height = int(grid_raw.get("height", 0))
    if width < 1 or height < 1:
        raise ParseError("grid dimensions must be positive")

    obstacles = frozenset(
        _as_cell(c, "obstacle") for c in grid_raw.get("obstacles", [])
    )
    stations: dict[str, Cell] = {}
    for symbol, cell_raw in grid_raw.get("stations", {}).items():
        stations[str(symbol)] = _as_cell(cell_raw, f"station {symbol}")

    grid = GridWorld(
        width=width,
        height=height,
        obstacles=obstacles,
        stations=stations,
        sensing_radius=int(grid_raw.get("sensing_radius", 2)),
        comm_radius=int(grid_raw.get("comm_radius", 2)),
    )

    for cell in obstacles:
        if not grid.in_bounds(cell):
            raise PlacementError(f"obstacle {cell} is out of bounds")
    for symbol, cell in stations.items():
        if not grid.in_bounds(cell):
            raise PlacementError(f"station {symbol!r} at {cell} is out of bounds")
        if cell in obstacles:
            raise PlacementError(f"station {symbol!r} sits on an obstacle")

    battery_raw = raw.get("battery", {})
    move_cost = float(battery_raw.get("move_cost", 0.005))
    low_threshold = float(battery_raw.get("low_threshold", 0.2))

    robots: list[RobotSpec] = []
    seen_ids: set[str] = set()
    for entry in robots_raw:
        try:
            rid = str(entry["id"])
            start = _as_cell(entry["start"], f"robot {entry['id']} start")
            capabilities = frozenset(str(c) for c in entry["capabilities"])
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed robot entry: {entry!r}") from exc
        if rid in seen_ids:
            raise ParseError(f"duplicate robot id {rid!r}")
        seen_ids.add(rid)
        if not capabilities:
            raise ParseError(f"robot {rid!r} has an empty capability set")
        if not grid.in_bounds(start):
            raise PlacementError(f"robot {rid!r} starts out of bounds at {start}")
        if start in obstacles:
            raise PlacementError(f"robot {rid!r} starts on an obstacle")
        prior = entry.get("prior")
        if prior is not None and prior.get("kind", "gaussian") not in (
            "gaussian", "delta", "uniform"
        ):
            raise ParseError(f"robot {rid!r} has an unknown prior kind")
        robots.append(
            RobotSpec(
                id=rid,
                start=start,
                capabilities=capabilities,
                battery=float(entry.get("battery", 1.0)),
                prior=prior,
            )
        )
    if not robots:
        raise ParseError("scenario declares no robots")

    subtask_specs = [dict(spec) for spec in subtasks_raw]
    automata = [parse_automaton(spec) for spec in subtask_specs]
    needed = frozenset(s for a in automata for s in a.alphabet)
    covered = frozenset(s for r in robots for s in r.capabilities)
    missing = needed - covered
    if missing:
        raise CoverageViolation(
            f"no robot can perform: {', '.join(sorted(missing))}"
        )
    unstationed = needed - frozenset(stations)
    if unstationed:
        raise PlacementError(
            f"actions without a station: {', '.join(sorted(unstationed))}"
        )

    trust_raw = dict(raw.get("trust", {}))
    try:
        TrustParams.from_dict(trust_raw)  # fail fast on bad coefficients
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad trust coefficients: {exc}") from exc
    estimator = trust_raw.get("estimator", "mean")
    if estimator not in ("mean", "mode"):
        raise ParseError(f"unknown trust estimator {estimator!r}")
    human = dict(raw.get("human", {"kind": "threshold", "theta": 0.0}))
    seed = int(raw.get("seed", 0))

    return ScenarioConfig(
        grid=grid,
        robots=robots,
        subtask_specs=subtask_specs,
        trust_raw=trust_raw,
        human=human,
        seed=seed,
        battery_move_cost=move_cost,
        battery_low_threshold=low_threshold,
        schema_version=version,
    )


def load_scenario(text: str) -> ScenarioConfig:
    """Parse and fully validate a scenario document."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"scenario is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ParseError("scenario document must be a JSON object")
    return parse_scenario(raw)


def load_bundled_scenario(name: str) -> ScenarioConfig:
    """Load one of the scenario files shipped with the package."""
    text = resources.files("trustalloc").joinpath(f"data/{name}").read_text()
    return load_scenario(text)


# ---------------------------------------------------------------------------
# sensing, communication, movement
# ---------------------------------------------------------------------------

def sense(world: GridWorld, robot: RobotState) -> frozenset[Cell]:
    """Ground-truth obstacles within Manhattan sensing range of the robot."""
    return frozenset(
        c for c in world.obstacles
        if manhattan(c, robot.cell) <= world.sensing_radius
    )


@dataclass(frozen=True)
class ExchangeUpdate:
    gained: frozenset[Cell]
    reserved: frozenset[Cell]


def exchange_neighbors(
    world: GridWorld, robots: Iterable[RobotState]
) -> dict[str, ExchangeUpdate]:
    """One round of pairwise obstacle/next-state exchange.

    Unions are computed simultaneously from the pre-round sets, so one
    round propagates knowledge a single hop.
    """
    robots = sorted(robots, key=lambda r: r.id)
    before = {r.id: frozenset(r.known_obstacles) for r in robots}
    announced = {r.id: r.next_cell for r in robots}
    updates: dict[str, ExchangeUpdate] = {}
    for robot in robots:
        gained: set[Cell] = set()
        reserved: set[Cell] = set()
        for other in robots:
            if other.id == robot.id:
                continue
            if manhattan(robot.cell, other.cell) > world.comm_radius:
                continue
            gained |= before[other.id] - before[robot.id]
            if announced[other.id] is not None:
                reserved.add(announced[other.id])
        robot.known_obstacles |= gained
        robot.neighbor_reserved = reserved
        updates[robot.id] = ExchangeUpdate(frozenset(gained), frozenset(reserved))
    return updates


def apply_move(world: GridWorld, robot: RobotState, direction: str) -> RobotState:
    """Advance one cell; drains battery and recomputes the low flag."""
    if direction not in DIRECTIONS:
        raise ValueError(f"unknown direction {direction!r}")
    dx, dy = DIRECTIONS[direction]
    target = (robot.cell[0] + dx, robot.cell[1] + dy)
    if not world.in_bounds(target):
        raise BlockedMove(f"{target} is out of bounds")
    if target in world.obstacles:
        raise BlockedMove(f"{target} is an obstacle")
    robot.cell = target
    robot.battery = max(robot.battery - robot.move_cost, 0.0)
    robot.battery_low = robot.battery < robot.low_threshold
    return robot


def direction_between(src: Cell, dst: Cell) -> str:
    delta = (dst[0] - src[0], dst[1] - src[1])
    for name, vec in DIRECTIONS.items():
        if vec == delta:
            return name
    raise ValueError(f"{src} -> {dst} is not a unit move")
