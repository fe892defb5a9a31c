"""Task-allocation automaton synthesis and maximum-trust path search.

Composite states pair one residual language per subtask.  A transition
fires a multi-action: per subtask at most one (robot, symbol) assignment,
with at least one real assignment overall and pairwise-distinct robots.
Every transition consumes at least one symbol, so the reachable graph is
a DAG and an exact longest-path search applies.

The weight of a multi-action is the summed trust of the robots it
assigns, so paths that put more work on more-trusted robots accumulate
more weight and win the search.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from .automata import Automaton, ResidualLanguage
from .errors import AcceptingUnreachable, CoverageViolation, PinConflict

TrustSnapshot = Mapping[str, float]


@dataclass(frozen=True, order=True)
class RobotProfile:
    """A robot identifier together with its capability action set."""

    id: str
    capabilities: frozenset[str]

    def __post_init__(self) -> None:
        if not self.capabilities:
            raise ValueError(f"robot {self.id!r} has an empty capability set")


@dataclass(frozen=True, order=True)
class SingleAction:
    """Assignment of one symbol of one subtask to one robot."""

    robot: str
    symbol: str
    subtask: int


@dataclass(frozen=True)
class MultiAction:
    """One assignment slot per subtask; ``None`` marks an idle subtask."""

    components: tuple[SingleAction | None, ...]

    def assigned(self) -> tuple[SingleAction, ...]:
        return tuple(c for c in self.components if c is not None)

    def robots(self) -> frozenset[str]:
        return frozenset(c.robot for c in self.assigned())

    def sort_key(self) -> tuple[tuple[str, str, int], ...]:
        return tuple(sorted((c.robot, c.symbol, c.subtask) for c in self.assigned()))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        parts = [f"({c.robot},{c.symbol})" if c else "eps" for c in self.components]
        return "<" + " ".join(parts) + ">"


@dataclass(frozen=True)
class AllocState:
    """Composite allocation state: one residual language per subtask."""

    residuals: tuple[ResidualLanguage, ...]

    def is_accepting(self) -> bool:
        return all(r.is_complete() for r in self.residuals)

    def remaining_symbols(self) -> int:
        return sum(r.max_word_length() for r in self.residuals)

    def sort_key(self) -> tuple:
        return tuple(tuple(r.sorted_words()) for r in self.residuals)


@dataclass(frozen=True)
class AllocationPath:
    """A task-allocation solution: ordered multi-actions plus its weight."""

    steps: tuple[MultiAction, ...]
    total_trust: float

    def assignments(self) -> list[tuple[int, SingleAction]]:
        return [(i, c) for i, act in enumerate(self.steps) for c in act.assigned()]

    def assigned_symbols(self) -> list[str]:
        return [c.symbol for _, c in self.assignments()]


@dataclass
class AllocationAutomaton:
    """Reachable fragment of the allocation automaton, as an explicit DAG."""

    states: list[AllocState]
    transitions: dict[AllocState, list[tuple[MultiAction, AllocState]]]
    initial: AllocState
    accepting: frozenset[AllocState]

    def transition_count(self) -> int:
        return sum(len(v) for v in self.transitions.values())


def implementable_actions(
    state: AllocState, robots: Iterable[RobotProfile]
) -> set[SingleAction]:
    """All (robot, symbol, subtask) triples enabled at `state`.

    A symbol is implementable for a robot when it lies in the robot's
    capability set and is a first symbol of the subtask's residual.
    """
    actions: set[SingleAction] = set()
    for k, residual in enumerate(state.residuals):
        firsts = residual.firsts()
        for robot in robots:
            for symbol in robot.capabilities & firsts:
                actions.add(SingleAction(robot.id, symbol, k))
    return actions


def enumerate_multiactions(
    state: AllocState, robots: Iterable[RobotProfile]
) -> set[MultiAction]:
    """All effective multi-actions with pairwise-distinct robots."""
    return set(_multiactions(state, sorted(robots), {}))


def _multiactions(
    state: AllocState,
    robots: Sequence[RobotProfile],
    forced: Mapping[int, SingleAction],
) -> list[MultiAction]:
    per_subtask: list[list[SingleAction | None]] = []
    for k, residual in enumerate(state.residuals):
        pin = forced.get(k)
        if pin is not None and pin.symbol in residual.firsts():
            per_subtask.append([pin])
            continue
        options: list[SingleAction | None] = [None]
        firsts = residual.firsts()
        for robot in robots:
            for symbol in sorted(robot.capabilities & firsts):
                options.append(SingleAction(robot.id, symbol, k))
        per_subtask.append(options)

    out: list[MultiAction] = []
    for combo in itertools.product(*per_subtask):
        chosen = [c for c in combo if c is not None]
        if not chosen:
            continue
        names = [c.robot for c in chosen]
        if len(set(names)) != len(names):
            continue
        out.append(MultiAction(tuple(combo)))
    return out


def _apply(state: AllocState, action: MultiAction) -> AllocState:
    residuals = list(state.residuals)
    for component in action.assigned():
        residuals[component.subtask] = residuals[component.subtask].derivative(
            component.symbol
        )
    return AllocState(tuple(residuals))


def _check_coverage(symbols: frozenset[str], robots: Iterable[RobotProfile]) -> None:
    covered = frozenset().union(*(r.capabilities for r in robots))
    missing = symbols - covered
    if missing:
        raise CoverageViolation(
            f"no robot can perform: {', '.join(sorted(missing))}"
        )


def synthesize(
    subtasks: Sequence[Automaton], robots: Iterable[RobotProfile]
) -> AllocationAutomaton:
    """Build the reachable allocation DAG for the given subtask automata."""
    robots = sorted(robots)
    alphabet = frozenset(s for a in subtasks for s in a.alphabet)
    _check_coverage(alphabet, robots)
    initial = AllocState(tuple(ResidualLanguage.from_automaton(a) for a in subtasks))
    return _explore(initial, robots)


def synthesize_from_residuals(
    residuals: Sequence[ResidualLanguage], robots: Iterable[RobotProfile]
) -> AllocationAutomaton:
    """Like `synthesize`, but starting from mid-run residual languages."""
    robots = sorted(robots)
    needed = frozenset(s for r in residuals for s in r.symbols())
    _check_coverage(needed, robots)
    return _explore(AllocState(tuple(residuals)), robots)


def _explore(initial: AllocState, robots: Sequence[RobotProfile]) -> AllocationAutomaton:
    states: dict[AllocState, None] = {initial: None}
    transitions: dict[AllocState, list[tuple[MultiAction, AllocState]]] = {}
    frontier = [initial]
    while frontier:
        state = frontier.pop()
        if state in transitions:
            continue
        edges: list[tuple[MultiAction, AllocState]] = []
        for action in _multiactions(state, robots, {}):
            target = _apply(state, action)
            edges.append((action, target))
            if target not in states:
                states[target] = None
                frontier.append(target)
        edges.sort(key=lambda e: e[0].sort_key())
        transitions[state] = edges

    accepting = frozenset(s for s in states if s.is_accepting())
    if not accepting:
        raise AcceptingUnreachable("no accepting composite state is reachable")
    return AllocationAutomaton(
        states=list(states),
        transitions=transitions,
        initial=initial,
        accepting=accepting,
    )


def _weight(action: MultiAction, trust: TrustSnapshot) -> float:
    return sum(trust[c.robot] for c in action.assigned())


def _best_from(
    node,
    successors: Callable,
    is_accepting: Callable,
    trust: TrustSnapshot,
    memo: dict,
):
    """Best (weight, steps) suffix from `node`; None when no accepting run.

    Preference order: maximum weight, then fewest steps, then smallest
    per-step assignment keys, giving a unique deterministic optimum.
    """
    if node in memo:
        return memo[node]
    memo[node] = None  # cycle guard; the graph is a DAG so never consulted
    candidates = []
    if is_accepting(node):
        candidates.append((0.0, ()))
    for action, target in successors(node):
        sub = _best_from(target, successors, is_accepting, trust, memo)
        if sub is None:
            continue
        candidates.append((_weight(action, trust) + sub[0], (action,) + sub[1]))
    if candidates:
        memo[node] = min(
            candidates,
            key=lambda c: (-c[0], len(c[1]), tuple(a.sort_key() for a in c[1])),
        )
    return memo[node]


def _finish_path(best: tuple[float, tuple[MultiAction, ...]] | None,
                 trust: TrustSnapshot) -> AllocationPath:
    if best is None:
        raise AcceptingUnreachable("no accepting path exists")
    steps = best[1]
    total = 0.0
    for action in steps:
        total += _weight(action, trust)
    return AllocationPath(steps=steps, total_trust=total)


def _check_trust(trust: TrustSnapshot, robots: Iterable[RobotProfile]) -> None:
    for robot in robots:
        value = trust.get(robot.id)
        if value is None:
            raise KeyError(f"trust snapshot is missing robot {robot.id!r}")
        if not 0.0 < value < 1.0:
            raise ValueError(f"trust of {robot.id!r} must lie in (0, 1), got {value}")


def max_trust_path(psi: AllocationAutomaton, trust: TrustSnapshot) -> AllocationPath:
    """Accepting path from the initial state maximizing accumulated trust."""
    robots_named = frozenset(
        c.robot for edges in psi.transitions.values() for a, _ in edges
        for c in a.assigned()
    )
    for name in robots_named:
        if name not in trust:
            raise KeyError(f"trust snapshot is missing robot {name!r}")
    memo: dict = {}
    best = _best_from(
        psi.initial,
        lambda s: psi.transitions.get(s, ()),
        lambda s: s in psi.accepting,
        trust,
        memo,
    )
    return _finish_path(best, trust)


def project_path(path: AllocationPath, robot: str) -> list[tuple[int, str, int]]:
    """This robot's (step, symbol, subtask) assignments, in step order."""
    return [
        (step, c.symbol, c.subtask)
        for step, c in path.assignments()
        if c.robot == robot
    ]


def resynthesize(
    subtasks: Sequence[ResidualLanguage],
    pinned: Iterable[SingleAction],
    robots: Iterable[RobotProfile],
    trust: TrustSnapshot,
) -> AllocationPath:
    """Reallocate the remaining work, keeping pinned in-progress assignments.

    Each pinned action is forced onto its robot at the earliest step where
    its symbol is enabled; everything else is re-optimized by accumulated
    trust exactly as in the initial search.
    """
    robots = sorted(robots)
    _check_trust(trust, robots)
    by_capability = {r.id: r.capabilities for r in robots}

    pins = sorted(set(pinned))
    seen_subtasks: set[int] = set()
    seen_robots: set[str] = set()
    for pin in pins:
        if not 0 <= pin.subtask < len(subtasks):
            raise PinConflict(f"pinned subtask index {pin.subtask} is out of range")
        if pin.robot not in by_capability:
            raise PinConflict(f"pinned robot {pin.robot!r} is unknown")
        if pin.symbol not in by_capability[pin.robot]:
            raise PinConflict(f"{pin.robot!r} cannot perform pinned {pin.symbol!r}")
        if pin.symbol not in subtasks[pin.subtask].firsts():
            raise PinConflict(
                f"pinned {pin.symbol!r} is not enabled in subtask {pin.subtask}"
            )
        if pin.subtask in seen_subtasks:
            raise PinConflict(f"subtask {pin.subtask} carries two pinned actions")
        if pin.robot in seen_robots:
            raise PinConflict(f"robot {pin.robot!r} carries two pinned actions")
        seen_subtasks.add(pin.subtask)
        seen_robots.add(pin.robot)

    needed = frozenset(s for r in subtasks for s in r.symbols())
    _check_coverage(needed, robots)

    initial = (AllocState(tuple(subtasks)), frozenset(pins))

    def successors(node):
        state, pending = node
        forced = {
            p.subtask: p
            for p in pending
            if p.symbol in state.residuals[p.subtask].firsts()
        }
        for action in _multiactions(state, robots, forced):
            fired = frozenset(c for c in action.assigned() if c in pending)
            yield action, (_apply(state, action), pending - fired)

    def is_accepting(node):
        state, pending = node
        if not state.is_accepting():
            return False
        # a still-enabled pin must fire before the path may stop
        return not any(
            p.symbol in state.residuals[p.subtask].firsts() for p in pending
        )

    memo: dict = {}
    best = _best_from(initial, successors, is_accepting, trust, memo)
    return _finish_path(best, trust)


def replay_path(
    residuals: Sequence[ResidualLanguage], path: AllocationPath
) -> AllocState:
    """Apply a path's derivatives from the given residuals; returns the end state."""
    state = AllocState(tuple(residuals))
    for action in path.steps:
        state = _apply(state, action)
    return state


def to_dot(psi: AllocationAutomaton) -> str:
    """Render the allocation DAG as DOT text for inspection."""
    index = {state: i for i, state in enumerate(psi.states)}
    lines = ["digraph allocation {", "  rankdir=LR;"]
    for state, i in index.items():
        label = " | ".join(
            "{" + ",".join("".join(w) or "eps" for w in r.sorted_words()) + "}"
            for r in state.residuals
        )
        shape = "doublecircle" if state in psi.accepting else "box"
        lines.append(f'  n{i} [label="{label}", shape={shape}];')
    for state, edges in psi.transitions.items():
        for action, target in edges:
            label = ",".join(f"{c.robot}:{c.symbol}" for c in action.assigned())
            lines.append(f'  n{index[state]} -> n{index[target]} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines)
