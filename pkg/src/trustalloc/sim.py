"""Session orchestration: allocation, motion, trust updates, reallocation.

One session owns a grid world, the robots, one trust belief per robot and
the current allocation.  Ticks interleave sensing, neighbor exchange,
replanning, motion or action execution, factor updates and one belief
filter step per robot.  Completing an action pauses the session with a
reallocation request; the decision (human or scripted model) either
adopts a freshly synthesized allocation over the remaining work or keeps
the previous one.

Runs are deterministic for a fixed scenario, human model and seed: all
iteration happens in robot-id order and randomness only enters through
the session's seeded generator when a stochastic human model draws a
decision.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from . import trust as trust_mod
from .allocation import (
    AllocationPath,
    SingleAction,
    max_trust_path,
    project_path,
    resynthesize,
    synthesize,
)
from .automata import ResidualLanguage
from .errors import (
    Deadlock,
    DecisionPending,
    NoPendingRequest,
    SessionFinished,
    TrustAllocError,
    Unreachable,
)
from .planner import MotionPlan, SpecAutomaton, build_spec, build_transition_system, plan, replan
from .trust import (
    HumanObservation,
    TrustBelief,
    TrustFactors,
    allocation_influence,
    env_workload,
    intervention_probability,
    make_prior,
    performance_update,
    safety_coefficient,
    supervision_workload,
)
from .world import (
    Cell,
    ScenarioConfig,
    apply_move,
    direction_between,
    exchange_neighbors,
    sense,
)


@dataclass(frozen=True)
class Assignment:
    """One projected action: which robot performs which symbol, and where
    that symbol sits in its subtask's planned order."""

    robot: str
    symbol: str
    subtask: int
    step: int
    seq: int


@dataclass
class HumanModel:
    """Decision policy answering reallocation inquiries."""

    kind: str = "threshold"
    theta: float = 0.0
    script: list[bool] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.kind not in ("interactive", "stochastic", "threshold", "scripted"):
            raise ValueError(f"unknown human model kind {self.kind!r}")
        self._cursor = 0

    @classmethod
    def from_dict(cls, raw: Mapping) -> "HumanModel":
        return cls(
            kind=raw.get("kind", "threshold"),
            theta=float(raw.get("theta", 0.0)),
            script=[bool(x) for x in raw.get("script", [])],
        )

    def resolve(self, session: "Session", request: "ReallocationRequest") -> bool:
        if self.kind == "interactive":
            raise TrustAllocError("interactive decisions arrive via decide()")
        if self.kind == "threshold":
            return session.beliefs[request.robot].mean >= self.theta
        if self.kind == "stochastic":
            probability = intervention_probability(
                session.beliefs[request.robot].mean,
                session.mean_prev[request.robot],
                session.params,
            )
            return session.rng.random() < probability
        if self._cursor < len(self.script):
            answer = self.script[self._cursor]
            self._cursor += 1
            return answer
        return False


@dataclass
class ReallocationRequest:
    id: int
    robot: str
    symbol: str
    subtask: int
    proposed: AllocationPath
    pinned: frozenset[SingleAction]
    trust: dict[str, float]
    reassignments: list[dict]

    def to_payload(self) -> dict:
        return {
            "id": self.id,
            "robot": self.robot,
            "symbol": self.symbol,
            "subtask": self.subtask,
            "pinned": [
                {"robot": p.robot, "symbol": p.symbol, "subtask": p.subtask}
                for p in sorted(self.pinned)
            ],
            "proposed": serialize_path(self.proposed),
            "trust": {k: round(v, 12) for k, v in sorted(self.trust.items())},
            "reassignments": self.reassignments,
        }


class EventLog:
    """Append-only, JSONL-serializable record of one run."""

    def __init__(self) -> None:
        self.records: list[dict] = []

    def append(self, t: int, kind: str, **payload) -> dict:
        record = {"t": t, "type": kind, "payload": payload}
        self.records.append(record)
        return record

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def to_jsonl(self) -> str:
        return "\n".join(
            json.dumps(r, sort_keys=True, separators=(",", ":")) for r in self.records
        ) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "EventLog":
        log = cls()
        for line in text.splitlines():
            if line.strip():
                log.records.append(json.loads(line))
        return log


def serialize_path(path: AllocationPath) -> dict:
    return {
        "steps": [
            [
                {"robot": c.robot, "symbol": c.symbol, "subtask": c.subtask}
                for c in action.assigned()
            ]
            for action in path.steps
        ],
        "total_trust": round(path.total_trust, 12),
    }


@dataclass
class _Executor:
    """Runtime motion state for one robot."""

    queue: list[Assignment] = field(default_factory=list)
    current: Assignment | None = None
    spec: SpecAutomaton | None = None
    plan: MotionPlan | None = None
    plan_pos: int = 0
    phase_idx: int = 0

    def in_final_phase(self) -> bool:
        return self.spec is not None and self.phase_idx == len(self.spec.phases) - 1

    def remaining_work(self) -> int:
        return len(self.queue) + (1 if self.current is not None else 0)


class Session:
    """One simulation run under a single logical execution thread."""

    def __init__(self, config: ScenarioConfig, seed: int | None = None) -> None:
        self.config = config
        self.world = config.grid
        self.params = config.trust_params()
        self.estimator = config.trust_estimator()
        self.robots = config.make_robot_states()
        self.profiles = {p.id: p for p in config.profiles()}
        self.rng = random.Random(config.seed if seed is None else seed)
        self.log = EventLog()
        self.t = 0
        self.finished = False
        self.pending: ReallocationRequest | None = None
        self.epoch = 0
        self.request_counter = 0
        self.ticks_since_completion = 0
        self.deadlock_limit = 4 * self.world.width * self.world.height

        automata = config.subtasks()
        self.residuals: list[ResidualLanguage] = [
            ResidualLanguage.from_automaton(a) for a in automata
        ]
        self.consumed: list[list[str]] = [[] for _ in automata]

        self.beliefs: dict[str, TrustBelief] = {}
        self.mean_prev: dict[str, float] = {}
        self.factors_prev: dict[str, TrustFactors] = {}
        self.ac_prev_epoch: dict[str, float] = {}
        self.br_current: dict[str, float] = {}
        self.p_r: dict[str, float] = {}
        self.verified: set[tuple[str, int, int]] = set()
        self.executors: dict[str, _Executor] = {}
        for rid in self.robots:
            self.beliefs[rid] = make_prior(config.prior_spec(rid), self.params.bins)
            self.mean_prev[rid] = self.beliefs[rid].mean
            self.factors_prev[rid] = trust_mod.NEUTRAL_FACTORS
            self.ac_prev_epoch[rid] = 0.0
            self.br_current[rid] = 1.0
            self.p_r[rid] = 0.0
            self.executors[rid] = _Executor()

        self.log.append(0, "start", **self._start_payload())
        psi = synthesize(automata, self.profiles.values())
        path = max_trust_path(psi, self._trust_snapshot())
        self._adopt_allocation(path, epoch=0)
        self._apply_epoch_update(path, observation=None)

    # ------------------------------------------------------------------
    # construction helpers
    # ------------------------------------------------------------------

    def _start_payload(self) -> dict:
        return {
            "robots": [
                {"id": rid, "cell": list(state.cell), "battery": state.battery}
                for rid, state in self.robots.items()
            ],
            "stations": {s: list(c) for s, c in sorted(self.world.stations.items())},
            "grid": [self.world.width, self.world.height],
            "sensing_radius": self.world.sensing_radius,
            "comm_radius": self.world.comm_radius,
            "seed": self.config.seed,
        }

    def _trust_snapshot(self) -> dict[str, float]:
        if self.estimator == "mode":
            return {rid: b.mode for rid, b in self.beliefs.items()}
        return {rid: b.mean for rid, b in self.beliefs.items()}

    def _adopt_allocation(self, path: AllocationPath, epoch: int) -> None:
        self.allocation = path
        self.projections = {
            rid: project_path(path, rid) for rid in self.robots
        }
        planned = [list(seq) for seq in self.consumed]
        queues: dict[str, list[Assignment]] = {rid: [] for rid in self.robots}
        for step, component in path.assignments():
            k = component.subtask
            seq = len(planned[k])
            planned[k].append(component.symbol)
            queues[component.robot].append(
                Assignment(component.robot, component.symbol, k, step, seq)
            )
        self.planned_seq = planned
        for rid, executor in self.executors.items():
            new_queue = queues[rid]
            current = executor.current
            if (
                current is not None
                and new_queue
                and (new_queue[0].symbol, new_queue[0].subtask, new_queue[0].seq)
                == (current.symbol, current.subtask, current.seq)
            ):
                executor.queue = new_queue[1:]
                executor.current = replace(current, step=new_queue[0].step)
            else:
                executor.queue = new_queue
                executor.current = None
                executor.spec = None
                executor.plan = None
                if new_queue:
                    self._activate_next(rid)
        self.log.append(
            self.t, "allocation", epoch=epoch, path=serialize_path(path),
            projections={
                rid: [[s, sym, k] for s, sym, k in proj]
                for rid, proj in sorted(self.projections.items())
            },
        )

    def _activate_next(self, rid: str) -> None:
        executor = self.executors[rid]
        if executor.current is None and executor.queue:
            executor.current = executor.queue.pop(0)
        if executor.current is None:
            executor.spec = None
            executor.plan = None
            return
        assignment = executor.current
        predecessor = None
        if assignment.seq > 0:
            key = (rid, assignment.subtask, assignment.seq - 1)
            if key not in self.verified:
                predecessor = self.planned_seq[assignment.subtask][assignment.seq - 1]
        executor.spec = build_spec(self.world, assignment.symbol, predecessor)
        executor.phase_idx = 0
        executor.plan_pos = 0
        try:
            executor.plan = plan(
                build_transition_system(self.world, self.robots[rid]), executor.spec
            )
        except Unreachable:
            executor.plan = None

    # ------------------------------------------------------------------
    # trust bookkeeping
    # ------------------------------------------------------------------

    def _tick_factors(self, rid: str) -> TrustFactors:
        state = self.robots[rid]
        return TrustFactors(
            p_r=self.p_r[rid],
            a=safety_coefficient(self.profiles[rid], state.battery_low),
            u=env_workload(len(sense(self.world, state)), self.params),
            br=self.br_current[rid],
            ac=None,
        )

    def _filter_robot(
        self, rid: str, now: TrustFactors, prev: TrustFactors,
        obs: HumanObservation | None, epoch: int | None,
    ) -> None:
        self.beliefs[rid] = trust_mod.filter_step(
            self.beliefs[rid], now, prev, obs, self.params
        )
        self.factors_prev[rid] = now
        belief = self.beliefs[rid]
        self.log.append(
            self.t, "belief", robot=rid,
            mean=round(belief.mean, 12), variance=round(belief.variance, 12),
            epoch=epoch,
        )

    def _apply_epoch_update(
        self, path: AllocationPath, observation: HumanObservation | None
    ) -> None:
        activated = {c.robot for _, c in path.assignments()}
        i_act = min(len(activated), self.params.i_max)
        profiles = list(self.profiles.values())
        for rid in self.robots:
            ac = allocation_influence(path, rid, profiles, self.params)
            br = supervision_workload(rid in activated, i_act, self.params)
            self.br_current[rid] = br
            now = replace(self._tick_factors(rid), ac=ac, br=br)
            prev = replace(self.factors_prev[rid], ac=self.ac_prev_epoch[rid])
            obs = observation if observation and observation.robot == rid else None
            self._filter_robot(rid, now, prev, obs, epoch=self.epoch)
            self.ac_prev_epoch[rid] = ac

    # ------------------------------------------------------------------
    # the tick
    # ------------------------------------------------------------------

    def tick(self) -> list[dict]:
        """Advance the session by one step; returns the records it logged."""
        if self.finished:
            raise SessionFinished("all allocated actions are complete")
        if self.pending is not None:
            raise DecisionPending("answer the open reallocation request first")

        self.t += 1
        tick_start = len(self.log.records)
        newly_known: dict[str, set[Cell]] = {}

        # sense
        for rid, state in self.robots.items():
            fresh = sense(self.world, state) - state.known_obstacles
            state.known_obstacles |= fresh
            newly_known[rid] = set(fresh)
            if fresh:
                self.log.append(
                    self.t, "sense", robot=rid,
                    cells=[list(c) for c in sorted(fresh)],
                )

        # announce intended next cells, then exchange with neighbors
        for rid, state in self.robots.items():
            executor = self.executors[rid]
            state.next_cell = None
            if executor.plan and executor.plan_pos + 1 < len(executor.plan.cells):
                state.next_cell = executor.plan.cells[executor.plan_pos + 1]
        updates = exchange_neighbors(self.world, self.robots.values())
        for rid, update in updates.items():
            newly_known[rid] |= set(update.gained)
            if update.gained:
                self.log.append(
                    self.t, "exchange", robot=rid,
                    gained=[list(c) for c in sorted(update.gained)],
                )

        # read completion state wherever a completed station is in range
        self._update_verified_knowledge()

        # replan around fresh knowledge, or retry blocked plans
        beta: dict[str, int] = {rid: 0 for rid in self.robots}
        for rid, state in self.robots.items():
            executor = self.executors[rid]
            if executor.current is None:
                continue
            if executor.plan is None:
                self._retry_plan(rid)
                continue
            if not newly_known[rid]:
                continue
            try:
                fresh, avoided = replan(
                    executor.plan, state.cell, frozenset(newly_known[rid]),
                    self.world, state, self._effective_spec(rid),
                    position_index=executor.plan_pos,
                )
            except Unreachable:
                executor.plan = None
                continue
            if avoided:
                beta[rid] = avoided
                executor.plan = fresh
                executor.plan_pos = 0
                executor.spec = self._effective_spec(rid)
                executor.phase_idx = 0
                self.log.append(
                    self.t, "replan", robot=rid, avoided=avoided,
                    cells=[list(c) for c in fresh.cells],
                )

        # move or act, in robot-id order
        completions: list[Assignment] = []
        for rid, state in self.robots.items():
            executor = self.executors[rid]
            if executor.current is None or executor.plan is None:
                continue
            gated = self._advance_phases(rid)
            assignment = executor.current
            spec = executor.spec
            station = spec.phases[-1].cell
            if executor.in_final_phase() and state.cell == station:
                self._perform_action(rid, assignment)
                completions.append(assignment)
                continue
            if gated:
                continue
            if executor.plan_pos + 1 < len(executor.plan.cells):
                self._move_robot(rid)

        # factor updates and one filter step per robot
        for rid in self.robots:
            completed = 1 if any(c.robot == rid for c in completions) else 0
            self.p_r[rid] = performance_update(self.p_r[rid], completed, beta[rid])
            self.mean_prev[rid] = self.beliefs[rid].mean
            now = self._tick_factors(rid)
            self._filter_robot(rid, now, self.factors_prev[rid], None, epoch=None)

        # completions pause the session with a reallocation inquiry
        if completions:
            self.ticks_since_completion = 0
            if self._remaining_work() == 0:
                self.finished = True
                self.log.append(self.t, "finish", completions=len(self._all_completions()))
            else:
                trigger = min(completions, key=lambda c: c.robot)
                self._raise_request(trigger)
        else:
            self.ticks_since_completion += 1
            if self.ticks_since_completion > self.deadlock_limit:
                raise Deadlock(
                    f"no completion within {self.deadlock_limit} ticks"
                )
        return self.log.records[tick_start:]

    # ------------------------------------------------------------------
    # tick helpers
    # ------------------------------------------------------------------

    def _all_completions(self) -> list[str]:
        return [s for seq in self.consumed for s in seq]

    def _remaining_work(self) -> int:
        return sum(ex.remaining_work() for ex in self.executors.values())

    def _effective_spec(self, rid: str) -> SpecAutomaton:
        assignment = self.executors[rid].current
        predecessor = None
        if assignment.seq > 0:
            key = (rid, assignment.subtask, assignment.seq - 1)
            if key not in self.verified:
                predecessor = self.planned_seq[assignment.subtask][assignment.seq - 1]
        return build_spec(self.world, assignment.symbol, predecessor)

    def _retry_plan(self, rid: str) -> None:
        executor = self.executors[rid]
        executor.spec = self._effective_spec(rid)
        executor.phase_idx = 0
        executor.plan_pos = 0
        try:
            executor.plan = plan(
                build_transition_system(self.world, self.robots[rid]), executor.spec
            )
        except Unreachable:
            executor.plan = None

    def _update_verified_knowledge(self) -> None:
        for rid, state in self.robots.items():
            for k, done in enumerate(self.consumed):
                for i, symbol in enumerate(done):
                    key = (rid, k, i)
                    if key in self.verified:
                        continue
                    station = self.world.stations[symbol]
                    if (
                        abs(station[0] - state.cell[0])
                        + abs(station[1] - state.cell[1])
                        <= self.world.sensing_radius
                    ):
                        self.verified.add(key)

    def _advance_phases(self, rid: str) -> bool:
        """Advance satisfied verification phases; True when gated waiting."""
        executor = self.executors[rid]
        state = self.robots[rid]
        spec = executor.spec
        assignment = executor.current
        while executor.phase_idx < len(spec.phases) - 1:
            phase = spec.phases[executor.phase_idx]
            if not phase.satisfied(state.cell):
                return False
            if len(self.consumed[assignment.subtask]) >= assignment.seq:
                self.verified.add((rid, assignment.subtask, assignment.seq - 1))
                executor.phase_idx += 1
                self.log.append(
                    self.t, "verify", robot=rid, symbol=phase.symbol,
                    subtask=assignment.subtask,
                )
            else:
                return True
        return False

    def _perform_action(self, rid: str, assignment: Assignment) -> None:
        k = assignment.subtask
        assert len(self.consumed[k]) == assignment.seq
        self.residuals[k] = self.residuals[k].derivative(assignment.symbol)
        self.consumed[k].append(assignment.symbol)
        self.verified.add((rid, k, assignment.seq))
        self.log.append(
            self.t, "complete", robot=rid, symbol=assignment.symbol,
            subtask=k, cell=list(self.robots[rid].cell), step=assignment.step,
        )
        executor = self.executors[rid]
        executor.current = None
        executor.spec = None
        executor.plan = None
        self._activate_next(rid)

    def _move_robot(self, rid: str) -> None:
        state = self.robots[rid]
        executor = self.executors[rid]
        target = executor.plan.cells[executor.plan_pos + 1]
        was_low = state.battery_low
        try:
            apply_move(self.world, state, direction_between(state.cell, target))
        except TrustAllocError:
            # stepped toward an unsensed obstacle; learn it and replan later
            state.known_obstacles.add(target)
            executor.plan = None
            return
        executor.plan_pos += 1
        self.log.append(
            self.t, "move", robot=rid, cell=list(state.cell),
            battery=round(state.battery, 9),
        )
        if state.battery_low and not was_low:
            self.log.append(self.t, "battery_low", robot=rid)

    def _raise_request(self, trigger: Assignment) -> None:
        pinned = set()
        for rid, executor in self.executors.items():
            assignment = executor.current
            if assignment is None or not executor.in_final_phase():
                continue
            if len(self.consumed[assignment.subtask]) != assignment.seq:
                continue
            pinned.add(SingleAction(rid, assignment.symbol, assignment.subtask))
        snapshot = self._trust_snapshot()
        proposed = resynthesize(
            self.residuals, pinned, self.profiles.values(), snapshot
        )
        self.request_counter += 1
        request = ReallocationRequest(
            id=self.request_counter,
            robot=trigger.robot,
            symbol=trigger.symbol,
            subtask=trigger.subtask,
            proposed=proposed,
            pinned=frozenset(pinned),
            trust=snapshot,
            reassignments=self._diff_assignments(proposed),
        )
        self.pending = request
        self.log.append(self.t, "request", **request.to_payload())

    def _diff_assignments(self, proposed: AllocationPath) -> list[dict]:
        current_owner: dict[tuple[int, int], tuple[str, str]] = {}
        for rid, executor in self.executors.items():
            pool = ([executor.current] if executor.current else []) + executor.queue
            for a in pool:
                current_owner[(a.subtask, a.seq)] = (rid, a.symbol)
        changes = []
        planned = [list(seq) for seq in self.consumed]
        for _, component in proposed.assignments():
            seq = len(planned[component.subtask])
            planned[component.subtask].append(component.symbol)
            old = current_owner.get((component.subtask, seq))
            if old is not None and old[0] != component.robot:
                changes.append(
                    {
                        "symbol": component.symbol,
                        "subtask": component.subtask,
                        "from": old[0],
                        "to": component.robot,
                    }
                )
        return sorted(changes, key=lambda c: (c["subtask"], c["symbol"]))

    # ------------------------------------------------------------------
    # decisions
    # ------------------------------------------------------------------

    def decide(self, allow: bool, source: str = "interactive") -> list[dict]:
        """Answer the pending reallocation request."""
        if self.pending is None:
            raise NoPendingRequest("no reallocation request is open")
        request = self.pending
        self.pending = None
        decision_start = len(self.log.records)
        self.log.append(
            self.t, "decision", id=request.id, allow=allow, source=source,
            robot=request.robot,
        )
        if allow:
            self.epoch += 1
            self._adopt_allocation(request.proposed, epoch=self.epoch)
            self._apply_epoch_update(
                request.proposed,
                observation=HumanObservation(1, request.robot, self.t),
            )
            if self._remaining_work() == 0 and not self.finished:
                self.finished = True
                self.log.append(
                    self.t, "finish", completions=len(self._all_completions())
                )
        return self.log.records[decision_start:]


def start(config: ScenarioConfig, seed: int | None = None) -> Session:
    """Create a session: synthesize the initial allocation and plan motions."""
    return Session(config, seed=seed)


def run(config: ScenarioConfig, human: HumanModel, seed: int | None = None) -> EventLog:
    """Drive a session to completion under a non-interactive human model."""
    if human.kind == "interactive":
        raise TrustAllocError("run() needs a non-interactive human model")
    session = Session(config, seed=seed)
    while not session.finished:
        session.tick()
        if session.pending is not None:
            allow = human.resolve(session, session.pending)
            session.decide(allow, source=human.kind)
    return session.log


def scripted_decisions(log: EventLog | Iterable[Mapping]) -> list[bool]:
    """Extract the decision sequence of a finished run, for replaying it."""
    records = log.records if isinstance(log, EventLog) else list(log)
    return [r["payload"]["allow"] for r in records if r["type"] == "decision"]


def metrics(log: EventLog | Iterable[Mapping]) -> dict:
    """Aggregate a finished run's log into summary statistics."""
    records = log.records if isinstance(log, EventLog) else list(log)
    completions: dict[str, int] = {}
    beta_totals: dict[str, int] = {}
    trajectories: dict[str, list[float]] = {}
    makespan = 0
    reallocations = 0
    requests = 0
    for record in records:
        makespan = max(makespan, record["t"])
        payload = record["payload"]
        kind = record["type"]
        if kind == "complete":
            completions[payload["robot"]] = completions.get(payload["robot"], 0) + 1
        elif kind == "replan":
            beta_totals[payload["robot"]] = (
                beta_totals.get(payload["robot"], 0) + payload["avoided"]
            )
        elif kind == "belief":
            trajectories.setdefault(payload["robot"], []).append(payload["mean"])
        elif kind == "decision":
            requests += 1
            if payload["allow"]:
                reallocations += 1
    return {
        "makespan": makespan,
        "completions": dict(sorted(completions.items())),
        "total_completions": sum(completions.values()),
        "requests": requests,
        "reallocations": reallocations,
        "beta_totals": dict(sorted(beta_totals.items())),
        "trust_trajectories": dict(sorted(trajectories.items())),
    }
