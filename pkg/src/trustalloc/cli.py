"""Command-line entry points.

    trustalloc synthesize --scenario F [--trust file|uniform:0.5] [--dot out.dot]
    trustalloc plan --scenario F --robot r1 --assignment f [--predecessor g]
    trustalloc filter --trace trace.csv [--params params.json]
    trustalloc run --scenario F [--human auto|threshold:T|scripted:file] [--seed N] [--out log.jsonl]
    trustalloc export --log log.jsonl --csv outdir/
    trustalloc serve [--host H] [--port P] [--persist dir] [--max-sessions N] [--ui dir]
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import sim
from .allocation import max_trust_path, project_path, synthesize, to_dot
from .planner import build_spec, build_transition_system, plan as plan_motion
from .trust import HumanObservation, TrustFactors, TrustParams, filter_step, make_prior
from .world import load_scenario


def _read_scenario(path: str):
    return load_scenario(Path(path).read_text())


def _parse_trust(spec: str, robot_ids: list[str]) -> dict[str, float]:
    if spec.startswith("uniform:"):
        value = float(spec.split(":", 1)[1])
        return {rid: value for rid in robot_ids}
    raw = json.loads(Path(spec).read_text())
    return {rid: float(raw[rid]) for rid in robot_ids}


def _parse_human(spec: str) -> sim.HumanModel:
    if spec == "auto":
        return sim.HumanModel(kind="stochastic")
    if spec.startswith("threshold:"):
        return sim.HumanModel(kind="threshold", theta=float(spec.split(":", 1)[1]))
    if spec.startswith("scripted:"):
        script = json.loads(Path(spec.split(":", 1)[1]).read_text())
        return sim.HumanModel(kind="scripted", script=[bool(x) for x in script])
    raise SystemExit(f"unknown human model {spec!r}")


def cmd_synthesize(args) -> int:
    config = _read_scenario(args.scenario)
    profiles = config.profiles()
    psi = synthesize(config.subtasks(), profiles)
    trust = _parse_trust(args.trust, [p.id for p in profiles])
    path = max_trust_path(psi, trust)
    print(f"states: {len(psi.states)}")
    print(f"transitions: {psi.transition_count()}")
    print(f"total_trust: {path.total_trust:.6f}")
    for step, action in enumerate(path.steps):
        body = ", ".join(
            f"({c.robot},{c.symbol})" for c in action.assigned()
        )
        print(f"step {step}: {body}")
    for profile in sorted(profiles):
        projected = project_path(path, profile.id)
        if projected:
            body = " ".join(f"({sym}@{s})" for s, sym, _ in projected)
            print(f"{profile.id}: {body}")
    if args.dot:
        Path(args.dot).write_text(to_dot(psi))
        print(f"dot written to {args.dot}")
    return 0


def cmd_plan(args) -> int:
    config = _read_scenario(args.scenario)
    states = config.make_robot_states()
    if args.robot not in states:
        raise SystemExit(f"unknown robot {args.robot!r}")
    robot = states[args.robot]
    if args.reveal:
        robot.known_obstacles = set(config.grid.obstacles)
    spec = build_spec(config.grid, args.assignment, args.predecessor)
    ts = build_transition_system(config.grid, robot)
    motion = plan_motion(ts, spec)
    print(f"cost: {motion.cost}")
    print(" ".join(f"({x},{y})" for x, y in motion.cells))
    if args.dot:
        from .planner import ProductAutomaton

        Path(args.dot).write_text(ProductAutomaton(ts, spec).to_dot())
        print(f"dot written to {args.dot}")
    return 0


def _read_float(row: dict, key: str, default: float) -> float:
    value = row.get(key, "")
    return float(value) if value not in ("", None) else default


def cmd_filter(args) -> int:
    params = TrustParams()
    prior_spec = None
    if args.params:
        raw = json.loads(Path(args.params).read_text())
        params = TrustParams.from_dict(raw)
        prior_spec = raw.get("prior")
    belief = make_prior(prior_spec, params.bins)
    writer = csv.writer(sys.stdout)
    writer.writerow(["step", "mean", "variance"])
    writer.writerow([0, f"{belief.mean:.9f}", f"{belief.variance:.9f}"])
    prev = TrustFactors()
    with open(args.trace, newline="") as handle:
        for step, row in enumerate(csv.DictReader(handle), start=1):
            ac = row.get("ac", "")
            now = TrustFactors(
                p_r=_read_float(row, "p_r", 0.0),
                a=_read_float(row, "a", 1.0),
                u=_read_float(row, "u", 0.0),
                br=_read_float(row, "br", 1.0),
                ac=float(ac) if ac not in ("", None) else None,
            )
            obs = None
            h = row.get("h", "")
            if h not in ("", None):
                obs = HumanObservation(h=int(h), robot=row.get("robot", "r"), time=step)
            belief = filter_step(belief, now, prev, obs, params)
            prev = now
            writer.writerow([step, f"{belief.mean:.9f}", f"{belief.variance:.9f}"])
    return 0


def cmd_run(args) -> int:
    config = _read_scenario(args.scenario)
    human = _parse_human(args.human)
    log = sim.run(config, human, seed=args.seed)
    text = log.to_jsonl()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    summary = sim.metrics(log)
    print(
        f"makespan={summary['makespan']} completions={summary['total_completions']} "
        f"reallocations={summary['reallocations']}",
        file=sys.stderr,
    )
    return 0


def cmd_export(args) -> int:
    log = sim.EventLog.from_jsonl(Path(args.log).read_text())
    outdir = Path(args.csv)
    outdir.mkdir(parents=True, exist_ok=True)
    summary = sim.metrics(log)
    for robot, trajectory in summary["trust_trajectories"].items():
        with (outdir / f"trust_{robot}.csv").open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["update", "mean"])
            for i, mean in enumerate(trajectory):
                writer.writerow([i, f"{mean:.9f}"])
    with (outdir / "metrics.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["key", "value"])
        writer.writerow(["makespan", summary["makespan"]])
        writer.writerow(["total_completions", summary["total_completions"]])
        writer.writerow(["requests", summary["requests"]])
        writer.writerow(["reallocations", summary["reallocations"]])
        for robot, count in summary["completions"].items():
            writer.writerow([f"completions_{robot}", count])
        for robot, beta in summary["beta_totals"].items():
            writer.writerow([f"beta_{robot}", beta])
    print(f"wrote {len(summary['trust_trajectories']) + 1} files to {outdir}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        persist_dir=args.persist,
        max_sessions=args.max_sessions,
        ui_dir=args.ui,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trustalloc",
        description="Trust-aware multi-robot task allocation and motion planning",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="build the allocation DAG and best path")
    p.add_argument("--scenario", required=True)
    p.add_argument("--trust", default="uniform:0.5",
                   help="'uniform:V' or a JSON file of per-robot values")
    p.add_argument("--dot", help="write the DAG as DOT to this file")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("plan", help="plan one robot's motion to a station")
    p.add_argument("--scenario", required=True)
    p.add_argument("--robot", required=True)
    p.add_argument("--assignment", required=True, help="action symbol to reach")
    p.add_argument("--predecessor", help="verify this action's station first")
    p.add_argument("--reveal", action="store_true",
                   help="plan with full obstacle knowledge")
    p.add_argument("--dot", help="write the product automaton as DOT")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("filter", help="replay a factor trace through the trust filter")
    p.add_argument("--trace", required=True, help="CSV with p_r,a,u,br,ac,h columns")
    p.add_argument("--params", help="JSON file of trust coefficients")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("run", help="run a scenario headless")
    p.add_argument("--scenario", required=True)
    p.add_argument("--human", default="threshold:0.0",
                   help="auto | threshold:T | scripted:file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="write the event log here instead of stdout")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("export", help="turn an event log into CSV summaries")
    p.add_argument("--log", required=True)
    p.add_argument("--csv", required=True, help="output directory")
    p.set_defaults(func=cmd_export)

    env = os.environ
    p = sub.add_parser("serve", help="host the interactive supervision API")
    p.add_argument("--host", default=env.get("TRUSTALLOC_HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=int(env.get("TRUSTALLOC_PORT", "8000")))
    p.add_argument("--persist", default=env.get("TRUSTALLOC_PERSIST"),
                   help="directory for append-only session logs")
    p.add_argument("--max-sessions", type=int,
                   default=int(env.get("TRUSTALLOC_MAX_SESSIONS", "64")))
    p.add_argument("--ui", default=env.get("TRUSTALLOC_UI"),
                   help="serve this directory at /ui")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
