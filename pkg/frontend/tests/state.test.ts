import { describe, expect, it } from "vitest";

import { parseSseText } from "../src/api.js";
import { ConsoleState } from "../src/state.js";
import type { LogRecord, Snapshot } from "../src/types.js";

function snap(clock: number): Snapshot {
  return {
    clock,
    finished: false,
    grid: { width: 2, height: 2, stations: {}, known_obstacles: [] },
    robots: [
      { id: "r1", cell: [0, 0], battery: 1, battery_low: false, assignment: null, plan: [] },
    ],
    beliefs: {},
    allocation: { epoch: 0, projections: {} },
    pending: null,
    events: [],
    event_count: 0,
  };
}

function belief(robot: string, mean: number, t = 1): LogRecord {
  return { t, type: "belief", payload: { robot, mean, variance: 0.01, epoch: null } };
}

describe("ConsoleState snapshots", () => {
  it("applies fresh snapshots and selects the first robot", () => {
    const state = new ConsoleState();
    expect(state.applySnapshot(snap(3))).toBe(true);
    expect(state.selectedRobot).toBe("r1");
  });

  it("discards stale snapshots", () => {
    const state = new ConsoleState();
    state.applySnapshot(snap(5));
    expect(state.applySnapshot(snap(2))).toBe(false);
    expect(state.snapshot?.clock).toBe(5);
  });

  it("accepts same-clock refreshes", () => {
    const state = new ConsoleState();
    state.applySnapshot(snap(5));
    expect(state.applySnapshot(snap(5))).toBe(true);
  });
});

describe("ConsoleState events", () => {
  it("grows a trajectory by one per belief event", () => {
    const state = new ConsoleState();
    state.applyEvent(0, belief("r1", 0.5));
    state.applyEvent(1, belief("r1", 0.52));
    state.applyEvent(2, belief("r2", 0.4));
    expect(state.trajectoryOf("r1")).toEqual([0.5, 0.52]);
    expect(state.trajectoryOf("r2")).toEqual([0.4]);
  });

  it("ignores duplicate indices after a reconnect", () => {
    const state = new ConsoleState();
    state.applyEvent(0, belief("r1", 0.5));
    expect(state.applyEvent(0, belief("r1", 0.5))).toBe(false);
    expect(state.trajectoryOf("r1")).toEqual([0.5]);
  });

  it("reset clears everything for a new session", () => {
    const state = new ConsoleState();
    state.applySnapshot(snap(4));
    state.applyEvent(0, belief("r1", 0.5));
    state.reset("abc");
    expect(state.snapshot).toBeNull();
    expect(state.nextEventIndex).toBe(0);
    expect(state.trajectoryOf("r1")).toEqual([]);
  });
});

describe("decision submission", () => {
  it("posts exactly one decision call per user decision", async () => {
    const calls: string[] = [];
    const realFetch = globalThis.fetch;
    globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
      calls.push(`${init?.method ?? "GET"} ${String(input)}`);
      return new Response(JSON.stringify(snap(1)), {
        status: 200,
        headers: { "content-type": "application/json" },
      });
    }) as typeof fetch;
    try {
      const { ApiClient } = await import("../src/api.js");
      const client = new ApiClient("http://svc");
      await client.decide("abc", true);
      expect(calls).toEqual(["POST http://svc/sessions/abc/decision"]);
    } finally {
      globalThis.fetch = realFetch;
    }
  });
});

describe("SSE parsing", () => {
  it("extracts ids and records from a raw stream", () => {
    const text =
      'id: 0\nevent: start\ndata: {"t":0,"type":"start","payload":{}}\n\n' +
      'id: 1\nevent: move\ndata: {"t":1,"type":"move","payload":{"robot":"r1"}}\n\n';
    const events = parseSseText(text);
    expect(events.map((e) => e.index)).toEqual([0, 1]);
    expect(events[1]!.record.type).toBe("move");
  });

  it("tolerates empty blocks", () => {
    expect(parseSseText("\n\n\n\n")).toEqual([]);
  });
});
