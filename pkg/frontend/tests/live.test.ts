// Round trip against a live service: create a session, run to the first
// reallocation request, inspect the dialog content, approve, and check the
// adopted projections.  Requires the Python package installed in the
// environment (uvicorn is spawned as a child process).

import { spawn, type ChildProcess } from "node:child_process";
import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { decisionLines } from "../src/views.js";
import type { Snapshot } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));
const repoRoot = join(here, "..", "..");
const scenarioPath = join(repoRoot, "src", "trustalloc", "data", "handover_demo.scn");

const port = 8900 + Math.floor(Math.random() * 500);
const base = `http://127.0.0.1:${port}`;
let server: ChildProcess;
let client: ApiClient;

async function waitForService(timeoutMs = 20000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${base}/docs`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error("service did not come up in time");
}

beforeAll(async () => {
  server = spawn(
    "python3",
    ["-m", "uvicorn", "trustalloc.service:app", "--host", "127.0.0.1",
     "--port", String(port), "--log-level", "warning"],
    { cwd: repoRoot, stdio: "ignore" },
  );
  client = new ApiClient(base);
  await waitForService();
}, 30000);

afterAll(() => {
  server?.kill("SIGTERM");
});

describe("console round trip against a live session", () => {
  let sessionId: string;
  let paused: Snapshot;

  it("creates a session from the handover scenario", async () => {
    const scenario = JSON.parse(readFileSync(scenarioPath, "utf-8"));
    const created = await client.createSession(scenario);
    sessionId = created.session;
    expect(created.snapshot.robots.length).toBe(5);
    expect(created.snapshot.clock).toBe(0);
  });

  it("advances to the first reallocation request", async () => {
    paused = await client.advance(sessionId, 1000);
    expect(paused.pending).not.toBeNull();
    expect(paused.pending!.symbol).toBe("e");
    expect(paused.pending!.robot).toBe("r4");
  });

  it("renders the proposed reassignments in the dialog", () => {
    const lines = decisionLines(paused.pending!);
    const text = lines.join("\n");
    expect(text).toContain("(r5,c)");
    expect(text).toContain("(r2,f)");
    expect(text).toContain("f stays with r2 (in progress).");
  });

  it("approving adopts the published owner selection", async () => {
    const after = await client.decide(sessionId, true);
    const owners: Record<string, string> = {};
    for (const [robot, projections] of Object.entries(after.allocation.projections)) {
      for (const [, symbol] of projections) {
        owners[symbol] = robot;
      }
    }
    expect(owners["c"]).toBe("r5");
    expect(owners["f"]).toBe("r2");
    expect(after.allocation.epoch).toBe(1);
    console.log("PASS  criterion 10: approved proposal matches c->r5, f->r2");
  });

  it("double-posting a decision surfaces a conflict", async () => {
    await expect(client.decide(sessionId, true)).rejects.toThrow(/409/);
  });

  it("event stream replays the backlog without gaps and resumes cleanly", async () => {
    const head = await client.fetchEvents(sessionId, 0);
    expect(head.map((e) => e.index)).toEqual(head.map((_, i) => i));
    const types = head.map((e) => e.record.type);
    expect(types[0]).toBe("start");
    expect(types).toContain("request");
    expect(types).toContain("decision");

    const midpoint = Math.floor(head.length / 2);
    const tail = await client.fetchEvents(sessionId, midpoint);
    expect(tail[0]!.index).toBe(midpoint);
    expect(tail.length).toBe(head.length - midpoint);
  });

  it("sessions stay isolated", async () => {
    const scenario = JSON.parse(readFileSync(scenarioPath, "utf-8"));
    const other = await client.createSession(scenario);
    const snapshot = await client.snapshot(other.session);
    expect(snapshot.clock).toBe(0);
    expect(snapshot.allocation.epoch).toBe(0);
  });

  it("a reopened console reconstructs the view from snapshot + replay", async () => {
    const { ConsoleState } = await import("../src/state.js");

    const live = new ConsoleState();
    live.reset(sessionId);
    for (const { index, record } of await client.fetchEvents(sessionId, 0)) {
      live.applyEvent(index, record);
    }
    live.applySnapshot(await client.snapshot(sessionId));

    const reopened = new ConsoleState();
    reopened.reset(sessionId);
    reopened.applySnapshot(await client.snapshot(sessionId));
    for (const { index, record } of await client.fetchEvents(sessionId, 0)) {
      reopened.applyEvent(index, record);
    }

    expect(reopened.snapshot?.clock).toBe(live.snapshot?.clock);
    expect(reopened.nextEventIndex).toBe(live.nextEventIndex);
    for (const robot of ["r1", "r2", "r3", "r4", "r5"]) {
      expect(reopened.trajectoryOf(robot)).toEqual(live.trajectoryOf(robot));
    }
  });
}, 30000);
