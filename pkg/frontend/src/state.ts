// Console view state: the latest snapshot guarded by clock ordering, the
// event feed, and per-robot mean-trust trajectories accumulated from
// belief events.  The console never fabricates simulation state; all of
// this is a projection of what the service sent.

import type { LogRecord, Snapshot } from "./types.js";

export class ConsoleState {
  snapshot: Snapshot | null = null;
  sessionId: string | null = null;
  selectedRobot: string | null = null;
  connected = true;
  events: LogRecord[] = [];
  nextEventIndex = 0;
  trajectories = new Map<string, number[]>();

  /** Apply a snapshot unless it is staler than what we already show. */
  applySnapshot(snapshot: Snapshot): boolean {
    if (this.snapshot && snapshot.clock < this.snapshot.clock) {
      return false;
    }
    this.snapshot = snapshot;
    if (this.selectedRobot === null && snapshot.robots.length > 0) {
      this.selectedRobot = snapshot.robots[0]?.id ?? null;
    }
    return true;
  }

  /** Ingest one log record; ignores duplicates and fills trajectories. */
  applyEvent(index: number, record: LogRecord): boolean {
    if (index < this.nextEventIndex) {
      return false;
    }
    this.nextEventIndex = index + 1;
    this.events.push(record);
    if (this.events.length > 400) {
      this.events.splice(0, this.events.length - 400);
    }
    if (record.type === "belief") {
      const robot = record.payload["robot"] as string;
      const mean = record.payload["mean"] as number;
      const series = this.trajectories.get(robot) ?? [];
      series.push(mean);
      this.trajectories.set(robot, series);
    }
    return true;
  }

  trajectoryOf(robot: string): number[] {
    return this.trajectories.get(robot) ?? [];
  }

  reset(sessionId: string): void {
    this.sessionId = sessionId;
    this.snapshot = null;
    this.selectedRobot = null;
    this.events = [];
    this.nextEventIndex = 0;
    this.trajectories = new Map();
  }
}
