// Wire types mirroring the service's JSON bodies.

export type Cell = [number, number];

export interface AssignmentRef {
  symbol: string;
  subtask: number;
  step: number;
}

export interface RobotView {
  id: string;
  cell: Cell;
  battery: number;
  battery_low: boolean;
  assignment: AssignmentRef | null;
  plan: Cell[];
}

export interface BeliefSummary {
  mean: number;
  variance: number;
  bins?: number[];
}

export interface GridView {
  width: number;
  height: number;
  stations: Record<string, Cell>;
  known_obstacles: Cell[];
  obstacles?: Cell[];
}

export interface PathComponent {
  robot: string;
  symbol: string;
  subtask: number;
}

export interface ProposedPath {
  steps: PathComponent[][];
  total_trust: number;
}

export interface Reassignment {
  symbol: string;
  subtask: number;
  from: string;
  to: string;
}

export interface PendingRequest {
  id: number;
  robot: string;
  symbol: string;
  subtask: number;
  pinned: PathComponent[];
  proposed: ProposedPath;
  trust: Record<string, number>;
  reassignments: Reassignment[];
}

export type Projection = [number, string, number]; // [step, symbol, subtask]

export interface AllocationView {
  epoch: number;
  projections: Record<string, Projection[]>;
}

export interface LogRecord {
  t: number;
  type: string;
  payload: Record<string, unknown>;
}

export interface Snapshot {
  clock: number;
  finished: boolean;
  grid: GridView;
  robots: RobotView[];
  beliefs: Record<string, BeliefSummary>;
  allocation: AllocationView;
  pending: PendingRequest | null;
  events: LogRecord[];
  event_count: number;
}

export interface CreatedSession {
  session: string;
  snapshot: Snapshot;
}
