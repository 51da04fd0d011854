/**
 * Random walk on a line, driven through the external model file protocol.
 *
 * Incremental mode (default): reads `parameters.txt` (mu, sigma),
 * `time.txt` and `seed.txt` from the working directory, evolves the walk
 * from the state persisted in `walk_state.txt` (bootstrapped from
 * `initial.txt` on the first call) and writes `position <value>` to
 * `output.txt`.
 *
 * Direct mode (when `times.txt` and `seeds.txt` are present): one
 * invocation evolves through every requested time and writes one
 * `time position value` row per time to `outputs.txt`.
 *
 * Every step of size dt moves the walker by dt*mu + sqrt(dt)*sigma*xi
 * with xi standard normal from a generator seeded by the provided seed,
 * so identical seeds reproduce identical trajectories. The walk state
 * lives entirely in `walk_state.txt` ("t m"): cloning or moving the
 * sandbox carries the state with it.
 */

import * as fs from "fs";
import * as path from "path";

const DT = 1.0;
const TIME_EPS = 1e-9;

const MASK64 = (1n << 64n) - 1n;

/** SplitMix64 stream over BigInt state; uniform doubles in (0, 1). */
class SeededRandom {
  private state: bigint;

  constructor(seed: bigint) {
    this.state = seed & MASK64;
  }

  private next(): bigint {
    this.state = (this.state + 0x9e3779b97f4a7c15n) & MASK64;
    let z = this.state;
    z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK64;
    z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK64;
    return z ^ (z >> 31n);
  }

  uniform(): number {
    // 53 top bits; zero mapped away so Math.log stays finite
    const u = Number(this.next() >> 11n) / 2 ** 53;
    return u > 0 ? u : Number.MIN_VALUE;
  }

  normal(): number {
    const r = Math.sqrt(-2.0 * Math.log(this.uniform()));
    return r * Math.cos(2.0 * Math.PI * this.uniform());
  }
}

interface WalkState {
  t: number;
  m: number;
}

function readPairs(file: string): Map<string, number> {
  const pairs = new Map<string, number>();
  for (const line of fs.readFileSync(file, "utf-8").split("\n")) {
    const parts = line.trim().split(/\s+/);
    if (parts.length === 2) {
      pairs.set(parts[0], Number(parts[1]));
    }
  }
  return pairs;
}

function requirePair(pairs: Map<string, number>, name: string, file: string): number {
  const value = pairs.get(name);
  if (value === undefined || Number.isNaN(value)) {
    throw new Error(`${file} is missing a numeric '${name}' entry`);
  }
  return value;
}

function loadState(dir: string): WalkState {
  const stateFile = path.join(dir, "walk_state.txt");
  if (fs.existsSync(stateFile)) {
    const parts = fs.readFileSync(stateFile, "utf-8").trim().split(/\s+/).map(Number);
    if (parts.length !== 2 || parts.some(Number.isNaN)) {
      throw new Error("walk_state.txt is corrupt");
    }
    return { t: parts[0], m: parts[1] };
  }
  const initial = readPairs(path.join(dir, "initial.txt"));
  return {
    t: requirePair(initial, "time", "initial.txt"),
    m: requirePair(initial, "position", "initial.txt"),
  };
}

function saveState(dir: string, state: WalkState): void {
  fs.writeFileSync(path.join(dir, "walk_state.txt"), `${state.t} ${state.m}\n`);
}

function evolve(state: WalkState, target: number, mu: number, sigma: number,
                rng: SeededRandom): WalkState {
  const span = target - state.t;
  if (span < -TIME_EPS) {
    throw new Error(`time moved backwards: ${state.t} -> ${target}`);
  }
  let m = state.m;
  if (span > TIME_EPS) {
    const steps = Math.floor(span / DT + TIME_EPS);
    const remainder = span - steps * DT;
    for (let i = 0; i < steps; i++) {
      m += DT * mu + Math.sqrt(DT) * sigma * rng.normal();
    }
    if (remainder > TIME_EPS) {
      m += remainder * mu + Math.sqrt(remainder) * sigma * rng.normal();
    }
  }
  return { t: target, m };
}

function runIncremental(dir: string): void {
  const parameters = readPairs(path.join(dir, "parameters.txt"));
  const mu = requirePair(parameters, "mu", "parameters.txt");
  const sigma = requirePair(parameters, "sigma", "parameters.txt");
  const target = Number(fs.readFileSync(path.join(dir, "time.txt"), "utf-8").trim());
  const seed = BigInt(fs.readFileSync(path.join(dir, "seed.txt"), "utf-8").trim());
  if (Number.isNaN(target)) {
    throw new Error("time.txt is not a number");
  }
  const state = evolve(loadState(dir), target, mu, sigma, new SeededRandom(seed));
  saveState(dir, state);
  fs.writeFileSync(path.join(dir, "output.txt"), `position ${state.m}\n`);
}

function runDirect(dir: string): void {
  const parameters = readPairs(path.join(dir, "parameters.txt"));
  const mu = requirePair(parameters, "mu", "parameters.txt");
  const sigma = requirePair(parameters, "sigma", "parameters.txt");
  const times = fs
    .readFileSync(path.join(dir, "times.txt"), "utf-8")
    .split(/\s+/)
    .filter((v) => v.length > 0)
    .map(Number);
  const seeds = fs
    .readFileSync(path.join(dir, "seeds.txt"), "utf-8")
    .split(/\s+/)
    .filter((v) => v.length > 0)
    .map(BigInt);
  if (times.length === 0) {
    throw new Error("times.txt is empty");
  }
  if (seeds.length !== times.length) {
    throw new Error(`${seeds.length} seeds for ${times.length} times`);
  }
  let state = loadState(dir);
  const rows: string[] = [];
  for (let i = 0; i < times.length; i++) {
    state = evolve(state, times[i], mu, sigma, new SeededRandom(seeds[i]));
    rows.push(`${times[i]} position ${state.m}`);
  }
  saveState(dir, state);
  fs.writeFileSync(path.join(dir, "outputs.txt"), rows.join("\n") + "\n");
}

export function main(dir: string): void {
  const direct =
    fs.existsSync(path.join(dir, "times.txt")) &&
    fs.existsSync(path.join(dir, "seeds.txt"));
  if (direct) {
    runDirect(dir);
  } else {
    runIncremental(dir);
  }
}

if (require.main === module) {
  try {
    main(process.cwd());
  } catch (error) {
    console.error(String(error));
    process.exit(1);
  }
}
