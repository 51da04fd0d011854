import { execFileSync } from "child_process";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { afterEach, beforeAll, describe, expect, it } from "vitest";

const root = path.resolve(__dirname, "..");
const script = path.join(root, "dist", "walker.js");

const scratch: string[] = [];

beforeAll(() => {
  if (!fs.existsSync(script)) {
    execFileSync("tsc", ["-p", root], { stdio: "inherit" });
  }
});

afterEach(() => {
  while (scratch.length) {
    fs.rmSync(scratch.pop()!, { recursive: true, force: true });
  }
});

function sandbox(files: Record<string, string>): string {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "walker-"));
  scratch.push(dir);
  for (const [name, content] of Object.entries(files)) {
    fs.writeFileSync(path.join(dir, name), content);
  }
  return dir;
}

function invoke(dir: string): { status: number; stderr: string } {
  try {
    execFileSync("node", [script], { cwd: dir, stdio: "pipe" });
    return { status: 0, stderr: "" };
  } catch (error: any) {
    return { status: error.status ?? 1, stderr: String(error.stderr) };
  }
}

function readOutput(dir: string): number {
  const text = fs.readFileSync(path.join(dir, "output.txt"), "utf-8");
  const parts = text.trim().split(/\s+/);
  expect(parts[0]).toBe("position");
  return Number(parts[1]);
}

const BASE = {
  "parameters.txt": "mu 1\nsigma 0\n",
  "initial.txt": "position 10\ntime 0\n",
  "seed.txt": "12345\n",
};

describe("incremental protocol", () => {
  it("deterministic drift: sigma=0, mu=1 from (0, 10) to t=5 gives 15", () => {
    const dir = sandbox({ ...BASE, "time.txt": "5.0\n" });
    expect(invoke(dir).status).toBe(0);
    expect(readOutput(dir)).toBe(15);
  });

  it("identical seeds in fresh sandboxes give identical outputs", () => {
    const files = {
      "parameters.txt": "mu 0.3\nsigma 2.5\n",
      "initial.txt": "position 10\ntime 0\n",
      "seed.txt": "987654321\n",
      "time.txt": "3.0\n",
    };
    const a = sandbox(files);
    const b = sandbox(files);
    invoke(a);
    invoke(b);
    expect(readOutput(a)).toBe(readOutput(b));
  });

  it("persists its state in walk_state.txt between invocations", () => {
    const dir = sandbox({ ...BASE, "time.txt": "2.0\n" });
    invoke(dir);
    expect(fs.readFileSync(path.join(dir, "walk_state.txt"), "utf-8").trim())
      .toBe("2 12");
    fs.writeFileSync(path.join(dir, "time.txt"), "4.0\n");
    invoke(dir);
    expect(readOutput(dir)).toBe(14);
  });

  it("state carried by the statefile survives a sandbox move", () => {
    const dir = sandbox({
      "parameters.txt": "mu 0\nsigma 3\n",
      "initial.txt": "position 0\ntime 0\n",
      "seed.txt": "42\n",
      "time.txt": "1.0\n",
    });
    invoke(dir);
    const moved = fs.mkdtempSync(path.join(os.tmpdir(), "walker-moved-"));
    scratch.push(moved);
    for (const name of fs.readdirSync(dir)) {
      fs.renameSync(path.join(dir, name), path.join(moved, name));
    }
    fs.writeFileSync(path.join(moved, "time.txt"), "2.0\n");
    fs.writeFileSync(path.join(moved, "seed.txt"), "43\n");
    expect(invoke(moved).status).toBe(0);
    const state = fs
      .readFileSync(path.join(moved, "walk_state.txt"), "utf-8")
      .trim()
      .split(/\s+/);
    expect(Number(state[0])).toBe(2);
  });

  it("fails with nonzero status when an input file is missing", () => {
    const dir = sandbox({ "parameters.txt": "mu 1\nsigma 0\n", "time.txt": "1.0\n" });
    const result = invoke(dir);
    expect(result.status).not.toBe(0);
  });
});

describe("direct protocol", () => {
  it("emits one output row per requested time in a single run", () => {
    const dir = sandbox({
      ...BASE,
      "times.txt": "1.0\n2.0\n3.0\n",
      "seeds.txt": "1\n2\n3\n",
    });
    expect(invoke(dir).status).toBe(0);
    const rows = fs
      .readFileSync(path.join(dir, "outputs.txt"), "utf-8")
      .trim()
      .split("\n");
    expect(rows).toHaveLength(3);
    expect(rows.map((r) => r.split(/\s+/)[2]).map(Number)).toEqual([11, 12, 13]);
  });

  it("matches incremental outputs in the deterministic limit", () => {
    const direct = sandbox({
      ...BASE,
      "times.txt": "1.5\n4.0\n",
      "seeds.txt": "7\n8\n",
    });
    invoke(direct);
    const rows = fs
      .readFileSync(path.join(direct, "outputs.txt"), "utf-8")
      .trim()
      .split("\n")
      .map((r) => Number(r.split(/\s+/)[2]));

    const incremental = sandbox({ ...BASE, "time.txt": "1.5\n", "seed.txt": "7\n" });
    invoke(incremental);
    const first = readOutput(incremental);
    fs.writeFileSync(path.join(incremental, "time.txt"), "4.0\n");
    fs.writeFileSync(path.join(incremental, "seed.txt"), "8\n");
    invoke(incremental);
    const second = readOutput(incremental);
    expect(rows).toEqual([first, second]);
  });

  it("fails on an empty times.txt", () => {
    const dir = sandbox({ ...BASE, "times.txt": "", "seeds.txt": "" });
    const result = invoke(dir);
    expect(result.status).not.toBe(0);
    expect(result.stderr).toContain("times.txt");
  });
});
