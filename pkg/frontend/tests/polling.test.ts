import { describe, expect, it } from "vitest";
import type { JobInfo } from "../src/api.js";
import { JobFailed, PollTimeout, pollJob } from "../src/polling.js";

function jobInfo(status: JobInfo["status"], error: string | null = null): JobInfo {
  return { id: "j", session_id: "s", status, results: [], error, source_sha256: null };
}

function fakeClock() {
  let time = 0;
  const delays: number[] = [];
  return {
    now: () => time,
    sleep: async (ms: number) => {
      delays.push(ms);
      time += ms;
    },
    delays,
  };
}

describe("pollJob", () => {
  it("polls at 500 ms until done", async () => {
    const clock = fakeClock();
    let calls = 0;
    const job = await pollJob(
      async () => jobInfo(++calls >= 4 ? "done" : "running"),
      "j",
      { sleep: clock.sleep, now: clock.now },
    );
    expect(job.status).toBe("done");
    expect(clock.delays).toEqual([500, 500, 500]);
  });

  it("backs off exponentially after 10 s", async () => {
    const clock = fakeClock();
    let calls = 0;
    await pollJob(async () => jobInfo(++calls >= 30 ? "done" : "running"), "j", {
      sleep: clock.sleep,
      now: clock.now,
    });
    // first 20 polls cover the 10 s at 500 ms; later delays grow by 1.5x, capped
    expect(clock.delays.slice(0, 20).every((d) => d === 500)).toBe(true);
    expect(clock.delays[20]).toBe(750);
    expect(clock.delays[21]).toBe(1125);
    expect(Math.max(...clock.delays)).toBeLessThanOrEqual(5000);
  });

  it("throws JobFailed with the server error", async () => {
    const err = await pollJob(async () => jobInfo("failed", "DivergenceError: boom"), "j", {
      sleep: async () => {},
    }).catch((e) => e);
    expect(err).toBeInstanceOf(JobFailed);
    expect(err.message).toMatch(/DivergenceError/);
  });

  it("times out on jobs that never finish", async () => {
    const clock = fakeClock();
    const err = await pollJob(async () => jobInfo("running"), "j", {
      sleep: clock.sleep,
      now: clock.now,
      timeoutMs: 30_000,
    }).catch((e) => e);
    expect(err).toBeInstanceOf(PollTimeout);
  });
});
