import { describe, expect, it } from "vitest";
import type { JobInfo } from "../src/api.js";
import { StudioState } from "../src/state.js";

const src = (label: string) => ({ png: new Uint8Array([1]), label });

function doneJob(n: number): JobInfo {
  return {
    id: "j",
    session_id: "s",
    status: "done",
    results: Array.from({ length: n }, (_, i) => ({
      sample_id: `s${i}`,
      candidate_index: i,
      similarity: -i,
      nll: i,
      kept: i % 2 === 0,
    })),
    error: null,
    source_sha256: null,
  };
}

describe("StudioState", () => {
  it("enables generation only when source, region and driver are all set", () => {
    const s = new StudioState();
    expect(s.canGenerate).toBe(false);
    s.setSource(src("a"));
    expect(s.canGenerate).toBe(false);
    s.setRegion({ kind: "rect", rect: { top: 0, left: 0, height: 4, width: 4 } });
    expect(s.canGenerate).toBe(false);
    s.setDriver(true);
    expect(s.canGenerate).toBe(true);
    expect(() =>
      new StudioState().requestGenerate({ n: 1, keep: 1, policy: { kind: "greedy" }, seed: 0 }),
    ).toThrow(/source, region and driver/);
  });

  it("queues extra generate clicks behind the active job", () => {
    const s = new StudioState();
    s.setSource(src("a"));
    s.setRegion({ kind: "rect", rect: { top: 0, left: 0, height: 4, width: 4 } });
    s.setDriver(true);
    const params = { n: 2, keep: 1, policy: { kind: "greedy" as const }, seed: 0 };
    expect(s.requestGenerate(params)).toEqual(params);
    s.jobStarted("job-1");
    expect(s.requestGenerate({ ...params, seed: 1 })).toBeNull();
    expect(s.queuedCount).toBe(1);
    const next = s.jobFinished(doneJob(2));
    expect(next?.seed).toBe(1);
    expect(s.queuedCount).toBe(0);
    expect(s.pendingJobId).toBeNull();
  });

  it("sorts the gallery kept-first then by similarity", () => {
    const s = new StudioState();
    s.jobFinished(doneJob(4));
    expect(s.gallery.map((g) => g.sampleId)).toEqual(["s0", "s2", "s1", "s3"]);
    expect(s.gallery[0].kept).toBe(true);
  });

  it("promote pushes undo history and undo restores the prior source", () => {
    const s = new StudioState();
    s.setSource(src("original"));
    s.promoted(src("sample-1"));
    expect(s.source?.label).toBe("sample-1");
    expect(s.undoDepth).toBe(1);
    s.promoted(src("sample-2"));
    expect(s.undoDepth).toBe(2);
    expect(s.undoPromote()).toBe(true);
    expect(s.source?.label).toBe("sample-1");
    expect(s.undoPromote()).toBe(true);
    expect(s.source?.label).toBe("original");
    expect(s.undoPromote()).toBe(false);
  });

  it("notifies subscribers and supports unsubscribe", () => {
    const s = new StudioState();
    let ticks = 0;
    const off = s.subscribe(() => ticks++);
    s.setDriver(true);
    expect(ticks).toBe(1);
    off();
    s.setDriver(false);
    expect(ticks).toBe(1);
  });
});
