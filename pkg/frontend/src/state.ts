/**
 * Studio state machine, kept free of DOM concerns so it is unit-testable.
 *
 * Invariants: generation is possible only once source, region and driver are
 * all set; a single generate job is active at a time (further requests queue
 * client-side); promote pushes the prior source onto an undo stack.
 */
import type { JobInfo, PolicySpec } from "./api.js";
import type { RegionShape } from "./mask.js";

export interface GalleryItem {
  sampleId: string;
  similarity: number;
  nll: number;
  kept: boolean;
  candidateIndex: number;
}

export interface GenerateParams {
  n: number;
  keep: number;
  policy: PolicySpec;
  seed: number;
}

export interface SourceRef {
  /** PNG bytes the canvas is currently showing (uploaded or promoted). */
  png: Uint8Array;
  label: string;
}

export type Listener = () => void;

export class StudioState {
  source: SourceRef | null = null;
  region: RegionShape | null = null;
  driverSet = false;
  pendingJobId: string | null = null;
  gallery: GalleryItem[] = [];
  comparing: [string, string] | null = null;
  statusMessage = "";
  private undoStack: SourceRef[] = [];
  private queue: GenerateParams[] = [];
  private listeners: Listener[] = [];

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const l of this.listeners) l();
  }

  get canGenerate(): boolean {
    return this.source !== null && this.region !== null && this.driverSet;
  }

  get undoDepth(): number {
    return this.undoStack.length;
  }

  get queuedCount(): number {
    return this.queue.length;
  }

  setSource(source: SourceRef): void {
    this.source = source;
    this.emit();
  }

  setRegion(region: RegionShape | null): void {
    this.region = region;
    this.emit();
  }

  setDriver(set: boolean): void {
    this.driverSet = set;
    this.emit();
  }

  setStatus(message: string): void {
    this.statusMessage = message;
    this.emit();
  }

  /** Returns params to run now, or null if they were queued behind a job. */
  requestGenerate(params: GenerateParams): GenerateParams | null {
    if (!this.canGenerate) {
      throw new Error("set source, region and driver before generating");
    }
    if (this.pendingJobId !== null) {
      this.queue.push(params);
      this.emit();
      return null;
    }
    return params;
  }

  jobStarted(jobId: string): void {
    this.pendingJobId = jobId;
    this.emit();
  }

  /** Records results; returns queued params that should start next, if any. */
  jobFinished(job: JobInfo): GenerateParams | null {
    this.pendingJobId = null;
    this.gallery = job.results
      .map((r) => ({
        sampleId: r.sample_id,
        similarity: r.similarity,
        nll: r.nll,
        kept: r.kept,
        candidateIndex: r.candidate_index,
      }))
      .sort((a, b) => (Number(b.kept) - Number(a.kept)) || b.similarity - a.similarity);
    const next = this.queue.shift() ?? null;
    this.emit();
    return next;
  }

  jobFailed(): GenerateParams | null {
    this.pendingJobId = null;
    const next = this.queue.shift() ?? null;
    this.emit();
    return next;
  }

  promoted(newSource: SourceRef): void {
    if (this.source) this.undoStack.push(this.source);
    this.source = newSource;
    this.emit();
  }

  undoPromote(): boolean {
    const prior = this.undoStack.pop();
    if (!prior) return false;
    this.source = prior;
    this.emit();
    return true;
  }

  compare(a: string, b: string): void {
    this.comparing = [a, b];
    this.emit();
  }

  stopComparing(): void {
    this.comparing = null;
    this.emit();
  }
}
