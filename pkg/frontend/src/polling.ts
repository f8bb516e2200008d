/**
 * Job polling: 500 ms cadence, exponential backoff once a job has been
 * pending for 10 s (jobs are usually short). Clock and sleep are injectable
 * so tests can drive time.
 */
import type { JobInfo } from "./api.js";

export interface PollOptions {
  intervalMs?: number;
  backoffAfterMs?: number;
  backoffFactor?: number;
  maxIntervalMs?: number;
  timeoutMs?: number;
  sleep?: (ms: number) => Promise<void>;
  now?: () => number;
  onTick?: (job: JobInfo, nextDelayMs: number) => void;
}

const realSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export class JobFailed extends Error {
  constructor(readonly job: JobInfo) {
    super(job.error ?? "generation job failed");
  }
}

export class PollTimeout extends Error {}

export async function pollJob(
  getJob: (id: string) => Promise<JobInfo>,
  jobId: string,
  options: PollOptions = {},
): Promise<JobInfo> {
  const {
    intervalMs = 500,
    backoffAfterMs = 10_000,
    backoffFactor = 1.5,
    maxIntervalMs = 5_000,
    timeoutMs = 300_000,
    sleep = realSleep,
    now = Date.now,
    onTick,
  } = options;
  const started = now();
  let delay = intervalMs;
  for (;;) {
    const job = await getJob(jobId);
    if (job.status === "done") return job;
    if (job.status === "failed") throw new JobFailed(job);
    const elapsed = now() - started;
    if (elapsed >= timeoutMs) throw new PollTimeout(`job ${jobId} still ${job.status} after ${elapsed} ms`);
    if (elapsed >= backoffAfterMs) {
      delay = Math.min(delay * backoffFactor, maxIntervalMs);
    }
    onTick?.(job, delay);
    await sleep(delay);
  }
}
