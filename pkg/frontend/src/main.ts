/** DOM wiring for the editing studio. Logic lives in api/mask/polling/state. */
import { ApiError, StudioClient } from "./api.js";
import { RegionValidationError, countSet, maskToPng, rasterizeRegion } from "./mask.js";
import type { Point, RegionShape } from "./mask.js";
import { JobFailed, pollJob } from "./polling.js";
import { StudioState } from "./state.js";

declare global {
  interface Window {
    E2EVE_BASE_URL?: string;
  }
}

const baseUrl = window.E2EVE_BASE_URL ?? "";
const client = new StudioClient(baseUrl);
const state = new StudioState();

const el = <T extends HTMLElement>(id: string): T => document.getElementById(id) as T;
const stage = el<HTMLCanvasElement>("stage");
const driverPreview = el<HTMLCanvasElement>("driver-preview");
const gallery = el<HTMLDivElement>("gallery");
const statusLine = el<HTMLDivElement>("status");
const generateBtn = el<HTMLButtonElement>("generate");
const undoBtn = el<HTMLButtonElement>("undo");
const compareBox = el<HTMLDivElement>("compare");

let sessionId = "";
let imageSize: [number, number] = [64, 64];
let driverSize: [number, number] = [16, 16];
let scale = 8;
let sourceBitmap: ImageBitmap | null = null;
let mode: "rect" | "polygon" | "driver-crop" = "rect";
let dragStart: Point | null = null;
let dragCurrent: Point | null = null;
let polygonPoints: Point[] = [];
let driverCropRect: { top: number; left: number; height: number; width: number } | null = null;
let compareSelection: string[] = [];

function setStatus(message: string, isError = false): void {
  state.setStatus(message);
  statusLine.textContent = message;
  statusLine.className = isError ? "status error" : "status";
}

function reportError(err: unknown): void {
  if (err instanceof ApiError || err instanceof RegionValidationError || err instanceof JobFailed) {
    setStatus(err.message, true);
  } else {
    setStatus(`Unexpected error: ${err}`, true);
  }
}

function toLogical(event: MouseEvent): Point {
  const bounds = stage.getBoundingClientRect();
  return {
    x: (event.clientX - bounds.left) * (stage.width / bounds.width / scale),
    y: (event.clientY - bounds.top) * (stage.height / bounds.height / scale),
  };
}

function redraw(): void {
  const ctx = stage.getContext("2d")!;
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, stage.width, stage.height);
  if (sourceBitmap) {
    ctx.drawImage(sourceBitmap, 0, 0, stage.width, stage.height);
  } else {
    ctx.fillStyle = "#222";
    ctx.fillRect(0, 0, stage.width, stage.height);
    ctx.fillStyle = "#888";
    ctx.font = "16px sans-serif";
    ctx.fillText("Load a source image", 20, stage.height / 2);
  }
  ctx.lineWidth = 2;
  ctx.strokeStyle = "#3ba7ff";
  ctx.fillStyle = "rgba(59, 167, 255, 0.25)";
  const shape = previewShape();
  if (shape?.kind === "rect") {
    const { top, left, height, width } = shape.rect;
    ctx.fillRect(left * scale, top * scale, width * scale, height * scale);
    ctx.strokeRect(left * scale, top * scale, width * scale, height * scale);
  } else if (shape?.kind === "polygon" && shape.points.length >= 2) {
    ctx.beginPath();
    ctx.moveTo(shape.points[0].x * scale, shape.points[0].y * scale);
    for (const p of shape.points.slice(1)) ctx.lineTo(p.x * scale, p.y * scale);
    ctx.closePath();
    ctx.fill();
    ctx.stroke();
  }
  if (mode === "driver-crop" && driverCropRect) {
    ctx.strokeStyle = "#ffb13b";
    ctx.strokeRect(
      driverCropRect.left * scale,
      driverCropRect.top * scale,
      driverCropRect.width * scale,
      driverCropRect.height * scale,
    );
  }
  generateBtn.disabled = !state.canGenerate || state.pendingJobId !== null;
  undoBtn.disabled = state.undoDepth === 0;
}

function previewShape(): RegionShape | null {
  if (mode === "rect" && dragStart && dragCurrent) {
    return {
      kind: "rect",
      rect: {
        top: Math.min(dragStart.y, dragCurrent.y),
        left: Math.min(dragStart.x, dragCurrent.x),
        height: Math.abs(dragCurrent.y - dragStart.y),
        width: Math.abs(dragCurrent.x - dragStart.x),
      },
    };
  }
  if (mode === "polygon" && polygonPoints.length > 0) {
    return { kind: "polygon", points: polygonPoints };
  }
  return state.region;
}

async function uploadRegion(shape: RegionShape): Promise<void> {
  const [h, w] = imageSize;
  const mask = rasterizeRegion(h, w, shape); // throws RegionValidationError before any upload
  await client.putRegionMask(sessionId, maskToPng(h, w, mask));
  state.setRegion(shape);
  setStatus(`Region set (${countSet(mask)} px inside)`);
  redraw();
}

async function canvasFromPng(png: Uint8Array): Promise<ImageBitmap> {
  const copy = new Uint8Array(png);
  return createImageBitmap(new Blob([copy.buffer as ArrayBuffer], { type: "image/png" }));
}

async function setSourceFromPng(png: Uint8Array, label: string): Promise<void> {
  sourceBitmap = await canvasFromPng(png);
  state.setSource({ png, label });
  redraw();
}

async function cropToDriverPng(rect: { top: number; left: number; height: number; width: number }): Promise<Blob> {
  const canvas = document.createElement("canvas");
  canvas.width = driverSize[1];
  canvas.height = driverSize[0];
  const ctx = canvas.getContext("2d")!;
  ctx.imageSmoothingEnabled = true;
  ctx.drawImage(
    sourceBitmap!,
    (rect.left * sourceBitmap!.width) / imageSize[1],
    (rect.top * sourceBitmap!.height) / imageSize[0],
    (rect.width * sourceBitmap!.width) / imageSize[1],
    (rect.height * sourceBitmap!.height) / imageSize[0],
    0,
    0,
    canvas.width,
    canvas.height,
  );
  return new Promise((resolve) => canvas.toBlob((b) => resolve(b!), "image/png"));
}

async function drawDriverPreview(blob: Blob): Promise<void> {
  const bitmap = await createImageBitmap(blob);
  const ctx = driverPreview.getContext("2d")!;
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, driverPreview.width, driverPreview.height);
  ctx.drawImage(bitmap, 0, 0, driverPreview.width, driverPreview.height);
}

async function runGenerate(params: { n: number; keep: number; seed: number }): Promise<void> {
  const policyKind = el<HTMLSelectElement>("policy").value as "greedy" | "top_p" | "top_k";
  const request = {
    n: params.n,
    keep: params.keep,
    policy: {
      kind: policyKind,
      p: Number(el<HTMLInputElement>("policy-p").value),
      k: Number(el<HTMLInputElement>("policy-k").value),
      temperature: 1.0,
    },
    seed: params.seed,
  };
  const toRun = state.requestGenerate(request);
  if (!toRun) {
    setStatus(`Job queued (${state.queuedCount} waiting)`);
    return;
  }
  await startJob(toRun);
}

async function startJob(params: { n: number; keep: number; policy: any; seed: number }): Promise<void> {
  try {
    const jobId = await client.generate(sessionId, params.n, params.keep, params.policy, params.seed);
    state.jobStarted(jobId);
    setStatus("Generating…");
    redraw();
    const job = await pollJob((id) => client.getJob(id), jobId, {
      onTick: () => setStatus(`Generating… (job ${jobId.slice(0, 8)})`),
    });
    const next = state.jobFinished(job);
    const ips = job.images_per_second;
    setStatus(`Done: ${job.results.length} samples${ips ? ` at ${ips.toFixed(2)} img/s` : ""}`);
    await renderGallery();
    redraw();
    if (next) await startJob(next);
  } catch (err) {
    const next = state.jobFailed();
    reportError(err);
    redraw();
    if (next) await startJob(next);
  }
}

async function renderGallery(): Promise<void> {
  gallery.innerHTML = "";
  for (const item of state.gallery) {
    const card = document.createElement("div");
    card.className = item.kept ? "card kept" : "card";
    const img = document.createElement("img");
    img.src = client.sampleUrl(item.sampleId);
    img.title = `candidate ${item.candidateIndex}, nll ${item.nll.toFixed(3)}`;
    const badge = document.createElement("span");
    badge.className = "badge";
    badge.textContent = `sim ${item.similarity.toFixed(3)}${item.kept ? " ✓" : ""}`;
    const actions = document.createElement("div");
    actions.className = "actions";
    const promoteBtn = document.createElement("button");
    promoteBtn.textContent = "Promote";
    promoteBtn.onclick = () => promoteSample(item.sampleId);
    const driverBtn = document.createElement("button");
    driverBtn.textContent = "As driver";
    driverBtn.onclick = () => driverFromSample(item.sampleId);
    const compareBtn = document.createElement("button");
    compareBtn.textContent = "Compare";
    compareBtn.onclick = () => toggleCompare(item.sampleId);
    actions.append(promoteBtn, driverBtn, compareBtn);
    card.append(img, badge, actions);
    gallery.append(card);
  }
}

async function promoteSample(sampleId: string): Promise<void> {
  try {
    await client.promote(sessionId, sampleId);
    const png = await client.fetchSample(sampleId);
    const prior = state.source;
    state.promoted({ png, label: `sample ${sampleId.slice(0, 8)}` });
    sourceBitmap = await canvasFromPng(png);
    setStatus(`Promoted ${sampleId.slice(0, 8)}… as the new source${prior ? " (undo available)" : ""}`);
    redraw();
  } catch (err) {
    reportError(err);
  }
}

async function driverFromSample(sampleId: string): Promise<void> {
  try {
    await client.putDriverFromSample(sessionId, sampleId);
    const png = await client.fetchSample(sampleId);
    await drawDriverPreview(new Blob([new Uint8Array(png).buffer as ArrayBuffer], { type: "image/png" }));
    state.setDriver(true);
    setStatus("Driver set from sample");
    redraw();
  } catch (err) {
    reportError(err);
  }
}

function toggleCompare(sampleId: string): void {
  compareSelection = [...compareSelection.filter((s) => s !== sampleId), sampleId].slice(-2);
  if (compareSelection.length === 2) {
    state.compare(compareSelection[0], compareSelection[1]);
    compareBox.classList.remove("hidden");
    compareBox.innerHTML = "";
    for (const sid of compareSelection) {
      const img = document.createElement("img");
      img.src = client.sampleUrl(sid);
      compareBox.append(img);
    }
    const close = document.createElement("button");
    close.textContent = "Close";
    close.onclick = () => {
      state.stopComparing();
      compareBox.classList.add("hidden");
      compareSelection = [];
    };
    compareBox.append(close);
  }
}

async function boot(): Promise<void> {
  try {
    const health = await client.health();
    if (health.image_size) imageSize = health.image_size;
    if (health.driver_size) driverSize = health.driver_size;
    scale = Math.max(1, Math.floor(512 / Math.max(...imageSize)));
    stage.width = imageSize[1] * scale;
    stage.height = imageSize[0] * scale;
    sessionId = await client.createSession();
    setStatus(
      health.model_loaded
        ? `Ready (session ${sessionId.slice(0, 8)}, canvas ${imageSize[0]}x${imageSize[1]})`
        : "Server is up but no model is loaded; generation will fail with 503",
    );
  } catch (err) {
    reportError(err);
  }
  redraw();
}

el<HTMLInputElement>("source-file").addEventListener("change", async (e) => {
  const file = (e.target as HTMLInputElement).files?.[0];
  if (!file) return;
  try {
    const png = new Uint8Array(await file.arrayBuffer());
    await client.putSource(sessionId, png);
    // show exactly what the server will edit: fetch back the resized source
    const response = await fetch(`${baseUrl}/v1/sessions/${sessionId}/source`);
    await setSourceFromPng(new Uint8Array(await response.arrayBuffer()), file.name);
    setStatus(`Source ${file.name} uploaded`);
  } catch (err) {
    reportError(err);
  }
});

el<HTMLInputElement>("driver-file").addEventListener("change", async (e) => {
  const file = (e.target as HTMLInputElement).files?.[0];
  if (!file) return;
  try {
    await client.putDriver(sessionId, new Uint8Array(await file.arrayBuffer()));
    await drawDriverPreview(file);
    state.setDriver(true);
    setStatus(`Driver ${file.name} uploaded`);
    redraw();
  } catch (err) {
    reportError(err);
  }
});

for (const m of ["rect", "polygon", "driver-crop"] as const) {
  el<HTMLInputElement>(`mode-${m}`).addEventListener("change", () => {
    mode = m;
    polygonPoints = [];
    redraw();
  });
}

stage.addEventListener("mousedown", (e) => {
  if (mode === "polygon") return;
  dragStart = toLogical(e);
  dragCurrent = dragStart;
});

stage.addEventListener("mousemove", (e) => {
  if (!dragStart || mode === "polygon") return;
  dragCurrent = toLogical(e);
  redraw();
});

stage.addEventListener("mouseup", async (e) => {
  if (mode === "polygon") return;
  dragCurrent = toLogical(e);
  const shape = previewShape();
  const start = dragStart;
  dragStart = dragCurrent = null;
  if (!shape || !start) return;
  try {
    if (mode === "rect" && shape.kind === "rect") {
      await uploadRegion({
        kind: "rect",
        rect: {
          top: Math.round(shape.rect.top),
          left: Math.round(shape.rect.left),
          height: Math.round(shape.rect.height),
          width: Math.round(shape.rect.width),
        },
      });
    } else if (mode === "driver-crop" && shape.kind === "rect" && sourceBitmap) {
      driverCropRect = {
        top: Math.round(shape.rect.top),
        left: Math.round(shape.rect.left),
        height: Math.round(shape.rect.height),
        width: Math.round(shape.rect.width),
      };
      const blob = await cropToDriverPng(driverCropRect);
      await client.putDriver(sessionId, blob);
      await drawDriverPreview(blob);
      state.setDriver(true);
      setStatus("Driver cropped from the source image");
      redraw();
    }
  } catch (err) {
    reportError(err);
  }
});

stage.addEventListener("click", (e) => {
  if (mode !== "polygon") return;
  polygonPoints.push(toLogical(e));
  redraw();
});

stage.addEventListener("dblclick", async () => {
  if (mode !== "polygon" || polygonPoints.length === 0) return;
  const points = polygonPoints.slice(0, -1); // drop the dbl-click duplicate
  polygonPoints = [];
  try {
    await uploadRegion({ kind: "polygon", points });
  } catch (err) {
    reportError(err);
    redraw();
  }
});

generateBtn.addEventListener("click", () => {
  runGenerate({
    n: Number(el<HTMLInputElement>("gen-n").value),
    keep: Number(el<HTMLInputElement>("gen-keep").value),
    seed: Number(el<HTMLInputElement>("gen-seed").value),
  }).catch(reportError);
});

undoBtn.addEventListener("click", async () => {
  if (state.undoPromote() && state.source) {
    try {
      await client.putSource(sessionId, state.source.png);
      sourceBitmap = await canvasFromPng(state.source.png);
      setStatus(`Restored prior source (${state.source.label})`);
    } catch (err) {
      reportError(err);
    }
    redraw();
  }
});

state.subscribe(redraw);
boot();
