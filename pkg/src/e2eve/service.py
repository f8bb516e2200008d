"""HTTP editing service.

Sessions accumulate source / region / driver; generation runs asynchronously
on a bounded worker pool and is polled by job id. Finished samples are
content-addressed PNGs on disk, so identical seeded requests yield identical
sample ids. Promoting a sample swaps it in as the session's next source,
closing the interactive editing loop.
"""
from __future__ import annotations

import hashlib
import json
import os
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response

from . import __version__
from .errors import EmptyMask
from .imageops import Image, area_resize, decode_mask_png, decode_png, encode_mask_png, encode_png
from .regions import EditRegion, block_region, freeform_region
from .sampler import ArtistBundle, EditRequest, SamplingPolicy, filter_by_driver, load_bundle
from .sampler import sample_edit
from .embedder import ConvFeatureEmbedder

DEFAULT_SESSION_TTL = 3600.0


@dataclass
class Session:
    id: str
    created_at: float
    expires_at: float
    source: Image | None = None
    region: EditRegion | None = None
    driver: Image | None = None
    history: list = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


@dataclass
class GenerateJob:
    id: str
    session_id: str
    status: str = "queued"  # queued -> running -> done | failed
    results: list = field(default_factory=list)
    error: str | None = None
    source_sha256: str | None = None
    images_per_second: float | None = None

    def public(self) -> dict:
        return {
            "id": self.id,
            "session_id": self.session_id,
            "status": self.status,
            "results": self.results,
            "error": self.error,
            "source_sha256": self.source_sha256,
            "images_per_second": self.images_per_second,
        }


class EditingService:
    def __init__(
        self,
        bundle: ArtistBundle | None,
        sample_dir: str | Path,
        max_jobs: int = 2,
        session_ttl: float = DEFAULT_SESSION_TTL,
        embedder=None,
    ):
        self.bundle = bundle
        self.sample_dir = Path(sample_dir)
        self.sample_dir.mkdir(parents=True, exist_ok=True)
        self.session_ttl = session_ttl
        self.embedder = embedder or ConvFeatureEmbedder(seed=0)
        self._sessions: dict[str, Session] = {}
        self._jobs: dict[str, GenerateJob] = {}
        self._samples: dict[str, Path] = {}
        self._lock = threading.Lock()
        self._executor = ThreadPoolExecutor(max_workers=max_jobs)

    # --- sizes the loaded model expects ---------------------------------------

    @property
    def image_size(self) -> tuple[int, int] | None:
        if self.bundle is None:
            return None
        f = self.bundle.vq_image.config.downsample_factor
        h, w = self.bundle.artist.layout.source_shape
        return h * f, w * f

    @property
    def driver_size(self) -> tuple[int, int] | None:
        if self.bundle is None:
            return None
        f = self.bundle.vq_driver.config.downsample_factor
        h, w = self.bundle.artist.layout.driver_shape
        return h * f, w * f

    # --- session / sample bookkeeping -----------------------------------------

    def _purge_expired(self) -> None:
        now = time.time()
        with self._lock:
            dead = [sid for sid, s in self._sessions.items() if s.expires_at < now]
            for sid in dead:
                del self._sessions[sid]

    def create_session(self) -> Session:
        self._purge_expired()
        now = time.time()
        session = Session(id=uuid.uuid4().hex, created_at=now, expires_at=now + self.session_ttl)
        with self._lock:
            self._sessions[session.id] = session
        return session

    def get_session(self, session_id: str) -> Session:
        self._purge_expired()
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return session

    def store_sample(self, pixels: np.ndarray) -> str:
        data = encode_png(pixels)
        sample_id = hashlib.sha256(data).hexdigest()
        path = self.sample_dir / f"{sample_id}.png"
        if not path.exists():
            path.write_bytes(data)
        with self._lock:
            self._samples[sample_id] = path
        return sample_id

    def get_sample(self, sample_id: str) -> bytes:
        with self._lock:
            path = self._samples.get(sample_id)
        if path is None or not path.exists():
            raise HTTPException(status_code=404, detail=f"unknown sample {sample_id}")
        return path.read_bytes()

    # --- generation -------------------------------------------------------------

    def submit_generate(self, session: Session, n: int, keep: int, policy: SamplingPolicy) -> GenerateJob:
        if self.bundle is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        with session.lock:
            if session.source is None or session.region is None or session.driver is None:
                missing = [
                    name
                    for name, val in (
                        ("source", session.source),
                        ("region", session.region),
                        ("driver", session.driver),
                    )
                    if val is None
                ]
                raise HTTPException(
                    status_code=409, detail=f"session incomplete: missing {', '.join(missing)}"
                )
            masked = session.source.pixels * (1 - session.region.mask[None]).astype(np.float32)
            request = EditRequest(
                source=Image(pixels=masked, id=session.id),
                region=session.region,
                driver=session.driver,
                n_candidates=n,
                n_keep=keep,
                policy=policy,
            )
            source_sha = hashlib.sha256(encode_png(session.source.pixels)).hexdigest()
        job = GenerateJob(id=uuid.uuid4().hex, session_id=session.id, source_sha256=source_sha)
        with self._lock:
            self._jobs[job.id] = job
        with session.lock:
            session.history.append({"job_id": job.id, "n": n, "keep": keep, "seed": policy.seed})
        self._executor.submit(self._run_job, job, request)
        return job

    def _run_job(self, job: GenerateJob, request: EditRequest) -> None:
        job.status = "running"
        try:
            run = sample_edit(self.bundle, request)
            scored = filter_by_driver(run.candidates, request.driver, self.embedder, len(run.candidates))
            kept_indices = {cand.index for cand, _ in scored[: request.n_keep]}
            results = []
            for cand, similarity in scored:
                sample_id = self.store_sample(cand.image.pixels)
                results.append(
                    {
                        "sample_id": sample_id,
                        "candidate_index": cand.index,
                        "similarity": similarity,
                        "nll": cand.nll,
                        "kept": cand.index in kept_indices,
                    }
                )
            results.sort(key=lambda r: (-r["kept"], -r["similarity"], r["candidate_index"]))
            job.results = results
            job.images_per_second = run.images_per_second
            job.status = "done"
        except Exception as e:  # failure is a terminal job state, not a server error
            job.error = f"{type(e).__name__}: {e}"
            job.status = "failed"

    def get_job(self, job_id: str) -> GenerateJob:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")
        return job


def _png_or_422(data: bytes, what: str) -> np.ndarray:
    try:
        return decode_png(data)
    except Exception as e:
        raise HTTPException(status_code=422, detail=f"cannot decode {what} PNG: {e}") from e


def create_app(service: EditingService, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="e2eve editing service", version=__version__)
    app.state.service = service

    @app.get("/v1/health")
    def health():
        return {
            "status": "ok",
            "model_loaded": service.bundle is not None,
            "image_size": service.image_size,
            "driver_size": service.driver_size,
            "version": __version__,
        }

    @app.post("/v1/sessions", status_code=201)
    def create_session():
        session = service.create_session()
        return {"id": session.id, "expires_at": session.expires_at}

    @app.put("/v1/sessions/{session_id}/source")
    async def put_source(session_id: str, request: Request):
        session = service.get_session(session_id)
        pixels = _png_or_422(await request.body(), "source")
        if service.image_size is not None and pixels.shape[1:] != service.image_size:
            pixels = area_resize(pixels, service.image_size)
        with session.lock:
            session.source = Image(pixels=pixels, id=session_id)
        return {"size": list(pixels.shape[1:])}

    @app.get("/v1/sessions/{session_id}/source")
    def get_source(session_id: str):
        session = service.get_session(session_id)
        with session.lock:
            if session.source is None:
                raise HTTPException(status_code=404, detail="no source set")
            return Response(content=encode_png(session.source.pixels), media_type="image/png")

    @app.put("/v1/sessions/{session_id}/region")
    async def put_region(session_id: str, request: Request):
        session = service.get_session(session_id)
        body = await request.body()
        content_type = request.headers.get("content-type", "")
        size = service.image_size
        if "json" in content_type:
            try:
                rect = json.loads(body)
                region = block_region(
                    size, (rect["top"], rect["left"], rect["height"], rect["width"])
                )
            except HTTPException:
                raise
            except Exception as e:
                raise HTTPException(status_code=422, detail=f"malformed rect: {e}") from e
        else:
            try:
                mask = decode_mask_png(body)
            except Exception as e:
                raise HTTPException(status_code=422, detail=f"cannot decode mask PNG: {e}") from e
            if size is not None and mask.shape != size:
                raise HTTPException(
                    status_code=422, detail=f"mask shape {mask.shape} != image size {size}"
                )
            try:
                region = freeform_region(mask)
            except EmptyMask as e:
                raise HTTPException(status_code=422, detail=str(e)) from e
        with session.lock:
            session.region = region
        return {"bbox": list(region.bbox), "area": region.area}

    @app.get("/v1/sessions/{session_id}/region")
    def get_region(session_id: str):
        session = service.get_session(session_id)
        with session.lock:
            if session.region is None:
                raise HTTPException(status_code=404, detail="no region set")
            return Response(
                content=encode_mask_png(session.region.mask), media_type="image/png"
            )

    @app.put("/v1/sessions/{session_id}/driver")
    async def put_driver(session_id: str, request: Request):
        session = service.get_session(session_id)
        body = await request.body()
        content_type = request.headers.get("content-type", "")
        if "json" in content_type:
            # Crop of an existing sample (or any stored sample) as the next driver.
            try:
                spec = json.loads(body)
                sample_png = service.get_sample(spec["sample_id"])
                pixels = decode_png(sample_png)
                if "rect" in spec and spec["rect"] is not None:
                    t, l, h, w = (int(v) for v in spec["rect"])
                    pixels = pixels[:, t : t + h, l : l + w]
                    if pixels.shape[1] != h or pixels.shape[2] != w or h < 1 or w < 1:
                        raise ValueError(f"rect {spec['rect']} outside sample bounds")
            except HTTPException:
                raise
            except Exception as e:
                raise HTTPException(status_code=422, detail=f"malformed driver crop: {e}") from e
        else:
            pixels = _png_or_422(body, "driver")
        if service.driver_size is not None and pixels.shape[1:] != service.driver_size:
            pixels = area_resize(pixels, service.driver_size)
        with session.lock:
            session.driver = Image(pixels=pixels, id=f"{session_id}/driver")
        return {"size": list(pixels.shape[1:])}

    @app.get("/v1/sessions/{session_id}/driver")
    def get_driver(session_id: str):
        session = service.get_session(session_id)
        with session.lock:
            if session.driver is None:
                raise HTTPException(status_code=404, detail="no driver set")
            return Response(content=encode_png(session.driver.pixels), media_type="image/png")

    @app.post("/v1/sessions/{session_id}/generate", status_code=202)
    async def generate(session_id: str, request: Request):
        session = service.get_session(session_id)
        try:
            body = json.loads(await request.body() or b"{}")
            policy_spec = body.get("policy", {})
            policy = SamplingPolicy(
                kind=policy_spec.get("kind", "top_p"),
                k=int(policy_spec.get("k", 1)),
                p=float(policy_spec.get("p", 0.9)),
                temperature=float(policy_spec.get("temperature", 1.0)),
                seed=int(body.get("seed", 0)),
            )
            n = int(body.get("n", 4))
            keep = int(body.get("keep", min(2, n)))
            if keep > n or n < 1:
                raise ValueError(f"invalid n={n}, keep={keep}")
        except HTTPException:
            raise
        except Exception as e:
            raise HTTPException(status_code=422, detail=f"malformed generate request: {e}") from e
        job = service.submit_generate(session, n, keep, policy)
        return {"id": job.id, "status": job.status}

    @app.get("/v1/jobs/{job_id}")
    def get_job(job_id: str):
        return service.get_job(job_id).public()

    @app.get("/v1/samples/{sample_id}")
    def get_sample(sample_id: str):
        return Response(content=service.get_sample(sample_id), media_type="image/png")

    @app.post("/v1/sessions/{session_id}/promote")
    async def promote(session_id: str, request: Request):
        session = service.get_session(session_id)
        try:
            body = json.loads(await request.body())
            sample_id = body["sample_id"]
        except Exception as e:
            raise HTTPException(status_code=422, detail=f"malformed promote request: {e}") from e
        data = service.get_sample(sample_id)
        pixels = decode_png(data)
        with session.lock:
            session.source = Image(pixels=pixels, id=f"{session_id}/promoted")
            session.history.append({"promoted": sample_id})
        return {"ok": True, "source_sha256": hashlib.sha256(encode_png(pixels)).hexdigest()}

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="studio")

    return app


def service_from_env() -> FastAPI:
    """Build the app from E2EVE_CKPT_DIR / E2EVE_MAX_JOBS / E2EVE_STATIC_DIR."""
    ckpt_dir = os.environ.get("E2EVE_CKPT_DIR")
    bundle = None
    if ckpt_dir:
        d = Path(ckpt_dir)
        bundle = load_bundle(d / "artist.pt", d / "vq_image.pt", d / "vq_driver.pt")
    sample_dir = Path(os.environ.get("E2EVE_SAMPLE_DIR", "samples"))
    max_jobs = int(os.environ.get("E2EVE_MAX_JOBS", "2"))
    service = EditingService(bundle, sample_dir, max_jobs=max_jobs)
    return create_app(service, static_dir=os.environ.get("E2EVE_STATIC_DIR"))
