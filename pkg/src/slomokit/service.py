"""HTTP job service backing the web UI.

Jobs (one uploaded video, or exactly two images) run asynchronously on a
FIFO queue with a fixed worker pool.  Everything is persisted on the
filesystem under one directory per job id, so a restart recovers queued and
finished jobs; jobs that were running restart as queued.  Artifacts are
fully written before the status flips to done.

Multipart parsing uses the stdlib email parser: uploads here are a handful
of parts, and size limits are enforced from Content-Length before the body
is accepted.
"""

from __future__ import annotations

import io
import json
import queue
import secrets
import shlex
import subprocess
import threading
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from email.parser import BytesParser
from fractions import Fraction
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from PIL import Image

from .backends import builtin_descriptors, create_backend, interpolate as backend_interpolate
from .errors import MediaError, SlomoError, ValidationError
from .interp import recursive_interpolate
from .media import Frame, FrameSequence, emit_y4m, load_media, parse_y4m

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}
VIDEO_SUFFIXES = {".y4m", ".mp4", ".avi", ".mov", ".mkv"}

TERMINAL = {"done", "failed"}


@dataclass
class ServiceConfig:
    data_dir: str = "./slomokit-jobs"
    workers: int = 2
    upload_limit_bytes: int = 256 * 1024 * 1024
    decoder_cmd: str | None = None
    encoder_cmd: str | None = None  # template with {output}; reads Y4M on stdin
    default_backend: str = "classical"
    backend_cmd: str | None = None
    result_ttl_seconds: int = 24 * 3600
    frontend_dir: str | None = None


@dataclass
class Job:
    job_id: str
    kind: str  # video | image-pair
    exponent: int
    backend: str
    status: str = "queued"
    progress: float = 0.0
    error: str | None = None
    created_at: float = 0.0
    finished_at: float | None = None
    frame_count: int | None = None
    container_available: bool = False

    def to_json(self) -> dict:
        doc = {
            "id": self.job_id,
            "kind": self.kind,
            "exponent": self.exponent,
            "backend": self.backend,
            "status": self.status,
            "progress": self.progress,
            "error": self.error,
            "created_at": self.created_at,
            "finished_at": self.finished_at,
            "frame_count": self.frame_count,
            "container_available": self.container_available,
        }
        return doc


class JobStore:
    """Filesystem-backed job registry with atomic state transitions."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.root = Path(config.data_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._jobs: dict = {}
        self._queue: queue.Queue = queue.Queue()
        self._workers: list = []
        self._stop = threading.Event()
        self._recover()

    # -- persistence --------------------------------------------------------

    def job_dir(self, job_id: str) -> Path:
        return self.root / job_id

    def _persist(self, job: Job):
        state = json.dumps(job.to_json(), sort_keys=True)
        tmp = self.job_dir(job.job_id) / "state.json.tmp"
        tmp.write_text(state)
        tmp.replace(self.job_dir(job.job_id) / "state.json")

    def _recover(self):
        for jdir in self.root.iterdir() if self.root.exists() else []:
            spath = jdir / "state.json"
            if not spath.is_file():
                continue
            doc = json.loads(spath.read_text())
            job = Job(
                job_id=doc["id"],
                kind=doc["kind"],
                exponent=doc["exponent"],
                backend=doc["backend"],
                status=doc["status"],
                progress=doc["progress"],
                error=doc.get("error"),
                created_at=doc.get("created_at", 0.0),
                finished_at=doc.get("finished_at"),
                frame_count=doc.get("frame_count"),
                container_available=doc.get("container_available", False),
            )
            if job.status == "running":  # crashed mid-run: restart from scratch
                job.status = "queued"
                job.progress = 0.0
            self._jobs[job.job_id] = job
            self._persist(job)
            if job.status == "queued":
                self._queue.put(job.job_id)

    # -- lifecycle ----------------------------------------------------------

    def start_workers(self):
        for i in range(self.config.workers):
            t = threading.Thread(target=self._worker_loop,
                                 name=f"slomokit-worker-{i}", daemon=True)
            t.start()
            self._workers.append(t)

    def stop_workers(self):
        self._stop.set()
        for _ in self._workers:
            self._queue.put(None)
        for t in self._workers:
            t.join(timeout=10)
        self._workers.clear()

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def _update(self, job: Job, **changes):
        with self._lock:
            for k, v in changes.items():
                if k == "progress":
                    v = max(job.progress, min(1.0, v))  # monotone
                setattr(job, k, v)
            self._persist(job)

    def create(self, kind: str, exponent: int, backend: str,
               save_inputs) -> Job:
        job_id = secrets.token_urlsafe(16)  # 128-bit random id
        jdir = self.job_dir(job_id)
        jdir.mkdir(parents=True)
        job = Job(job_id=job_id, kind=kind, exponent=exponent, backend=backend,
                  created_at=time.time())
        save_inputs(jdir)
        with self._lock:
            self._jobs[job_id] = job
            self._persist(job)
        self._queue.put(job_id)
        return job

    # -- execution ----------------------------------------------------------

    def _worker_loop(self):
        while not self._stop.is_set():
            job_id = self._queue.get()
            if job_id is None:
                return
            job = self.get(job_id)
            if job is None or job.status != "queued":
                continue
            self._update(job, status="running")
            try:
                self._run_job(job)
                self._update(job, status="done", progress=1.0,
                             finished_at=time.time())
            except Exception as exc:  # job failure must not kill the worker
                self._update(job, status="failed", error=str(exc),
                             finished_at=time.time())

    def _load_inputs(self, job: Job) -> FrameSequence:
        jdir = self.job_dir(job.job_id)
        if job.kind == "image-pair":
            frames = tuple(
                Frame(np.asarray(Image.open(jdir / f"input_{i}.png").convert("RGB")))
                for i in range(2)
            )
            return FrameSequence(frames, Fraction(30, 1))
        inputs = sorted(jdir.glob("input.*"))
        return load_media(inputs[0], self.config.decoder_cmd)

    def _run_job(self, job: Job):
        jdir = self.job_dir(job.job_id)
        seq = self._load_inputs(job)

        def progress(done, total):
            self._update(job, progress=done / total)

        with create_backend(
            job.backend, command=self.config.backend_cmd
        ) as be:
            result = recursive_interpolate(
                seq, job.exponent,
                lambda a, b: backend_interpolate(be, a, b, 0.5),
                progress=progress,
            )

        frames_dir = jdir / "frames"
        frames_dir.mkdir(exist_ok=True)
        for k, frame in enumerate(result.frames):
            Image.fromarray(frame.pixels).save(frames_dir / f"{k}.png")
        y4m = emit_y4m(result, "444" if result.width % 2 or result.height % 2
                       else "420jpeg")
        (jdir / "result.y4m").write_bytes(y4m)
        container = False
        if self.config.encoder_cmd and job.kind == "video":
            container = self._encode_container(jdir, y4m)
        self._update(job, frame_count=len(result), container_available=container)

    def _encode_container(self, jdir: Path, y4m: bytes) -> bool:
        out = jdir / "result.mp4"
        argv = [p.format(output=str(out))
                for p in shlex.split(self.config.encoder_cmd)]
        try:
            proc = subprocess.run(argv, input=y4m, capture_output=True,
                                  timeout=600)
        except (OSError, subprocess.TimeoutExpired):
            return False
        return proc.returncode == 0 and out.exists()


# --- upload parsing ----------------------------------------------------------

def parse_multipart(content_type: str, body: bytes) -> tuple:
    """Returns (fields: dict, files: list of (filename, bytes))."""
    msg = BytesParser().parsebytes(
        b"Content-Type: " + content_type.encode("latin-1") + b"\r\n\r\n" + body
    )
    if not msg.is_multipart():
        raise ValidationError("expected a multipart/form-data body")
    fields = {}
    files = []
    for part in msg.get_payload():
        name = part.get_param("name", header="content-disposition")
        filename = part.get_param("filename", header="content-disposition")
        data = part.get_payload(decode=True) or b""
        if filename:
            files.append((filename, data))
        elif name:
            fields[name] = data.decode("utf-8", "replace").strip()
    return fields, files


def _classify_upload(files) -> str:
    kinds = []
    for filename, _ in files:
        suffix = Path(filename).suffix.lower()
        if suffix in IMAGE_SUFFIXES:
            kinds.append("image")
        elif suffix in VIDEO_SUFFIXES:
            kinds.append("video")
        else:
            raise ValidationError(f"unsupported file type {suffix!r}")
    if kinds == ["video"]:
        return "video"
    if kinds == ["image", "image"]:
        return "image-pair"
    if all(k == "image" for k in kinds):
        raise ValidationError("exactly two images required")
    raise ValidationError(
        "upload must be one video file or exactly two images"
    )


# --- app ----------------------------------------------------------------------

def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    store = JobStore(config)

    @asynccontextmanager
    async def lifespan(_app):
        store.start_workers()
        yield
        store.stop_workers()

    app = FastAPI(title="slomokit service", lifespan=lifespan)
    app.state.store = store

    def error_response(status: int, exc_or_msg, code="E_VALIDATION"):
        if isinstance(exc_or_msg, SlomoError):
            code = exc_or_msg.code
            msg = str(exc_or_msg)
        else:
            msg = str(exc_or_msg)
        return JSONResponse({"error": {"code": code, "detail": msg}},
                            status_code=status)

    @app.get("/api/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/api/backends")
    def backends():
        descs = builtin_descriptors()
        return [
            {"name": d.name, "kind": d.kind, "capability": d.capability}
            for d in descs
        ]

    @app.post("/api/jobs")
    async def create_job(request: Request):
        length = request.headers.get("content-length")
        if length and int(length) > config.upload_limit_bytes:
            return error_response(413, "upload exceeds the configured limit",
                                  "E_TOO_LARGE")
        content_type = request.headers.get("content-type", "")
        if "multipart/form-data" not in content_type:
            return error_response(400, "expected multipart/form-data")
        body = await request.body()
        if len(body) > config.upload_limit_bytes:
            return error_response(413, "upload exceeds the configured limit",
                                  "E_TOO_LARGE")
        try:
            fields, files = parse_multipart(content_type, body)
            exponent = int(fields.get("e", "1"))
            if not (1 <= exponent <= 5):
                raise ValidationError(
                    f"exponent must be in [1, 5], got {exponent}"
                )
            backend = fields.get("backend") or config.default_backend
            if backend not in ("classical", "blend", "external"):
                raise ValidationError(f"unknown backend {backend!r}")
            kind = _classify_upload(files)
            save = _validate_inputs(kind, files, config)
        except SlomoError as exc:
            return error_response(400, exc)
        except ValueError as exc:
            return error_response(400, exc)
        job = store.create(kind, exponent, backend, save)
        return JSONResponse({"id": job.job_id}, status_code=201)

    def _validate_inputs(kind, files, config):
        """Validate decodability/dimensions now; return a saver callback."""
        if kind == "image-pair":
            images = []
            for filename, data in files:
                try:
                    img = Image.open(io.BytesIO(data)).convert("RGB")
                except Exception as exc:
                    raise MediaError(f"cannot decode image {filename}: {exc}")
                images.append(img)
            if images[0].size != images[1].size:
                raise ValidationError(
                    f"images differ in size: {images[0].size} vs {images[1].size}"
                )

            def save(jdir: Path):
                for i, img in enumerate(images):
                    img.save(jdir / f"input_{i}.png")
            return save

        filename, data = files[0]
        suffix = Path(filename).suffix.lower()
        if suffix == ".y4m":
            parse_y4m(data)  # full decode validates the payload
        else:
            if not config.decoder_cmd:
                raise MediaError(
                    f"no decoder configured for {suffix} input; set a decoder "
                    "command template"
                )

        def save(jdir: Path):
            (jdir / f"input{suffix}").write_bytes(data)
        return save

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        job = store.get(job_id)
        if job is None:
            return error_response(404, f"unknown job {job_id}", "E_NOT_FOUND")
        return job.to_json()

    @app.get("/api/jobs/{job_id}/video")
    def get_video(job_id: str, format: str = "y4m"):
        job = store.get(job_id)
        if job is None:
            return error_response(404, f"unknown job {job_id}", "E_NOT_FOUND")
        if job.status != "done":
            return error_response(409, f"job is {job.status}, not done",
                                  "E_NOT_READY")
        if job.kind != "video":
            return error_response(409, "job input was an image pair; use the "
                                  "frame gallery", "E_WRONG_KIND")
        jdir = store.job_dir(job_id)
        if format == "container":
            if not job.container_available:
                return error_response(
                    409, "no browser-playable container: encoder not "
                    "configured; fall back to Y4M or the frame gallery",
                    "E_NO_ENCODER",
                )
            return Response((jdir / "result.mp4").read_bytes(),
                            media_type="video/mp4")
        return Response((jdir / "result.y4m").read_bytes(),
                        media_type="application/x-yuv4mpeg")

    @app.get("/api/jobs/{job_id}/frames")
    def get_frames(job_id: str):
        job = store.get(job_id)
        if job is None:
            return error_response(404, f"unknown job {job_id}", "E_NOT_FOUND")
        if job.status != "done":
            return error_response(409, f"job is {job.status}, not done",
                                  "E_NOT_READY")
        if job.kind != "image-pair":
            return error_response(409, "frame gallery is only available for "
                                  "image-pair jobs", "E_WRONG_KIND")
        n = job.frame_count  # 2^e + 1 frames, interior ones interpolated
        base = f"/api/jobs/{job_id}/frames"
        return {
            "endpoints": [f"{base}/0", f"{base}/{n - 1}"],
            "frames": [f"{base}/{k}" for k in range(1, n - 1)],
        }

    @app.get("/api/jobs/{job_id}/frames/{k}")
    def get_frame(job_id: str, k: int):
        job = store.get(job_id)
        if job is None:
            return error_response(404, f"unknown job {job_id}", "E_NOT_FOUND")
        if job.status != "done":
            return error_response(409, f"job is {job.status}, not done",
                                  "E_NOT_READY")
        fpath = store.job_dir(job_id) / "frames" / f"{k}.png"
        if not fpath.exists():
            return error_response(404, f"no frame {k}", "E_NOT_FOUND")
        return Response(fpath.read_bytes(), media_type="image/png")

    frontend = config.frontend_dir
    if frontend and Path(frontend).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=frontend, html=True),
                  name="frontend")

    return app
