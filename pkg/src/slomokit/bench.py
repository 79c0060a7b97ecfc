"""Evaluation and throughput harness.

Runs a backend over a test split of triplets, scores every prediction
against the ground-truth middle frame, and aggregates mean and sample
standard deviation per metric.  Infinite PSNR (perfect frames) is capped at
100 dB for aggregation and counted separately.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backends import Backend
from .dataset import SplitAssignment, extract_triplets
from .errors import SlomoError, ValidationError
from .media import Frame, read_frame_dir
from .metrics import FramePairScore, score_pair

PSNR_CAP_DB = 100.0
MAX_SKIP_FRACTION = 0.10


@dataclass(frozen=True)
class EvalReport:
    backend: str
    scores: tuple  # FramePairScore, deterministic order
    psnr_mean: float
    psnr_std: float
    ssim_mean: float
    ssim_std: float
    saturated_count: int
    skipped: tuple = ()
    elapsed_seconds: float = 0.0

    @property
    def frames(self) -> int:
        return len(self.scores)


@dataclass(frozen=True)
class ThroughputStat:
    backend: str
    width: int
    height: int
    frames: int
    elapsed_seconds: float
    fps: float
    stages: dict = field(default_factory=dict)  # flow/warp/blend/io seconds


def _capped(p: float) -> float:
    return PSNR_CAP_DB if math.isinf(p) else p


def aggregate_scores(backend: str, scores, skipped=(), elapsed=0.0) -> EvalReport:
    """Build a report from per-triplet scores (sample std, n-1)."""
    scores = tuple(scores)
    if not scores:
        raise ValidationError("no scores to aggregate")
    psnrs = np.array([_capped(s.psnr) for s in scores])
    ssims = np.array([s.ssim for s in scores])
    ddof = 1 if len(scores) > 1 else 0
    return EvalReport(
        backend=backend,
        scores=scores,
        psnr_mean=float(psnrs.mean()),
        psnr_std=float(psnrs.std(ddof=ddof)),
        ssim_mean=float(ssims.mean()),
        ssim_std=float(ssims.std(ddof=ddof)),
        saturated_count=sum(1 for s in scores if math.isinf(s.psnr)),
        skipped=tuple(skipped),
        elapsed_seconds=elapsed,
    )


def evaluate_backend(backend: Backend, triplet_items) -> EvalReport:
    """Score a backend over test triplets.

    ``triplet_items`` is an iterable of either ``(triplet_id, i0, gt, i2)``
    or ``(triplet_id, loader)`` with ``loader() -> (i0, gt, i2)``.  Items are
    processed in sorted id order for determinism.  Unloadable triplets are
    skipped with a diagnostic; more than 10% skips is a hard failure.
    """
    items = sorted(triplet_items, key=lambda item: item[0])
    if not items:
        raise ValidationError("test split contains no triplets")
    scores = []
    skipped = []
    start = time.perf_counter()
    for item in items:
        triplet_id = item[0]
        try:
            if len(item) == 2:
                i0, gt, i2 = item[1]()
            else:
                i0, gt, i2 = item[1], item[2], item[3]
            pred = backend.run_triplet(i0, gt, i2)
            scores.append(score_pair(gt, pred, frame_id=triplet_id))
        except (SlomoError, OSError) as exc:
            skipped.append((triplet_id, str(exc)))
    if len(skipped) > MAX_SKIP_FRACTION * len(items):
        raise SlomoError(
            f"{len(skipped)} of {len(items)} triplets failed to load "
            f"(> {MAX_SKIP_FRACTION:.0%} tolerance): {skipped[:3]}"
        )
    elapsed = time.perf_counter() - start
    return aggregate_scores(backend.descriptor.name, scores, skipped, elapsed)


def triplet_items_from_corpus(corpus_dir, split: SplitAssignment,
                              split_name: str = "test", stride: int = 1):
    """Lazy triplet items for every clip directory assigned to a split."""
    corpus_dir = Path(corpus_dir)
    items = []
    for clip_id in split.clips_in(split_name):
        clip_dir = corpus_dir / clip_id
        manifest = json.loads((clip_dir / "manifest.json").read_text())
        for trip in extract_triplets(clip_id, int(manifest["count"]), stride):
            def loader(clip_dir=clip_dir, start=trip.start):
                seq = read_frame_dir(clip_dir)
                return (seq[start], seq[start + 1], seq[start + 2])
            items.append((f"{clip_id}/{trip.start:06d}", loader))
    return items


# --- throughput --------------------------------------------------------------

def _synthetic_pair(width: int, height: int, seed: int = 7) -> tuple:
    rng = np.random.default_rng(seed)
    base = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    shifted = np.roll(base, 2, axis=1)
    return Frame(base), Frame(shifted)


def throughput_bench(backend: Backend, resolution=(448, 256), n_pairs: int = 4,
                     warmup: int = 1) -> ThroughputStat:
    """Time midpoint synthesis on synthetic inputs of the given resolution."""
    if n_pairs < 1:
        raise ValidationError("n_pairs must be >= 1")
    if warmup < 0:
        raise ValidationError("warmup must be >= 0")
    width, height = resolution
    i0, i1 = _synthetic_pair(width, height)
    for _ in range(warmup):
        backend.interpolate(i0, i1, 0.5)
    stages = {"flow": 0.0, "warp": 0.0, "blend": 0.0, "io": 0.0}
    start = time.perf_counter()
    for _ in range(n_pairs):
        backend.interpolate(i0, i1, 0.5)
        for key, val in getattr(backend, "last_stage_times", {}).items():
            stages[key] = stages.get(key, 0.0) + val
    elapsed = time.perf_counter() - start
    if not any(stages.values()):
        stages["blend"] = elapsed
    return ThroughputStat(
        backend=backend.descriptor.name,
        width=width,
        height=height,
        frames=n_pairs,
        elapsed_seconds=elapsed,
        fps=n_pairs / elapsed,
        stages=stages,
    )


# --- report serialization ----------------------------------------------------

CSV_HEADER = "backend,psnr_mean,psnr_std,ssim_mean,ssim_std,frames"


def report_to_dict(report: EvalReport) -> dict:
    return {
        "backend": report.backend,
        "psnr_mean": report.psnr_mean,
        "psnr_std": report.psnr_std,
        "ssim_mean": report.ssim_mean,
        "ssim_std": report.ssim_std,
        "saturated_count": report.saturated_count,
        "frames": report.frames,
        "skipped": [list(s) for s in report.skipped],
        "scores": [
            {
                "frame_id": s.frame_id,
                "psnr": None if math.isinf(s.psnr) else s.psnr,
                "ssim": s.ssim,
            }
            for s in report.scores
        ],
    }


def report_from_json(text: str) -> list:
    doc = json.loads(text)
    reports = []
    for rec in doc["reports"]:
        scores = tuple(
            FramePairScore(
                s["frame_id"],
                math.inf if s["psnr"] is None else s["psnr"],
                s["ssim"],
            )
            for s in rec["scores"]
        )
        reports.append(EvalReport(
            backend=rec["backend"],
            scores=scores,
            psnr_mean=rec["psnr_mean"],
            psnr_std=rec["psnr_std"],
            ssim_mean=rec["ssim_mean"],
            ssim_std=rec["ssim_std"],
            saturated_count=rec["saturated_count"],
            skipped=tuple(tuple(s) for s in rec["skipped"]),
        ))
    return reports


def write_report(reports, fmt: str = "json") -> str:
    """Serialize one or more reports; no timestamps, so output is stable."""
    if isinstance(reports, EvalReport):
        reports = [reports]
    if fmt == "json":
        doc = {"reports": [report_to_dict(r) for r in reports]}
        return json.dumps(doc, sort_keys=True, indent=2)
    if fmt == "csv":
        lines = [CSV_HEADER]
        for r in reports:
            lines.append(
                f"{r.backend},{r.psnr_mean:.6f},{r.psnr_std:.6f},"
                f"{r.ssim_mean:.6f},{r.ssim_std:.6f},{r.frames}"
            )
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        lines = [
            "| backend | PSNR | SSIM |",
            "| --- | --- | --- |",
        ]
        for r in reports:
            lines.append(f"| {r.backend} | {r.psnr_mean:.1f} | {r.ssim_mean:.3f} |")
        return "\n".join(lines) + "\n"
    raise ValidationError(f"unknown report format {fmt!r}")


def write_throughput(stat: ThroughputStat) -> str:
    return json.dumps(
        {
            "backend": stat.backend,
            "resolution": f"{stat.width}x{stat.height}",
            "frames": stat.frames,
            "elapsed_seconds": stat.elapsed_seconds,
            "fps": stat.fps,
            "stages": stat.stages,
        },
        sort_keys=True,
        indent=2,
    )
