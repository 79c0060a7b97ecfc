"""Evaluation-corpus construction.

Clip manifests, overlapping triplet extraction, deterministic clip-level
train/val/test splits, and the training augmentations (fixed-size random
crops, horizontal flips, temporal reversals) as exportable descriptors.

Splits and random augmentations use numpy's PCG64 generator seeded
explicitly, so identical seeds reproduce identical artifacts everywhere.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, asdict
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import BoundsError, ValidationError
from .media import Frame, FrameSequence

log = logging.getLogger(__name__)

DEFAULT_RATIOS = (0.8, 0.1, 0.1)
DEFAULT_CROP_SIZE = (448, 256)  # (width, height)
SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class ClipManifest:
    clip_id: str
    frame_count: int
    fps_num: int
    fps_den: int
    source: str

    def __post_init__(self):
        if self.frame_count < 1:
            raise ValidationError(f"clip {self.clip_id}: frame count must be >= 1")

    @property
    def fps(self) -> Fraction:
        return Fraction(self.fps_num, self.fps_den)


@dataclass(frozen=True)
class Triplet:
    """Three consecutive frame indices; the middle one is ground truth."""

    clip_id: str
    start: int

    @property
    def indices(self) -> tuple:
        return (self.start, self.start + 1, self.start + 2)


@dataclass(frozen=True)
class SplitAssignment:
    seed: int
    ratios: tuple
    assignments: dict  # clip id -> "train" | "val" | "test"

    def clips_in(self, split: str) -> list:
        return sorted(c for c, s in self.assignments.items() if s == split)

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "ratios": list(self.ratios),
            "assignments": self.assignments,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "SplitAssignment":
        doc = json.loads(text)
        return cls(doc["seed"], tuple(doc["ratios"]), doc["assignments"])


@dataclass(frozen=True)
class AugmentedTriplet:
    """A triplet plus the deterministic augmentation applied to it.

    ``crop_origin``/``crop_size`` of ``None`` mean no crop.  Application
    order is crop, then horizontal flip, then temporal reversal.
    """

    triplet: Triplet
    crop_origin: tuple | None = None
    crop_size: tuple | None = None
    hflip: bool = False
    time_reversed: bool = False

    def to_json(self) -> str:
        doc = {
            "clip_id": self.triplet.clip_id,
            "start": self.triplet.start,
            "crop_origin": list(self.crop_origin) if self.crop_origin else None,
            "crop_size": list(self.crop_size) if self.crop_size else None,
            "hflip": self.hflip,
            "time_reversed": self.time_reversed,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _as_augmented(t) -> AugmentedTriplet:
    return t if isinstance(t, AugmentedTriplet) else AugmentedTriplet(t)


def extract_triplets(clip_id: str, frame_count: int, stride: int = 1) -> list:
    """Sliding windows [t, t+1, t+2] for t = 0, stride, 2*stride, ...

    Clips with fewer than 3 frames yield an empty list with a logged warning.
    """
    if stride < 1:
        raise ValidationError(f"stride must be >= 1, got {stride}")
    if frame_count < 3:
        log.warning("clip %s has %d frames; no triplets", clip_id, frame_count)
        return []
    return [Triplet(clip_id, t) for t in range(0, frame_count - 2, stride)]


def _exact_ratio(r) -> Fraction:
    # ratios arrive as floats like 0.8; snap to the nearest simple rational
    return Fraction(r).limit_denominator(10_000)


def split_clips(manifests, ratios=DEFAULT_RATIOS, seed: int = 0) -> SplitAssignment:
    """Deterministic clip-level split.

    Clip ids are sorted, shuffled by PCG64(seed), and allocated
    floor(count * ratio) to each of train/val/test in that order, with the
    remainder going to train.  Identical seeds give identical assignments.
    """
    clip_ids = [m.clip_id if isinstance(m, ClipManifest) else str(m)
                for m in manifests]
    if not clip_ids:
        raise ValidationError("at least one clip is required")
    if len(set(clip_ids)) != len(clip_ids):
        raise ValidationError("clip ids must be unique")
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValidationError("ratios must be three nonnegative numbers")
    exact = [_exact_ratio(r) for r in ratios]
    if sum(exact) != 1:
        raise ValidationError(f"ratios must sum to 1, got {ratios}")

    order = sorted(clip_ids)
    rng = np.random.default_rng(seed)
    rng.shuffle(order)

    n = len(order)
    counts = [math.floor(exact[i] * n) for i in range(3)]
    counts[0] += n - sum(counts)  # remainder to train
    assignments = {}
    pos = 0
    for name, count in zip(SPLIT_NAMES, counts):
        for clip_id in order[pos:pos + count]:
            assignments[clip_id] = name
        pos += count
    return SplitAssignment(seed, tuple(float(r) for r in ratios), assignments)


# --- augmentations ----------------------------------------------------------

def crop(triplet, origin: tuple, size: tuple = DEFAULT_CROP_SIZE,
         frame_size: tuple | None = None) -> AugmentedTriplet:
    """Record an identical crop of all three frames.

    ``origin`` is (x, y), ``size`` is (width, height).  When ``frame_size``
    is known the rectangle is validated against it immediately.
    """
    x, y = origin
    w, h = size
    if x < 0 or w < 1:
        raise BoundsError(f"crop overflows horizontally: x={x}, w={w}", axis="x")
    if y < 0 or h < 1:
        raise BoundsError(f"crop overflows vertically: y={y}, h={h}", axis="y")
    if frame_size is not None:
        fw, fh = frame_size
        if x + w > fw:
            raise BoundsError(
                f"crop overflows horizontally: x+w={x + w} > frame width {fw}",
                axis="x",
            )
        if y + h > fh:
            raise BoundsError(
                f"crop overflows vertically: y+h={y + h} > frame height {fh}",
                axis="y",
            )
    aug = _as_augmented(triplet)
    return AugmentedTriplet(aug.triplet, (int(x), int(y)), (int(w), int(h)),
                            aug.hflip, aug.time_reversed)


def hflip(triplet) -> AugmentedTriplet:
    """Mirror each frame about the vertical axis (involution)."""
    aug = _as_augmented(triplet)
    return AugmentedTriplet(aug.triplet, aug.crop_origin, aug.crop_size,
                            not aug.hflip, aug.time_reversed)


def time_reverse(triplet) -> AugmentedTriplet:
    """Swap the outer frames; the middle stays the midpoint ground truth."""
    aug = _as_augmented(triplet)
    return AugmentedTriplet(aug.triplet, aug.crop_origin, aug.crop_size,
                            aug.hflip, not aug.time_reversed)


def random_augment(triplet, frame_size: tuple, seed: int,
                   crop_size: tuple = DEFAULT_CROP_SIZE) -> AugmentedTriplet:
    """Seed-determined augmentation: uniform crop origin, coin-flip hflip
    and temporal reversal."""
    fw, fh = frame_size
    cw, ch = crop_size
    if fw < cw or fh < ch:
        axis = "x" if fw < cw else "y"
        raise BoundsError(
            f"frame {fw}x{fh} smaller than crop {cw}x{ch}", axis=axis
        )
    rng = np.random.default_rng(seed)
    x = int(rng.integers(0, fw - cw + 1))
    y = int(rng.integers(0, fh - ch + 1))
    do_flip = bool(rng.integers(0, 2))
    do_reverse = bool(rng.integers(0, 2))
    aug = crop(triplet, (x, y), crop_size, frame_size)
    if do_flip:
        aug = hflip(aug)
    if do_reverse:
        aug = time_reverse(aug)
    return aug


def apply_augment(aug: AugmentedTriplet, frames) -> tuple:
    """Apply an augmentation descriptor to the triplet's three frames."""
    out = []
    for frame in frames:
        px = frame.pixels
        if aug.crop_origin is not None:
            x, y = aug.crop_origin
            w, h = aug.crop_size
            if x + w > frame.width:
                raise BoundsError(
                    f"crop overflows horizontally: x+w={x + w} > {frame.width}",
                    axis="x",
                )
            if y + h > frame.height:
                raise BoundsError(
                    f"crop overflows vertically: y+h={y + h} > {frame.height}",
                    axis="y",
                )
            px = px[y:y + h, x:x + w]
        if aug.hflip:
            px = px[:, ::-1]
        out.append(Frame(np.ascontiguousarray(px)))
    if aug.time_reversed:
        out = [out[2], out[1], out[0]]
    return tuple(out)


# --- corpus I/O --------------------------------------------------------------

def write_corpus_manifest(manifests, path):
    docs = [asdict(m) for m in manifests]
    Path(path).write_text(json.dumps(docs, sort_keys=True, indent=2))


def read_corpus_manifest(path) -> list:
    docs = json.loads(Path(path).read_text())
    return [ClipManifest(**doc) for doc in docs]


def write_augment_export(augs, path):
    """JSON lines, one augmentation descriptor per line."""
    with open(path, "w") as fh:
        for aug in augs:
            fh.write(aug.to_json() + "\n")
