"""Classical bidirectional optical flow via coarse-to-fine block matching.

This is the deterministic, dependency-free stand-in for learned flow: a
4-level image pyramid (box-filter halving), 16x16 blocks matched by SAD over
a +/-8 px residual search at every level, parabolic subpixel refinement on
the cost surface, and a 3x3 median filter on each flow component.

Determinism rules:

* SAD ties resolve toward the smallest displacement magnitude, then
  lexicographic (dx, dy) - identical inputs therefore yield exactly zero flow.
* Subpixel refinement is skipped when the best cost is already zero, keeping
  exact matches exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import median_filter

from .errors import DegenerateInputError, DimensionMismatchError, ValidationError
from .media import Frame

BLOCK = 16
SEARCH_RADIUS = 8
PYRAMID_LEVELS = 4

FLO_MAGIC = b"FLO1"


@dataclass(frozen=True)
class FlowField:
    """Per-pixel displacement map; ``vectors`` is (H, W, 2) float64 (dx, dy)."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 3 or v.shape[2] != 2:
            raise ValidationError(f"flow must be (H, W, 2), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("flow contains non-finite components")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @property
    def width(self) -> int:
        return self.vectors.shape[1]

    @property
    def height(self) -> int:
        return self.vectors.shape[0]


def luma(frame: Frame) -> np.ndarray:
    """Integer-weighted luma used for matching: (77 R + 150 G + 29 B) >> 8."""
    px = frame.pixels.astype(np.uint32)
    return ((77 * px[..., 0] + 150 * px[..., 1] + 29 * px[..., 2]) >> 8).astype(
        np.int32
    )


def bilinear_sample(values: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample ``values`` (H, W[, C]) at real positions, clamp-to-edge."""
    h, w = values.shape[:2]
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    if values.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    v = values.astype(np.float64)
    top = v[y0, x0] * (1 - fx) + v[y0, x1] * fx
    bot = v[y1, x0] * (1 - fx) + v[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def _downsample(img: np.ndarray) -> np.ndarray:
    h2, w2 = img.shape[0] // 2, img.shape[1] // 2
    return (
        img[: 2 * h2, : 2 * w2]
        .reshape(h2, 2, w2, 2)
        .mean(axis=(1, 3))
    )


def _pad_to_blocks(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    ph = (-h) % BLOCK
    pw = (-w) % BLOCK
    if ph or pw:
        img = np.pad(img, ((0, ph), (0, pw)), mode="edge")
    return img


def _candidate_order():
    # smallest magnitude first, then lexicographic (dx, dy)
    cands = [
        (dx, dy)
        for dx in range(-SEARCH_RADIUS, SEARCH_RADIUS + 1)
        for dy in range(-SEARCH_RADIUS, SEARCH_RADIUS + 1)
    ]
    cands.sort(key=lambda d: (d[0] * d[0] + d[1] * d[1], d[0], d[1]))
    return cands


_CANDIDATES = _candidate_order()


def _shift_clamped(img: np.ndarray, dx: int, dy: int) -> np.ndarray:
    h, w = img.shape
    ys = np.clip(np.arange(h) + dy, 0, h - 1)
    xs = np.clip(np.arange(w) + dx, 0, w - 1)
    return img[np.ix_(ys, xs)]


def _match_level(i0: np.ndarray, i1: np.ndarray, pred: np.ndarray) -> np.ndarray:
    """One pyramid level: residual block search around the predicted flow."""
    h, w = i0.shape
    i0p = _pad_to_blocks(i0)
    hp, wp = i0p.shape
    nby, nbx = hp // BLOCK, wp // BLOCK

    # motion-compensate i1 by the rounded prediction, then search residuals
    pred_int = np.rint(pred).astype(np.intp)
    pred_pad = np.pad(
        pred_int, ((0, hp - h), (0, wp - w), (0, 0)), mode="edge"
    ) if (hp != h or wp != w) else pred_int
    yy, xx = np.meshgrid(np.arange(hp), np.arange(wp), indexing="ij")
    i1p = _pad_to_blocks(i1)
    gx = np.clip(xx + pred_pad[..., 0], 0, wp - 1)
    gy = np.clip(yy + pred_pad[..., 1], 0, hp - 1)
    i1c = i1p[gy, gx]

    n_cand = len(_CANDIDATES)
    costs = np.empty((n_cand, nby, nbx), dtype=np.int64)
    for k, (dx, dy) in enumerate(_CANDIDATES):
        diff = np.abs(i0p - _shift_clamped(i1c, dx, dy))
        costs[k] = diff.reshape(nby, BLOCK, nbx, BLOCK).sum(axis=(1, 3))

    best = np.argmin(costs, axis=0)  # first occurrence wins: smallest |d| first
    best_cost = np.take_along_axis(costs, best[None], axis=0)[0]
    dxs = np.array([d[0] for d in _CANDIDATES], dtype=np.float64)
    dys = np.array([d[1] for d in _CANDIDATES], dtype=np.float64)
    res = np.stack([dxs[best], dys[best]], axis=-1)

    # parabolic subpixel refinement per axis on the 1-D cost slices
    cand_index = {d: k for k, d in enumerate(_CANDIDATES)}
    flat_best = best.ravel()
    flat_cost = costs.reshape(n_cand, -1)
    for axis, (ax_dx, ax_dy) in enumerate([(1, 0), (0, 1)]):
        for b in range(flat_best.size):
            k = flat_best[b]
            if flat_cost[k, b] == 0:
                continue
            dx, dy = _CANDIDATES[k]
            km = cand_index.get((dx - ax_dx, dy - ax_dy))
            kp = cand_index.get((dx + ax_dx, dy + ax_dy))
            if km is None or kp is None:
                continue
            cm = float(flat_cost[km, b])
            c0 = float(flat_cost[k, b])
            cp = float(flat_cost[kp, b])
            denom = cm - 2.0 * c0 + cp
            if denom <= 0:
                continue
            offset = 0.5 * (cm - cp) / denom
            res.reshape(-1, 2)[b, axis] += float(np.clip(offset, -0.5, 0.5))

    # broadcast block residuals onto pixels; add back the per-pixel prediction
    res_px = np.repeat(np.repeat(res, BLOCK, axis=0), BLOCK, axis=1)
    out = pred_pad.astype(np.float64) + res_px[:hp, :wp]
    out = out[:h, :w]
    out = np.stack(
        [median_filter(out[..., 0], size=3, mode="nearest"),
         median_filter(out[..., 1], size=3, mode="nearest")],
        axis=-1,
    )
    return out


def estimate_flow(i0: Frame, i1: Frame) -> FlowField:
    """Estimate flow mapping each pixel of ``i0`` toward its match in ``i1``."""
    if not i0.same_size(i1):
        raise DimensionMismatchError(
            f"frames differ: {i0.width}x{i0.height} vs {i1.width}x{i1.height}"
        )
    if min(i0.width, i0.height) < BLOCK:
        raise DegenerateInputError(
            f"frame {i0.width}x{i0.height} smaller than one {BLOCK}x{BLOCK} block"
        )
    g0 = luma(i0).astype(np.float64)
    g1 = luma(i1).astype(np.float64)

    pyramid = [(g0, g1)]
    for _ in range(PYRAMID_LEVELS - 1):
        g0d, g1d = _downsample(pyramid[-1][0]), _downsample(pyramid[-1][1])
        if min(g0d.shape) < BLOCK:
            break
        pyramid.append((g0d, g1d))

    flow = np.zeros(pyramid[-1][0].shape + (2,), dtype=np.float64)
    for level in range(len(pyramid) - 1, -1, -1):
        l0, l1 = pyramid[level]
        if flow.shape[:2] != l0.shape:
            up = 2.0 * np.repeat(np.repeat(flow, 2, axis=0), 2, axis=1)
            h, w = l0.shape
            uh, uw = up.shape[:2]
            if uh < h or uw < w:
                up = np.pad(up, ((0, h - uh), (0, w - uw), (0, 0)), mode="edge")
            flow = up[:h, :w]
        flow = _match_level(l0, l1, flow)
    return FlowField(flow)


def flow_consistency_error(f01: FlowField, f10: FlowField) -> np.ndarray:
    """Forward-backward consistency: e(p) = ||F01(p) + F10(p + F01(p))||_2.

    F10 is sampled bilinearly with clamp-to-edge at the displaced positions.
    """
    if f01.vectors.shape != f10.vectors.shape:
        raise DimensionMismatchError(
            f"flow fields differ: {f01.vectors.shape} vs {f10.vectors.shape}"
        )
    h, w = f01.height, f01.width
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    xs = xx + f01.vectors[..., 0]
    ys = yy + f01.vectors[..., 1]
    back = bilinear_sample(f10.vectors, xs, ys)
    total = f01.vectors + back
    return np.sqrt(total[..., 0] ** 2 + total[..., 1] ** 2)


# --- binary dump for debugging / cross-implementation comparison ------------

def write_flo(field: FlowField, path):
    """Little-endian dump: magic "FLO1", u32 width/height, row-major f32 pairs."""
    with open(path, "wb") as fh:
        fh.write(FLO_MAGIC)
        fh.write(struct.pack("<II", field.width, field.height))
        fh.write(field.vectors.astype("<f4").tobytes())


def read_flo(path) -> FlowField:
    data = open(path, "rb").read()
    if data[:4] != FLO_MAGIC:
        raise ValidationError(f"bad flow-dump magic {data[:4]!r}")
    w, h = struct.unpack_from("<II", data, 4)
    vec = np.frombuffer(data, "<f4", w * h * 2, 12).reshape(h, w, 2)
    return FlowField(vec.astype(np.float64))
