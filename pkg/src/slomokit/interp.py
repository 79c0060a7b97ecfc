"""Intermediate-frame synthesis.

Pipeline for the classical backend: bidirectional flow -> intermediate-flow
approximation (quadratic-in-t combination) -> backward warping -> visibility
weighting from forward-backward consistency -> normalized blend.  All pixel
math accumulates in float64 and rounds half-to-even exactly once at output.
"""

from __future__ import annotations

import time

import numpy as np

from .errors import DimensionMismatchError, ValidationError
from .flow import FlowField, bilinear_sample, estimate_flow, flow_consistency_error
from .media import Frame, FrameSequence

#: synthesis denominator guard; below this the unweighted blend is used
EPSILON = 1e-4

#: default Gaussian width (px) for consistency-based visibility
DEFAULT_SIGMA = 2.0


def _check_time(t: float):
    if not (0.0 <= t <= 1.0):
        raise ValidationError(f"time point must be in [0, 1], got {t}")


def approximate_intermediate_flow(f01: FlowField, f10: FlowField, t: float):
    """Quadratic-in-t combination of the endpoint flows.

    Ft0 = -(1-t) * t * F01 + t^2 * F10
    Ft1 = (1-t)^2 * F01 - t * (1-t) * F10

    At t=0 this returns (zero, F01) and at t=1 (F10, zero), bit-exactly.
    """
    _check_time(t)
    if f01.vectors.shape != f10.vectors.shape:
        raise DimensionMismatchError(
            f"flow fields differ: {f01.vectors.shape} vs {f10.vectors.shape}"
        )
    a, b = f01.vectors, f10.vectors
    ft0 = (-(1.0 - t) * t) * a + (t * t) * b
    ft1 = ((1.0 - t) ** 2) * a + (-t * (1.0 - t)) * b
    return FlowField(ft0), FlowField(ft1)


def _warp_real(pixels: np.ndarray, flow: FlowField) -> np.ndarray:
    h, w = pixels.shape[:2]
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    return bilinear_sample(pixels, xx + flow.vectors[..., 0],
                           yy + flow.vectors[..., 1])


def backward_warp(frame: Frame, flow: FlowField) -> Frame:
    """output(p) = bilinear_sample(frame, p + flow(p)), clamp-to-edge."""
    if (frame.height, frame.width) != (flow.height, flow.width):
        raise DimensionMismatchError(
            f"frame {frame.width}x{frame.height} vs flow "
            f"{flow.width}x{flow.height}"
        )
    return Frame(np.clip(np.rint(_warp_real(frame.pixels, flow)), 0, 255).astype(np.uint8))


def visibility_from_consistency(f01: FlowField, f10: FlowField,
                                sigma: float = DEFAULT_SIGMA):
    """Soft visibility from forward-backward flow consistency.

    V0(p) = exp(-e01(p)^2 / (2 sigma^2)); V1 with the flow roles swapped.
    """
    if sigma <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    e01 = flow_consistency_error(f01, f10)
    e10 = flow_consistency_error(f10, f01)
    inv = 1.0 / (2.0 * sigma * sigma)
    return np.exp(-(e01 ** 2) * inv), np.exp(-(e10 ** 2) * inv)


def synthesize_frame(i0: Frame, i1: Frame, t: float, ft0: FlowField,
                     ft1: FlowField, v0: np.ndarray, v1: np.ndarray) -> Frame:
    """Visibility-weighted blend of the two warped inputs.

    Where the combined weight falls below the epsilon guard, the plain
    (1-t)/t blend of the warped frames is used instead.
    """
    _check_time(t)
    shapes = {i0.pixels.shape, i1.pixels.shape}
    if len(shapes) != 1:
        raise DimensionMismatchError("input frames differ in size")
    if (i0.height, i0.width) != (ft0.height, ft0.width) or \
       (i0.height, i0.width) != (ft1.height, ft1.width):
        raise DimensionMismatchError("flow fields do not match frame size")
    if v0.shape != (i0.height, i0.width) or v1.shape != (i0.height, i0.width):
        raise DimensionMismatchError("visibility maps do not match frame size")

    w0 = _warp_real(i0.pixels, ft0)
    w1 = _warp_real(i1.pixels, ft1)
    a = (1.0 - t) * v0
    b = t * v1
    denom = a + b
    weighted = (a[..., None] * w0 + b[..., None] * w1)
    plain = (1.0 - t) * w0 + t * w1
    safe = denom >= EPSILON
    out = np.where(safe[..., None], weighted / np.where(safe, denom, 1.0)[..., None],
                   plain)
    return Frame(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def classical_interpolate(i0: Frame, i1: Frame, t: float,
                          sigma: float = DEFAULT_SIGMA,
                          stage_times: dict | None = None) -> Frame:
    """Full classical chain; optionally records per-stage wall time."""
    _check_time(t)
    if t == 0.0:
        return i0
    if t == 1.0:
        return i1
    tick = time.perf_counter
    t0 = tick()
    f01 = estimate_flow(i0, i1)
    f10 = estimate_flow(i1, i0)
    t1 = tick()
    ft0, ft1 = approximate_intermediate_flow(f01, f10, t)
    v0, v1 = visibility_from_consistency(f01, f10, sigma)
    t2 = tick()
    out = synthesize_frame(i0, i1, t, ft0, ft1, v0, v1)
    t3 = tick()
    if stage_times is not None:
        stage_times["flow"] = stage_times.get("flow", 0.0) + (t1 - t0)
        stage_times["warp"] = stage_times.get("warp", 0.0) + (t2 - t1)
        stage_times["blend"] = stage_times.get("blend", 0.0) + (t3 - t2)
    return out


def blend_interpolate(i0: Frame, i1: Frame, t: float) -> Frame:
    """(1-t) I0 + t I1 per pixel, rounded half-to-even."""
    _check_time(t)
    if not i0.same_size(i1):
        raise DimensionMismatchError("input frames differ in size")
    mix = (1.0 - t) * i0.pixels.astype(np.float64) + t * i1.pixels.astype(np.float64)
    return Frame(np.clip(np.rint(mix), 0, 255).astype(np.uint8))


def recursive_interpolate(seq: FrameSequence, exponent: int, synth,
                          progress=None) -> FrameSequence:
    """Recursive midpoint slow-motion: ``exponent`` halving passes.

    ``synth(i0, i1)`` must return the midpoint frame.  Output frame count is
    (N-1) * 2^e + 1; fps is kept, so playback duration stretches by 2^e.
    ``progress(done, total)`` is called after each synthesized pair.
    """
    if not isinstance(exponent, int) or not (1 <= exponent <= 5):
        raise ValidationError(f"exponent must be an integer in [1, 5], got {exponent}")
    if len(seq) < 2:
        raise ValidationError(f"need at least 2 frames, got {len(seq)}")
    frames = list(seq.frames)
    total = (len(frames) - 1) * ((1 << exponent) - 1)
    done = 0
    for _ in range(exponent):
        out = []
        for a, b in zip(frames, frames[1:]):
            out.append(a)
            out.append(synth(a, b))
            done += 1
            if progress is not None:
                progress(done, total)
        out.append(frames[-1])
        frames = out
    return FrameSequence(tuple(frames), seq.fps)
