import math
from fractions import Fraction

import numpy as np
import pytest

from slomokit.backends import BlendBackend, ClassicalBackend, interpolate
from slomokit.errors import DimensionMismatchError, ValidationError
from slomokit.flow import FlowField
from slomokit.interp import (
    approximate_intermediate_flow,
    backward_warp,
    blend_interpolate,
    recursive_interpolate,
    synthesize_frame,
    visibility_from_consistency,
)
from slomokit.media import Frame, FrameSequence
from slomokit.metrics import psnr

from conftest import constant_frame, noise_frame, rolled


def const_flow(w, h, dx, dy):
    vec = np.zeros((h, w, 2))
    vec[..., 0] = dx
    vec[..., 1] = dy
    return FlowField(vec)


def ones(w, h):
    return np.ones((h, w))


# --- intermediate flow ---------------------------------------------------------

def test_endpoint_t0_bit_exact(rng):
    f01 = FlowField(rng.normal(size=(6, 8, 2)))
    f10 = FlowField(rng.normal(size=(6, 8, 2)))
    ft0, ft1 = approximate_intermediate_flow(f01, f10, 0.0)
    assert np.all(ft0.vectors == 0.0)
    assert np.array_equal(ft1.vectors, f01.vectors)


def test_endpoint_t1_bit_exact(rng):
    f01 = FlowField(rng.normal(size=(6, 8, 2)))
    f10 = FlowField(rng.normal(size=(6, 8, 2)))
    ft0, ft1 = approximate_intermediate_flow(f01, f10, 1.0)
    assert np.array_equal(ft0.vectors, f10.vectors)
    assert np.all(ft1.vectors == 0.0)


def test_midpoint_hand_derived():
    f01 = const_flow(4, 4, 2.0, 0.0)
    f10 = const_flow(4, 4, -2.0, 0.0)
    ft0, ft1 = approximate_intermediate_flow(f01, f10, 0.5)
    assert np.allclose(ft0.vectors[..., 0], -1.0)
    assert np.allclose(ft1.vectors[..., 0], 1.0)
    assert np.all(ft0.vectors[..., 1] == 0.0)


def test_intermediate_flow_mismatch():
    with pytest.raises(DimensionMismatchError):
        approximate_intermediate_flow(const_flow(4, 4, 0, 0),
                                      const_flow(5, 4, 0, 0), 0.5)


# --- backward warp ---------------------------------------------------------------

def test_zero_flow_identity(rng):
    f = noise_frame(rng, 20, 14)
    assert backward_warp(f, const_flow(20, 14, 0, 0)) == f


def test_warp_recovers_shift(rng):
    original = noise_frame(rng, 32, 24)
    shifted = rolled(original, 4)  # shifted right by 4
    # backward warp samples at p + flow, so flow +4 undoes the shift
    recovered = backward_warp(shifted, const_flow(32, 24, 4, 0))
    # brute-force per-pixel check over the interior
    assert np.array_equal(recovered.pixels[:, 4:-4], original.pixels[:, 4:-4])


def test_warp_constant_frame_invariant(rng):
    f = constant_frame(77, 16, 16)
    flow = FlowField(rng.normal(scale=3.0, size=(16, 16, 2)))
    assert backward_warp(f, flow) == f


def test_warp_integer_flow_matches_index_shift_oracle(rng):
    f = noise_frame(rng, 24, 18)
    for dx, dy in [(1, 0), (-2, 3), (0, -1), (4, 4)]:
        warped = backward_warp(f, const_flow(24, 18, dx, dy))
        # oracle: direct index shift on interior pixels
        for y in range(max(0, -dy), min(18, 18 - dy)):
            for x in range(max(0, -dx), min(24, 24 - dx)):
                assert np.array_equal(warped.pixels[y, x],
                                      f.pixels[y + dy, x + dx])


def test_warp_dimension_mismatch(rng):
    with pytest.raises(DimensionMismatchError):
        backward_warp(noise_frame(rng, 8, 8), const_flow(9, 8, 0, 0))


# --- visibility -------------------------------------------------------------------

def test_consistent_flows_full_visibility():
    f01 = const_flow(8, 8, 3.0, 0.0)
    f10 = const_flow(8, 8, -3.0, 0.0)
    v0, v1 = visibility_from_consistency(f01, f10, sigma=2.0)
    assert np.allclose(v0, 1.0) and np.allclose(v1, 1.0)


def test_error_equal_sigma_gives_exp_minus_half():
    sigma = 2.0
    f01 = const_flow(8, 8, sigma, 0.0)
    f10 = const_flow(8, 8, 0.0, 0.0)
    v0, _ = visibility_from_consistency(f01, f10, sigma=sigma)
    assert np.allclose(v0, math.exp(-0.5), atol=1e-12)


def test_huge_error_visibility_vanishes():
    f01 = const_flow(8, 8, 1e4, 0.0)
    f10 = const_flow(8, 8, 0.0, 0.0)
    v0, v1 = visibility_from_consistency(f01, f10, sigma=2.0)
    assert np.all(v0 >= 0.0) and np.all(v0 < 1e-12)
    assert np.all((0.0 <= v0) & (v0 <= 1.0)) and np.all((0.0 <= v1) & (v1 <= 1.0))


def test_nonpositive_sigma():
    z = const_flow(4, 4, 0, 0)
    with pytest.raises(ValidationError):
        visibility_from_consistency(z, z, sigma=0.0)


# --- synthesis --------------------------------------------------------------------

def test_static_scene_fixed_point(rng):
    f = noise_frame(rng, 16, 16)
    z = const_flow(16, 16, 0, 0)
    for t in (0.25, 0.5, 0.75):
        out = synthesize_frame(f, f, t, z, z, ones(16, 16), ones(16, 16))
        assert out == f


def test_one_sided_visibility(rng):
    i0, i1 = noise_frame(rng, 16, 16), noise_frame(rng, 16, 16)
    ft0 = const_flow(16, 16, -1.0, 0.0)
    ft1 = const_flow(16, 16, 1.0, 0.0)
    out = synthesize_frame(i0, i1, 0.5, ft0, ft1,
                           ones(16, 16), np.zeros((16, 16)))
    assert out == backward_warp(i0, ft0)


def test_midpoint_average():
    i0 = constant_frame(100, 8, 8)
    i1 = constant_frame(200, 8, 8)
    z = const_flow(8, 8, 0, 0)
    out = synthesize_frame(i0, i1, 0.5, z, z, ones(8, 8), ones(8, 8))
    assert np.all(out.pixels == 150)


def test_denominator_fallback(rng):
    i0 = constant_frame(100, 8, 8)
    i1 = constant_frame(200, 8, 8)
    z = const_flow(8, 8, 0, 0)
    zero_v = np.zeros((8, 8))
    out = synthesize_frame(i0, i1, 0.5, z, z, zero_v, zero_v)
    assert np.all(out.pixels == 150)  # unweighted blend fallback


# --- backend dispatch ---------------------------------------------------------------

def test_blend_midpoint():
    out = interpolate(BlendBackend(), constant_frame(100), constant_frame(200), 0.5)
    assert np.all(out.pixels == 150)


def test_blend_linearity_on_eighths(rng):
    i0, i1 = noise_frame(rng, 12, 12), noise_frame(rng, 12, 12)
    for k in range(9):
        t = k / 8
        out = blend_interpolate(i0, i1, t)
        expect = np.rint((1 - t) * i0.pixels.astype(float)
                         + t * i1.pixels.astype(float))
        assert np.array_equal(out.pixels, expect.astype(np.uint8))


def test_static_scene_high_psnr_classical(rng):
    f = noise_frame(rng, 64, 64)
    for backend in (ClassicalBackend(), BlendBackend()):
        out = interpolate(backend, f, f, 0.5)
        assert psnr(f, out) >= 50.0


def test_classical_translation_pair(rng):
    base = noise_frame(rng, 128, 128)
    i0, i2 = base, rolled(base, 8)
    true_mid = rolled(base, 4)
    pred = interpolate(ClassicalBackend(), i0, i2, 0.5)
    interior = slice(16, -16)
    assert psnr(
        Frame(np.ascontiguousarray(true_mid.pixels[interior, interior])),
        Frame(np.ascontiguousarray(pred.pixels[interior, interior])),
    ) >= 30.0


# --- recursion -----------------------------------------------------------------------

def blend_synth(a, b):
    return blend_interpolate(a, b, 0.5)


def make_seq(rng, n, w=16, h=16):
    return FrameSequence(tuple(noise_frame(rng, w, h) for _ in range(n)),
                         Fraction(30, 1))


def test_two_frames_one_pass(rng):
    assert len(recursive_interpolate(make_seq(rng, 2), 1, blend_synth)) == 3


def test_two_frames_five_passes(rng):
    assert len(recursive_interpolate(make_seq(rng, 2), 5, blend_synth)) == 33


def test_ten_frames_two_passes_four_x(rng):
    out = recursive_interpolate(make_seq(rng, 10), 2, blend_synth)
    assert len(out) == 37


def test_frame_count_law_and_order_preservation(rng):
    for n in range(2, 8):
        seq = make_seq(rng, n, 8, 8)
        for e in range(1, 4):
            out = recursive_interpolate(seq, e, blend_synth)
            assert len(out) == (n - 1) * 2 ** e + 1
            stride = 2 ** e
            for i, orig in enumerate(seq.frames):
                assert out[i * stride] == orig
            assert out.fps == seq.fps


def test_progress_callback(rng):
    calls = []
    recursive_interpolate(make_seq(rng, 3), 2, blend_synth,
                          progress=lambda d, t: calls.append((d, t)))
    assert calls[-1] == (6, 6)
    assert [c[0] for c in calls] == sorted(c[0] for c in calls)


def test_exponent_out_of_range(rng):
    seq = make_seq(rng, 2)
    for e in (0, 6, 2.0):
        with pytest.raises(ValidationError):
            recursive_interpolate(seq, e, blend_synth)


def test_too_few_frames(rng):
    with pytest.raises(ValidationError):
        recursive_interpolate(make_seq(rng, 1), 1, blend_synth)
