"""slomokit: slow-motion synthesis and evaluation toolkit.

Frame interpolation backends (classical optical-flow, blend baseline,
external neural adapters), Y4M/PNG media I/O, dataset preparation,
PSNR/SSIM scoring, a benchmark harness, a CLI, and an HTTP job service.
"""

from .media import Frame, FrameSequence, parse_y4m, emit_y4m
from .flow import FlowField, estimate_flow
from .backends import create_backend, interpolate
from .interp import recursive_interpolate
from .metrics import psnr, ssim, score_pair

__version__ = "0.1.0"

__all__ = [
    "Frame",
    "FrameSequence",
    "FlowField",
    "parse_y4m",
    "emit_y4m",
    "estimate_flow",
    "create_backend",
    "interpolate",
    "recursive_interpolate",
    "psnr",
    "ssim",
    "score_pair",
    "__version__",
]
