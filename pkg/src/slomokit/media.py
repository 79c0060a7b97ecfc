"""Frame ingestion and emission.

Native formats are Y4M (YUV4MPEG2) streams and PNG frame directories; any
container format (MP4/AVI/MOV) is delegated to an external decoder subprocess
that must write Y4M to its stdout.  Color conversion is BT.601, limited range
by default, with fixed coefficients documented on the conversion functions.

Byte-exactness notes:

* ``emit_y4m`` always writes the canonical header token order
  ``W H F I A C`` (plus any preserved ``X`` extras); ``parse_y4m`` accepts
  any order and fills Y4M's conventional defaults for absent tags.  The
  emit-parse round trip is therefore byte-identical for streams carrying the
  canonical tags, which includes everything this toolkit emits.
* RGB -> YCbCr quantization picks the luma code between floor and ceil that
  minimizes the reconstruction error given the already-rounded chroma.  Plain
  independent rounding violates the documented +/-1 round-trip bound on about
  0.35% of the 24-bit cube; the compensated choice holds +/-1 everywhere
  (verified exhaustively).
"""

from __future__ import annotations

import json
import re
import shlex
import subprocess
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    DecoderConfigError,
    DecoderRunError,
    DimensionMismatchError,
    EmptySequenceError,
    MissingFrameError,
    TruncationError,
    UnsupportedFormatError,
    ValidationError,
    Y4mParseError,
)

Y4M_SIGNATURE = b"YUV4MPEG2"
FRAME_MARKER = b"FRAME"

#: Chroma tags we can read/write, mapped to (x subsampling, y subsampling).
CHROMA_SUBSAMPLING = {
    "444": (1, 1),
    "420": (2, 2),
    "420jpeg": (2, 2),
    "420mpeg2": (2, 2),
    "420paldv": (2, 2),
}

DEFAULT_FRAME_PATTERN = "{index:06d}.png"


@dataclass(frozen=True)
class Frame:
    """An 8-bit RGB raster; the atomic unit of all pixel work.

    ``pixels`` is a read-only ``(height, width, 3)`` uint8 array in row-major
    RGB order.  ``source_planes``, when present, holds the exact YCbCr bytes
    the frame was parsed from as ``(payload, chroma, range)``; it lets
    ``emit_y4m`` re-emit parsed streams bit-exactly despite the lossy RGB
    conversion, and never participates in equality.
    """

    pixels: np.ndarray
    source_planes: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValidationError(f"frame pixels must be (H, W, 3), got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValidationError("frame dimensions must be at least 1x1")
        if px.dtype != np.uint8:
            raise ValidationError(f"frame pixels must be uint8, got {px.dtype}")
        px = px.copy() if not px.flags["C_CONTIGUOUS"] else px
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def same_size(self, other: "Frame") -> bool:
        return self.pixels.shape == other.pixels.shape

    def __eq__(self, other):
        return isinstance(other, Frame) and np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.width, self.height, self.pixels.tobytes()))


@dataclass(frozen=True)
class FrameSequence:
    """An ordered list of equally sized frames plus a rational frame rate.

    ``source_header`` remembers the exact Y4M header a parsed sequence came
    from so re-emission is byte-identical; it never participates in equality.
    """

    frames: tuple
    fps: Fraction
    source_header: "Y4mHeader | None" = field(default=None, compare=False,
                                              repr=False)

    def __post_init__(self):
        frames = tuple(self.frames)
        object.__setattr__(self, "frames", frames)
        if not isinstance(self.fps, Fraction):
            object.__setattr__(self, "fps", Fraction(self.fps))
        if self.fps.numerator < 1 or self.fps.denominator < 1:
            raise ValidationError(f"fps must be a positive rational, got {self.fps}")
        for f in frames[1:]:
            if not f.same_size(frames[0]):
                raise DimensionMismatchError(
                    f"all frames must share dimensions; got "
                    f"{f.width}x{f.height} vs {frames[0].width}x{frames[0].height}"
                )

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height


@dataclass(frozen=True)
class Y4mHeader:
    """Parsed Y4M stream header.  Round-trips: ``parse(emit(h)) == h``."""

    width: int
    height: int
    fps: Fraction
    interlacing: str = "p"
    pixel_aspect: tuple = (0, 0)
    chroma: str = "420jpeg"
    extras: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValidationError("Y4M dimensions must be positive")
        if not isinstance(self.fps, Fraction):
            object.__setattr__(self, "fps", Fraction(self.fps))
        if self.chroma not in CHROMA_SUBSAMPLING:
            raise UnsupportedFormatError(f"unsupported chroma tag C{self.chroma}")

    def emit(self) -> bytes:
        tokens = [
            Y4M_SIGNATURE.decode(),
            f"W{self.width}",
            f"H{self.height}",
            f"F{self.fps.numerator}:{self.fps.denominator}",
            f"I{self.interlacing}",
            f"A{self.pixel_aspect[0]}:{self.pixel_aspect[1]}",
            f"C{self.chroma}",
        ]
        tokens.extend(self.extras)
        return (" ".join(tokens) + "\n").encode("ascii")

    def frame_payload_size(self) -> int:
        sx, sy = CHROMA_SUBSAMPLING[self.chroma]
        cw, ch = self.width // sx, self.height // sy
        return self.width * self.height + 2 * cw * ch


# --- BT.601 conversion -----------------------------------------------------

# Limited (studio) range forward coefficients, ITU-R BT.601 with 8-bit
# quantization: Y in [16,235], Cb/Cr in [16,240].
_LIM_FWD = np.array(
    [
        [65.481, 128.553, 24.966],
        [-37.797, -74.203, 112.0],
        [112.0, -93.786, -18.214],
    ]
)
_LIM_INV = np.array(
    [
        [1.1643835616438356, 0.0, 1.5960267857142858],
        [1.1643835616438356, -0.3917622900949137, -0.8129676472377708],
        [1.1643835616438356, 2.017232142857143, 0.0],
    ]
)
# Full range (JPEG convention).
_FULL_FWD = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168735892, -0.331264108, 0.5],
        [0.5, -0.418687589, -0.081312411],
    ]
)
_FULL_INV = np.array(
    [
        [1.0, 0.0, 1.402],
        [1.0, -0.344136, -0.714136],
        [1.0, 1.772, 0.0],
    ]
)


def _check_range(value_range: str):
    if value_range not in ("limited", "full"):
        raise ValidationError(f"range must be 'limited' or 'full', got {value_range!r}")


def _yuv_to_rgb_real(y, cb, cr, value_range):
    y = y.astype(np.float64)
    cb = cb.astype(np.float64) - 128.0
    cr = cr.astype(np.float64) - 128.0
    if value_range == "limited":
        m = _LIM_INV
        y = y - 16.0
    else:
        m = _FULL_INV
    r = m[0, 0] * y + m[0, 2] * cr
    g = m[1, 0] * y + m[1, 1] * cb + m[1, 2] * cr
    b = m[2, 0] * y + m[2, 1] * cb + m[2, 2] * cr
    return r, g, b


def yuv_to_rgb(y: np.ndarray, cb: np.ndarray, cr: np.ndarray,
               value_range: str = "limited") -> Frame:
    """Convert planar YCbCr (full-resolution planes) to an RGB frame.

    BT.601 coefficients; output rounded half-to-even and clamped to [0, 255].
    """
    _check_range(value_range)
    y, cb, cr = (np.asarray(p) for p in (y, cb, cr))
    for name, plane in (("cb", cb), ("cr", cr)):
        if plane.shape != y.shape:
            raise DimensionMismatchError(
                f"{name} plane shape {plane.shape} does not match luma {y.shape}"
            )
    r, g, b = _yuv_to_rgb_real(y, cb, cr, value_range)
    rgb = np.stack([r, g, b], axis=-1)
    return Frame(np.clip(np.rint(rgb), 0, 255).astype(np.uint8))


def rgb_to_yuv(frame: Frame, value_range: str = "limited"):
    """Convert an RGB frame to full-resolution YCbCr planes (uint8).

    Chroma is rounded to nearest; the luma code is then chosen between floor
    and ceil to minimize the worst-channel reconstruction error, which keeps
    the rgb->yuv->rgb round trip within +/-1 per channel for every 24-bit
    color (ties resolved toward floor).
    """
    _check_range(value_range)
    px = frame.pixels.astype(np.float64)
    r, g, b = px[..., 0], px[..., 1], px[..., 2]
    if value_range == "limited":
        m = _LIM_FWD / 255.0
        y_real = 16.0 + m[0, 0] * r + m[0, 1] * g + m[0, 2] * b
    else:
        m = _FULL_FWD
        y_real = m[0, 0] * r + m[0, 1] * g + m[0, 2] * b
    cb = np.clip(np.rint(128.0 + m[1, 0] * r + m[1, 1] * g + m[1, 2] * b), 0, 255)
    cr = np.clip(np.rint(128.0 + m[2, 0] * r + m[2, 1] * g + m[2, 2] * b), 0, 255)

    def recon_err(y_plane):
        rr, rg, rb = _yuv_to_rgb_real(y_plane, cb, cr, value_range)
        er = np.abs(np.clip(np.rint(rr), 0, 255) - r)
        eg = np.abs(np.clip(np.rint(rg), 0, 255) - g)
        eb = np.abs(np.clip(np.rint(rb), 0, 255) - b)
        return np.maximum(er, np.maximum(eg, eb))

    y_lo = np.clip(np.floor(y_real), 0, 255)
    y_hi = np.clip(np.ceil(y_real), 0, 255)
    y = np.where(recon_err(y_lo) <= recon_err(y_hi), y_lo, y_hi)
    return y.astype(np.uint8), cb.astype(np.uint8), cr.astype(np.uint8)


def _downsample_chroma(plane: np.ndarray, sx: int, sy: int) -> np.ndarray:
    if sx == 1 and sy == 1:
        return plane
    h, w = plane.shape
    boxed = plane.astype(np.float64).reshape(h // sy, sy, w // sx, sx).mean(axis=(1, 3))
    return np.clip(np.rint(boxed), 0, 255).astype(np.uint8)


def _upsample_chroma(plane: np.ndarray, sx: int, sy: int) -> np.ndarray:
    # nearest-neighbor: keeps the 4:2:0 round trip deterministic
    if sx == 1 and sy == 1:
        return plane
    return np.repeat(np.repeat(plane, sy, axis=0), sx, axis=1)


# --- Y4M parse / emit ------------------------------------------------------

_FPS_RE = re.compile(r"^(\d+):(\d+)$")


def parse_y4m_header(data: bytes) -> tuple:
    """Parse the stream header line; returns (Y4mHeader, offset past newline)."""
    if not data.startswith(Y4M_SIGNATURE):
        raise Y4mParseError("stream does not start with YUV4MPEG2 signature", 0)
    nl = data.find(b"\n")
    if nl < 0:
        raise Y4mParseError("unterminated stream header", len(data))
    try:
        line = data[:nl].decode("ascii")
    except UnicodeDecodeError as exc:
        raise Y4mParseError("non-ASCII bytes in stream header", exc.start) from None
    tokens = line.split(" ")
    width = height = None
    fps = Fraction(30, 1)
    interlacing = "p"
    aspect = (0, 0)
    chroma = "420jpeg"
    extras = []
    offset = len(tokens[0]) + 1
    for tok in tokens[1:]:
        if not tok:
            offset += 1
            continue
        tag, rest = tok[0], tok[1:]
        if tag == "W":
            width = int(rest)
        elif tag == "H":
            height = int(rest)
        elif tag == "F":
            m = _FPS_RE.match(rest)
            if not m:
                raise Y4mParseError(f"bad frame-rate token {tok!r}", offset)
            fps = Fraction(int(m.group(1)), int(m.group(2)))
        elif tag == "I":
            interlacing = rest
        elif tag == "A":
            m = _FPS_RE.match(rest)
            if not m:
                raise Y4mParseError(f"bad pixel-aspect token {tok!r}", offset)
            aspect = (int(m.group(1)), int(m.group(2)))
        elif tag == "C":
            if rest not in CHROMA_SUBSAMPLING:
                raise UnsupportedFormatError(f"unsupported chroma tag C{rest}")
            chroma = rest
        else:
            extras.append(tok)
        offset += len(tok) + 1
    if width is None or height is None:
        raise Y4mParseError("header missing W or H token", 0)
    header = Y4mHeader(width, height, fps, interlacing, aspect, chroma, tuple(extras))
    sx, sy = CHROMA_SUBSAMPLING[chroma]
    if width % sx or height % sy:
        raise UnsupportedFormatError(
            f"C{chroma} requires dimensions divisible by {sx}x{sy}, got {width}x{height}"
        )
    return header, nl + 1


def parse_y4m(data: bytes, value_range: str = "limited") -> FrameSequence:
    """Parse a complete Y4M byte stream into RGB frames.

    Frame count equals the number of FRAME markers; fps comes from the header.
    """
    header, pos = parse_y4m_header(data)
    sx, sy = CHROMA_SUBSAMPLING[header.chroma]
    w, h = header.width, header.height
    cw, ch = w // sx, h // sy
    payload = header.frame_payload_size()
    frames = []
    while pos < len(data):
        nl = data.find(b"\n", pos)
        if nl < 0 or not data[pos:nl].startswith(FRAME_MARKER):
            raise Y4mParseError("expected FRAME marker", pos)
        pos = nl + 1
        chunk = data[pos:pos + payload]
        if len(chunk) < payload:
            raise TruncationError(
                f"frame {len(frames)} payload truncated", payload, len(chunk)
            )
        y = np.frombuffer(chunk, np.uint8, w * h).reshape(h, w)
        cb = np.frombuffer(chunk, np.uint8, cw * ch, w * h).reshape(ch, cw)
        cr = np.frombuffer(chunk, np.uint8, cw * ch, w * h + cw * ch).reshape(ch, cw)
        rgb = yuv_to_rgb(
            y,
            _upsample_chroma(cb, sx, sy),
            _upsample_chroma(cr, sx, sy),
            value_range,
        )
        frames.append(Frame(rgb.pixels, source_planes=(bytes(chunk),
                                                       header.chroma,
                                                       value_range)))
        pos += payload
    if not frames:
        raise EmptySequenceError("Y4M stream contains no frames")
    return FrameSequence(tuple(frames), header.fps, source_header=header)


def emit_y4m(seq: FrameSequence, chroma: str = "444",
             value_range: str = "limited") -> bytes:
    """Serialize a frame sequence as a Y4M byte stream.

    4:4:4 output round-trips every RGB pixel within the fixed +/-1 YCbCr
    quantization bound; 4:2:0 additionally loses chroma resolution.
    """
    if len(seq) == 0:
        raise EmptySequenceError("cannot emit a Y4M stream with zero frames")
    if chroma not in CHROMA_SUBSAMPLING:
        raise UnsupportedFormatError(f"unsupported chroma tag C{chroma}")
    sx, sy = CHROMA_SUBSAMPLING[chroma]
    if seq.width % sx or seq.height % sy:
        raise UnsupportedFormatError(
            f"C{chroma} requires dimensions divisible by {sx}x{sy}, "
            f"got {seq.width}x{seq.height}"
        )
    # a parsed stream re-emits its original bytes exactly
    passthrough = (
        seq.source_header is not None
        and seq.source_header.chroma == chroma
        and all(
            f.source_planes is not None
            and f.source_planes[1] == chroma
            and f.source_planes[2] == value_range
            for f in seq.frames
        )
    )
    header = seq.source_header if passthrough else Y4mHeader(
        seq.width, seq.height, seq.fps, chroma=chroma
    )
    out = [header.emit()]
    for frame in seq.frames:
        out.append(FRAME_MARKER + b"\n")
        if passthrough:
            out.append(frame.source_planes[0])
            continue
        y, cb, cr = rgb_to_yuv(frame, value_range)
        out.append(y.tobytes())
        out.append(_downsample_chroma(cb, sx, sy).tobytes())
        out.append(_downsample_chroma(cr, sx, sy).tobytes())
    return b"".join(out)


# --- frame directories -----------------------------------------------------

def write_manifest(path: Path, fps: Fraction, count: int,
                   pattern: str = DEFAULT_FRAME_PATTERN):
    doc = {
        "fps_num": fps.numerator,
        "fps_den": fps.denominator,
        "count": count,
        "pattern": pattern,
    }
    (Path(path) / "manifest.json").write_text(json.dumps(doc, sort_keys=True))


def read_frame_dir(path, manifest: dict | None = None) -> FrameSequence:
    """Load a numbered PNG frame directory as a sequence.

    Indices are 1-based, zero-padded per the manifest pattern.  A numbering
    gap is an error naming the missing index.
    """
    path = Path(path)
    if manifest is None:
        mpath = path / "manifest.json"
        if mpath.exists():
            manifest = json.loads(mpath.read_text())
        else:
            manifest = {}
    pattern = manifest.get("pattern", DEFAULT_FRAME_PATTERN)
    fps = Fraction(int(manifest.get("fps_num", 30)), int(manifest.get("fps_den", 1)))
    count = manifest.get("count")
    if count is None:
        count = 0
        while (path / pattern.format(index=count + 1)).exists():
            count += 1
        for fpath in path.glob("*.png"):
            try:
                index = int(fpath.stem)
            except ValueError:
                continue
            if index > count:
                # numbering gap: some index in 1..index-1 is absent
                missing = next(
                    i for i in range(1, index)
                    if not (path / pattern.format(index=i)).exists()
                )
                raise MissingFrameError(
                    f"frame index {missing} missing in {path}", missing
                )
    if count == 0:
        raise EmptySequenceError(f"no frames found in {path}")
    frames = []
    for index in range(1, int(count) + 1):
        fpath = path / pattern.format(index=index)
        if not fpath.exists():
            raise MissingFrameError(f"frame index {index} missing in {path}", index)
        arr = np.asarray(Image.open(fpath).convert("RGB"))
        if frames and arr.shape != frames[0].pixels.shape:
            raise DimensionMismatchError(
                f"frame {index} is {arr.shape[1]}x{arr.shape[0]}, expected "
                f"{frames[0].width}x{frames[0].height}"
            )
        frames.append(Frame(arr))
    return FrameSequence(tuple(frames), fps)


def write_frame_dir(seq: FrameSequence, path,
                    pattern: str = DEFAULT_FRAME_PATTERN):
    """Write a sequence as numbered PNGs plus a sidecar manifest."""
    if len(seq) == 0:
        raise EmptySequenceError("cannot write an empty sequence")
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(seq.frames, start=1):
        Image.fromarray(frame.pixels).save(path / pattern.format(index=i))
    write_manifest(path, seq.fps, len(seq), pattern)


# --- external decoder delegation -------------------------------------------

def decode_external(input_path, decoder_template: str | None,
                    value_range: str = "limited") -> FrameSequence:
    """Decode a container format by piping it through an external decoder.

    The template must contain an ``{input}`` placeholder and the child must
    write Y4M to stdout, e.g.::

        ffmpeg -i {input} -f yuv4mpegpipe -pix_fmt yuv420p -

    Y4M inputs never reach the child; they are parsed natively.
    """
    input_path = Path(input_path)
    if input_path.suffix.lower() == ".y4m":
        return parse_y4m(input_path.read_bytes(), value_range)
    if not decoder_template:
        raise DecoderConfigError(
            f"no decoder configured for {input_path.name}; set [media] "
            "decoder_cmd, --decoder-cmd, or SLOMOKIT_DECODER to a command "
            "template with an {input} placeholder that emits Y4M on stdout"
        )
    argv = [part.format(input=str(input_path))
            for part in shlex.split(decoder_template)]
    try:
        proc = subprocess.run(argv, capture_output=True)
    except FileNotFoundError as exc:
        raise DecoderConfigError(f"decoder executable not found: {argv[0]}") from exc
    if proc.returncode != 0:
        stderr = proc.stderr.decode("utf-8", "replace").strip()
        raise DecoderRunError(
            f"decoder exited with status {proc.returncode}", diagnostics=stderr
        )
    return parse_y4m(proc.stdout, value_range)


def load_media(path, decoder_template: str | None = None,
               value_range: str = "limited") -> FrameSequence:
    """Load any supported input: Y4M file, frame directory, or container."""
    path = Path(path)
    if path.is_dir():
        return read_frame_dir(path)
    if path.suffix.lower() == ".y4m":
        return parse_y4m(path.read_bytes(), value_range)
    return decode_external(path, decoder_template, value_range)
