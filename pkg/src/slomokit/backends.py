"""Interchangeable interpolation backends.

Three kinds ship natively:

* ``classical`` - block-matching flow + warped visibility blend (arbitrary t)
* ``blend`` - per-pixel (1-t)/t average, the trivial lower baseline
* ``external`` - any learned model wrapped behind the pipe protocol below

plus ``oracle``, a test-only backend that returns the ground-truth middle
frame and upper-bounds every metric.

Pipe protocol (all integers little-endian):

* handshake: child writes ``VFI1`` + 1 capability byte
  (0 = midpoint-only, 1 = arbitrary-t) on startup
* request:  ``REQ0`` u32 width, u32 height, f32 t, two RGB24 payloads
* response: ``RSP0`` u32 width, u32 height, one RGB24 payload

One request is in flight per child at a time; a handle is not shareable
across threads.
"""

from __future__ import annotations

import shlex
import struct
import subprocess
from dataclasses import dataclass

import numpy as np

from .errors import (
    BackendError,
    CapabilityError,
    ContractViolationError,
    DimensionMismatchError,
    ProtocolError,
    ValidationError,
)
from .interp import blend_interpolate, classical_interpolate
from .media import Frame

HANDSHAKE_MAGIC = b"VFI1"
REQUEST_MAGIC = b"REQ0"
RESPONSE_MAGIC = b"RSP0"

CAP_MIDPOINT_ONLY = 0
CAP_ARBITRARY_T = 1


@dataclass(frozen=True)
class BackendDescriptor:
    name: str
    kind: str  # classical | blend | external | oracle
    capability: str  # arbitrary-t | midpoint-only

    def supports(self, t: float) -> bool:
        return self.capability == "arbitrary-t" or t == 0.5


class Backend:
    """Common backend surface; subclasses implement ``interpolate``."""

    descriptor: BackendDescriptor

    def interpolate(self, i0: Frame, i1: Frame, t: float) -> Frame:
        raise NotImplementedError

    def run_triplet(self, i0: Frame, middle: Frame, i2: Frame) -> Frame:
        """Predict the middle frame of a triplet (default: midpoint synth)."""
        return self.interpolate(i0, i2, 0.5)

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class ClassicalBackend(Backend):
    def __init__(self, sigma: float = 2.0):
        self.descriptor = BackendDescriptor("classical", "classical", "arbitrary-t")
        self.sigma = sigma
        self.last_stage_times: dict = {}

    def interpolate(self, i0, i1, t):
        self.last_stage_times = {}
        return classical_interpolate(i0, i1, t, self.sigma,
                                     stage_times=self.last_stage_times)


class BlendBackend(Backend):
    def __init__(self):
        self.descriptor = BackendDescriptor("blend", "blend", "arbitrary-t")

    def interpolate(self, i0, i1, t):
        return blend_interpolate(i0, i1, t)


class OracleBackend(Backend):
    """Test-only: answers triplets with the ground-truth middle frame."""

    def __init__(self):
        self.descriptor = BackendDescriptor("oracle", "oracle", "midpoint-only")

    def interpolate(self, i0, i1, t):
        raise BackendError(
            "oracle backend only answers triplets with known ground truth",
            backend="oracle",
        )

    def run_triplet(self, i0, middle, i2):
        return middle


class ExternalBackend(Backend):
    """Wraps a child process speaking the pipe protocol."""

    def __init__(self, command: str, name: str = "external"):
        if not command:
            raise ValidationError("external backend requires a command template")
        self._name = name
        try:
            self._proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
        except FileNotFoundError as exc:
            raise BackendError(f"backend executable not found: {exc}",
                               backend=name) from exc
        hello = self._read(5, "handshake")
        if hello[:4] != HANDSHAKE_MAGIC:
            raise ProtocolError(
                f"bad handshake magic {hello[:4]!r}", field="magic", backend=name
            )
        cap = hello[4]
        if cap not in (CAP_MIDPOINT_ONLY, CAP_ARBITRARY_T):
            raise ProtocolError(
                f"unknown capability byte {cap}", field="capability", backend=name
            )
        capability = "arbitrary-t" if cap == CAP_ARBITRARY_T else "midpoint-only"
        self.descriptor = BackendDescriptor(name, "external", capability)

    def _read(self, n: int, field: str) -> bytes:
        data = self._proc.stdout.read(n)
        if data is None or len(data) < n:
            got = 0 if data is None else len(data)
            if self._proc.poll() is not None and got == 0:
                raise BackendError(
                    f"backend child exited with status {self._proc.returncode}",
                    backend=self._name,
                )
            raise ProtocolError(
                f"stream truncated reading {field}: wanted {n} bytes, got {got}",
                field=field,
                backend=self._name,
            )
        return data

    def interpolate(self, i0: Frame, i1: Frame, t: float) -> Frame:
        if not i0.same_size(i1):
            raise DimensionMismatchError("input frames differ in size")
        w, h = i0.width, i0.height
        req = b"".join([
            REQUEST_MAGIC,
            struct.pack("<IIf", w, h, t),
            i0.pixels.tobytes(),
            i1.pixels.tobytes(),
        ])
        try:
            self._proc.stdin.write(req)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BackendError(f"backend pipe closed: {exc}",
                               backend=self._name) from exc
        magic = self._read(4, "response magic")
        if magic != RESPONSE_MAGIC:
            raise ProtocolError(f"bad response magic {magic!r}", field="magic",
                                backend=self._name)
        rw, rh = struct.unpack("<II", self._read(8, "response dimensions"))
        if (rw, rh) != (w, h):
            raise ContractViolationError(
                f"backend answered {rw}x{rh} for a {w}x{h} request",
                backend=self._name,
            )
        payload = self._read(rw * rh * 3, "response payload")
        return Frame(np.frombuffer(payload, np.uint8).reshape(h, w, 3))

    def close(self):
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()


def interpolate(backend: Backend, i0: Frame, i1: Frame, t: float) -> Frame:
    """Capability-checked dispatch to a backend."""
    if not (0.0 <= t <= 1.0):
        raise ValidationError(f"time point must be in [0, 1], got {t}")
    if not backend.descriptor.supports(t):
        raise CapabilityError(
            f"backend {backend.descriptor.name} is midpoint-only; got t={t}",
            backend=backend.descriptor.name,
        )
    if not i0.same_size(i1):
        raise DimensionMismatchError("input frames differ in size")
    try:
        return backend.interpolate(i0, i1, t)
    except (ValidationError, BackendError):
        raise
    except Exception as exc:
        raise BackendError(f"backend failed: {exc}",
                           backend=backend.descriptor.name) from exc


def create_backend(name: str, command: str | None = None,
                   sigma: float = 2.0) -> Backend:
    if name == "classical":
        return ClassicalBackend(sigma=sigma)
    if name == "blend":
        return BlendBackend()
    if name == "oracle":
        return OracleBackend()
    if name == "external":
        return ExternalBackend(command)
    raise ValidationError(f"unknown backend {name!r}")


def builtin_descriptors() -> list:
    return [
        BackendDescriptor("classical", "classical", "arbitrary-t"),
        BackendDescriptor("blend", "blend", "arbitrary-t"),
    ]
