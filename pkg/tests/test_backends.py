import sys

import numpy as np
import pytest

from slomokit.backends import (
    BlendBackend,
    CapabilityError,
    ExternalBackend,
    OracleBackend,
    create_backend,
    interpolate,
)
from slomokit.errors import (
    BackendError,
    ContractViolationError,
    ProtocolError,
    ValidationError,
)

from conftest import noise_frame

ECHO_CMD = f"{sys.executable} -m slomokit.echo_backend"


def child(script: str) -> str:
    return f'{sys.executable} -c "{script}"'


# --- loopback conformance ----------------------------------------------------

def test_echo_child_returns_first_input(rng):
    i0, i1 = noise_frame(rng, 12, 10), noise_frame(rng, 12, 10)
    with ExternalBackend(ECHO_CMD) as be:
        assert be.descriptor.capability == "midpoint-only"
        out = interpolate(be, i0, i1, 0.5)
    assert out == i0


def test_echo_child_multiple_requests(rng):
    with ExternalBackend(ECHO_CMD) as be:
        for _ in range(3):
            i0, i1 = noise_frame(rng, 8, 8), noise_frame(rng, 8, 8)
            assert interpolate(be, i0, i1, 0.5) == i0


def test_blend_child_matches_native_blend(rng):
    i0, i1 = noise_frame(rng, 8, 8), noise_frame(rng, 8, 8)
    with ExternalBackend(ECHO_CMD + " --mode blend --cap 1") as be:
        assert be.descriptor.capability == "arbitrary-t"
        out = interpolate(be, i0, i1, 0.5)
    native = interpolate(BlendBackend(), i0, i1, 0.5)
    # child rounds half-away-from-zero; allow the off-by-one on exact halves
    assert np.abs(out.pixels.astype(int) - native.pixels.astype(int)).max() <= 1


def test_midpoint_only_rejects_other_t(rng):
    i0, i1 = noise_frame(rng, 8, 8), noise_frame(rng, 8, 8)
    with ExternalBackend(ECHO_CMD) as be:
        with pytest.raises(CapabilityError):
            interpolate(be, i0, i1, 0.25)


# --- protocol violations -------------------------------------------------------

def test_bad_handshake_magic():
    cmd = child(
        "import sys; sys.stdout.buffer.write(b'XXXX\\x00'); "
        "sys.stdout.flush(); sys.stdin.read()"
    )
    with pytest.raises(ProtocolError) as exc:
        ExternalBackend(cmd)
    assert exc.value.field == "magic"


def test_unknown_capability_byte():
    cmd = child(
        "import sys; sys.stdout.buffer.write(b'VFI1\\x07'); "
        "sys.stdout.flush(); sys.stdin.read()"
    )
    with pytest.raises(ProtocolError) as exc:
        ExternalBackend(cmd)
    assert exc.value.field == "capability"


def _misbehaving(after_handshake: str) -> str:
    # child performs a correct handshake, reads one request, then misbehaves
    return child(
        "import sys,struct; out=sys.stdout.buffer; inp=sys.stdin.buffer; "
        "out.write(b'VFI1\\x00'); out.flush(); "
        "m=inp.read(4); w,h,t=struct.unpack('<IIf', inp.read(12)); "
        "inp.read(2*w*h*3); " + after_handshake + "; out.flush()"
    )


def test_bad_response_magic(rng):
    cmd = _misbehaving(
        "out.write(b'XSP0'+struct.pack('<II',w,h)+bytes(w*h*3))"
    )
    i0, i1 = noise_frame(rng, 4, 4), noise_frame(rng, 4, 4)
    with ExternalBackend(cmd) as be:
        with pytest.raises(ProtocolError):
            interpolate(be, i0, i1, 0.5)


def test_wrong_dimensions_contract_violation(rng):
    cmd = _misbehaving(
        "out.write(b'RSP0'+struct.pack('<II',w+1,h)+bytes((w+1)*h*3))"
    )
    i0, i1 = noise_frame(rng, 4, 4), noise_frame(rng, 4, 4)
    with ExternalBackend(cmd) as be:
        with pytest.raises(ContractViolationError):
            interpolate(be, i0, i1, 0.5)


def test_wrong_payload_length(rng):
    cmd = _misbehaving(
        "out.write(b'RSP0'+struct.pack('<II',w,h)+bytes(w*h*3-7))"
    )
    i0, i1 = noise_frame(rng, 4, 4), noise_frame(rng, 4, 4)
    with ExternalBackend(cmd) as be:
        with pytest.raises((ProtocolError, BackendError)):
            interpolate(be, i0, i1, 0.5)


def test_child_closes_pipe_mid_frame(rng):
    cmd = _misbehaving(
        "out.write(b'RSP0'+struct.pack('<II',w,h)+bytes(5)); out.flush(); "
        "sys.exit(1)"
    )
    i0, i1 = noise_frame(rng, 4, 4), noise_frame(rng, 4, 4)
    with ExternalBackend(cmd) as be:
        with pytest.raises((ProtocolError, BackendError)):
            interpolate(be, i0, i1, 0.5)


def test_child_crash_on_launch():
    with pytest.raises(BackendError):
        ExternalBackend(f"{sys.executable} -c 'import sys; sys.exit(3)'")


# --- factory / oracle ------------------------------------------------------------

def test_create_backend_unknown():
    with pytest.raises(ValidationError):
        create_backend("mystery")


def test_external_requires_command():
    with pytest.raises(ValidationError):
        create_backend("external")


def test_oracle_answers_triplets_only(rng):
    i0, gt, i2 = (noise_frame(rng, 8, 8) for _ in range(3))
    oracle = OracleBackend()
    assert oracle.run_triplet(i0, gt, i2) == gt
    with pytest.raises(BackendError):
        oracle.interpolate(i0, i2, 0.5)
