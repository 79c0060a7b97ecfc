"""Reference child process for the external-backend pipe protocol.

Run as ``python -m slomokit.echo_backend [--mode echo|blend] [--cap 0|1]``.
``echo`` returns the first input frame verbatim; ``blend`` averages the two.
Useful as a loopback conformance target and as a template for wrapping real
models.
"""

import argparse
import struct
import sys

from .backends import (
    CAP_ARBITRARY_T,
    CAP_MIDPOINT_ONLY,
    HANDSHAKE_MAGIC,
    REQUEST_MAGIC,
    RESPONSE_MAGIC,
)


def serve(mode: str = "echo", cap: int = CAP_MIDPOINT_ONLY):
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    stdout.write(HANDSHAKE_MAGIC + bytes([cap]))
    stdout.flush()
    while True:
        magic = stdin.read(4)
        if not magic:
            return
        if magic != REQUEST_MAGIC:
            sys.exit(2)
        w, h, t = struct.unpack("<IIf", stdin.read(12))
        n = w * h * 3
        a = stdin.read(n)
        b = stdin.read(n)
        if len(a) < n or len(b) < n:
            sys.exit(3)
        if mode == "blend":
            out = bytes(
                round((1.0 - t) * x + t * y) for x, y in zip(a, b)
            )
        else:
            out = a
        stdout.write(RESPONSE_MAGIC + struct.pack("<II", w, h) + out)
        stdout.flush()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--mode", choices=["echo", "blend"], default="echo")
    ap.add_argument("--cap", type=int, default=CAP_MIDPOINT_ONLY,
                    choices=[CAP_MIDPOINT_ONLY, CAP_ARBITRARY_T])
    args = ap.parse_args()
    serve(args.mode, args.cap)


if __name__ == "__main__":
    main()
