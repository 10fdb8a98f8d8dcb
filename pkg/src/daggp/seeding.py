"""Deterministic seed derivation.

Every stochastic routine in the package draws from a Generator whose seed is
derived from a master seed plus a tag path (role strings, task variables,
input coordinates).  Derivation hashes a canonical byte encoding, so results
are reproducible across processes and independent of evaluation order, and
distinct tag paths get independent streams.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

__all__ = ["derive_seed", "derived_rng"]


def _encode(part, out: bytearray) -> None:
    # type tag + canonical payload per part; floats use their IEEE-754 bytes
    # so 0.1000000000000001 and 0.1 derive different streams.
    if isinstance(part, bool):
        out += b"b" + (b"\x01" if part else b"\x00")
    elif isinstance(part, int):
        out += b"i" + str(part).encode()
    elif isinstance(part, float):
        out += b"f" + struct.pack("<d", part)
    elif isinstance(part, str):
        out += b"s" + part.encode("utf-8")
    elif isinstance(part, bytes):
        out += b"y" + part
    elif isinstance(part, np.ndarray):
        out += b"a" + np.ascontiguousarray(part, dtype=np.float64).tobytes()
    elif isinstance(part, (tuple, list)):
        out += b"("
        for item in part:
            _encode(item, out)
        out += b")"
    else:
        raise TypeError(f"cannot derive a seed from {type(part).__name__}")
    out += b"\x00"


def derive_seed(master: int, *parts) -> int:
    """Derive a 64-bit child seed from ``master`` and a tag path."""
    buf = bytearray()
    _encode(int(master), buf)
    for part in parts:
        _encode(part, buf)
    digest = hashlib.blake2b(bytes(buf), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derived_rng(master: int, *parts) -> np.random.Generator:
    """Generator seeded by ``derive_seed(master, *parts)``."""
    return np.random.default_rng(derive_seed(master, *parts))
