"""Small shared helpers: canonical JSON, stable seeding, sortable run ids."""

from __future__ import annotations

import hashlib
import json
import math
import os
import threading
import time

import numpy as np

_ULID_ALPHABET = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"  # Crockford base32
_ulid_lock = threading.Lock()
_ulid_last = [0, 0]


def canonical_json(obj) -> str:
    """Serialize to a byte-stable JSON string (sorted keys, no whitespace)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False, allow_nan=False)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def stable_seed(*parts) -> int:
    """Derive a 64-bit seed from arbitrary parts, stable across processes."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def rng_for(seed: int, *tags) -> np.random.Generator:
    """Independent generator for a named stage of a seeded computation."""
    if tags:
        return np.random.default_rng(stable_seed(seed, *tags))
    return np.random.default_rng(seed)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def utc_now_iso() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()) + f".{time.time_ns() % 1_000_000_000 // 1_000_000:03d}Z"


def new_ulid() -> str:
    """Sortable 26-char unique id (millisecond timestamp + random tail).

    Ids generated within one process are strictly increasing even inside
    the same millisecond.
    """
    with _ulid_lock:
        ts = time.time_ns() // 1_000_000
        if ts <= _ulid_last[0]:
            ts = _ulid_last[0]
            _ulid_last[1] = (_ulid_last[1] + 1) & ((1 << 80) - 1)
        else:
            _ulid_last[0] = ts
            _ulid_last[1] = int.from_bytes(os.urandom(10), "big")
        rand = _ulid_last[1]

    def b32(value: int, width: int) -> str:
        chars = []
        for _ in range(width):
            chars.append(_ULID_ALPHABET[value & 31])
            value >>= 5
        return "".join(reversed(chars))

    return b32(ts, 10) + b32(rand, 16)


def atomic_write_text(path, text: str) -> None:
    """Write via tmp file + rename so readers never observe partial content."""
    tmp = f"{path}.tmp-{os.getpid()}-{threading.get_ident()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
