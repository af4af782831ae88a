"""Seed splitting: every random stream derives from one top-level seed.

``stream(seed, a, b, ...)`` hashes the key path with numpy's SeedSequence, so
any sub-run (a spec, a group member, a purpose) can be regenerated on its own
without replaying the streams before it.
"""

from __future__ import annotations

import json
import zlib
from typing import Any

import numpy as np

# purpose tags, the last element of a key path
POLICY = 0
FAILURE = 1
BRANCH = 2
BATCH = 3
EVAL = 4


def spec_id(spec: Any) -> int:
    """Stable 32-bit id of a spec (or any JSON-able object)."""
    obj = spec.to_json() if hasattr(spec, "to_json") else spec
    return zlib.crc32(json.dumps(obj, sort_keys=True).encode())


def stream(seed: int, *keys: int) -> np.random.Generator:
    if seed < 0 or any(k < 0 for k in keys):
        raise ValueError("seeds and keys must be nonnegative")
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))
