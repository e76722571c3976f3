"""On-disk cache for expensive, deterministic intermediate arrays.

Enabled by the ``STOKES_CACHE_DIR`` environment variable; without it every
call recomputes.  Entries are ``.npz`` files named by a hash of the key.
"""
from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = ["cache_dir", "cached_arrays"]

ENV = "STOKES_CACHE_DIR"


def cache_dir() -> Path | None:
    d = os.environ.get(ENV)
    if not d:
        return None
    p = Path(d)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _digest(tag: str, key) -> str:
    blob = json.dumps({"tag": tag, "key": key}, sort_keys=True, default=repr)
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


def cached_arrays(tag: str, key, compute: Callable[[], dict]) -> dict:
    """Return ``compute()`` (a dict of arrays), reading/writing the cache if enabled."""
    d = cache_dir()
    if d is None:
        return compute()
    path = d / f"{tag}-{_digest(tag, key)}.npz"
    if path.exists():
        try:
            with np.load(path) as z:
                return {k: z[k] for k in z.files}
        except (OSError, ValueError):
            pass
    out = compute()
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, **out)
    os.replace(tmp, path)
    return out
