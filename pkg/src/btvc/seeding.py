"""Deterministic derivation of stream seeds from a master seed and labels."""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, *labels) -> int:
    """64-bit seed from sha256(master, labels...); stable across platforms and runs."""
    h = hashlib.sha256(str(int(master)).encode())
    for lab in labels:
        h.update(b"\x1f")
        h.update(str(lab).encode())
    return int.from_bytes(h.digest()[:8], "little")


def derive_rng(master: int, *labels) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *labels))
