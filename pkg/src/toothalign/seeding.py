"""Deterministic seed derivation.

Every random stage in the pipeline draws from a generator seeded by a
hash of the master seed plus a stage label (and usually a case or tooth
id), so one --seed reproduces a whole corpus byte-for-byte while stages
stay statistically independent.
"""

from __future__ import annotations

import hashlib


def derive_seed(master: int, *parts) -> int:
    """64-bit seed from the master seed and any hashable labels."""
    text = ":".join([str(int(master))] + [str(p) for p in parts])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
