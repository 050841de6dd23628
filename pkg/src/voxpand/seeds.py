"""Deterministic seed derivation.

One user-facing seed fans out into independent sub-seeds per stage and per
gender group. Python's builtin ``hash`` is salted per process, so stable
derivation goes through blake2b instead.
"""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1


def stable_hash(label: str) -> int:
    """64-bit hash of a label, stable across runs and platforms."""
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(seed: int, label: str) -> int:
    """Sub-seed for a named stage, reproducible from (seed, label)."""
    return (int(seed) ^ stable_hash(label)) & _MASK64


def gender_group_seed(seed: int, gender_label: str) -> int:
    """Per-gender-group seed: adding a group never perturbs another group."""
    return derive_seed(seed, f"gender:{gender_label}")
