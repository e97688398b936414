"""Per-task seed derivation.

A task seed is ``master_seed XOR fnv1a64(key)`` where ``key`` joins the task
coordinates with ``|``. FNV-1a is tiny and byte-exact across languages.
"""

from __future__ import annotations

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(text: str) -> int:
    h = FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


def task_seed(master_seed: int, *parts) -> int:
    return (int(master_seed) & MASK64) ^ fnv1a64("|".join(str(p) for p in parts))
