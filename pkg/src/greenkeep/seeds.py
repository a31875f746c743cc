"""Stable, labeled seed derivation.

All randomness in a run flows from one root seed. Components (trace
generation, policies, agent training) derive their own sub-seed from a
label so that changing one component's consumption pattern never
perturbs another component's stream.
"""

import hashlib


def stable_hash64(text: str, seed: int = 0) -> int:
    """64-bit hash of a string, stable across processes and platforms."""
    key = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    digest = hashlib.blake2b(text.encode("utf-8"), key=key, digest_size=8).digest()
    return int.from_bytes(digest, "big")


def sub_seed(root_seed: int, label: str) -> int:
    """Derive a named 64-bit sub-seed from the run's root seed."""
    return stable_hash64(label, seed=root_seed)
