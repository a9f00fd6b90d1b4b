"""64-bit tokens for XOR-accumulated hashes.

Bitsets and specification states are hashed by XOR-folding one token per
member. XOR over fixed-width words is an abelian group, so adding or removing
a member updates the hash with a single XOR regardless of the member count.
"""

from __future__ import annotations

from contextlib import contextmanager
from functools import lru_cache
from typing import Callable, Iterator

MASK64 = (1 << 64) - 1

# Fixed for the life of the process so hashes are reproducible within a run.
SEED = 0x5DEECE66DA3B9F1C


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


@lru_cache(maxsize=1 << 20)
def _default_token(*parts: int) -> int:
    h = SEED
    for p in parts:
        h = splitmix64(h ^ (p & MASK64))
    return h


_token_impl: Callable[..., int] = _default_token


def token(*parts: int) -> int:
    """Return the 64-bit token for a tuple of integers (e.g. ``(key,)`` or ``(key, value)``)."""
    return _token_impl(*parts)


@contextmanager
def override_tokens(fn: Callable[..., int]) -> Iterator[None]:
    """Temporarily replace the token function.

    Test hook: lets tests force hash collisions between unequal states. Only
    values created inside the block carry the overridden hashes.
    """
    global _token_impl
    saved = _token_impl
    _token_impl = fn
    try:
        yield
    finally:
        _token_impl = saved
