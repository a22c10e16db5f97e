"""Deterministic, portable pseudo-random streams.

The generator is counter-based: output ``i`` of a stream with key ``k`` is
``mix64(k + (i + 1) * GOLDEN)`` where ``mix64`` is the splitmix64 finalizer
and ``GOLDEN`` is the 64-bit golden-ratio constant 0x9E3779B97F4A7C15.
This is exactly the splitmix64 sequence seeded with ``k``, evaluated at an
arbitrary counter offset, so any block of the stream can be produced out of
order and the whole stream is reproducible from (key, counter) alone.

Normal variates use the Box-Muller transform on 53-bit uniforms, two
outputs per pair of raw words. Child streams are derived by folding integer
or string labels into the key with the same finalizer, so per-scale or
per-image work can be parallelised without changing results.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer on uint64 arrays
    z = z.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        z ^= z >> np.uint64(30)
        z *= np.uint64(0xBF58476D1CE4E5B9)
        z ^= z >> np.uint64(27)
        z *= np.uint64(0x94D049BB133111EB)
        z ^= z >> np.uint64(31)
    return z


def _mix64_int(z: int) -> int:
    z &= _MASK
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK
    z ^= z >> 31
    return z


def _fold(key: int, label: int | str) -> int:
    """Mix one child label into a stream key."""
    if isinstance(label, str):
        data = label.encode("utf-8")
        key = _fold(key, len(data))
        for off in range(0, len(data), 8):
            chunk = int.from_bytes(data[off : off + 8], "little")
            key = _fold(key, chunk)
        return key
    k = int(label) & _MASK
    return _mix64_int(key ^ _mix64_int((k + _GOLDEN) & _MASK))


class RngState:
    """Single-owner deterministic stream; derive children instead of sharing."""

    __slots__ = ("key", "counter")

    def __init__(self, seed: int, counter: int = 0):
        self.key = int(seed) & _MASK
        self.counter = int(counter)

    def child(self, *labels: int | str) -> "RngState":
        """Independent stream keyed by (this key, labels); counter starts at 0."""
        key = self.key
        for label in labels:
            key = _fold(key, label)
        return RngState(key)

    def next_uint64(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit words; advances the counter by ``n``."""
        start = (self.key + ((self.counter + 1) * _GOLDEN)) & _MASK
        with np.errstate(over="ignore"):
            ctrs = np.uint64(start) + np.arange(n, dtype=np.uint64) * np.uint64(_GOLDEN)
        self.counter += n
        return _mix64(ctrs)

    def uniform(self, n: int) -> np.ndarray:
        """``n`` float64 samples in [0, 1) with 53-bit resolution."""
        return (self.next_uint64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, n: int) -> np.ndarray:
        """``n`` standard-normal float64 samples via Box-Muller."""
        pairs = (n + 1) // 2
        raw = self.next_uint64(2 * pairs)
        # u1 in (0, 1] so log() is finite; u2 in [0, 1)
        u1 = ((raw[:pairs] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (raw[pairs:] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * np.pi) * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic Fisher-Yates permutation of range(n)."""
        perm = np.arange(n)
        if n < 2:
            return perm
        u = self.uniform(n - 1)
        for i in range(n - 1, 0, -1):
            j = int(u[n - 1 - i] * (i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm


def parse_seed(text: str) -> int:
    """Parse a seed given as decimal or 0x-prefixed hex."""
    text = text.strip()
    value = int(text, 16) if text.lower().startswith("0x") else int(text)
    if not 0 <= value <= _MASK:
        raise ValueError(f"seed out of 64-bit range: {text}")
    return value
