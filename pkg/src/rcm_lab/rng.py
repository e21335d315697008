"""Counter-based random streams (Philox4x32-10), vectorised over numpy arrays.

Every random quantity in the package is a pure function of a key and a
counter, so results never depend on call order, thread count or platform.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_ROUNDS = 10


def philox4x32(counter, key):
    """Apply the Philox4x32-10 bijection.

    ``counter`` is a sequence of four integer arrays (or scalars) holding
    32-bit words; ``key`` is a pair of 32-bit ints.  Returns four ``uint32``
    arrays broadcast to the common shape of the counter words.
    """
    c0, c1, c2, c3 = np.broadcast_arrays(*(np.asarray(c, dtype=np.uint64) for c in counter))
    c0, c1, c2, c3 = (c & _MASK32 for c in (c0, c1, c2, c3))
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for _ in range(_ROUNDS):
        p0 = c0 * _M0
        p1 = c2 * _M1
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ np.uint64(k0), lo1, hi0 ^ c3 ^ np.uint64(k1), lo0
        k0 = (k0 + _W0) & 0xFFFFFFFF
        k1 = (k1 + _W1) & 0xFFFFFFFF
    return tuple(c.astype(np.uint32) for c in (c0, c1, c2, c3))


def _to_unit(a, b):
    """53-bit uniform in [0, 1) from two 32-bit words."""
    a = a.astype(np.uint64) >> np.uint64(5)
    b = b.astype(np.uint64) >> np.uint64(6)
    return (a * np.float64(67108864.0) + b) * (1.0 / 9007199254740992.0)


def _tag_words(tag) -> tuple[int, int]:
    if isinstance(tag, (int, np.integer)):
        v = int(tag) & 0xFFFFFFFFFFFFFFFF
    else:
        digest = hashlib.blake2b(str(tag).encode(), digest_size=8).digest()
        v = int.from_bytes(digest, "little")
    return v & 0xFFFFFFFF, v >> 32


@dataclass(frozen=True)
class Stream:
    """A keyed random stream.  Children are derived by hashing tags into the key."""

    key: tuple[int, int]

    @classmethod
    def from_seed(cls, seed: int) -> "Stream":
        if seed < 0:
            raise ValueError("seed must be non-negative")
        lo, hi = _tag_words(seed)
        return cls((lo, hi))

    def child(self, *tags) -> "Stream":
        key = self.key
        for depth, tag in enumerate(tags):
            lo, hi = _tag_words(tag)
            out = philox4x32((lo, hi, 0x5EED5EED, depth), key)
            key = (int(out[0]), int(out[1]))
        return Stream(key)

    def uniforms(self, n: int, offset: int = 0) -> np.ndarray:
        """``n`` uniforms in [0, 1) drawn from counters ``offset .. offset+n-1``."""
        idx = np.arange(offset, offset + n, dtype=np.uint64)
        w = philox4x32((idx & _MASK32, idx >> _SHIFT32, 0, 0), self.key)
        return _to_unit(w[0], w[1])

    def pair_uniforms(self, i, j) -> np.ndarray:
        """One uniform per unordered index pair; (i, j) and (j, i) agree."""
        i = np.asarray(i, dtype=np.uint64)
        j = np.asarray(j, dtype=np.uint64)
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        w = philox4x32((lo, hi, 0x9A1B, 0), self.key)
        return _to_unit(w[0], w[1])

    def poisson(self, mean: float, counter: int = 0) -> int:
        """Poisson variate by CDF inversion of one counter-indexed uniform."""
        from scipy import stats

        u = float(self.child("poisson").uniforms(1, offset=counter)[0])
        if mean == 0.0 or u == 0.0:
            return 0
        return int(stats.poisson.ppf(u, mean))
