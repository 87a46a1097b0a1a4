"""Deterministic pseudo-randomness and hashing primitives.

Every sampling decision in this package (regime subsampling, contrastive
pair selection, synthetic corpus generation) draws from a SplitMix64
stream so that runs reproduce bit-for-bit across processes and platforms.
FNV-1a is used wherever a stable 64-bit digest of a string is needed,
e.g. token bucketing in the hash encoder and deriving per-regime seeds.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1

_GAMMA = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash of a byte string."""
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


class SplitMix64Stream:
    """SplitMix64 generator with rejection-sampled bounded draws.

    The update is the classic one: the state advances by a fixed odd
    gamma and the output is a two-round xor-multiply finalizer; all
    arithmetic wraps modulo 2**64.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int) -> None:
        self.state = seed & MASK64

    def next_u64(self) -> int:
        """Next raw 64-bit output."""
        self.state = (self.state + _GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX_A) & MASK64
        z = ((z ^ (z >> 27)) * _MIX_B) & MASK64
        return z ^ (z >> 31)

    def bounded(self, n: int) -> int:
        """Uniform integer in [0, n), free of modulo bias.

        Raw draws are rejected when they fall in the short tail
        ``[floor(2**64 / n) * n, 2**64)``.
        """
        if n <= 0:
            raise ValueError(f"bound must be positive, got {n}")
        limit = ((1 << 64) // n) * n
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def uniform(self) -> float:
        """Float in [0, 1) built from the top 53 bits of one draw."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def shuffle_prefix(self, items: list, m: int) -> None:
        """Partial Fisher-Yates: after the call, ``items[:m]`` is a
        uniform ordered sample without replacement from ``items``.

        Positions are filled left to right, so the prefix of a longer
        shuffle equals the shorter shuffle drawn from the same state.
        """
        n = len(items)
        if not 0 <= m <= n:
            raise ValueError(f"prefix length {m} out of range for {n} items")
        for i in range(m):
            j = i + self.bounded(n - i)
            items[i], items[j] = items[j], items[i]


def mix64(x: int) -> int:
    """One SplitMix64 output step; used to derive stream seeds."""
    return SplitMix64Stream(x).next_u64()


def stream_for(seed: int, tag: bytes, salt: int = 0) -> SplitMix64Stream:
    """Independent stream derived from a run seed, a purpose tag, and a salt."""
    return SplitMix64Stream(mix64((seed ^ fnv1a64(tag) ^ salt) & MASK64))
