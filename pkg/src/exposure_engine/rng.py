"""Self-contained deterministic PRNG for every stochastic step.

SplitMix64 with the Steele/Vigna mixing constants. Chosen because the whole
generator fits in a dozen lines, needs only 64-bit integer arithmetic, and is
pinned by the reference outputs below, so any port reproduces seeding
bit-exactly.

Reference stream (first three outputs):
    seed 0       -> 0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F
    seed 1234567 -> 6457827717110365317, 3203168211198807973, 9817491932198370423

Floats are drawn as ``(next_u64() >> 11) * 2**-53``, i.e. the top 53 bits as a
value in [0, 1).
"""

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(value: int) -> int:
    """One SplitMix64 step applied to ``value`` (state increment + finalizer)."""
    z = (value + _GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Sequential SplitMix64 stream seeded with an unsigned 64-bit value."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def next_below(self, n: int) -> int:
        """Index in [0, n): floor(next_float() * n), clamped to n-1."""
        if n <= 0:
            raise ValueError("n must be positive")
        return min(int(self.next_float() * n), n - 1)


def derive_seed(base: int, *parts: int) -> int:
    """Deterministic child seed from ``base`` and integer ``parts``.

    Defined as repeated mixing: s := mix64(s + 1000003 * (part + 1)).
    Used to give every (k, restart) clustering run its own stream.
    """
    s = base & _MASK64
    for part in parts:
        s = mix64((s + 1_000_003 * (part + 1)) & _MASK64)
    return s
