"""Seeded pseudo-random primitives shared by the ordering schemes.

The generator is SplitMix64: a 64-bit counter advanced by a fixed odd
constant, with the output run through two xorshift-multiply mixing rounds.
It is tiny, statistically solid, and trivial to reproduce bit-for-bit in
any language, which is what keeps compiled session plans replayable on
every machine that has to check them.

Bounded draws use plain modulo reduction.  The bias is bound/2**64; at
experiment scale (bounds in the thousands) that is far below anything a
goodness-of-fit test could ever see, and the reduction rule stays easy to
restate in one sentence.
"""

from __future__ import annotations

MASK64 = 0xFFFF_FFFF_FFFF_FFFF

_GOLDEN = 0x9E37_79B9_7F4A_7C15


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58_476D_1CE4_E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D0_49BB_1331_11EB) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Deterministic 64-bit stream with a documented bit layout."""

    def __init__(self, seed: int) -> None:
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & MASK64
        return _mix(self._state)

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return self.next_u64() % bound

    def unit(self) -> float:
        """Uniform float in [0, 1) built from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0**-53


def derive_seed(seed: int, stream: int) -> int:
    """Child seed for an independent, reproducible stream.

    Used to re-seed each repetition of a stimulus array and each retry of
    a constrained shuffle, so draws stay independent without consuming an
    unpredictable amount of the parent stream.
    """
    return _mix((seed ^ ((stream + 1) * _GOLDEN)) & MASK64)


def shuffled(items: list, rng: SplitMix64) -> list:
    """Fisher-Yates shuffle (backwards swap form), consuming one bounded
    draw per position from ``rng``.  Returns a new list."""
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = rng.below(i + 1)
        out[i], out[j] = out[j], out[i]
    return out
