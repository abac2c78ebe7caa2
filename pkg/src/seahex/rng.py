"""Seeded, portable random number streams for the simulation.

Every random draw in a simulated run comes from one master seed through
named substreams, one per noise source.  The generator is pinned down to
the bit level so that a (scenario, command trace) pair reproduces the
same trace on any platform, and so that an independent implementation of
the same scheme produces identical numbers.

Stream derivation
-----------------
* ``stream_seed = fnv1a64(name) XOR master_seed`` where ``fnv1a64`` is the
  64-bit FNV-1a hash of the UTF-8 stream name.
* The four 64-bit words of xoshiro256** state are the first four outputs
  of a splitmix64 sequence started at ``stream_seed``.  If all four words
  come out zero (never in practice), word 0 is set to 1.

Draw primitives
---------------
* ``next_u64``: one xoshiro256** step.
* ``uniform``: ``(next_u64() >> 11) * 2**-53``, in [0, 1).
* ``normal``: Box-Muller on ``u1 = ((next_u64() >> 11) + 1) * 2**-53``
  (in (0, 1]) and ``u2 = uniform()``; returns
  ``sqrt(-2 ln u1) * cos(2 pi u2)`` first and caches the matching ``sin``
  term for the next call.

Adding a noise source to the simulation means taking a new named stream,
never inserting draws into an existing one.  The streams used by the
simulator are listed in ``simworld``.
"""

from __future__ import annotations

import math

_MASK64 = 0xFFFFFFFFFFFFFFFF

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(name: str) -> int:
    """64-bit FNV-1a hash of the UTF-8 encoding of ``name``."""
    h = _FNV_OFFSET
    for b in name.encode("utf-8"):
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step.  Returns (next_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** with the seeding scheme described in the module docs."""

    __slots__ = ("_s0", "_s1", "_s2", "_s3", "_spare_normal")

    def __init__(self, seed: int):
        state = seed & _MASK64
        words = []
        for _ in range(4):
            state, out = splitmix64(state)
            words.append(out)
        if not any(words):
            words[0] = 1
        self._s0, self._s1, self._s2, self._s3 = words
        self._spare_normal: float | None = None

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return result

    def uniform(self) -> float:
        """Uniform float64 in [0, 1)."""
        return (self.next_u64() >> 11) * 1.1102230246251565e-16  # 2**-53

    def normal(self, sigma: float = 1.0) -> float:
        """Standard normal scaled by sigma, via cached Box-Muller pairs."""
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
            return z * sigma
        u1 = ((self.next_u64() >> 11) + 1) * 1.1102230246251565e-16
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._spare_normal = r * math.sin(theta)
        return r * math.cos(theta) * sigma


def stream(master_seed: int, name: str) -> Xoshiro256StarStar:
    """The named substream of ``master_seed``."""
    return Xoshiro256StarStar(fnv1a64(name) ^ (master_seed & _MASK64))


class StreamSet:
    """Lazily created named substreams sharing one master seed."""

    def __init__(self, master_seed: int):
        self.master_seed = master_seed & _MASK64
        self._streams: dict[str, Xoshiro256StarStar] = {}

    def get(self, name: str) -> Xoshiro256StarStar:
        rng = self._streams.get(name)
        if rng is None:
            rng = stream(self.master_seed, name)
            self._streams[name] = rng
        return rng
