"""Deterministic random sources.

A scalar xoshiro256** generator serves the sequential sampling paths.
Lockstep kernels instead derive one independent stream per (document,
iteration) by hashing, so that the randomness consumed by a lane does not
depend on how many other lanes happen to be drawing at the same step.
``units_for`` is the vectorized twin of ``unit_for`` and produces
bit-identical values.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_UNIT_SCALE = 2.0**-53


def _splitmix_next(state: int) -> tuple[int, int]:
    """Advance a SplitMix64 state and return (new_state, output)."""
    state = (state + _GAMMA) & _MASK64
    z = ((state ^ (state >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return state, z ^ (z >> 31)


def mix64(x: int) -> int:
    """One SplitMix64 step treated as a 64-bit hash of x."""
    return _splitmix_next(x & _MASK64)[1]


def derive_seed(seed: int, *keys: int) -> int:
    """Fold integer keys into a seed, one mixing round per key."""
    h = seed & _MASK64
    for k in keys:
        h = mix64(h ^ (int(k) & _MASK64))
    return h


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** with SplitMix64 state seeding.

    ``next_unit`` maps the 53 high bits of each output into [0, 1), so it
    never returns 1.0, and identical seeds give identical streams.
    """

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        sm = self.seed
        state = []
        for _ in range(4):
            sm, out = _splitmix_next(sm)
            state.append(out)
        self._s = state

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def next_unit(self) -> float:
        return (self.next_u64() >> 11) * _UNIT_SCALE


def unit_for(seed: int, *keys: int) -> float:
    """First unit value of the stream derived from (seed, keys...)."""
    return Xoshiro256StarStar(derive_seed(seed, *keys)).next_unit()


# --- vectorized twins (uint64 arrays, wraparound arithmetic) ---

_U = np.uint64


def _mix64_np(x: np.ndarray) -> np.ndarray:
    z = x + _U(_GAMMA)
    z = (z ^ (z >> _U(30))) * _U(_MIX1)
    z = (z ^ (z >> _U(27))) * _U(_MIX2)
    return z ^ (z >> _U(31))


def _rotl_np(x: np.ndarray, k: int) -> np.ndarray:
    return (x << _U(k)) | (x >> _U(64 - k))


def units_for(seed: int, *key_arrays) -> np.ndarray:
    """Vectorized unit_for: broadcasts the key arrays elementwise."""
    keys = [np.asarray(k, dtype=np.int64).astype(np.uint64) for k in key_arrays]
    if keys:
        keys = list(np.broadcast_arrays(*keys))
        h = np.full(keys[0].shape, _U(seed & _MASK64), dtype=np.uint64)
    else:
        h = np.asarray(_U(seed & _MASK64))
    with np.errstate(over="ignore"):  # uint64 wraparound is the point
        for k in keys:
            h = _mix64_np(h ^ k)
        # xoshiro256** seeding: four SplitMix64 outputs, then the first output.
        sm = h
        state = []
        for _ in range(4):
            sm = sm + _U(_GAMMA)
            z = (sm ^ (sm >> _U(30))) * _U(_MIX1)
            z = (z ^ (z >> _U(27))) * _U(_MIX2)
            state.append(z ^ (z >> _U(31)))
        s1 = state[1]
        result = _rotl_np(s1 * _U(5), 7) * _U(9)
    return (result >> _U(11)).astype(np.float64) * _UNIT_SCALE
