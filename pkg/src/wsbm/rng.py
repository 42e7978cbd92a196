"""Counter-based random numbers from the SplitMix64 finaliser.

Every random draw is a pure function of ``(key, counter)``:

    state  = key + (counter + 1) * 0x9E3779B97F4A7C15   (mod 2**64)
    output = mix64(state)

where ``mix64`` is the SplitMix64 output function (Steele, Lea & Flood 2014):

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

A user seed is turned into a key with ``key = mix64(seed)``. Because draws do
not depend on any generator state, any subset of counters can be evaluated by
any worker in any order and the results are bit-identical.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_TWO_M53 = 2.0 ** -53


def mix64(z: int) -> int:
    """SplitMix64 finaliser on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive_key(seed: int) -> int:
    return mix64(int(seed) & MASK64)


def derive_trial_seed(base_seed: int, trial_index: int) -> int:
    """Per-trial seed from the 128-bit input ``(base_seed, trial_index)``.

    Both halves go through ``mix64`` before being combined so that nearby
    base seeds and nearby indices do not produce related keys.
    """
    hi = mix64((int(base_seed) & MASK64) ^ 0x6A09E667F3BCC908)
    lo = mix64(((int(trial_index) & MASK64) + GOLDEN) & MASK64)
    return mix64(hi ^ ((lo * GOLDEN) & MASK64))


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_M1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def random_bits(key: int, counters: np.ndarray) -> np.ndarray:
    """64-bit outputs for an array of counters (uint64 arithmetic wraps mod 2**64)."""
    counters = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        state = np.uint64(key) + (counters + np.uint64(1)) * np.uint64(GOLDEN)
        return _mix64_array(state)


def uniforms(key: int, counters: np.ndarray) -> np.ndarray:
    """Doubles in ``[0, 1)`` built from the top 53 bits."""
    return (random_bits(key, counters) >> np.uint64(11)).astype(np.float64) * _TWO_M53


def uniforms_open_low(key: int, counters: np.ndarray) -> np.ndarray:
    """Doubles in ``(0, 1]``; safe to take the log of."""
    return ((random_bits(key, counters) >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_M53


def standard_normals(key: int, counters: np.ndarray) -> np.ndarray:
    """One standard normal per counter via Box-Muller.

    Counter ``c`` consumes the two raw draws ``2c`` and ``2c + 1``.
    """
    counters = np.asarray(counters, dtype=np.uint64)
    u1 = uniforms_open_low(key, counters * np.uint64(2))
    u2 = uniforms(key, counters * np.uint64(2) + np.uint64(1))
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def random_permutation(key: int, size: int) -> np.ndarray:
    """Permutation of ``range(size)`` obtained by sorting random keys (ties broken by index)."""
    bits = random_bits(key, np.arange(size, dtype=np.uint64))
    return np.lexsort((np.arange(size), bits))
