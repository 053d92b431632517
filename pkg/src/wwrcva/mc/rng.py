"""Counter-based random numbers shared by both simulation kernels.

Draw ``j`` of time step ``i`` on path ``p`` of batch ``b`` is a pure
function of ``(seed, b, p, i, j)``::

    key = mix(mix(mix(seed) ^ b) ^ p)
    u   = mix(key + ((i << 8) | j) * GOLDEN)

where ``mix`` is the SplitMix64 finaliser.  Paths can therefore be
generated in any order, in any chunking, on any number of workers.
"""
from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(k) for k in (30, 27, 31, 11))
_TWO_M53 = 2.0**-53

#: draw slots per step: 0,1 Box-Muller, 2 Poisson count, 3.. jump sizes
SLOTS_PER_STEP = 256
MAX_JUMPS_PER_STEP = SLOTS_PER_STEP - 3


_MASK = (1 << 64) - 1


def mix64(z):
    shape = np.shape(z)
    z = np.array(z, dtype=np.uint64, ndmin=1)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return (z ^ (z >> _S31)).reshape(shape)


def path_keys(seed: int, batch: int, paths) -> np.ndarray:
    base = mix64(mix64(np.uint64(seed)) ^ np.uint64(batch))
    return mix64(base ^ np.asarray(paths, dtype=np.uint64))


def uniforms(keys: np.ndarray, step: int, slot: int) -> np.ndarray:
    """Uniform draws in (0, 1) for every key at ``(step, slot)``."""
    offset = np.uint64((((step << 8) | slot) * int(GOLDEN)) & _MASK)
    with np.errstate(over="ignore"):
        z = mix64(keys + offset)
    return ((z >> _S11).astype(np.float64) + 0.5) * _TWO_M53


def normal_pair(keys: np.ndarray, step: int):
    """Two independent standard normals per key (Box-Muller)."""
    u1 = uniforms(keys, step, 0)
    u2 = uniforms(keys, step, 1)
    r = np.sqrt(-2.0 * np.log(u1))
    ang = 2.0 * np.pi * u2
    return r * np.cos(ang), r * np.sin(ang)
