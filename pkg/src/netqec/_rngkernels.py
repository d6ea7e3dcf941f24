"""Numba kernels for DEM sampling.

Each (seed, batch, fault) triple gets an independent splitmix64 stream;
Bernoulli hits over the shot axis are generated by geometric jumps, so the
cost is proportional to the number of fired faults, not shots * faults.
"""

import math

import numpy as np
from numba import njit, uint64

_GAMMA = uint64(0x9E3779B97F4A7C15)


@njit(uint64(uint64), cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> uint64(27))) * uint64(0x94D049BB133111EB)
    return z ^ (z >> uint64(31))


@njit(cache=True)
def scatter_faults(det, obs, dptr, dflat, optr, oflat, priors,
                   shots, seed, batch):
    """XOR fault signatures into packed (rows, words) planes, in place."""
    one = uint64(1)
    base = _mix(seed * _GAMMA + uint64(0xD1B54A32D192ED03)) ^ _mix(batch * _GAMMA)
    for f in range(priors.shape[0]):
        p = priors[f]
        state = base ^ _mix(uint64(f + 1) * _GAMMA)
        log1mp = math.log1p(-p)
        s = -1.0
        while True:
            state = state + _GAMMA
            u = (_mix(state) >> uint64(11)) * 1.1102230246251565e-16
            if u <= 0.0:
                u = 1.1102230246251565e-16
            s += 1.0 + math.floor(math.log(u) / log1mp)
            shot = int(s)
            if shot >= shots:
                break
            word = shot >> 6
            bit = one << uint64(shot & 63)
            for j in range(dptr[f], dptr[f + 1]):
                det[dflat[j], word] ^= bit
            for j in range(optr[f], optr[f + 1]):
                obs[oflat[j], word] ^= bit
