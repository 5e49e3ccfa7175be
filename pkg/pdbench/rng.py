"""Seed derivation: independent child streams from one master seed."""

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master, stream):
    """Child seed for stream number `stream` (tree i, shuffle schedule, ...)."""
    return splitmix64((int(master) & _MASK) ^ splitmix64(int(stream) & _MASK))


def generator(master, stream=0):
    return np.random.default_rng(derive_seed(master, stream))
