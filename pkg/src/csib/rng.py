"""Seeded, counter-based randomness.

Every stochastic component of the package draws from a Philox
counter-based generator keyed by ``(seed, *stream)``.  Gaussian variates
are produced by the Box-Muller transform on Philox uniforms, so a given
key always yields the same draw regardless of call order elsewhere in
the program.
"""

from __future__ import annotations

import numpy as np

_STREAM_MOD = 2**64


def _philox(seed: int, *stream: int) -> np.random.Generator:
    """Generator keyed by seed plus an arbitrary stream tuple."""
    key = np.uint64(int(seed) % _STREAM_MOD)
    words = [int(s) % _STREAM_MOD for s in stream]
    counter = np.zeros(4, dtype=np.uint64)
    for i, w in enumerate(words[:4]):
        counter[i] = np.uint64(w)
    bitgen = np.random.Philox(counter=counter, key=key)
    return np.random.Generator(bitgen)


def uniform(shape, seed: int, *stream: int) -> np.ndarray:
    """Uniform draws in [0, 1) with full 64-bit resolution."""
    gen = _philox(seed, *stream)
    return gen.random(size=shape, dtype=np.float64)


def standard_normal(shape, seed: int, *stream: int) -> np.ndarray:
    """Standard normal draws via Box-Muller on Philox uniforms."""
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    n = int(np.prod(shape)) if shape else 1
    pairs = (n + 1) // 2
    gen = _philox(seed, *stream)
    # 1 - u maps [0,1) to (0,1], keeping log finite.
    u1 = 1.0 - gen.random(size=pairs, dtype=np.float64)
    u2 = gen.random(size=pairs, dtype=np.float64)
    radius = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    z = np.concatenate([radius * np.cos(theta), radius * np.sin(theta)])[:n]
    return z.reshape(shape)


def permutation(n: int, seed: int, *stream: int) -> np.ndarray:
    """Seeded permutation of ``range(n)``."""
    gen = _philox(seed, *stream)
    return gen.permutation(n)
