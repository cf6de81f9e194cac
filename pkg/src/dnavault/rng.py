"""Randomness sources.

Everything that draws random numbers takes an ``rng`` with numpy's
``Generator.integers(low, high, size=None)`` signature.  Seeded
``numpy.random.Generator`` objects give reproducible runs; ``SystemRng``
(the default) reads from the OS CSPRNG.
"""

import os

import numpy as np

_TWO64 = 1 << 64


class SystemRng:
    """Unbiased bounded integers from ``os.urandom`` via rejection sampling."""

    def integers(self, low, high=None, size=None):
        if high is None:
            low, high = 0, low
        low = np.asarray(low, dtype=np.int64)
        span = np.asarray(high, dtype=np.int64) - low
        if (span <= 0).any():
            raise ValueError("high must exceed low")
        shape = np.broadcast_shapes(low.shape, span.shape, () if size is None else np.shape(np.empty(size)))
        span = np.broadcast_to(span, shape).ravel().astype(np.uint64)
        out = np.empty(span.size, dtype=np.uint64)
        # reject draws in the incomplete top bucket so every residue is equally likely
        limit = np.uint64(_TWO64 - 1) - (np.uint64(_TWO64 - 1) % span + np.uint64(1)) % span
        todo = np.arange(span.size)
        while todo.size:
            raw = np.frombuffer(os.urandom(8 * todo.size), dtype=np.uint64)
            ok = raw <= limit[todo]
            out[todo[ok]] = raw[ok] % span[todo[ok]]
            todo = todo[~ok]
        result = out.astype(np.int64).reshape(shape) + low
        if size is None and result.ndim == 0:
            return int(result)
        return result


def make_rng(seed=None):
    """Seeded generator when ``seed`` is given, OS entropy otherwise."""
    if seed is None:
        return SystemRng()
    return np.random.default_rng(seed)
