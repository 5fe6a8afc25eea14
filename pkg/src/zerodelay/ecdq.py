"""Subtractively dithered uniform scalar quantization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NonPositiveVariance

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
# counter layout: t * 2**16 + i, so up to 65536 components per step
_COMPONENT_BITS = 16


@dataclass(frozen=True)
class QuantizerConfig:
    steps: np.ndarray
    v_diag: np.ndarray

    @property
    def p(self):
        return self.steps.size


def step_sizes(sigma_v) -> QuantizerConfig:
    """Quantizer steps matched to channel noise variances: ``V = step**2 / 12``."""
    sv = np.asarray(sigma_v, dtype=float)
    v = np.diag(sv).copy() if sv.ndim == 2 else np.atleast_1d(sv).copy()
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise NonPositiveVariance("quantizer noise variances must be positive")
    return QuantizerConfig(steps=np.sqrt(12.0 * v), v_diag=v)


def round_half_away(u):
    u = np.asarray(u, dtype=float)
    return np.sign(u) * np.floor(np.abs(u) + 0.5)


def quantize_subtractive(x, delta, r):
    """Quantize ``x`` with dither ``r``.

    Returns ``(index, reconstruction)`` where ``index = round((x + r) / delta)``
    (ties away from zero) and ``reconstruction = index * delta - r`` is what
    the decoder forms. Works elementwise on arrays.
    """
    x, delta, r = np.asarray(x, float), np.asarray(delta, float), np.asarray(r, float)
    index = round_half_away((x + r) / delta).astype(np.int64)
    recon = index * delta - r
    if index.ndim == 0:
        return int(index), float(recon)
    return index, recon


def reconstruct(index, delta, r):
    return np.asarray(index) * np.asarray(delta, float) - np.asarray(r, float)


def _splitmix(z):
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class DitherStream:
    """Counter-based uniform dither shared by encoder and decoder.

    The dither for step ``t`` and component ``i`` is a pure function of
    ``(seed, t, i)``: SplitMix64 of ``seed + (c + 1) * gamma`` with counter
    ``c = t * 2**16 + i``, whose top 53 bits are mapped to
    ``[-step/2, step/2)``.
    """

    def __init__(self, seed, steps):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.steps = np.atleast_1d(np.asarray(steps, dtype=float))

    @property
    def p(self):
        return self.steps.size

    def uniform(self, t0, n):
        """Unit-interval draws for steps ``t0 .. t0 + n - 1``, shape ``(n, p)``."""
        t = np.arange(t0, t0 + n, dtype=np.uint64)[:, None]
        i = np.arange(self.p, dtype=np.uint64)[None, :]
        c = (t << np.uint64(_COMPONENT_BITS)) + i + np.uint64(1)
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + c * _GAMMA
        return (_splitmix(z) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def block(self, t0, n):
        """Dither values for ``n`` consecutive steps, shape ``(n, p)``."""
        return (self.uniform(t0, n) - 0.5) * self.steps

    def at(self, t):
        return self.block(t, 1)[0]
