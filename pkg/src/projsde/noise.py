"""Reproducible Wiener increments on dyadic grids.

Every sample path owns a counter-based Philox stream keyed by
``(seed, path_index)``, so a path's increments never depend on how paths are
scheduled across workers. Grids keep the raw Gaussian increments at the
finest step; each scheme coarsens and truncates for its own step size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigurationError


class RngStream:
    """Independent normal stream for one sample path."""

    def __init__(self, seed: int, path_index: int = 0):
        self.seed = int(seed)
        self.path_index = int(path_index)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.path_index,))
        self._gen = np.random.Generator(np.random.Philox(ss))

    def standard_normal(self, size) -> np.ndarray:
        return self._gen.standard_normal(size)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, path_index={self.path_index})"


@dataclass(frozen=True)
class TruncationConfig:
    k: int = 6
    enabled: bool = True

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigurationError(f"truncation k must be a positive integer, got {self.k}")


def truncation_level(h: float, k: int) -> float:
    """A_h = sqrt(2 k |ln h|), in units of standard deviations."""
    return math.sqrt(2 * k * abs(math.log(h)))


def truncate_increment(dW, h: float, cfg: TruncationConfig):
    """Clamp ``dW / sqrt(h)`` to ``[-A_h, A_h]`` and rescale.

    Works elementwise on arrays. Disabled configs return ``dW`` untouched.
    """
    if not cfg.enabled:
        return dW
    if not 0 < h < 1:
        raise ConfigurationError(f"truncation needs 0 < h < 1, got h={h}")
    sq = math.sqrt(h)
    bound = truncation_level(h, cfg.k) * sq
    return np.clip(dW, -bound, bound)


def truncation_moment_check(h: float, k: int, samples: int, stream: RngStream) -> float:
    """Monte-Carlo estimate of E(xi - zeta_h)^2 for standard normal xi."""
    xi = stream.standard_normal(samples)
    a = truncation_level(h, k)
    zeta = np.clip(xi, -a, a)
    return float(np.mean((xi - zeta) ** 2))


@dataclass(frozen=True)
class BrownianGrid:
    """Untruncated increments, shape ``(..., m, n_fine)``, at step ``h_fine``."""

    h_fine: float
    increments: np.ndarray

    @property
    def n_fine(self) -> int:
        return self.increments.shape[-1]

    @property
    def m(self) -> int:
        return self.increments.shape[-2]

    def coarsen(self, factor: int) -> np.ndarray:
        return coarsen(self.increments, factor)

    def step_increments(self, h: float) -> np.ndarray:
        """Increments at step ``h`` laid out as ``(..., n_steps, m)``."""
        ratio = h / self.h_fine
        factor = int(round(ratio))
        if factor < 1 or abs(ratio - factor) > 1e-9 * ratio:
            raise ConfigurationError(f"h={h} is not a multiple of h_fine={self.h_fine}")
        return np.swapaxes(self.coarsen(factor), -1, -2)


def sample_grid(stream: RngStream, m: int, h_fine: float, n_fine: int) -> BrownianGrid:
    """Sample ``n_fine`` increments of an m-dimensional Wiener process.

    Writing ``n_fine = n0 * 2**p`` with ``n0`` odd, the ``n0`` coarse
    increments at step ``h_fine * 2**p`` are drawn first and then halved
    ``p`` times by Brownian-bridge splitting: an increment ``D`` over a step
    ``H`` becomes ``D/2 + sqrt(H)/2 Z`` and ``D/2 - sqrt(H)/2 Z``. The fine
    increments are i.i.d. N(0, h_fine), and a grid sampled with ``h_fine/2``
    over the same horizon refines the same Brownian path.
    """
    if h_fine <= 0 or n_fine < 1:
        raise ConfigurationError(f"need h_fine > 0 and n_fine >= 1, got {h_fine}, {n_fine}")
    p = (n_fine & -n_fine).bit_length() - 1
    n0 = n_fine >> p
    H = h_fine * (1 << p)
    inc = stream.standard_normal((m, n0)) * math.sqrt(H)
    for _ in range(p):
        half = 0.5 * inc + (0.5 * math.sqrt(H)) * stream.standard_normal(inc.shape)
        out = np.empty(inc.shape[:-1] + (2 * inc.shape[-1],))
        out[..., 0::2] = half
        out[..., 1::2] = inc - half
        inc = out
        H *= 0.5
    return BrownianGrid(h_fine=h_fine, increments=inc)


def sample_grids(seed: int, path_indices, m: int, h_fine: float, n_fine: int) -> BrownianGrid:
    """Stack the grids of several paths into one batched grid."""
    inc = np.stack([sample_grid(RngStream(seed, i), m, h_fine, n_fine).increments
                    for i in path_indices])
    return BrownianGrid(h_fine=h_fine, increments=inc)


def coarsen(fine: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive blocks of ``factor`` increments along the last axis.

    ``factor`` must be a power of two; the sum is formed as a binary tree of
    pair sums, so coarsening by ``a`` then ``b`` is bitwise identical to
    coarsening by ``a * b``.
    """
    fine = np.asarray(fine, dtype=float)
    n = fine.shape[-1]
    if factor < 1 or factor & (factor - 1):
        raise ConfigurationError(f"coarsening factor must be a power of two, got {factor}")
    if n % factor:
        raise ConfigurationError(f"factor {factor} does not divide {n} increments")
    out = fine
    while factor > 1:
        out = out[..., 0::2] + out[..., 1::2]
        factor //= 2
    return out
