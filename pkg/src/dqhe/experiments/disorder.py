"""Quenched multiplicative disorder on couplings and field."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DisorderSample:
    """Multipliers for one realisation: ``alpha1`` on every J, ``alpha2`` on h."""

    alpha1: float
    alpha2: float


def sample_disorder(eta: float, seed: int, index: int, point_index: int = 0) -> DisorderSample:
    """Draw ``(alpha1, alpha2)`` uniformly from ``[1 - eta, 1 + eta]**2``.

    The stream is keyed on ``(seed, point_index, index)`` so every draw is
    reproducible no matter which worker computes it or in which order.
    """
    if not 0.0 <= eta < 1.0:
        raise ValueError("eta must lie in [0, 1)")
    if eta == 0.0:
        return DisorderSample(1.0, 1.0)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(point_index), int(index)]))
    a1, a2 = rng.uniform(1.0 - eta, 1.0 + eta, size=2)
    return DisorderSample(float(a1), float(a2))


def sample_block(eta: float, seed: int, point_index: int, n: int) -> np.ndarray:
    """``(n, 2)`` array of multipliers for samples ``0..n-1`` at one scan point."""
    out = np.empty((n, 2))
    for i in range(n):
        s = sample_disorder(eta, seed, i, point_index)
        out[i] = (s.alpha1, s.alpha2)
    return out
