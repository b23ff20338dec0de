"""Maps from a common effect to per-basket response rates."""

from __future__ import annotations

import numpy as np

from .core_types import EffectScale, Scale


def link(scale: EffectScale, pi0: np.ndarray, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(h, hdot)``: implied response rates and their derivative in delta."""
    pi0 = np.asarray(pi0, dtype=float)
    if scale.scale is Scale.RD:
        return pi0 + delta, np.ones_like(pi0)
    if scale.scale is Scale.RR:
        return pi0 * delta, pi0.copy()
    denom = 1.0 - pi0 + pi0 * delta
    h = pi0 * delta / denom
    hdot = pi0 * (1.0 - pi0) / denom**2
    return h, hdot
