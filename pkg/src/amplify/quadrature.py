"""Small quadrature helpers shared by the transform and oscillatory routines."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


class QuadratureError(RuntimeError):
    """Raised when an adaptive rule fails to reach its target accuracy."""

    def __init__(self, message: str, achieved: float = math.nan):
        super().__init__(f"{message} (achieved error {achieved:.3g})")
        self.achieved = achieved


@lru_cache(maxsize=None)
def _legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gl_on_breaks(breaks: np.ndarray, order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on consecutive intervals."""
    x, w = _legendre(order)
    breaks = np.asarray(breaks, dtype=float)
    lo, hi = breaks[:-1], breaks[1:]
    half = (hi - lo) / 2
    keep = half > 0
    lo, half = lo[keep], half[keep]
    nodes = (lo + half)[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def gl_panels(a: float, b: float, width: float, order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule with panels no wider than ``width``."""
    m = max(1, int(math.ceil((b - a) / width - 1e-12)))
    return gl_on_breaks(np.linspace(a, b, m + 1), order)
