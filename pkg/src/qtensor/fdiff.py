"""Central finite differences with Richardson extrapolation, in Wirtinger form.

Used as an independent cross-check of jet derivatives:
``d/dz = (d/dx - i d/dy) / 2`` and ``d/dzbar = (d/dx + i d/dy) / 2``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

DEFAULT_STEP = 1e-3


def richardson_central(f: Callable[[np.ndarray], np.ndarray], z: np.ndarray, direction: np.ndarray,
                       h: float = DEFAULT_STEP, levels: int = 2) -> np.ndarray:
    """Directional derivative ``d/dt f(z + t direction)`` at ``t = 0``.

    Central differences at ``h, h/2, ..., h/2^levels`` combined by ``levels``
    rounds of Richardson extrapolation (error ``O(h^(2 levels + 2))``).
    """
    z = np.asarray(z, dtype=complex)
    direction = np.asarray(direction, dtype=complex)
    table = []
    for k in range(levels + 1):
        s = h / 2**k
        table.append((np.asarray(f(z + s * direction)) - np.asarray(f(z - s * direction))) / (2 * s))
    for lvl in range(1, levels + 1):
        fac = 4.0**lvl
        table = [(fac * table[k + 1] - table[k]) / (fac - 1) for k in range(len(table) - 1)]
    return table[0]


def wirtinger(f: Callable, var: int, n: int, bar: bool = False, h: float = DEFAULT_STEP) -> Callable:
    """Function computing ``d_var f`` (or ``dbar_var f``) numerically."""
    e = np.zeros(n, dtype=complex)
    e[var] = 1.0
    sign = 1.0 if bar else -1.0

    def df(z):
        dx = richardson_central(f, z, e, h)
        dy = richardson_central(f, z, 1j * e, h)
        return 0.5 * (dx + sign * 1j * dy)

    return df


def mixed_partial(f: Callable, z, alpha, beta, h: float = DEFAULT_STEP):
    """``d^alpha dbar^beta f(z)`` by nested differences (keep total order small)."""
    n = len(alpha)
    g = f
    for i, a in enumerate(alpha):
        for _ in range(a):
            g = wirtinger(g, i, n, bar=False, h=h)
    for j, b in enumerate(beta):
        for _ in range(b):
            g = wirtinger(g, j, n, bar=True, h=h)
    return g(np.asarray(z, dtype=complex))
