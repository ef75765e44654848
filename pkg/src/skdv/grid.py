"""Uniform periodic grids, quadrature, Fourier differentiation and weighted norms.

Fields are plain ``numpy`` arrays whose trailing axis has length ``grid.n_points``.
Every routine here broadcasts over leading axes, so a stack of ``B`` fields with
shape ``(B, N)`` is handled in one call.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid ``x_j = origin + j*dx`` on ``[origin, origin + length)``."""

    length: float = 80.0
    n_points: int = 1024
    origin: float | None = None

    def __post_init__(self):
        n = int(self.n_points)
        if n < 8 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 8, got {self.n_points}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")
        object.__setattr__(self, "n_points", n)
        object.__setattr__(self, "length", float(self.length))
        if self.origin is None:
            object.__setattr__(self, "origin", -self.length / 2)

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @cached_property
    def x(self) -> np.ndarray:
        x = self.origin + self.dx * np.arange(self.n_points)
        x.flags.writeable = False
        return x

    @cached_property
    def k(self) -> np.ndarray:
        """Angular wavenumbers in ``rfft`` layout (Nyquist mode included)."""
        k = 2 * np.pi * np.fft.rfftfreq(self.n_points, d=self.dx)
        k.flags.writeable = False
        return k

    @cached_property
    def k_odd(self) -> np.ndarray:
        """Wavenumbers for odd-order derivatives: the Nyquist mode is zeroed."""
        k = np.array(self.k)
        k[-1] = 0.0
        k.flags.writeable = False
        return k

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keeps modes with index below N/3."""
        m = np.arange(self.k.size)
        mask = (3 * m < self.n_points).astype(float)
        mask.flags.writeable = False
        return mask

    def check(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        if v.shape[-1] != self.n_points:
            raise ValueError(
                f"field of length {v.shape[-1]} does not live on a grid with {self.n_points} points"
            )
        return v

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Map coordinates into the fundamental window ``[origin, origin + length)``."""
        return np.mod(np.asarray(x) - self.origin, self.length) + self.origin


@dataclass(frozen=True)
class WeightConfig:
    """Exponential weight ``e^{w x}`` defining ``L^2_w`` and ``H^1_w``."""

    w: float

    def __post_init__(self):
        if not self.w > 0:
            raise ValueError(f"weight rate must be positive, got {self.w}")


def inner_product(a, b, grid: Grid) -> np.ndarray | float:
    """Rectangle-rule L^2 pairing along the last axis."""
    a = grid.check(a)
    b = grid.check(b)
    return np.sum(a * b, axis=-1) * grid.dx


def l2_norm(v, grid: Grid):
    return np.sqrt(inner_product(v, v, grid))


def spectral_derivative(v, grid: Grid, order: int = 1) -> np.ndarray:
    """Fourier-multiplier derivative ``(ik)^order`` applied along the last axis."""
    if order not in (1, 2, 3):
        raise ValueError(f"order must be 1, 2 or 3, got {order}")
    v = grid.check(v)
    k = grid.k_odd if order % 2 else grid.k
    return np.fft.irfft((1j * k) ** order * np.fft.rfft(v, axis=-1), n=grid.n_points, axis=-1)


def weighted_l2_norm(v, grid: Grid, weight: WeightConfig):
    """``||e^{w x} v||_{L^2}``."""
    ev = np.exp(weight.w * grid.x) * grid.check(v)
    return l2_norm(ev, grid)


def weighted_h1_norm(v, grid: Grid, weight: WeightConfig, dv=None):
    """``||e^{w x} v||_{H^1}`` with ``(e^{wx} v)' = e^{wx}(v' + w v)``.

    ``dv`` may carry a precomputed derivative of ``v``; otherwise it is taken
    spectrally. Differentiating ``v`` rather than the product keeps the
    jump of ``e^{wx}`` across the periodic seam out of the spectral derivative.
    """
    v = grid.check(v)
    if dv is None:
        dv = spectral_derivative(v, grid, 1)
    e = np.exp(weight.w * grid.x)
    ev = e * v
    dev = e * (dv + weight.w * v)
    return np.sqrt(inner_product(ev, ev, grid) + inner_product(dev, dev, grid))
