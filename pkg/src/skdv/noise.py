"""Translation-invariant Q-Wiener noise on a periodic grid.

The covariance operator is convolution with an even kernel ``q``; on the grid
it is the Fourier multiplier ``q_hat(k) >= 0`` and its square root is the
multiplier ``sqrt(q_hat)``. Increments are generated by coloring discretized
white noise (variance ``dt/dx`` per node) with ``sqrt(q_hat)``, which gives
``Var <g, dW> = dt <Q g, g>`` for every grid field ``g``.

Random streams are counter based: the increment for ``(seed, trajectory, step)``
comes from a Philox generator keyed by ``(seed, trajectory)`` whose counter
starts at ``step``, so any increment can be regenerated in isolation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid

FAMILIES = ("gaussian", "exponential-smoothed", "band-limited")

_MASK64 = (1 << 64) - 1


def _gaussian_hat(k, ell):
    return np.exp(-0.5 * (k * ell) ** 2)


def _exp_smoothed_hat(k, ell):
    # q(x) = (1 + |x|/ell) exp(-|x|/ell)
    return 1.0 / (1.0 + (k * ell) ** 2) ** 2


def _band_limited_hat(k, ell):
    # Fejer kernel: q(x) proportional to sinc^2, spectrum is a triangle of half-width 1/ell
    return np.clip(1.0 - np.abs(k) * ell, 0.0, None)


_SPECTRA = {
    "gaussian": _gaussian_hat,
    "exponential-smoothed": _exp_smoothed_hat,
    "band-limited": _band_limited_hat,
}


@dataclass(frozen=True, eq=False)
class CovarianceKernel:
    """Even correlation kernel with its per-mode spectrum (``rfft`` layout)."""

    grid: Grid
    q_hat: np.ndarray
    family: str = "custom"
    correlation_length: float | None = None
    normalized: bool = True
    q_half_hat: np.ndarray = field(init=False)

    def __post_init__(self):
        q_hat = np.asarray(self.q_hat, dtype=float)
        if q_hat.shape != self.grid.k.shape:
            raise ValueError("kernel spectrum does not match the grid")
        if np.any(q_hat < 0):
            raise ValueError(f"kernel spectrum has negative modes (min {q_hat.min():.3e})")
        q_hat.flags.writeable = False
        object.__setattr__(self, "q_hat", q_hat)
        half = np.sqrt(q_hat)
        half.flags.writeable = False
        object.__setattr__(self, "q_half_hat", half)

    def _kernel_field(self, mult):
        g = self.grid
        # impulse response of the multiplier, re-centred so that index j sits at x_j
        raw = np.fft.irfft(mult, n=g.n_points) / g.dx
        return raw[np.mod(np.round(g.x / g.dx).astype(int), g.n_points)]

    @property
    def q(self) -> np.ndarray:
        """Kernel sampled at the grid points ``q(x_j)``."""
        return self._kernel_field(self.q_hat)

    @property
    def q_half(self) -> np.ndarray:
        """Square-root kernel ``q_{1/2}(x_j)``."""
        return self._kernel_field(self.q_half_hat)

    @property
    def q0(self) -> float:
        """``q(0) = ||q_{1/2}||_{L^2}^2``, the pointwise variance rate of the noise."""
        g = self.grid
        w = np.full(self.q_hat.shape, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return float(np.sum(w * self.q_hat) / g.length)


def _normalize(q_hat, grid):
    w = np.full(q_hat.shape, 2.0)
    w[0] = w[-1] = 1.0
    q0 = np.sum(w * q_hat) / grid.length
    return q_hat / q0


def build_kernel(family: str, correlation_length: float, grid: Grid, normalize: bool = True):
    """Kernel from one of the built-in families; ``normalize`` enforces ``q(0) = 1``."""
    if family not in _SPECTRA:
        raise ValueError(f"unknown kernel family {family!r}; choose from {FAMILIES}")
    if not correlation_length > 0:
        raise ValueError("correlation_length must be positive")
    q_hat = _SPECTRA[family](grid.k, correlation_length)
    if normalize:
        q_hat = _normalize(q_hat, grid)
    return CovarianceKernel(grid, q_hat, family, correlation_length, normalize)


def kernel_from_function(q, grid: Grid, normalize: bool = True, tol: float = 1e-12):
    """Kernel from an even callable ``q(x)`` sampled at periodic offsets.

    Raises ``ValueError`` when the sampled spectrum has a mode below ``-tol``
    (relative to its largest mode), i.e. when ``Q`` would not be nonnegative.
    """
    g = grid
    offsets = np.fft.fftfreq(g.n_points, d=1.0 / g.length)  # 0, dx, ..., -dx
    samples = np.asarray(q(offsets), dtype=float)
    q_hat = np.fft.rfft(samples).real * g.dx
    scale = np.abs(q_hat).max()
    if np.any(q_hat < -tol * scale):
        raise ValueError(f"kernel spectrum has negative modes (min {q_hat.min():.3e})")
    q_hat = np.clip(q_hat, 0.0, None)
    if normalize:
        q_hat = _normalize(q_hat, g)
    return CovarianceKernel(g, q_hat, "custom", None, normalize)


def _apply(mult, g, grid):
    g = grid.check(g)
    return np.fft.irfft(mult * np.fft.rfft(g, axis=-1), n=grid.n_points, axis=-1)


def apply_Q(kernel: CovarianceKernel, g) -> np.ndarray:
    return _apply(kernel.q_hat, g, kernel.grid)


def apply_Q_half(kernel: CovarianceKernel, g) -> np.ndarray:
    return _apply(kernel.q_half_hat, g, kernel.grid)


def q_norm_sq(kernel: CovarianceKernel, g):
    """``||Q^{1/2} g||^2 = <Q g, g>``."""
    g = kernel.grid.check(g)
    return np.sum(apply_Q(kernel, g) * g, axis=-1) * kernel.grid.dx


def q_inner(kernel: CovarianceKernel, a, b):
    """``<Q^{1/2} a, Q^{1/2} b>``."""
    return np.sum(apply_Q(kernel, a) * kernel.grid.check(b), axis=-1) * kernel.grid.dx


def color(kernel: CovarianceKernel, white, dt: float) -> np.ndarray:
    """Turn standard normal node values into a Q-Wiener increment over ``dt``."""
    grid = kernel.grid
    scale = np.sqrt(dt / grid.dx)
    return _apply(kernel.q_half_hat * scale, white, grid)


def philox_generator(seed: int, trajectory: int, step: int, stream: int = 0):
    """Generator for one ``(seed, trajectory, step)`` triple.

    ``stream`` separates independent uses of the same triple (e.g. the PDE
    noise and an independently driven reduced equation).
    """
    key = [int(seed) & _MASK64, int(trajectory) & _MASK64]
    counter = [0, 0, int(step) & _MASK64, int(stream) & _MASK64]
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


@dataclass(frozen=True)
class NoiseIncrement:
    dW: np.ndarray
    dt: float
    seed_path: tuple


def sample_increment(kernel: CovarianceKernel, dt: float, rng=None, *,
                     seed: int = 0, trajectory: int = 0, step: int = 0, stream: int = 0):
    """One increment ``dW`` over ``dt``.

    Pass a ``numpy.random.Generator`` as ``rng`` for ad-hoc sampling; without
    it the counter-based stream for ``(seed, trajectory, step)`` is used.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if rng is None:
        rng = philox_generator(seed, trajectory, step, stream)
        path = (seed, trajectory, step)
    else:
        path = (None, None, None)
    white = rng.standard_normal(kernel.grid.n_points)
    return NoiseIncrement(color(kernel, white, dt), dt, path)


class NoiseStream:
    """Batched increments for a set of trajectories sharing a kernel.

    With ``antithetic=True`` trajectory ``2m+1`` receives the negated
    increments of trajectory ``2m``; both draw from the key of pair ``m``.
    """

    def __init__(self, kernel: CovarianceKernel, seed: int, trajectories, dt: float,
                 stream: int = 0, antithetic: bool = False):
        self.kernel = kernel
        self.seed = int(seed)
        self.trajectories = np.asarray(trajectories, dtype=np.int64)
        self.dt = float(dt)
        self.stream = stream
        self.antithetic = antithetic
        if antithetic:
            self._keys = self.trajectories // 2
            self._signs = np.where(self.trajectories % 2 == 1, -1.0, 1.0)
        else:
            self._keys = self.trajectories
            self._signs = np.ones(self.trajectories.size)
        self._bitgens = [
            np.random.Philox(key=[self.seed & _MASK64, int(k) & _MASK64]) for k in self._keys
        ]
        self._scale = kernel.q_half_hat * np.sqrt(self.dt / kernel.grid.dx)

    def white(self, step: int) -> np.ndarray:
        n = self.kernel.grid.n_points
        out = np.empty((self._keys.size, n))
        counter = [0, 0, int(step) & _MASK64, int(self.stream) & _MASK64]
        cache = {}
        for i, (key, bg) in enumerate(zip(self._keys, self._bitgens)):
            if key in cache:
                out[i] = out[cache[key]]
                continue
            st = bg.state
            st["state"]["counter"] = np.array(counter, dtype=np.uint64)
            st["buffer_pos"] = 4
            st["has_uint32"] = 0
            bg.state = st
            out[i] = np.random.Generator(bg).standard_normal(n)
            cache[key] = i
        return out * self._signs[:, None]

    def increments(self, step: int) -> np.ndarray:
        """Colored increments of shape ``(n_trajectories, N)`` for ``step``."""
        grid = self.kernel.grid
        return np.fft.irfft(self._scale * np.fft.rfft(self.white(step), axis=-1),
                            n=grid.n_points, axis=-1)
