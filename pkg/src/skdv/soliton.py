"""KdV soliton family ``phi_c(x) = (3c/2) sech^2(sqrt(c) x / 2)`` and related profiles.

All profile functions accept a scalar ``c`` or an array of amplitudes; array
inputs broadcast against the grid, so ``c`` of shape ``(B,)`` yields fields of
shape ``(B, N)``. Shifted profiles are evaluated at ``x - xi`` folded back into
the grid window, which is the line truncation used for the non-decaying
``zeta_c``.

With ``s = sqrt(c) x / 2``, ``S = sech^2 s`` and ``T = tanh s`` the closed forms are

    phi_c       = (3c/2) S
    d_x phi_c   = -(3/2) c^{3/2} S T
    d_c phi_c   = (3/2) S (1 - s T)
    zeta_c      = (3 / (2 sqrt c)) (1 + T + s S)      (primitive of d_c phi_c)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import expit

from .grid import Grid, inner_product


@dataclass(frozen=True)
class SolitonParams:
    c: float
    xi: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"soliton amplitude must be positive, got {self.c}")
        if not np.isfinite(self.xi):
            raise ValueError("soliton position must be finite")


@dataclass(frozen=True)
class AmplitudeWindow:
    """Admissible amplitude range ``[c_min, c_max]`` with weight ``w < sqrt(c_min)/3``."""

    c_min: float
    c_max: float
    w: float

    def __post_init__(self):
        if not 0 < self.c_min < self.c_max:
            raise ValueError(f"need 0 < c_min < c_max, got {self.c_min}, {self.c_max}")
        if not 0 < self.w < np.sqrt(self.c_min) / 3:
            raise ValueError(
                f"weight w={self.w} outside (0, sqrt(c_min)/3) = (0, {np.sqrt(self.c_min) / 3:.6g})"
            )

    @classmethod
    def from_budget(cls, c_star: float, budget: float, w: float, strict: bool = False):
        """Window ``[c_* e^{-3E}, c_* e^{3E}]`` for a forcing budget ``E``.

        With ``strict`` the window is shrunk by one ulp so that the endpoints
        themselves count as exits.
        """
        lo, hi = c_star * np.exp(-3 * budget), c_star * np.exp(3 * budget)
        if strict:
            lo, hi = np.nextafter(lo, np.inf), np.nextafter(hi, -np.inf)
        return cls(lo, hi, w)

    def contains(self, c):
        c = np.asarray(c)
        return (c >= self.c_min) & (c <= self.c_max)


def _check_c(c):
    c = np.asarray(c, dtype=float)
    if np.any(~(c > 0)):
        raise ValueError(f"soliton amplitude must be positive, got {c}")
    return c


def _coords(c, where, xi):
    """Return ``(c, y)`` broadcast so that ``y = x - xi`` has the field shape."""
    c = _check_c(c)
    xi = np.asarray(xi, dtype=float)
    if isinstance(where, Grid):
        if xi.ndim == 0 and xi == 0.0:
            y = where.x
        else:
            y = where.wrap(where.x - xi[..., None])
    else:
        y = np.asarray(where, dtype=float) - xi[..., None] if xi.ndim else np.asarray(where) - xi
    return c[..., None] if c.ndim else c, y


def _sST(c, y):
    s = np.sqrt(c) * y / 2
    T = np.tanh(s)
    S = 1.0 / np.cosh(np.clip(s, -350, 350)) ** 2
    return s, S, T


# closed forms in terms of s, S = sech^2 s, T = tanh s and E = expit(2s) = (1 + T)/2
_FORMS = {
    "phi": lambda c, s, S, T, E: 1.5 * c * S,
    "dphi_dx": lambda c, s, S, T, E: -1.5 * c**1.5 * S * T,
    "d2phi_dx2": lambda c, s, S, T, E: 0.75 * c**2 * S * (3 * T**2 - 1),
    "dphi_dc": lambda c, s, S, T, E: 1.5 * S * (1 - s * T),
    "d2phi_dc2": lambda c, s, S, T, E: 0.75 / c * S * s * (3 * s * T**2 - 3 * T - s),
    "zeta": lambda c, s, S, T, E: 1.5 / np.sqrt(c) * (2 * E + s * S),
    "dzeta_dc": lambda c, s, S, T, E: 0.75 / c**1.5 * (s * S - 2 * E - 2 * s**2 * S * T),
    "d2zeta_dc2": lambda c, s, S, T, E: 0.375 / c**2.5 * (S * s**3 * (6 * T**2 - 2) - 3 * s * S
                                                           + 6 * E),
}


def family(c, where, xi=0.0, names=tuple(_FORMS)) -> dict:
    """Several profiles at once, sharing one evaluation of the hyperbolic functions."""
    c, y = _coords(c, where, xi)
    s, S, T = _sST(c, y)
    E = expit(2 * s) if any(n.startswith(("zeta", "dzeta", "d2zeta")) for n in names) else None
    return {n: _FORMS[n](c, s, S, T, E) for n in names}


def _one(name, c, where, xi):
    return family(c, where, xi, (name,))[name]


def phi(c, where, xi=0.0) -> np.ndarray:
    """Soliton profile ``phi_c(x - xi)``."""
    return _one("phi", c, where, xi)


def dphi_dx(c, where, xi=0.0) -> np.ndarray:
    return _one("dphi_dx", c, where, xi)


def d2phi_dx2(c, where, xi=0.0) -> np.ndarray:
    return _one("d2phi_dx2", c, where, xi)


def dphi_dc(c, where, xi=0.0) -> np.ndarray:
    return _one("dphi_dc", c, where, xi)


def d2phi_dc2(c, where, xi=0.0) -> np.ndarray:
    return _one("d2phi_dc2", c, where, xi)


def zeta(c, where, xi=0.0, method: str = "exact") -> np.ndarray:
    """Primitive ``zeta_c(x) = int_{-inf}^x d_c phi_c``; tends to ``3/sqrt(c)`` on the right.

    ``method="quadrature"`` integrates ``d_c phi_c`` cumulatively from the left
    edge of the grid window and adds the exponential left tail
    ``(3/sqrt c) e^{2 s_0} (1 + 2 s_0)``; it is second-order accurate pointwise
    and only available on a :class:`Grid`.
    """
    if method == "exact":
        return _one("zeta", c, where, xi)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    if not isinstance(where, Grid):
        raise TypeError("quadrature zeta needs a Grid")
    grid = where
    c_arr = _check_c(c)
    if c_arr.ndim:
        return np.stack([zeta(ci, grid, xi, method) for ci in c_arr])
    xi = float(xi)
    # integrate on the unwrapped window starting at the soliton-relative left edge
    y = grid.wrap(grid.x - xi)
    order = np.argsort(y)
    ys = y[order]
    integrand = dphi_dc(c_arr, ys)
    s0 = np.sqrt(c_arr) * ys[0] / 2
    tail = 3 / np.sqrt(c_arr) * np.exp(2 * s0) * (1 + 2 * s0)
    out = np.empty_like(ys)
    out[order] = tail + cumulative_trapezoid(integrand, ys, initial=0.0)
    return out


def dzeta_dc(c, where, xi=0.0) -> np.ndarray:
    return _one("dzeta_dc", c, where, xi)


def d2zeta_dc2(c, where, xi=0.0) -> np.ndarray:
    return _one("d2zeta_dc2", c, where, xi)


def projection_weights(c, grid: Grid, xi=0.0):
    """Dual functions ``(a, b)`` with ``P_c f = <f,a> d_x phi_c + <f,b> d_c phi_c``.

    ``a = (2/9)(c^{-2} phi_c - c^{-1/2} zeta_c)``, ``b = (2/9) c^{-1/2} phi_c``;
    these are biorthogonal to ``(d_x phi_c, d_c phi_c)``.
    """
    c_ = _check_c(c)
    cb = c_[..., None] if c_.ndim else c_
    p = phi(c, grid, xi)
    z = zeta(c, grid, xi)
    a = (2 / 9) * (p / cb**2 - z / np.sqrt(cb))
    b = (2 / 9) * p / np.sqrt(cb)
    return a, b


def spectral_projection(g, c, grid: Grid, xi=0.0) -> np.ndarray:
    """Projection onto the generalized kernel ``span{d_x phi_c, d_c phi_c}``."""
    g = grid.check(g)
    a, b = projection_weights(c, grid, xi)
    pa = inner_product(g, a, grid)
    pb = inner_product(g, b, grid)
    pa = pa[..., None] if np.ndim(pa) else pa
    pb = pb[..., None] if np.ndim(pb) else pb
    return pa * dphi_dx(c, grid, xi) + pb * dphi_dc(c, grid, xi)


def complementary_projection(g, c, grid: Grid, xi=0.0) -> np.ndarray:
    """``Q_c g = g - P_c g``; its range satisfies the orthogonality conditions."""
    return np.asarray(g) - spectral_projection(g, c, grid, xi)
