"""Linear stability of the soliton in exponentially weighted spaces.

The linearization about ``phi_c`` in the co-moving frame is

    L_c = -d_x^3 + c d_x - 2 d_x (phi_c .)

and on ``L^2_w`` it is conjugate to ``A_w = e^{wx} L_c e^{-wx}`` acting on
``L^2``. Since ``e^{wx} d_x e^{-wx} = d_x - w`` the conjugated operator is
assembled directly from ``D - w``, with ``D`` the Fourier differentiation
matrix.

On the periodic window this is the line operator with a twisted boundary
condition, which supports one spurious real eigenvalue in the gap: a slowly
growing mode ``e^{mu x}`` with ``mu L = O(1)`` that closes around the circle.
It sits ``O(1/L)`` to the right of the essential spectrum edge and its
eigenvector is spread over the whole window, so :func:`spectral_gap` and
:func:`near_zero` keep only localized eigenvectors by default.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import soliton as sol
from .grid import Grid, inner_product, spectral_derivative

ZERO_TOL = 1e-5


@dataclass(eq=False)
class WeightedOperator:
    matrix: np.ndarray
    c: float
    w: float
    grid: Grid
    _eig: tuple | None = field(default=None, repr=False)

    def eig(self):
        """Eigenvalues and right eigenvectors (cached)."""
        if self._eig is None:
            self._eig = linalg.eig(self.matrix, check_finite=True)
        return self._eig


def differentiation_matrix(grid: Grid) -> np.ndarray:
    """Real Fourier differentiation matrix (Nyquist mode dropped)."""
    n = grid.n_points
    eye = np.eye(n)
    # column j is the derivative of the j-th unit vector
    return spectral_derivative(eye.T, grid, 1).T


def build_weighted_operator(c: float, w: float, grid: Grid | None = None,
                            free: bool = False) -> WeightedOperator:
    """Dense matrix of ``A_w = -(D-w)^3 + c (D-w) - 2 (D-w) diag(phi_c)``.

    ``free=True`` drops the soliton term, leaving the constant-coefficient part.
    """
    if grid is None:
        grid = Grid(80.0, 512)
    if not c > 0:
        raise ValueError("c must be positive")
    if not 0 < w < np.sqrt(c):
        raise ValueError(f"need 0 < w < sqrt(c), got w={w}")
    if grid.n_points > 2048:
        raise ValueError("dense eigensolves are limited to N <= 2048")
    Dw = differentiation_matrix(grid) - w * np.eye(grid.n_points)
    A = -Dw @ Dw @ Dw + c * Dw
    if not free:
        A -= 2 * Dw * sol.phi(c, grid)[None, :]
    return WeightedOperator(A, float(c), float(w), grid)


def free_symbol(k, c: float, w: float):
    """Eigenvalue of the constant-coefficient weighted operator on ``e^{ikx}``."""
    z = 1j * np.asarray(k) - w
    return -z**3 + c * z


def localized(vectors, grid: Grid, outer: float = 0.1, tol: float = 0.01) -> np.ndarray:
    """Mask of eigenvectors with at most ``tol`` of their mass in the outer ``outer``
    fraction of the window (on each side)."""
    x = grid.x
    lo = grid.origin + outer * grid.length
    hi = grid.origin + (1 - outer) * grid.length
    edge = (x < lo) | (x >= hi)
    mass = np.abs(vectors) ** 2
    return mass[edge].sum(axis=0) <= tol * mass.sum(axis=0)


def eigenvalues(op: WeightedOperator, filter_localized: bool = False) -> np.ndarray:
    """Eigenvalues of the weighted operator, optionally keeping only localized modes."""
    vals, vecs = op.eig()
    if filter_localized:
        vals = vals[localized(vecs, op.grid)]
    return vals


def spectral_gap(op: WeightedOperator, zero_tol: float = ZERO_TOL,
                 filter_localized: bool = True) -> float:
    """``-max Re(lambda)`` over eigenvalues with ``|lambda| > zero_tol``.

    When filtering leaves nothing outside the zero cluster, the gap is set by
    the essential spectrum, whose edge is read off the free operator.
    """
    vals = eigenvalues(op, filter_localized)
    rest = vals[np.abs(vals) > zero_tol]
    edge = -free_symbol(0.0, op.c, op.w).real if filter_localized else np.inf
    if rest.size == 0:
        return float(edge)
    return float(min(-rest.real.max(), edge))


def near_zero(op: WeightedOperator, zero_tol: float = ZERO_TOL,
              filter_localized: bool = True) -> np.ndarray:
    vals = eigenvalues(op, filter_localized)
    return vals[np.abs(vals) < zero_tol]


def apply_L(c: float, h, grid: Grid) -> np.ndarray:
    """Unweighted linearized operator ``L_c h``."""
    p = sol.phi(c, grid)
    return (-spectral_derivative(h, grid, 3) + c * spectral_derivative(h, grid, 1)
            - 2 * spectral_derivative(p * h, grid, 1))


def propagate(op: WeightedOperator, g, times, weighted: bool = False) -> np.ndarray:
    """``e^{L_c t} g`` for each ``t`` in ``times``, shape ``(T, N)``.

    The weighted field ``e^{wx} g`` is advanced with the matrix exponential
    of ``A_w``; times must be uniformly spaced and start at 0 or later.
    With ``weighted=True`` the weighted fields are returned. Unweighting
    multiplies by ``e^{-wx}``, which amplifies round-off near the left edge
    of the window, so comparisons are best made on the weighted fields.
    """
    times = np.asarray(times, dtype=float)
    grid = op.grid
    ew = np.exp(op.w * grid.x)
    h = ew * grid.check(g)
    out = np.empty((times.size, grid.n_points))
    if times.size > 1 and not np.allclose(np.diff(times), times[1] - times[0]):
        raise ValueError("times must be uniformly spaced")
    h = linalg.expm(op.matrix * times[0]) @ h if times[0] > 0 else h
    out[0] = h
    if times.size > 1:
        M = linalg.expm(op.matrix * (times[1] - times[0]))
        for i in range(1, times.size):
            h = M @ h
            out[i] = h
    return out if weighted else out / ew


@dataclass
class DecayFit:
    rate: float
    times: np.ndarray
    norms: np.ndarray


def semigroup_decay_check(c: float, w: float, g, t_max: float, grid: Grid | None = None,
                          n_samples: int = 41, project: bool = True) -> DecayFit:
    """Fit the exponential decay rate of ``||e^{L_c t} Q_c g||_{L^2_w}`` on ``[t_max/2, t_max]``.

    ``project=False`` propagates ``g`` itself. Raises ``RuntimeError`` if the
    norm grows over the fitting window, which points at a discretization
    artifact rather than the continuous problem.
    """
    if grid is None:
        grid = Grid(80.0, 512)
    op = build_weighted_operator(c, w, grid)
    g = grid.check(np.asarray(g, dtype=float))
    if project:
        g = sol.complementary_projection(g, c, grid)
    times = np.linspace(0.0, t_max, n_samples)
    fields = propagate(op, g, times, weighted=True)
    norms = np.sqrt(inner_product(fields, fields, grid))
    fit = times >= t_max / 2
    slope = np.polyfit(times[fit], np.log(norms[fit]), 1)[0]
    rate = float(-slope)
    if rate < -1e-8:
        raise RuntimeError(f"weighted norm grows at rate {-rate:.3e}")
    return DecayFit(rate, times, norms)


def write_eigenvalues(path, vals) -> None:
    """CSV with ``re, im`` columns, sorted by decreasing real part."""
    vals = np.asarray(vals)
    vals = vals[np.lexsort((vals.imag, -vals.real))]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["re", "im"])
        for v in vals:
            wr.writerow([repr(float(v.real)), repr(float(v.imag))])
