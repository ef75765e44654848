"""Spectrum of the linearization in the weighted space.

The localized eigenvalues are the double zero of the translation and
amplitude modes. The dense spectrum lies left of Re = -w(c - w^2), except for
one real eigenvalue produced by the periodic window; its distance to the edge
shrinks like 1/L, and its eigenvector fills the whole window.

That mode also sets the late-time decay of the projected semigroup on a
finite window: the fitted rate drifts from above the gap towards the
boundary eigenvalue as the fitting interval moves out.
"""
import numpy as np

from skdv import soliton as sol
from skdv.grid import Grid
from skdv.spectral import (build_weighted_operator, eigenvalues, near_zero, propagate,
                           semigroup_decay_check)

c, w = 1.0, 0.3
edge = -w * (c - w * w)
print(f"essential spectrum edge {edge:.4f}")
for L in (40.0, 80.0, 160.0):
    op = build_weighted_operator(c, w, Grid(L, 512))
    vals = eigenvalues(op)
    rest = vals[np.abs(vals) > 1e-5]
    top = rest[np.argmax(rest.real)]
    print(f"L={L:5.0f}: zero pair {near_zero(op)}, rightmost other eigenvalue {top.real:+.4f}"
          f"  (L * distance to edge = {L * (top.real - edge):.2f})")

grid = Grid(80.0, 512)
op = build_weighted_operator(c, w, grid)
dc, dx = sol.dphi_dc(c, grid), sol.dphi_dx(c, grid)
out = propagate(op, dc, np.linspace(0, 2, 3), weighted=True)
ew = np.exp(w * grid.x)
for t, f in zip((0, 1, 2), out):
    print(f"t={t}: |e^(Lt) d_c phi - (d_c phi - t d_x phi)|_w = {np.abs(f - ew * (dc - t * dx)).max():.1e}")

g = np.random.default_rng(0).standard_normal(grid.n_points) * np.exp(-grid.x**2 / 20)
for t_max in (10.0, 20.0, 40.0):
    fit = semigroup_decay_check(c, w, g, t_max, grid)
    print(f"decay rate of the projected semigroup on [{t_max / 2:.0f}, {t_max:.0f}]: {fit.rate:.3f}"
          f" (gap {-edge:.3f})")
