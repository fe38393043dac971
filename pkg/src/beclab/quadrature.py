"""Adaptive tensor-product Gauss-Kronrod (7/15) cubature on rectangles.

Panels are refined globally: those carrying the largest |K15 - G7|
estimates are split in four until the summed estimate drops below the
requested absolute tolerance.  The final sum runs over panels in a fixed
coordinate order with ``math.fsum``, so the result does not depend on the
order in which panels were produced.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import QuadratureDivergence, ValidationError

# QUADPACK qk15 abscissae / weights, decreasing abscissa, last is the centre
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
W_KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
_wg_full = np.zeros(8)
_wg_full[1::2] = _WG
W_GAUSS = np.concatenate([_wg_full[:-1], _wg_full[::-1]])


@dataclass(frozen=True)
class QuadratureConfig:
    tol: float = 1e-7
    max_panels: int = 2 ** 20

    def __post_init__(self):
        if not (self.tol > 0 and math.isfinite(self.tol)):
            raise ValidationError("quadrature.tol must be positive")
        if not (int(self.max_panels) == self.max_panels and self.max_panels >= 4):
            raise ValidationError("quadrature.max_panels must be an integer >= 4")

    def to_dict(self):
        return {"tol": self.tol, "max_panels": int(self.max_panels)}


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    n_panels: int


def _eval_panels(f, a, b, c, d):
    hx = 0.5 * (b - a)
    hy = 0.5 * (d - c)
    x = (0.5 * (a + b))[:, None] + hx[:, None] * NODES[None, :]
    y = (0.5 * (c + d))[:, None] + hy[:, None] * NODES[None, :]
    X = np.broadcast_to(x[:, :, None], (a.size, 15, 15))
    Y = np.broadcast_to(y[:, None, :], (a.size, 15, 15))
    F = np.asarray(f(X.reshape(-1), Y.reshape(-1)), dtype=float).reshape(a.size, 15, 15)
    jac = hx * hy
    K = np.einsum("i,pij,j->p", W_KRONROD, F, W_KRONROD) * jac
    G = np.einsum("i,pij,j->p", W_GAUSS, F, W_GAUSS) * jac
    return K, np.abs(K - G)


def integrate_rectangle(f, x_range, y_range, config=QuadratureConfig(), initial=(4, 4)):
    """Integrate f(x, y) (vectorised) over a rectangle to absolute tolerance."""
    (x0, x1), (y0, y1) = x_range, y_range
    ex = np.linspace(x0, x1, initial[0] + 1)
    ey = np.linspace(y0, y1, initial[1] + 1)
    A, C = np.meshgrid(ex[:-1], ey[:-1], indexing="ij")
    B, D = np.meshgrid(ex[1:], ey[1:], indexing="ij")
    a, b, c, d = (t.ravel() for t in (A, B, C, D))
    K, E = _eval_panels(f, a, b, c, d)
    min_width = 64 * np.finfo(float).eps * max(abs(x1 - x0), abs(y1 - y0))
    while True:
        total_err = math.fsum(E)
        if total_err <= config.tol:
            break
        order = np.lexsort((c, a, -E))
        cum = np.cumsum(E[order])
        # split the worst panels until the untouched remainder is below tol/2
        n_split = int(np.searchsorted(cum, total_err - 0.5 * config.tol, side="left")) + 1
        sel = order[:n_split]
        keep = np.ones(a.size, dtype=bool)
        keep[sel] = False
        if a.size + 3 * sel.size > config.max_panels:
            raise QuadratureDivergence(
                f"panel budget {config.max_panels} exhausted at error {total_err:.3e}")
        sa, sb, sc, sd = a[sel], b[sel], c[sel], d[sel]
        if np.min(np.minimum(sb - sa, sd - sc)) < min_width:
            raise QuadratureDivergence(f"refinement stalled at error {total_err:.3e}")
        mx = 0.5 * (sa + sb)
        my = 0.5 * (sc + sd)
        na = np.concatenate([sa, mx, sa, mx])
        nb = np.concatenate([mx, sb, mx, sb])
        nc = np.concatenate([sc, sc, my, my])
        nd = np.concatenate([my, my, sd, sd])
        nK, nE = _eval_panels(f, na, nb, nc, nd)
        a, b, c, d = (np.concatenate([t[keep], u]) for t, u in ((a, na), (b, nb), (c, nc), (d, nd)))
        K = np.concatenate([K[keep], nK])
        E = np.concatenate([E[keep], nE])
    order = np.lexsort((c, a))
    return QuadResult(math.fsum(K[order]), math.fsum(E[order]), int(a.size))
