"""Quadrature rules on reference triangles and tetrahedra.

Rules are returned as (points, weights) with points in the reference
simplex coordinates and weights normalized to sum to 1, so that

    integral over physical simplex = measure * sum(w_i * f(x_i)).

Two families are provided: the classic 6-point Dunavant rule on the
triangle (exact through degree 4) and collapsed Gauss-Jacobi product
rules of arbitrary degree on both simplices.  The product rules have
all-positive weights and are used where near-exact integration of
smooth non-polynomial integrands is required.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

# Dunavant degree-4 rule: two orbits of 3 symmetric points each.
_DUN4_A = 0.445948490915965
_DUN4_B = 0.091576213509771
_DUN4_WA = 0.223381589678011
_DUN4_WB = 0.109951743655322


def _interval_rule(n: int, alpha: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule on [0,1] with weight (1-x)**alpha; weights absorb the weight
    function, i.e. sum(w) = 1/(alpha+1)."""
    if alpha == 0:
        t, w = roots_legendre(n)
    else:
        t, w = roots_jacobi(n, alpha, 0.0)
    x = 0.5 * (t + 1.0)
    # dx = dt/2 and (1-t)**alpha = (2(1-x))**alpha
    w = w / (2.0 * 2.0**alpha)
    return x, w


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule on the triangle (0,0),(1,0),(0,1): points (n,2), weights sum 1."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    if degree <= 4:
        a, b = _DUN4_A, _DUN4_B
        pts = np.array(
            [
                [a, a], [1.0 - 2.0 * a, a], [a, 1.0 - 2.0 * a],
                [b, b], [1.0 - 2.0 * b, b], [b, 1.0 - 2.0 * b],
            ]
        )
        wts = np.array([_DUN4_WA] * 3 + [_DUN4_WB] * 3)
        return pts, wts
    # Collapsed product rule: x = u, y = v(1-u), Jacobian (1-u).
    n = (degree + 2) // 2
    xu, wu = _interval_rule(n, 1)
    xv, wv = _interval_rule(n, 0)
    U, V = np.meshgrid(xu, xv, indexing="ij")
    WU, WV = np.meshgrid(wu, wv, indexing="ij")
    pts = np.column_stack([U.ravel(), (V * (1.0 - U)).ravel()])
    # raw weights sum to the reference area 1/2; normalize to 1
    wts = 2.0 * (WU * WV).ravel()
    return pts, wts


@lru_cache(maxsize=None)
def tet_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule on the tetrahedron with vertices at the origin and the three unit
    points: points (n,3), weights sum 1."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    n = max(1, (degree + 2) // 2)
    xu, wu = _interval_rule(n, 2)
    xv, wv = _interval_rule(n, 1)
    xw, ww = _interval_rule(n, 0)
    U, V, W = np.meshgrid(xu, xv, xw, indexing="ij")
    WU, WV, WW = np.meshgrid(wu, wv, ww, indexing="ij")
    x = U
    y = V * (1.0 - U)
    z = W * (1.0 - U) * (1.0 - V)
    pts = np.column_stack([x.ravel(), y.ravel(), z.ravel()])
    wts = 6.0 * (WU * WV * WW).ravel()
    return pts, wts


def map_triangle(points: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Map reference-triangle points (n,2) onto the 3D triangle (a,b,c)."""
    return a + np.outer(points[:, 0], b - a) + np.outer(points[:, 1], c - a)


def map_tet(points: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Map reference-tet points (n,3) onto the physical tet verts (4,3)."""
    a = verts[0]
    return a + points @ (verts[1:] - a)
