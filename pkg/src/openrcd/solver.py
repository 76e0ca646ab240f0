"""Exact constrained minimizer of a separable cost under ``sum_i a_i x_i = b``.

Optimality means ``grad f_i(x_i*) = a_i * lam*`` for a common multiplier
``lam*``, so ``x_i* = (grad f_i)^{-1}(a_i lam*)`` and ``lam*`` is the root of
the nondecreasing map ``lam -> sum_i a_i x_i(lam) - b``. All implemented
function families are coordinate-separable, so every coordinate of ``lam``
is found independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functions import PiecewiseQuadratic

__all__ = [
    "Minimizer",
    "SolverError",
    "solve",
    "solve_piecewise",
    "optimality_residual",
]

DEFAULT_TOL = 1e-12


class SolverError(RuntimeError):
    """The dual root could not be bracketed or resolved to tolerance."""


@dataclass(frozen=True)
class Minimizer:
    """Constrained minimizer ``x_star`` (shape ``(n, d)``) with multiplier ``lambda_star``."""

    x_star: np.ndarray
    lambda_star: np.ndarray
    residual: float


def _inputs(functions, a, b):
    functions = list(functions)
    a = np.asarray(a, dtype=float)
    if a.shape != (len(functions),):
        raise ValueError("one weight per function is required")
    if np.any(a <= 0):
        raise ValueError("weights must be positive")
    dims = {f.dim for f in functions}
    if len(dims) != 1:
        raise ValueError(f"functions have mixed dimensions {sorted(dims)}")
    d = dims.pop()
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if b.shape != (d,):
        raise ValueError(f"budget must have dimension {d}")
    return functions, a, b, d


def solve_piecewise(phi1, phi2, nu, a, b):
    """Closed-form minimizer for piecewise quadratics, batched.

    Parameters
    ----------
    phi1, phi2 : array_like, shape (..., n)
    nu : array_like, shape (..., n, d)
    a : array_like, shape (n,)
    b : array_like, shape (d,)

    Returns
    -------
    x : ndarray, shape (..., n, d)
    lam : ndarray, shape (..., d)

    Notes
    -----
    ``x_i(lam) = nu_i + a_i lam / (2 phi)`` with ``phi = phi1`` for
    ``lam < 0`` and ``phi2`` otherwise, so the dual map is linear on each
    side of 0 and its root follows from the sign of ``sum_i a_i nu_i - b``.
    """
    phi1 = np.asarray(phi1, dtype=float)
    phi2 = np.asarray(phi2, dtype=float)
    nu = np.asarray(nu, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    gap = np.sum(a[:, None] * nu, axis=-2) - b
    slope_left = np.sum(a * a / (2.0 * phi1), axis=-1)[..., None]
    slope_right = np.sum(a * a / (2.0 * phi2), axis=-1)[..., None]
    lam = np.where(gap > 0, -gap / slope_left, -gap / slope_right)
    curv = np.where(lam[..., None, :] < 0, phi1[..., None], phi2[..., None])
    x = nu + a[:, None] * lam[..., None, :] / (2.0 * curv)
    return x, lam


def _bisect(functions, a, b, d, tol, max_iter):
    beta = max(f.spec.beta for f in functions)
    c = max(float(np.linalg.norm(f.unconstrained_minimizer)) for f in functions)
    half = beta * (np.linalg.norm(b) + c * a.sum()) / (a @ a)
    if not half > 0:
        half = 1.0

    def gap(lam):
        total = np.zeros(d)
        for ai, f in zip(a, functions):
            total += ai * f.gradient_inverse(ai * lam)
        return total - b

    lo = np.full(d, -half)
    hi = np.full(d, half)
    for _ in range(64):
        g_lo, g_hi = gap(lo), gap(hi)
        if np.all(g_lo <= 0) and np.all(g_hi >= 0):
            break
        lo = np.where(g_lo > 0, 2 * lo, lo)
        hi = np.where(g_hi < 0, 2 * hi, hi)
    else:
        raise SolverError("dual root not bracketed; check convexity and weights")

    lam = np.zeros(d)
    g = gap(lam)
    for _ in range(max_iter):
        if np.all(np.abs(g) <= tol):
            return lam
        lo = np.where(g < 0, lam, lo)
        hi = np.where(g > 0, lam, hi)
        mid = 0.5 * (lo + hi)
        active = np.abs(g) > tol
        if not np.any(active & (mid != lo) & (mid != hi)):
            break
        lam = np.where(active, mid, lam)
        g = gap(lam)
    if np.all(np.abs(g) <= tol):
        return lam
    raise SolverError(f"constraint residual {np.abs(g).max():.3e} above tol={tol:.1e}")


def solve(functions, a, b, tol: float = DEFAULT_TOL, method: str = "auto",
          max_iter: int = 400) -> Minimizer:
    """Minimize ``sum_i f_i(x_i)`` subject to ``sum_i a_i x_i = b``.

    Parameters
    ----------
    functions : sequence of CostFunction
        Coordinate-separable, strongly convex costs with a common dimension.
    a : array_like, shape (n,)
    b : float or array_like, shape (d,)
    tol : float
        Bound on the constraint residual per coordinate.
    method : {"auto", "bisection", "exact"}
        ``"bisection"`` brackets the multiplier geometrically from 0 and
        bisects. ``"exact"`` is the closed form for piecewise quadratics.
        ``"auto"`` picks ``"exact"`` when every function is piecewise quadratic.
    """
    functions, a, b, d = _inputs(functions, a, b)
    all_pq = all(isinstance(f, PiecewiseQuadratic) for f in functions)
    if method == "auto":
        method = "exact" if all_pq else "bisection"
    if method == "exact":
        if not all_pq:
            raise ValueError("the exact path needs piecewise quadratic functions")
        x, lam = solve_piecewise(
            [f.phi1 for f in functions], [f.phi2 for f in functions],
            np.stack([f.nu for f in functions]), a, b,
        )
        residual = float(np.abs(a @ x - b).max())
        if residual > tol * max(1.0, float(np.abs(a[:, None] * x).sum(axis=0).max())):
            raise SolverError(f"closed form residual {residual:.3e} above tolerance")
    elif method == "bisection":
        lam = _bisect(functions, a, b, d, tol, max_iter)
        x = np.stack([f.gradient_inverse(ai * lam) for ai, f in zip(a, functions)])
        residual = float(np.abs(a @ x - b).max())
    else:
        raise ValueError(f"unknown method {method!r}")
    return Minimizer(x, lam, residual)


def optimality_residual(m: Minimizer, functions, a) -> float:
    """``max_i ||grad f_i(x_i*) - a_i lam*||``."""
    a = np.asarray(a, dtype=float)
    return max(
        float(np.linalg.norm(f.gradient(xi) - ai * m.lambda_star))
        for f, xi, ai in zip(functions, m.x_star, a)
    )


def is_piecewise_family(functions) -> bool:
    return all(isinstance(f, PiecewiseQuadratic) for f in functions)

