"""Cyclic Jacobi eigensolver for small dense symmetric matrices."""

import math

import numpy as np


class EigenConvergenceError(RuntimeError):
    """Raised when the Jacobi sweeps hit their cap before converging."""


def jacobi_eigh(matrix, rel_tol: float = 1e-13, max_sweeps: int = 100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps over all ``(p, q)`` pairs in row order until the off-diagonal
    Frobenius norm falls below ``rel_tol * ||A||_F``.

    Returns
    -------
    w : ndarray, shape (n,)
        Eigenvalues in ascending order.
    v : ndarray, shape (n, n)
        Orthonormal eigenvectors, column ``k`` pairs with ``w[k]``.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max(initial=0.0))):
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    threshold = rel_tol * np.linalg.norm(a)

    def off_norm():
        # summed directly: ||A||^2 - sum(diag^2) cancels catastrophically
        return float(np.linalg.norm(a - np.diag(np.diag(a))))

    for _ in range(max_sweeps):
        if off_norm() <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(diff) + 100.0 * abs(apq) == abs(diff):
                    # tiny rotation angle, tau*tau would overflow
                    t = apq / diff
                else:
                    tau = diff / (2.0 * apq)
                    t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                cos = 1.0 / math.sqrt(1.0 + t * t)
                sin = t * cos
                rp, rq = a[p].copy(), a[q].copy()
                a[p] = cos * rp - sin * rq
                a[q] = sin * rp + cos * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = cos * cp - sin * cq
                a[:, q] = sin * cp + cos * cq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = cos * vp - sin * vq
                v[:, q] = sin * vp + cos * vq
    else:
        if off_norm() > threshold:
            raise EigenConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]
