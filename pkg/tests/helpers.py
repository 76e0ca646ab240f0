"""Random instance builders shared by the test modules."""

import numpy as np

from openrcd.functions import ConvexitySpec, PiecewiseQuadratic, sample_random_params
from openrcd.graph import Network, erdos_renyi


def random_connected(rng, n, weights=None, uniform=False):
    """Random connected graph: a random spanning tree plus random extra edges."""
    order = rng.permutation(n)
    edges = {tuple(sorted((int(order[k]), int(order[rng.integers(k)])))) for k in range(1, n)}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.3:
                edges.add((i, j))
    edges = sorted(edges)
    probs = None if uniform else rng.uniform(0.2, 1.0, len(edges))
    if probs is not None:
        probs = probs / probs.sum()
    a = np.ones(n) if weights is None else weights
    return Network(a, edges, probs)


def random_spec(rng, kappa_max=10.0):
    alpha = rng.uniform(0.2, 3.0)
    return ConvexitySpec(alpha, alpha * rng.uniform(1.0, kappa_max))


def random_roster(rng, spec, n, d=1, c=1.0):
    phi1, phi2, nu = sample_random_params(rng, spec, c, n, d)
    return [PiecewiseQuadratic(p, q, v, spec) for p, q, v in zip(phi1, phi2, nu)]


def project_feasible(a, b, z):
    """Orthogonal projection of an ``(n, d)`` array onto ``{x : a^T x = b}``."""
    a = np.asarray(a, dtype=float)
    return z - np.outer(a, a @ z - b) / (a @ a)


__all__ = ["random_connected", "random_spec", "random_roster", "project_feasible", "erdos_renyi"]
