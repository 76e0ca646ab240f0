"""Network topology, pairwise projections and the scaled Laplacian.

Stacked vectors of length ``n * d`` are agent-major (``x = [x_1; ...; x_n]``)
and are handled as ``(n, d)`` arrays, so operators of the form ``M ⊗ I_d``
are applied as ``M @ X`` and never materialized.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._jacobi import EigenConvergenceError, jacobi_eigh

__all__ = [
    "Network",
    "Spectrum",
    "EigenConvergenceError",
    "q_matrix",
    "build_spectrum",
    "seminorm_sq",
    "effective_resistance",
    "complete",
    "ring",
    "line",
    "star",
    "erdos_renyi",
    "from_edge_list",
    "read_edge_list",
    "format_edge_list",
    "TOPOLOGIES",
]

KERNEL_CUTOFF = 1e-9
_PROB_TOL = 1e-9


def _is_connected(n, edges):
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) == n


@dataclass(frozen=True, eq=False)
class Network:
    """Undirected connected graph with agent weights and edge probabilities.

    Parameters
    ----------
    weights : array_like, shape (n,)
        Positive constraint weights ``a``.
    edges : sequence of (int, int)
        Unordered pairs with ``i != j`` (0-based); stored as ``i < j``.
    probs : array_like, optional
        Positive selection probabilities summing to one. Uniform by default.
    """

    weights: np.ndarray
    edges: tuple
    probs: np.ndarray
    _index: dict = field(repr=False)

    def __init__(self, weights, edges, probs=None):
        a = np.asarray(weights, dtype=float).copy()
        if a.ndim != 1 or a.shape[0] < 2:
            raise ValueError("need a weight vector with at least two agents")
        if np.any(~np.isfinite(a)) or np.any(a <= 0):
            raise ValueError("agent weights must be positive")
        n = a.shape[0]
        norm_edges = []
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j or not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"invalid edge ({i}, {j}) for n={n}")
            norm_edges.append((min(i, j), max(i, j)))
        if len(set(norm_edges)) != len(norm_edges):
            raise ValueError("duplicate edges")
        if not norm_edges or not _is_connected(n, norm_edges):
            raise ValueError("graph is not connected")
        if probs is None:
            p = np.full(len(norm_edges), 1.0 / len(norm_edges))
        else:
            p = np.asarray(probs, dtype=float).copy()
            if p.shape != (len(norm_edges),):
                raise ValueError("one probability per edge is required")
            if np.any(p <= 0):
                raise ValueError("edge probabilities must be positive")
            if abs(p.sum() - 1.0) > _PROB_TOL:
                raise ValueError(f"edge probabilities sum to {p.sum()}, not 1")
        a.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "weights", a)
        object.__setattr__(self, "edges", tuple(norm_edges))
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "_index", {e: k for k, e in enumerate(norm_edges)})

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def heads(self) -> np.ndarray:
        return np.array([e[0] for e in self.edges])

    @property
    def tails(self) -> np.ndarray:
        return np.array([e[1] for e in self.edges])

    def edge_index(self, edge) -> int:
        i, j = edge
        key = (min(i, j), max(i, j))
        try:
            return self._index[key]
        except KeyError:
            raise ValueError(f"edge {edge} is not in the network") from None

    def prob(self, edge) -> float:
        return float(self.probs[self.edge_index(edge)])

    @property
    def is_homogeneous(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))

    @property
    def is_uniform(self) -> bool:
        return bool(np.allclose(self.probs, 1.0 / self.m, rtol=1e-12, atol=0))

    def with_probs(self, probs) -> "Network":
        return Network(self.weights, self.edges, probs)

    def with_weights(self, weights) -> "Network":
        return Network(weights, self.edges, self.probs)


def q_matrix(net: Network, edge) -> np.ndarray:
    """The ``n x n`` pairwise projection for an edge.

    It is symmetric, idempotent, of rank one, and annihilates the weights.
    """
    net.edge_index(edge)
    i, j = edge
    ai, aj = net.weights[i], net.weights[j]
    s = ai * ai + aj * aj
    q = np.zeros((net.n, net.n))
    q[i, i] = aj * aj / s
    q[j, j] = ai * ai / s
    q[i, j] = q[j, i] = -ai * aj / s
    return q


def _assemble_lp(net: Network) -> np.ndarray:
    lp = np.zeros((net.n, net.n))
    for k, edge in enumerate(net.edges):
        lp += net.probs[k] * q_matrix(net, edge)
    return lp


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Scaled Laplacian ``L_p``, its pseudoinverse and extreme nonzero eigenvalues."""

    network: Network
    lp: np.ndarray
    lp_dagger: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    lambda2: float
    lambdan: float

    @property
    def kernel(self) -> np.ndarray:
        """Unit vector ``a / ||a||`` spanning the null space."""
        a = self.network.weights
        return a / np.linalg.norm(a)

    @property
    def kappa_l(self) -> float:
        """Spectral condition number ``lambda_n / lambda_2``."""
        return self.lambdan / self.lambda2


def build_spectrum(net: Network, method: str = "jacobi") -> Spectrum:
    """Assemble ``L_p = sum_e p_e Q^e`` and decompose it.

    ``method`` is ``"jacobi"`` (default) or ``"numpy"`` (LAPACK ``eigh``).
    Eigenvalues below ``1e-9 * lambda_max`` are treated as zero; exactly one
    such eigenvalue is expected for a connected graph.
    """
    lp = _assemble_lp(net)
    if method == "jacobi":
        w, v = jacobi_eigh(lp)
    elif method == "numpy":
        w, v = np.linalg.eigh(lp)
    else:
        raise ValueError(f"unknown eigen method {method!r}")
    cutoff = KERNEL_CUTOFF * w[-1]
    nonzero = w > cutoff
    if int(np.count_nonzero(~nonzero)) != 1:
        raise EigenConvergenceError(
            f"expected a one-dimensional kernel, found {np.count_nonzero(~nonzero)} null eigenvalues"
        )
    inv = np.where(nonzero, 1.0 / np.where(nonzero, w, 1.0), 0.0)
    lp_dagger = (v * inv) @ v.T
    lp_dagger = 0.5 * (lp_dagger + lp_dagger.T)
    w = np.where(nonzero, w, 0.0)
    for arr in (lp, lp_dagger, w, v):
        arr.setflags(write=False)
    return Spectrum(net, lp, lp_dagger, w, v, float(w[1]), float(w[-1]))


def _as_blocks(spec: Spectrum, z, d):
    z = np.asarray(z, dtype=float)
    n = spec.network.n
    if z.ndim == 2:
        if z.shape[0] != n or (d is not None and z.shape[1] != d):
            raise ValueError(f"expected shape ({n}, {d}), got {z.shape}")
        return z
    if d is None:
        if z.size % n:
            raise ValueError(f"length {z.size} is not a multiple of n={n}")
        d = z.size // n
    if z.shape != (n * d,):
        raise ValueError(f"expected a vector of length {n * d}, got shape {z.shape}")
    return z.reshape(n, d)


def seminorm_sq(spec: Spectrum, z, d: int | None = None) -> float:
    """Squared ``L_p^†``-seminorm ``z^T (L_p^† ⊗ I_d) z``.

    ``z`` is a stacked vector of length ``n * d`` or an ``(n, d)`` array.
    """
    return float(seminorm_sq_batch(spec.lp_dagger, _as_blocks(spec, z, d), spec.kernel))


def seminorm_sq_batch(lp_dagger: np.ndarray, z: np.ndarray, kernel=None) -> np.ndarray:
    """Squared seminorms of a batch ``z`` of shape ``(..., n, d)``.

    With the unit ``kernel`` direction given, its component is removed first.
    This changes nothing in exact arithmetic but keeps the round-off of a
    kernel vector at the level of its square.
    """
    z = np.asarray(z, dtype=float)
    n, d = z.shape[-2:]
    rows = np.swapaxes(z, -1, -2).reshape(-1, n)
    if kernel is not None:
        rows = rows - np.outer(rows @ kernel, kernel)
    vals = np.sum(rows * (rows @ lp_dagger), axis=-1).reshape(z.shape[:-2] + (d,)).sum(axis=-1)
    return np.maximum(vals, 0.0)


def effective_resistance(spec: Spectrum, edge) -> float:
    """``[L†]_ii + [L†]_jj - 2 [L†]_ij`` for an edge of the network."""
    spec.network.edge_index(edge)
    i, j = edge
    ld = spec.lp_dagger
    return float(ld[i, i] + ld[j, j] - 2.0 * ld[i, j])


def complete(n: int, weights=None, probs=None) -> Network:
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return Network(np.ones(n) if weights is None else weights, edges, probs)


def ring(n: int, weights=None, probs=None) -> Network:
    if n < 3:
        raise ValueError("a ring needs at least three agents")
    edges = [(i, i + 1) for i in range(n - 1)] + [(0, n - 1)]
    return Network(np.ones(n) if weights is None else weights, edges, probs)


def line(n: int, weights=None, probs=None) -> Network:
    edges = [(i, i + 1) for i in range(n - 1)]
    return Network(np.ones(n) if weights is None else weights, edges, probs)


def star(n: int, weights=None, probs=None) -> Network:
    edges = [(0, j) for j in range(1, n)]
    return Network(np.ones(n) if weights is None else weights, edges, probs)


def erdos_renyi(n: int, edge_prob: float, rng: np.random.Generator, weights=None,
                max_tries: int = 1000) -> Network:
    """G(n, q) graph, resampled until connected; uniform edge probabilities."""
    if not 0 < edge_prob <= 1:
        raise ValueError("edge_prob must lie in (0, 1]")
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for _ in range(max_tries):
        keep = rng.random(len(pairs)) < edge_prob
        edges = [e for e, k in zip(pairs, keep) if k]
        if edges and _is_connected(n, edges):
            return Network(np.ones(n) if weights is None else weights, edges)
    raise RuntimeError(f"no connected G({n}, {edge_prob}) sample in {max_tries} tries")


TOPOLOGIES = {"complete": complete, "ring": ring, "line": line, "star": star}


def from_edge_list(rows, weights) -> Network:
    """Build a network from ``(i, j, p_ij)`` rows."""
    rows = list(rows)
    return Network(weights, [(i, j) for i, j, _ in rows], [p for _, _, p in rows])


def read_edge_list(source, weights=None) -> Network:
    """Parse the plain-text edge list format, one ``i j p_ij`` per line.

    Indices are 0-based; ``#`` starts a comment. Without ``weights`` the
    agents are homogeneous and ``n`` is inferred from the largest index.
    """
    text = Path(source).read_text() if isinstance(source, Path) else str(source)
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'i j p_ij', got {raw!r}")
        rows.append((int(parts[0]), int(parts[1]), float(parts[2])))
    if weights is None:
        n = 1 + max(max(i, j) for i, j, _ in rows)
        weights = np.ones(n)
    return from_edge_list(rows, weights)


def format_edge_list(net: Network) -> str:
    return "".join(f"{i} {j} {p!r}\n" for (i, j), p in zip(net.edges, net.probs.tolist()))
