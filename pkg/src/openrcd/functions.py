"""Admissible local cost functions.

Every local cost is smooth and strongly convex, attains the value 0 at its
unconstrained minimizer, and exposes an exact gradient together with the
inverse of that gradient (used by the dual solver).
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConvexitySpec",
    "CostFunction",
    "PiecewiseQuadratic",
    "sample_random",
    "sample_random_params",
    "from_record",
]

NU_DISTRIBUTIONS = ("ball", "sphere")


@dataclass(frozen=True)
class ConvexitySpec:
    """Strong-convexity modulus ``alpha`` and smoothness modulus ``beta``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"moduli must be positive, got alpha={self.alpha}, beta={self.beta}")
        if self.alpha > self.beta:
            raise ValueError(f"alpha={self.alpha} exceeds beta={self.beta}")

    @property
    def kappa(self) -> float:
        return self.beta / self.alpha

    @classmethod
    def from_kappa(cls, kappa: float, alpha: float = 1.0) -> "ConvexitySpec":
        return cls(alpha, kappa * alpha)


class CostFunction(ABC):
    """Interface of a local cost ``f_i : R^d -> R``.

    Implementations are immutable. ``value(unconstrained_minimizer)`` is 0.
    """

    dim: int
    spec: ConvexitySpec

    @property
    @abstractmethod
    def unconstrained_minimizer(self) -> np.ndarray: ...

    @abstractmethod
    def value(self, x) -> float: ...

    @abstractmethod
    def gradient(self, x) -> np.ndarray: ...

    @abstractmethod
    def gradient_inverse(self, g) -> np.ndarray:
        """Return the unique ``x`` with ``gradient(x) == g``."""

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a vector of dimension {self.dim}, got shape {x.shape}")
        return x


class PiecewiseQuadratic(CostFunction):
    """Coordinatewise piecewise quadratic with a kink at its minimizer.

    On every coordinate ``c``::

        f(x) = phi1 * (x_c - nu_c)**2   if x_c <  nu_c
               phi2 * (x_c - nu_c)**2   if x_c >= nu_c

    summed over coordinates. Both curvatures are shared by all coordinates.
    With ``phi1, phi2`` in ``[alpha/2, beta/2]`` the function is
    ``alpha``-strongly convex and ``beta``-smooth.

    Parameters
    ----------
    phi1, phi2 : float
        Left and right curvatures.
    nu : float or array_like
        Minimizer; its length sets the dimension.
    spec : ConvexitySpec, optional
        Declared moduli. Defaults to the tightest pair ``(2 min(phi), 2 max(phi))``.
    """

    __slots__ = ("phi1", "phi2", "nu", "dim", "spec")

    def __init__(self, phi1: float, phi2: float, nu, spec: ConvexitySpec | None = None):
        nu = np.atleast_1d(np.asarray(nu, dtype=float)).copy()
        if nu.ndim != 1:
            raise ValueError("nu must be a scalar or a 1-d vector")
        if not (phi1 > 0 and phi2 > 0):
            raise ValueError("curvatures must be positive")
        if spec is None:
            spec = ConvexitySpec(2 * min(phi1, phi2), 2 * max(phi1, phi2))
        lo, hi = spec.alpha / 2, spec.beta / 2
        eps = 1e-12 * hi
        if not (lo - eps <= phi1 <= hi + eps and lo - eps <= phi2 <= hi + eps):
            raise ValueError(f"curvatures ({phi1}, {phi2}) outside [{lo}, {hi}]")
        nu.setflags(write=False)
        self.phi1 = float(phi1)
        self.phi2 = float(phi2)
        self.nu = nu
        self.dim = nu.shape[0]
        self.spec = spec

    def __repr__(self):
        nu = self.nu[0] if self.dim == 1 else self.nu.tolist()
        return f"PiecewiseQuadratic(phi1={self.phi1!r}, phi2={self.phi2!r}, nu={nu!r})"

    def __eq__(self, other):
        if not isinstance(other, PiecewiseQuadratic):
            return NotImplemented
        return (self.phi1, self.phi2) == (other.phi1, other.phi2) and np.array_equal(self.nu, other.nu)

    def __hash__(self):
        return hash((self.phi1, self.phi2, self.nu.tobytes()))

    @property
    def unconstrained_minimizer(self) -> np.ndarray:
        return self.nu

    def value(self, x) -> float:
        r = self._check(x) - self.nu
        return float(np.sum(np.where(r < 0, self.phi1, self.phi2) * r * r))

    def gradient(self, x) -> np.ndarray:
        r = self._check(x) - self.nu
        return 2.0 * np.where(r < 0, self.phi1, self.phi2) * r

    def gradient_inverse(self, g) -> np.ndarray:
        g = self._check(g)
        return self.nu + g / (2.0 * np.where(g < 0, self.phi1, self.phi2))

    def to_record(self) -> str:
        """Plain-text record ``pq <d> <phi1> <phi2> <nu_1> ... <nu_d>``."""
        fields = ["pq", str(self.dim), repr(self.phi1), repr(self.phi2)]
        fields += [repr(float(v)) for v in self.nu]
        return " ".join(fields)


def from_record(line: str, spec: ConvexitySpec | None = None) -> PiecewiseQuadratic:
    """Parse a record written by :meth:`PiecewiseQuadratic.to_record`."""
    parts = line.split()
    if not parts or parts[0] != "pq":
        raise ValueError(f"not a function record: {line!r}")
    d = int(parts[1])
    if len(parts) != 4 + d:
        raise ValueError(f"record declares d={d} but carries {len(parts) - 4} minimizer entries")
    return PiecewiseQuadratic(float(parts[2]), float(parts[3]), [float(v) for v in parts[4:]], spec)


def sample_random_params(rng: np.random.Generator, spec: ConvexitySpec, c: float,
                         size: int, d: int = 1, nu_dist: str = "ball"):
    """Draw ``size`` parameter sets of the random replacement distribution.

    Returns ``(phi1, phi2, nu)`` with shapes ``(size,)``, ``(size,)``,
    ``(size, d)``. Curvatures are uniform on ``[alpha/2, beta/2]``. With
    ``nu_dist="ball"`` the minimizer is uniform in the ball of radius ``c``
    (uniform on ``[-c, c]`` when ``d == 1``); ``"sphere"`` puts it on the
    boundary sphere.
    """
    if c <= 0:
        raise ValueError("ball radius c must be positive")
    if nu_dist not in NU_DISTRIBUTIONS:
        raise ValueError(f"unknown minimizer distribution {nu_dist!r}")
    lo, hi = spec.alpha / 2, spec.beta / 2
    u = rng.random((size, 2))
    phi = lo + (hi - lo) * u
    if d == 1:
        if nu_dist == "ball":
            nu = rng.uniform(-c, c, size=(size, 1))
        else:
            nu = c * np.where(rng.random((size, 1)) < 0.5, -1.0, 1.0)
    else:
        direction = rng.standard_normal((size, d))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        if nu_dist == "ball":
            radius = c * rng.random((size, 1)) ** (1.0 / d)
        else:
            radius = c
        nu = radius * direction
    return phi[:, 0].copy(), phi[:, 1].copy(), nu


def sample_random(rng: np.random.Generator, spec: ConvexitySpec, c: float, d: int = 1,
                  nu_dist: str = "ball") -> PiecewiseQuadratic:
    """Draw one function from the random replacement distribution."""
    phi1, phi2, nu = sample_random_params(rng, spec, c, 1, d, nu_dist)
    return PiecewiseQuadratic(phi1[0], phi2[0], nu[0], spec)
