"""Closed-form bounds: minimizer location, minimizer change, contraction rates
and the open-system error recursion.

All functions are pure. Budgets enter only through their Euclidean norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BoundDomainError",
    "ProblemParams",
    "MinChangeBound",
    "OpenParams",
    "OpenBound",
    "OptimalOpenBound",
    "radius_global",
    "lambda_star_bound",
    "local_minimizer_bound",
    "min_change_bound",
    "admissible_h_general",
    "closed_rate",
    "optimal_h_general",
    "admissible_h_resistance",
    "closed_rate_resistance",
    "optimal_h_resistance",
    "resistance_probability",
    "alt_rate_range",
    "alt_rate",
    "contraction_margin",
    "open_bound",
    "eta_bar",
    "eta_star",
    "open_bound_generic",
    "eta_star_generic",
    "envelope",
]

# relative slack accepted on step-size upper limits, so h = h* passes
_H_SLACK = 1e-12


class BoundDomainError(ValueError):
    """A step size or parameter lies outside the validity range of a bound."""


@dataclass(frozen=True)
class ProblemParams:
    """Problem-level constants: sizes, moduli, ball radius, budget norm, weights."""

    n: int
    d: int
    alpha: float
    beta: float
    c: float
    b_norm: float
    a: tuple

    def __post_init__(self):
        a = tuple(float(v) for v in np.atleast_1d(self.a))
        if len(a) == 1 and self.n > 1:
            a = a * self.n
        object.__setattr__(self, "a", a)
        if len(a) != self.n:
            raise ValueError(f"need {self.n} weights, got {len(a)}")
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be positive")
        if min(a) <= 0:
            raise ValueError("weights must be positive")
        if not 0 < self.alpha <= self.beta:
            raise ValueError("need 0 < alpha <= beta")
        if self.c < 0 or self.b_norm < 0:
            raise ValueError("c and ||b|| must be nonnegative")

    @classmethod
    def build(cls, a, alpha, beta, c, b, d=None):
        a = np.asarray(a, dtype=float)
        b = np.atleast_1d(np.asarray(b, dtype=float))
        return cls(a.shape[0], d or b.shape[0], alpha, beta, c, float(np.linalg.norm(b)), tuple(a))

    @property
    def kappa(self) -> float:
        return self.beta / self.alpha

    @property
    def a_norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.a))

    @property
    def a_one_norm(self) -> float:
        return sum(self.a)

    @property
    def a_plus(self) -> float:
        return max(self.a)

    @property
    def a_minus(self) -> float:
        return min(self.a)

    @property
    def a_mean(self) -> float:
        return self.a_one_norm / self.n

    @property
    def a_sq_mean(self) -> float:
        return self.a_norm ** 2 / self.n

    @property
    def rho_a(self) -> float:
        """``a_+^2 / (||a||^2 - a_+^2)``; requires ``n >= 2``."""
        if self.n < 2:
            raise ValueError("rho_a needs at least two agents")
        return self.a_plus ** 2 / (self.a_norm ** 2 - self.a_plus ** 2)


def radius_global(p: ProblemParams) -> float:
    """Radius of a ball around 0 containing the constrained minimizer."""
    k = p.kappa
    return math.sqrt(p.n * k) * (p.c + p.c / math.sqrt(k) + p.b_norm / (math.sqrt(p.n) * p.a_norm))


def lambda_star_bound(p: ProblemParams) -> float:
    """Upper bound on the norm of the optimal multiplier."""
    return p.beta * (p.b_norm + p.c * p.a_one_norm) / p.a_norm ** 2


def local_minimizer_bound(p: ProblemParams, a_i: float) -> float:
    """Upper bound on ``||x_i*||`` for an agent of weight ``a_i``."""
    return a_i * p.kappa * (p.b_norm + p.c * p.a_one_norm) / p.a_norm ** 2 + p.c


@dataclass(frozen=True)
class MinChangeBound:
    psi: float
    chi: float
    theta: float

    @property
    def m_bar_sq(self) -> float:
        return min(self.psi, self.chi, self.theta)

    @property
    def m_bar(self) -> float:
        return math.sqrt(self.m_bar_sq)

    @property
    def active(self) -> str:
        """Name of the smallest of the three quantities."""
        return min(("psi", self.psi), ("chi", self.chi), ("theta", self.theta), key=lambda t: t[1])[0]


def min_change_bound(p: ProblemParams) -> MinChangeBound:
    """Bound on ``||x^(1) - x^(2)||^2`` after replacing a single function."""
    if p.n < 2:
        raise ValueError("the minimizer-change bound needs at least two agents")
    k = p.kappa
    psi = 4 * p.n * k * (p.c + p.c / math.sqrt(k) + p.b_norm / (math.sqrt(p.n) * p.a_norm)) ** 2
    local = local_minimizer_bound(p, p.a_plus)
    chi = 8 * local ** 2
    theta = 4 * (1 + (k + 1) ** 2 / (4 * k) * p.rho_a) * local ** 2
    return MinChangeBound(psi, chi, theta)


def _check_h(h, upper, what):
    if h < 0:
        raise BoundDomainError(f"step size must be nonnegative, got {h}")
    if h > upper * (1 + _H_SLACK):
        raise BoundDomainError(f"h={h} exceeds the {what} limit {upper}")


def admissible_h_general(lambda2, lambdan, alpha, beta) -> float:
    """Largest step size of the general contraction result."""
    return lambda2 / lambdan * 2 / (alpha + beta)


def closed_rate(lambda2, lambdan, alpha, beta, h) -> float:
    """Per-update contraction factor ``1 - 2 h alpha lambda2 + h^2 alpha^2 lambdan``."""
    _check_h(h, admissible_h_general(lambda2, lambdan, alpha, beta), "general")
    return 1 - 2 * h * alpha * lambda2 + h * h * alpha * alpha * lambdan


def optimal_h_general(lambda2, lambdan, alpha, beta):
    """Step size at the edge of the admissible range and its stated rate.

    The returned rate ``1 - lambda2^2 / (lambdan kappa)`` upper-bounds
    ``closed_rate`` evaluated at that step size.
    """
    h = 2 * lambda2 / ((alpha + beta) * lambdan)
    return h, 1 - lambda2 ** 2 / lambdan * alpha / beta


def resistance_probability(net) -> float:
    """Common edge probability of a homogeneous network with uniform probabilities."""
    if not net.is_homogeneous:
        raise BoundDomainError("the resistance-based rate needs homogeneous weights")
    if not net.is_uniform:
        raise BoundDomainError("the resistance-based rate needs uniform edge probabilities")
    return 1.0 / net.m


def admissible_h_resistance(p_uniform, lambdan, alpha, beta) -> float:
    return 2 * p_uniform / lambdan * 2 / (alpha + beta)


def closed_rate_resistance(p_uniform, lambdan, lambda2, alpha, beta, h) -> float:
    """Resistance-based contraction factor for homogeneous, uniform networks."""
    _check_h(h, admissible_h_resistance(p_uniform, lambdan, alpha, beta), "resistance")
    return 1 - 2 * h * alpha * lambda2 + h * h * alpha * alpha * lambda2 * lambdan / (2 * p_uniform)


def optimal_h_resistance(p_uniform, lambdan, lambda2, alpha, beta):
    h = 4 * p_uniform / ((alpha + beta) * lambdan)
    return h, 1 - 2 * p_uniform * lambda2 / lambdan * alpha / beta


def alt_rate_range(lambda2, lambdan, alpha, beta):
    """``(h_low, h_high)`` validity interval of the alternative rate."""
    kinv = alpha / beta
    kappa_l = lambdan / lambda2
    low = admissible_h_general(lambda2, lambdan, alpha, beta)
    high = (kinv + kappa_l) / (kinv + 1) * lambda2 / (lambdan ** 2 * beta)
    return low, high


def alt_rate(lambda2, lambdan, alpha, beta, h) -> float:
    """Alternative factor ``1 - 2 beta lambda2 h + h^2 beta^2 lambdan^2 / lambda2``.

    ``alpha`` only enters through the validity interval.
    """
    low, high = alt_rate_range(lambda2, lambdan, alpha, beta)
    if low > high * (1 + _H_SLACK):
        raise BoundDomainError(f"empty validity interval [{low}, {high}]")
    if h < low * (1 - _H_SLACK) or h > high * (1 + _H_SLACK):
        raise BoundDomainError(f"h={h} outside [{low}, {high}]")
    return 1 - 2 * beta * lambda2 * h + h * h * beta * beta * lambdan ** 2 / lambda2


@dataclass(frozen=True)
class OpenParams:
    """Open-system parameters.

    ``m`` is the seminorm-level jump bound derived from ``m_bar``: ``m_bar /
    lambda2`` in ``"paper"`` mode, ``m_bar / sqrt(lambda2)`` in ``"sqrt"`` mode.
    """

    p_u: float
    h: float
    lambda2: float
    lambdan: float
    alpha: float
    m_bar: float
    m: float

    def __post_init__(self):
        if not 0 < self.p_u <= 1:
            raise ValueError(f"p_u must lie in (0, 1], got {self.p_u}")
        if self.h < 0 or self.m < 0 or self.m_bar < 0:
            raise ValueError("h, m and m_bar must be nonnegative")

    @classmethod
    def build(cls, p_u, h, lambda2, lambdan, alpha, m_bar, m_mode="paper"):
        if m_mode == "paper":
            m = m_bar / lambda2
        elif m_mode == "sqrt":
            m = m_bar / math.sqrt(lambda2)
        else:
            raise ValueError(f"unknown m_mode {m_mode!r}")
        return cls(p_u, h, lambda2, lambdan, alpha, m_bar, m)

    @property
    def rho_r(self) -> float:
        return (1 - self.p_u) / self.p_u


@dataclass(frozen=True)
class OpenBound:
    """Contraction factor and asymptotic level at one splitting parameter.

    ``divergent`` flags a splitting parameter at or below the stability
    threshold; ``gamma_eta`` is then ``inf``.
    """

    eta: float
    a_eta: float
    gamma_eta: float
    divergent: bool = False


@dataclass(frozen=True)
class OptimalOpenBound(OpenBound):
    eta_bar: float = 0.0


def contraction_margin(op: OpenParams) -> float:
    """``alpha h (2 lambda2 - alpha lambdan h)``, i.e. one minus the closed rate."""
    return op.alpha * op.h * (2 * op.lambda2 - op.alpha * op.lambdan * op.h)


def _open(p_u, margin, m, eta):
    if eta <= 0:
        raise ValueError("eta must be positive")
    a_eta = 1 - p_u * margin + (1 - p_u) * m / eta
    if p_u == 1:
        return OpenBound(eta, a_eta, 0.0)
    denom = p_u * eta * margin - (1 - p_u) * m
    if denom <= 0:
        return OpenBound(eta, a_eta, math.inf, True)
    return OpenBound(eta, a_eta, (1 - p_u) * m * (eta + m) * eta / denom)


def open_bound(op: OpenParams, eta: float) -> OpenBound:
    """``A_eta`` and ``Gamma_eta`` of the open-system recursion."""
    return _open(op.p_u, contraction_margin(op), op.m, eta)


def _eta_bar(p_u, margin, m):
    if margin <= 0:
        raise BoundDomainError("no closed-system contraction at this step size")
    return (1 - p_u) / p_u * m / margin


def eta_bar(op: OpenParams) -> float:
    """Stability threshold: ``A_eta < 1`` for every ``eta`` above it."""
    return _eta_bar(op.p_u, contraction_margin(op), op.m)


def _eta_star(p_u, margin, m):
    bar = _eta_bar(p_u, margin, m)
    if bar == 0:
        return OptimalOpenBound(0.0, 1 - p_u * margin, 0.0, False, 0.0)
    s = math.sqrt(1 + m / bar)
    eta = bar * (1 + s)
    a_eta = 1 - p_u * margin * s / (1 + s)
    return OptimalOpenBound(eta, a_eta, eta * eta, False, bar)


def eta_star(op: OpenParams) -> OptimalOpenBound:
    """Splitting parameter minimizing ``Gamma_eta``, with ``Gamma = eta*^2``."""
    return _eta_star(op.p_u, contraction_margin(op), op.m)


def _check_k(k):
    if not 0 < k < 1:
        raise BoundDomainError(f"closed-system factor K={k} gives no contraction")


def open_bound_generic(k: float, p_u: float, m: float, eta: float) -> OpenBound:
    """Open-system recursion for any method with closed-system factor ``K``."""
    _check_k(k)
    return _open(p_u, 1 - k, m, eta)


def eta_star_generic(k: float, p_u: float, m: float) -> OptimalOpenBound:
    _check_k(k)
    return _eta_star(p_u, 1 - k, m)


def envelope(a_eta: float, gamma: float, c0: float, steps) -> np.ndarray:
    """``A^k (C0 - Gamma) + Gamma`` for ``k`` in ``steps``."""
    k = np.asarray(steps, dtype=float)
    return a_eta ** k * (c0 - gamma) + gamma
