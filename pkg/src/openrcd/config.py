"""Experiment configuration: flat ``key = value`` files and named presets."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bounds
from .engine import EventConfig, OpenSystem
from .functions import ConvexitySpec
from .graph import TOPOLOGIES, Network, erdos_renyi, read_edge_list

__all__ = ["ExperimentConfig", "ConfigError", "PRESETS", "preset", "parse_config", "resolve_step"]

H_MODES = ("optimal-general", "optimal-resistance")
POLICIES = ("random", "adversarial", "both")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


def _floats(text):
    return tuple(float(v) for v in str(text).replace(",", " ").split())


@dataclass(frozen=True)
class ExperimentConfig:
    """All parameters of one experiment.

    ``weights`` is ``"homogeneous"`` or an explicit comma-separated vector;
    ``h`` is a number or one of ``optimal-general`` / ``optimal-resistance``.
    ``sweep_n`` (``"lo:hi"``) turns the ``bounds`` command into a table over
    system sizes; heterogeneous sweeps keep ``a_1`` and set the others to 1.
    """

    name: str = "experiment"
    topology: str = "complete"
    n: int = 5
    edge_prob: float = 0.5
    graph_seed: int = 0
    edge_file: str = ""
    weights: str = "homogeneous"
    alpha: float = 1.0
    beta: float = 5.0
    c: float = 1.0
    b: str = "1"
    p_u: float = 0.95
    h: str = "optimal-general"
    horizon: int = 2000
    n_realizations: int = 500
    policy: str = "both"
    n_candidates: int = 100
    seed: int = 0
    m_mode: str = "paper"
    nu_dist: str = "ball"
    chunk_size: int = 500
    sweep_n: str = ""
    output_dir: str = ""
    description: str = field(default="", compare=False)

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {POLICIES}")
        if self.m_mode not in ("paper", "sqrt"):
            raise ConfigError("m_mode must be 'paper' or 'sqrt'")
        if self.topology not in (*TOPOLOGIES, "erdos_renyi", "edges"):
            raise ConfigError(f"unknown topology {self.topology!r}")
        if self.horizon < 0 or self.n_realizations < 1 or self.chunk_size < 1:
            raise ConfigError("horizon, n_realizations and chunk_size must be positive")

    @property
    def kappa(self) -> float:
        return self.beta / self.alpha

    @property
    def budget(self) -> np.ndarray:
        return np.array(_floats(self.b))

    def weight_vector(self, n=None) -> np.ndarray:
        n = self.n if n is None else n
        if self.weights == "homogeneous":
            return np.ones(n)
        a = np.array(_floats(self.weights))
        if a.shape[0] == n:
            return a
        if self.sweep_n:
            # sizes vary in a sweep: keep the leading weight, pad with ones
            return np.concatenate([a[:1], np.ones(n - 1)])
        raise ConfigError(f"{a.shape[0]} weights given for n={n}")

    @property
    def policies(self) -> tuple:
        return ("random", "adversarial") if self.policy == "both" else (self.policy,)

    def network(self) -> Network:
        a = self.weight_vector()
        if self.topology == "edges":
            if not self.edge_file:
                raise ConfigError("topology 'edges' needs edge_file")
            return read_edge_list(Path(self.edge_file), a)
        if self.topology == "erdos_renyi":
            return erdos_renyi(self.n, self.edge_prob, np.random.default_rng(self.graph_seed), a)
        return TOPOLOGIES[self.topology](self.n, a)

    def system(self) -> OpenSystem:
        return OpenSystem(self.network(), ConvexitySpec(self.alpha, self.beta), self.c,
                          self.budget, self.nu_dist)

    def event_config(self, policy: str) -> EventConfig:
        return EventConfig(self.p_u, policy, self.n_candidates, self.seed)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def with_overrides(self, pairs) -> "ExperimentConfig":
        """Apply ``key=value`` strings (command-line style)."""
        items = {}
        for pair in pairs:
            if "=" not in pair:
                raise ConfigError(f"override {pair!r} is not key=value")
            key, value = pair.split("=", 1)
            items[key.strip()] = value.strip()
        return _apply(self, items)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            if f.name == "description":
                continue
            lines.append(f"{f.name} = {getattr(self, f.name)}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _apply(base, items):
    if "kappa" in items and "beta" in items:
        raise ConfigError("give either beta or kappa, not both")
    changes = {}
    for key, raw in items.items():
        if key == "kappa":
            changes["beta"] = float(raw) * float(items.get("alpha", base.alpha))
            continue
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        kind = type(getattr(base, key))
        try:
            changes[key] = kind(raw) if kind in (int, float) else raw
        except ValueError:
            raise ConfigError(f"bad value {raw!r} for {key}") from None
    return dataclasses.replace(base, **changes)


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse the flat format: one ``key = value`` per line, ``#`` comments."""
    items = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = body.split("=", 1)
        items[key.strip()] = value.strip()
    return _apply(base or ExperimentConfig(), items)


def resolve_step(cfg: ExperimentConfig, system: OpenSystem):
    """Step size and the closed-system factor ``K`` used by the open-system bound.

    Returns ``(h, K, kind)`` with ``kind`` naming the rate result that
    certifies ``K``: ``"general"`` or ``"resistance"``.
    """
    sp = system.spectrum
    a, b_ = cfg.alpha, cfg.beta
    if cfg.h == "optimal-general":
        h, _ = bounds.optimal_h_general(sp.lambda2, sp.lambdan, a, b_)
        return h, bounds.closed_rate(sp.lambda2, sp.lambdan, a, b_, h), "general"
    if cfg.h == "optimal-resistance":
        p = bounds.resistance_probability(system.network)
        h, _ = bounds.optimal_h_resistance(p, sp.lambdan, sp.lambda2, a, b_)
        return h, bounds.closed_rate_resistance(p, sp.lambdan, sp.lambda2, a, b_, h), "resistance"
    try:
        h = float(cfg.h)
    except ValueError:
        raise ConfigError(f"h must be a number or one of {H_MODES}") from None
    if h <= bounds.admissible_h_general(sp.lambda2, sp.lambdan, a, b_) * (1 + 1e-12):
        return h, bounds.closed_rate(sp.lambda2, sp.lambdan, a, b_, h), "general"
    p = bounds.resistance_probability(system.network)
    return h, bounds.closed_rate_resistance(p, sp.lambdan, sp.lambda2, a, b_, h), "resistance"


def open_bound_for(cfg: ExperimentConfig, system: OpenSystem):
    """Optimal open-system bound of a configuration.

    Returns ``(h, OptimalOpenBound, MinChangeBound, m)``.
    """
    h, k, kind = resolve_step(cfg, system)
    mc = bounds.min_change_bound(system.problem_params())
    sp = system.spectrum
    op = bounds.OpenParams.build(cfg.p_u, h, sp.lambda2, sp.lambdan, cfg.alpha, mc.m_bar, cfg.m_mode)
    if kind == "general":
        ob = bounds.eta_star(op)
    else:
        ob = bounds.eta_star_generic(k, cfg.p_u, op.m)
    return h, ob, mc, op.m


def _fig(name, description, **kw):
    return ExperimentConfig(name=name, description=description, **kw)


PRESETS = {
    p.name: p
    for p in (
        _fig("fig3-left", "complete graph, n=5, kappa=5, homogeneous agents",
             topology="complete", n=5, beta=5.0),
        _fig("fig3-right", "complete graph, n=30, kappa=1.2, homogeneous agents",
             topology="complete", n=30, beta=1.2),
        _fig("fig4-ring", "ring graph, n=5, kappa=1.2, homogeneous agents",
             topology="ring", n=5, beta=1.2),
        _fig("fig4-hetero", "complete graph, n=5, kappa=1.2, a=(10,1,1,1,1)",
             topology="complete", n=5, beta=1.2, weights="10,1,1,1,1"),
        _fig("fig1-left", "minimizer-change bounds versus n, kappa=50, homogeneous agents",
             topology="complete", n=2, beta=50.0, sweep_n="2:100"),
        _fig("fig1-right", "minimizer-change bounds versus n, kappa=2, a_1=10",
             topology="complete", n=2, beta=2.0, weights="10", sweep_n="2:50"),
    )
}


def preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def sweep_range(cfg: ExperimentConfig) -> range:
    lo, hi = (int(v) for v in cfg.sweep_n.split(":"))
    if lo < 2 or hi < lo:
        raise ConfigError(f"bad sweep range {cfg.sweep_n!r}")
    return range(lo, hi + 1)
