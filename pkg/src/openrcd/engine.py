"""Discrete-event simulation of random coordinate descent in an open system.

At every event either a random edge performs a pairwise update (probability
``p_u``) or a random agent is replaced: it keeps its estimate and receives a
new cost function. The tracking error to the instantaneous constrained
minimizer is recorded after every event, in the ``L_p^†``-seminorm and in the
Euclidean norm.

Randomness is organised per realization: realization ``r`` of seed ``s``
owns ``SeedSequence(s, spawn_key=(r,))``, split into an event stream and a
function stream, so results do not depend on how realizations are grouped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator

import numpy as np

from .bounds import ProblemParams
from .functions import ConvexitySpec, PiecewiseQuadratic, sample_random_params
from .graph import Network, Spectrum, build_spectrum, seminorm_sq, seminorm_sq_batch
from .solver import Minimizer, solve, solve_piecewise

__all__ = [
    "OpenSystem",
    "SystemState",
    "EventConfig",
    "Update",
    "Replacement",
    "Trajectory",
    "EnsembleResult",
    "InvariantViolation",
    "rcd_step",
    "sample_event",
    "replace_agent",
    "expected_update_error",
    "draw_events",
    "realization_streams",
    "run_realization",
    "run_ensemble",
    "replay",
]

UPDATE, REPLACEMENT, INITIAL = 0, 1, -1
FEASIBILITY_RTOL = 1e-9


class InvariantViolation(AssertionError):
    """The resource constraint drifted during a simulation in check mode."""


@dataclass(frozen=True, eq=False)
class OpenSystem:
    """Immutable inputs shared by every realization."""

    network: Network
    spec: ConvexitySpec
    c: float
    b: np.ndarray
    nu_dist: str = "ball"
    spectrum: Spectrum = field(default=None, repr=False)

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.b, dtype=float)).copy()
        b.setflags(write=False)
        object.__setattr__(self, "b", b)
        if self.spectrum is None:
            object.__setattr__(self, "spectrum", build_spectrum(self.network))
        if self.c <= 0:
            raise ValueError("ball radius c must be positive")

    @property
    def n(self) -> int:
        return self.network.n

    @property
    def d(self) -> int:
        return self.b.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return self.network.weights

    def problem_params(self) -> ProblemParams:
        return ProblemParams.build(self.weights, self.spec.alpha, self.spec.beta, self.c, self.b)

    def feasible_start(self) -> np.ndarray:
        """``x_b = (a ⊗ b) / ||a||^2``, as an ``(n, d)`` array."""
        a = self.weights
        return np.outer(a, self.b) / (a @ a)

    def constraint_residual(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(self.n, self.d)
        return float(np.abs(self.weights @ x - self.b).max())

    def is_feasible(self, x) -> bool:
        x = np.asarray(x, dtype=float).reshape(self.n, self.d)
        scale = max(1.0, float(np.abs(self.weights[:, None] * x).sum(axis=0).max()))
        return self.constraint_residual(x) <= FEASIBILITY_RTOL * scale

    def sample_functions(self, rng, size=None):
        size = self.n if size is None else size
        phi1, phi2, nu = sample_random_params(rng, self.spec, self.c, size, self.d, self.nu_dist)
        return [PiecewiseQuadratic(p, q, v, self.spec) for p, q, v in zip(phi1, phi2, nu)]

    def initial_state(self, functions, x0=None) -> "SystemState":
        functions = tuple(functions)
        if len(functions) != self.n:
            raise ValueError(f"need {self.n} functions, got {len(functions)}")
        x = self.feasible_start() if x0 is None else np.array(x0, dtype=float).reshape(self.n, self.d)
        if not self.is_feasible(x):
            raise ValueError(f"initial point violates the constraint by {self.constraint_residual(x):.3e}")
        return SystemState(x, functions, solve(functions, self.weights, self.b), 0)

    def seminorm_error(self, state: "SystemState") -> float:
        return seminorm_sq(self.spectrum, state.x - state.minimizer.x_star)

    def euclid_error(self, state: "SystemState") -> float:
        return float(np.sum((state.x - state.minimizer.x_star) ** 2))


@dataclass(frozen=True, eq=False)
class SystemState:
    """Stacked estimates ``x`` (shape ``(n, d)``), roster and cached minimizer."""

    x: np.ndarray
    functions: tuple
    minimizer: Minimizer
    k: int = 0


@dataclass(frozen=True)
class Update:
    edge: tuple
    index: int


@dataclass(frozen=True)
class Replacement:
    agent: int


@dataclass(frozen=True)
class EventConfig:
    """Event process: update probability, replacement policy and seed.

    ``policy`` is ``"random"`` or ``"adversarial"``; the adversarial policy
    keeps, among ``n_candidates`` random draws, the function that maximizes
    the post-replacement seminorm error. ``agent_weights`` optionally biases
    which agent gets replaced (uniform by default).
    """

    p_u: float
    policy: str = "random"
    n_candidates: int = 100
    rng_seed: int = 0
    agent_weights: tuple | None = None

    def __post_init__(self):
        if not 0 < self.p_u <= 1:
            raise ValueError(f"p_u must lie in (0, 1], got {self.p_u}")
        if self.policy not in ("random", "adversarial"):
            raise ValueError(f"unknown replacement policy {self.policy!r}")
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be at least 1")
        if self.agent_weights is not None:
            w = np.asarray(self.agent_weights, dtype=float)
            if np.any(w < 0) or w.sum() <= 0:
                raise ValueError("agent weights must be nonnegative and not all zero")

    @property
    def candidates(self) -> int:
        return 1 if self.policy == "random" else self.n_candidates

    def agent_probs(self, n: int) -> np.ndarray:
        if self.agent_weights is None:
            return np.full(n, 1.0 / n)
        w = np.asarray(self.agent_weights, dtype=float)
        if w.shape != (n,):
            raise ValueError(f"need {n} agent weights")
        return w / w.sum()


def _pq_gradient(x, phi1, phi2, nu):
    r = x - nu
    return 2.0 * np.where(r < 0, phi1, phi2) * r


def _pair_update(xi, xj, gi, gj, ai, aj, h):
    s = ai * ai + aj * aj
    return xi - h * (aj * aj * gi - ai * aj * gj) / s, xj - h * (ai * ai * gj - ai * aj * gi) / s


def rcd_step(system: OpenSystem, state: SystemState, edge, h: float) -> SystemState:
    """Pairwise update ``x+ = x - h (Q^ij ⊗ I) grad f(x)`` along ``edge``.

    Only blocks ``i`` and ``j`` move and ``a_i x_i + a_j x_j`` is unchanged.
    """
    system.network.edge_index(edge)
    if h < 0:
        raise ValueError("step size must be nonnegative")
    i, j = edge
    a = system.weights
    x = state.x.copy()
    gi = state.functions[i].gradient(x[i])
    gj = state.functions[j].gradient(x[j])
    x[i], x[j] = _pair_update(x[i], x[j], gi, gj, a[i], a[j], h)
    return SystemState(x, state.functions, state.minimizer, state.k + 1)


def expected_update_error(system: OpenSystem, state: SystemState, h: float,
                          norm: str = "seminorm") -> float:
    """Exact expectation of the error after one update, by enumerating edges."""
    measure = system.seminorm_error if norm == "seminorm" else system.euclid_error
    if norm not in ("seminorm", "euclid"):
        raise ValueError(f"unknown norm {norm!r}")
    return sum(
        p * measure(rcd_step(system, state, e, h))
        for e, p in zip(system.network.edges, system.network.probs)
    )


def sample_event(cfg: EventConfig, net: Network, rng: np.random.Generator):
    """Draw one event: an update along a ``p``-distributed edge, or a replacement."""
    if rng.random() < cfg.p_u:
        k = int(rng.choice(net.m, p=net.probs))
        return Update(net.edges[k], k)
    return Replacement(int(rng.choice(net.n, p=cfg.agent_probs(net.n))))


def _candidate_arrays(system, rng, k_cand):
    return sample_random_params(rng, system.spec, system.c, k_cand, system.d, system.nu_dist)


def _select(system, x, phi1, phi2, nu, agent, cand):
    """Index of the candidate maximizing the post-replacement seminorm error."""
    c1, c2, cnu = cand
    k = c1.shape[0]
    if k == 1:
        return 0
    p1 = np.repeat(phi1[None], k, axis=0)
    p2 = np.repeat(phi2[None], k, axis=0)
    nn = np.repeat(nu[None], k, axis=0)
    p1[:, agent] = c1
    p2[:, agent] = c2
    nn[:, agent] = cnu
    xs, _ = solve_piecewise(p1, p2, nn, system.weights, system.b)
    errs = seminorm_sq_batch(system.spectrum.lp_dagger, x[None] - xs, system.spectrum.kernel)
    return int(np.argmax(errs))


def _roster_arrays(functions):
    if not all(isinstance(f, PiecewiseQuadratic) for f in functions):
        raise TypeError("the simulator supports piecewise quadratic rosters only")
    return (
        np.array([f.phi1 for f in functions]),
        np.array([f.phi2 for f in functions]),
        np.stack([f.nu for f in functions]),
    )


def replace_agent(system: OpenSystem, state: SystemState, agent: int, cfg: EventConfig,
                  rng: np.random.Generator) -> SystemState:
    """Give ``agent`` a new cost function; its estimate is inherited."""
    if not 0 <= agent < system.n:
        raise ValueError(f"no agent {agent}")
    cand = _candidate_arrays(system, rng, cfg.candidates)
    phi1, phi2, nu = _roster_arrays(state.functions)
    pick = _select(system, state.x, phi1, phi2, nu, agent, cand)
    new = PiecewiseQuadratic(cand[0][pick], cand[1][pick], cand[2][pick], system.spec)
    functions = state.functions[:agent] + (new,) + state.functions[agent + 1:]
    return SystemState(state.x, functions, solve(functions, system.weights, system.b), state.k + 1)


def realization_streams(seed: int, r: int):
    """``(event_rng, function_rng)`` of realization ``r``."""
    ev, fn = np.random.SeedSequence(seed, spawn_key=(r,)).spawn(2)
    return np.random.default_rng(ev), np.random.default_rng(fn)


def draw_events(rng: np.random.Generator, net: Network, cfg: EventConfig, horizon: int):
    """Whole event sequence of one realization.

    Returns ``(is_update, edge_index, agent)`` arrays of length ``horizon``;
    the edge (agent) entry is meaningful only where the event is an update
    (replacement).
    """
    is_update = rng.random(horizon) < cfg.p_u
    edges = rng.choice(net.m, size=horizon, p=net.probs)
    agents = rng.choice(net.n, size=horizon, p=cfg.agent_probs(net.n))
    return is_update, edges, agents


@dataclass
class Trajectory:
    """Per-event error records of one realization (index 0 is the initial state)."""

    seminorm_err_sq: np.ndarray
    euclid_err_sq: np.ndarray
    event_kind: np.ndarray
    replaced_agent: np.ndarray
    realization: int = 0

    def __len__(self):
        return self.seminorm_err_sq.shape[0]

    @property
    def k(self) -> np.ndarray:
        return np.arange(len(self))

    def records(self) -> Iterator[dict]:
        names = {INITIAL: "initial", UPDATE: "update", REPLACEMENT: "replacement"}
        for k in range(len(self)):
            agent = int(self.replaced_agent[k])
            yield {
                "k": k,
                "seminorm_err_sq": float(self.seminorm_err_sq[k]),
                "euclid_err_sq": float(self.euclid_err_sq[k]),
                "event_kind": names[int(self.event_kind[k])],
                "replaced_agent": agent if agent >= 0 else None,
            }


@dataclass
class EnsembleResult:
    """Pointwise ensemble statistics over realizations.

    ``ci_low``/``ci_high`` are normal-approximation 95% intervals of the mean.
    ``update_fraction[k]`` is the share of realizations whose ``k``-th event
    was an update (``nan`` at ``k = 0``).
    """

    mean_seminorm: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    mean_euclid: np.ndarray
    update_fraction: np.ndarray
    n_realizations: int
    seminorm: np.ndarray | None = None
    euclid: np.ndarray | None = None
    event_kind: np.ndarray | None = None

    @property
    def horizon(self) -> int:
        return self.mean_seminorm.shape[0] - 1

    def trajectory(self, r: int) -> Trajectory:
        if self.seminorm is None:
            raise ValueError("per-realization records were not kept")
        kinds = self.event_kind[r]
        return Trajectory(self.seminorm[r], self.euclid[r], kinds, np.full(kinds.shape, -1), r)


class _Log:
    """Collects replay lines of a simulation."""

    def __init__(self, n_realizations):
        self.lines = [[] for _ in range(n_realizations)]

    def add(self, r, line):
        self.lines[r].append(line)


def _simulate(system, h, horizon, rosters, x0, is_update, edges, agents,
              choose: Callable, log: _Log | None, check: bool, realization_ids):
    """Lockstep simulation of a batch of realizations.

    ``choose(row, step, agent, x, phi1, phi2, nu)`` returns the new
    ``(phi1, phi2, nu)`` of a replaced agent.
    """
    n, d = system.n, system.d
    a = system.weights
    b = system.b
    ldag = system.spectrum.lp_dagger
    kern = system.spectrum.kernel
    heads, tails = system.network.heads, system.network.tails
    n_real = is_update.shape[0]

    phi1 = np.stack([r[0] for r in rosters]).astype(float)
    phi2 = np.stack([r[1] for r in rosters]).astype(float)
    nu = np.stack([r[2] for r in rosters]).astype(float).reshape(n_real, n, d)
    x = np.repeat(np.asarray(x0, dtype=float).reshape(1, n, d), n_real, axis=0)
    xs = np.empty_like(x)
    for r in range(n_real):
        xs[r] = solve_piecewise(phi1[r], phi2[r], nu[r], a, b)[0]
        if log is not None:
            for i in range(n):
                log.add(r, "F " + str(i) + " " + PiecewiseQuadratic(phi1[r, i], phi2[r, i], nu[r, i]).to_record())

    sem = np.empty((n_real, horizon + 1))
    euc = np.empty((n_real, horizon + 1))
    kinds = np.empty((n_real, horizon + 1), dtype=np.int8)
    repl = np.full((n_real, horizon + 1), -1, dtype=np.int32)
    kinds[:, 0] = INITIAL
    z = x - xs
    sem[:, 0] = seminorm_sq_batch(ldag, z, kern)
    euc[:, 0] = np.sum(z * z, axis=(1, 2))
    scale = max(1.0, float(np.abs(b).max()))

    for k in range(horizon):
        upd = is_update[:, k]
        kinds[:, k + 1] = np.where(upd, UPDATE, REPLACEMENT)
        rows = np.flatnonzero(upd)
        if rows.size:
            e = edges[rows, k]
            ii, jj = heads[e], tails[e]
            xi, xj = x[rows, ii], x[rows, jj]
            gi = _pq_gradient(xi, phi1[rows, ii][:, None], phi2[rows, ii][:, None], nu[rows, ii])
            gj = _pq_gradient(xj, phi1[rows, jj][:, None], phi2[rows, jj][:, None], nu[rows, jj])
            xi, xj = _pair_update(xi, xj, gi, gj, a[ii][:, None], a[jj][:, None], h)
            x[rows, ii] = xi
            x[rows, jj] = xj
            if log is not None:
                for r, ek in zip(rows.tolist(), e.tolist()):
                    log.add(r, f"U {ek}")
        for r in np.flatnonzero(~upd).tolist():
            i = int(agents[r, k])
            p, q, v = choose(r, k, i, x[r], phi1[r], phi2[r], nu[r])
            phi1[r, i], phi2[r, i], nu[r, i] = p, q, v
            xs[r] = solve_piecewise(phi1[r], phi2[r], nu[r], a, b)[0]
            repl[r, k + 1] = i
            if log is not None:
                log.add(r, f"R {i} " + PiecewiseQuadratic(p, q, v).to_record())
        z = x - xs
        sem[:, k + 1] = seminorm_sq_batch(ldag, z, kern)
        euc[:, k + 1] = np.sum(z * z, axis=(1, 2))
        if check:
            drift = np.abs(np.einsum("i,rid->rd", a, x) - b).max()
            bound = FEASIBILITY_RTOL * max(scale, float(np.abs(a[None, :, None] * x).sum(axis=1).max()))
            if drift > bound:
                raise InvariantViolation(f"constraint drift {drift:.3e} at event {k + 1}")
    return sem, euc, kinds, repl


def _random_choice(system, cfg, fn_rngs):
    def choose(row, step, agent, x, phi1, phi2, nu):
        cand = _candidate_arrays(system, fn_rngs[row], cfg.candidates)
        pick = _select(system, x, phi1, phi2, nu, agent, cand)
        return cand[0][pick], cand[1][pick], cand[2][pick]
    return choose


def _prepare(system, cfg, horizon, realization_ids, functions0):
    is_update = np.empty((len(realization_ids), horizon), dtype=bool)
    edges = np.empty((len(realization_ids), horizon), dtype=np.int64)
    agents = np.empty((len(realization_ids), horizon), dtype=np.int64)
    fn_rngs, rosters = [], []
    fixed = None if functions0 is None else _roster_arrays(tuple(functions0))
    for row, r in enumerate(realization_ids):
        ev_rng, fn_rng = realization_streams(cfg.rng_seed, r)
        is_update[row], edges[row], agents[row] = draw_events(ev_rng, system.network, cfg, horizon)
        if fixed is None:
            rosters.append(_candidate_arrays(system, fn_rng, system.n))
        else:
            rosters.append(fixed)
        fn_rngs.append(fn_rng)
    return is_update, edges, agents, fn_rngs, rosters


def _start(system, x0):
    x = system.feasible_start() if x0 is None else np.array(x0, dtype=float).reshape(system.n, system.d)
    if not system.is_feasible(x):
        raise ValueError(f"initial point violates the constraint by {system.constraint_residual(x):.3e}")
    return x


def run_realization(system: OpenSystem, cfg: EventConfig, h: float, horizon: int,
                    functions0=None, x0=None, realization: int = 0,
                    check_invariants: bool = False) -> Trajectory:
    """Simulate one realization for ``horizon`` events.

    Without ``functions0`` the initial roster is drawn from the realization's
    function stream. The start defaults to the feasible point ``x_b``.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    x = _start(system, x0)
    ids = [realization]
    is_update, edges, agents, fn_rngs, rosters = _prepare(system, cfg, horizon, ids, functions0)
    sem, euc, kinds, repl = _simulate(system, h, horizon, rosters, x, is_update, edges, agents,
                                      _random_choice(system, cfg, fn_rngs), None, check_invariants, ids)
    return Trajectory(sem[0], euc[0], kinds[0], repl[0], realization)


def _summarize(sem, euc, kinds, keep):
    n_real = sem.shape[0]
    mean = sem.mean(axis=0)
    if n_real > 1:
        half = 1.96 * sem.std(axis=0, ddof=1) / math.sqrt(n_real)
    else:
        half = np.zeros_like(mean)
    frac = (kinds == UPDATE).mean(axis=0).astype(float)
    frac[0] = np.nan
    return EnsembleResult(
        mean, mean - half, mean + half, euc.mean(axis=0), frac, n_real,
        sem if keep else None, euc if keep else None, kinds if keep else None,
    )


def run_ensemble(system: OpenSystem, cfg: EventConfig, h: float, horizon: int,
                 n_realizations: int, functions0=None, x0=None, chunk_size: int = 500,
                 keep_realizations: bool = False, check_invariants: bool = False,
                 log: list | None = None) -> EnsembleResult:
    """Simulate ``n_realizations`` independent realizations and average them.

    Realizations are processed in chunks of ``chunk_size`` in lockstep; the
    result depends only on ``(cfg.rng_seed, r)`` for each realization ``r``.
    If ``log`` is a list, one list of replay lines per realization is appended.
    """
    if n_realizations < 1:
        raise ValueError("need at least one realization")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    x = _start(system, x0)
    parts = []
    for start in range(0, n_realizations, chunk_size):
        ids = list(range(start, min(start + chunk_size, n_realizations)))
        is_update, edges, agents, fn_rngs, rosters = _prepare(system, cfg, horizon, ids, functions0)
        chunk_log = _Log(len(ids)) if log is not None else None
        parts.append(_simulate(system, h, horizon, rosters, x, is_update, edges, agents,
                               _random_choice(system, cfg, fn_rngs), chunk_log, check_invariants, ids))
        if chunk_log is not None:
            log.extend(chunk_log.lines)
    sem = np.concatenate([p[0] for p in parts])
    euc = np.concatenate([p[1] for p in parts])
    kinds = np.concatenate([p[2] for p in parts])
    return _summarize(sem, euc, kinds, keep_realizations)


def _parse_realization(lines, system):
    n = system.n
    roster = [None] * n
    is_update, edges, agents, chosen = [], [], [], []
    for line in lines:
        tag, rest = line.split(" ", 1)
        if tag == "F":
            i, rec = rest.split(" ", 1)
            f = _record_params(rec)
            roster[int(i)] = f
        elif tag == "U":
            is_update.append(True)
            edges.append(int(rest))
            agents.append(0)
            chosen.append(None)
        elif tag == "R":
            i, rec = rest.split(" ", 1)
            is_update.append(False)
            edges.append(0)
            agents.append(int(i))
            chosen.append(_record_params(rec))
        else:
            raise ValueError(f"unknown replay line {line!r}")
    if any(f is None for f in roster):
        raise ValueError("replay log lacks some initial functions")
    roster_arrays = (
        np.array([f[0] for f in roster]), np.array([f[1] for f in roster]), np.stack([f[2] for f in roster])
    )
    return roster_arrays, np.array(is_update, bool), np.array(edges), np.array(agents), chosen


def _record_params(rec):
    parts = rec.split()
    if parts[0] != "pq" or len(parts) != 4 + int(parts[1]):
        raise ValueError(f"malformed function record {rec!r}")
    return float(parts[2]), float(parts[3]), np.array([float(v) for v in parts[4:]])


def replay(system: OpenSystem, h: float, realizations, x0=None, chunk_size: int = 500,
           keep_realizations: bool = False) -> EnsembleResult:
    """Re-run logged realizations exactly, without drawing random numbers.

    ``realizations`` holds the replay lines of each realization as produced
    by :func:`run_ensemble`. Use the same ``chunk_size`` as the original run
    to reproduce it bit for bit.
    """
    x = _start(system, x0)
    realizations = list(realizations)
    parts = []
    for start in range(0, len(realizations), chunk_size):
        block = [_parse_realization(lines, system) for lines in realizations[start:start + chunk_size]]
        horizons = {len(blk[1]) for blk in block}
        if len(horizons) != 1:
            raise ValueError("logged realizations have different horizons")
        horizon = horizons.pop()
        rosters = [blk[0] for blk in block]
        is_update = np.array([blk[1] for blk in block]).reshape(len(block), horizon)
        edges = np.array([blk[2] for blk in block]).reshape(len(block), horizon)
        agents = np.array([blk[3] for blk in block]).reshape(len(block), horizon)

        def choose(row, step, agent, *_):
            return block[row][4][step]

        parts.append(_simulate(system, h, horizon, rosters, x, is_update, edges, agents,
                               choose, None, False, list(range(len(block)))))
    sem = np.concatenate([p[0] for p in parts])
    euc = np.concatenate([p[1] for p in parts])
    kinds = np.concatenate([p[2] for p in parts])
    return _summarize(sem, euc, kinds, keep_realizations)


def with_policy(cfg: EventConfig, policy: str) -> EventConfig:
    return replace(cfg, policy=policy)
