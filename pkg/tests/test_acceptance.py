"""Acceptance criteria of the package, one test per criterion.

Each test records a single ``CRITERION k: PASS|FAIL`` line; the lines are
printed as they are produced and repeated in the pytest terminal summary.
Run this file directly to get only the summary lines.
"""

import sys
import time

import numpy as np
import pytest

from helpers import project_feasible, random_connected, random_roster, random_spec
from openrcd import bounds as B
from openrcd.config import PRESETS, open_bound_for, sweep_range
from openrcd.engine import OpenSystem, expected_update_error, run_ensemble
from openrcd.functions import ConvexitySpec, PiecewiseQuadratic, sample_random_params
from openrcd.graph import build_spectrum, complete, effective_resistance, line, seminorm_sq
from openrcd.solver import solve

RESULTS = {}

SIM_PRESETS = ("fig3-left", "fig3-right", "fig4-ring", "fig4-hetero")


def report(k, ok, detail):
    line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS[k] = line
    print(line)
    assert ok, line


def _random_instance(rng, n, d, weights, uniform=False):
    net = random_connected(rng, n, weights, uniform=uniform)
    spec = random_spec(rng)
    c = rng.uniform(0.2, 3.0)
    system = OpenSystem(net, spec, c, rng.normal(size=d) * 2)
    fs = random_roster(rng, spec, n, d, c)
    x = project_feasible(net.weights, system.b, rng.normal(size=(n, d)) * rng.uniform(0.5, 20))
    return system, system.initial_state(fs, x)


def test_criterion_1_euclidean_growth_example():
    spec = ConvexitySpec(2.0, 100.0)
    fs = [PiecewiseQuadratic(50, 50, 2, spec), PiecewiseQuadratic(20, 20, -2, spec),
          PiecewiseQuadratic(1, 1, -3, spec)]
    system = OpenSystem(line(3, probs=[0.9, 0.1]), spec, 3.0, [-3.0])
    state = system.initial_state(fs, [[10.0], [7.0], [-20.0]])
    before = system.euclid_error(state)
    after = expected_update_error(system, state, 0.01, "euclid")
    ok = before == 434 and abs(after - 437.204) <= 5e-3
    report(1, ok, f"||x0 - x*||^2 = {before:.6g}, E||x1 - x*||^2 = {after:.6f} (target 437.204 +- 0.005)")


def test_criterion_2_general_contraction():
    rng = np.random.default_rng(2024)
    worst, n_inst = np.inf, 1000
    for _ in range(n_inst):
        n, d = int(rng.integers(2, 9)), int(rng.integers(1, 3))
        system, state = _random_instance(rng, n, d, rng.uniform(0.1, 10, n))
        sp = system.spectrum
        al, be = system.spec.alpha, system.spec.beta
        h = rng.uniform(0, B.admissible_h_general(sp.lambda2, sp.lambdan, al, be))
        rate = B.closed_rate(sp.lambda2, sp.lambdan, al, be, h)
        slack = rate * system.seminorm_error(state) - expected_update_error(system, state, h)
        worst = min(worst, slack)
    report(2, worst >= -1e-10, f"{n_inst} instances, min slack {worst:.3e} (need >= -1e-10)")


def test_criterion_3_resistance_contraction():
    rng = np.random.default_rng(2025)
    n_inst, rate_bad, worst, r_bad, r_worst = 1000, 0, np.inf, 0, 0.0
    for _ in range(n_inst):
        n, d = int(rng.integers(2, 9)), int(rng.integers(1, 3))
        system, state = _random_instance(rng, n, d, np.ones(n), uniform=True)
        sp, net = system.spectrum, system.network
        al, be = system.spec.alpha, system.spec.beta
        p = B.resistance_probability(net)
        h = rng.uniform(0, B.admissible_h_resistance(p, sp.lambdan, al, be))
        rate = B.closed_rate_resistance(p, sp.lambdan, sp.lambda2, al, be, h)
        slack = rate * system.seminorm_error(state) - expected_update_error(system, state, h)
        worst = min(worst, slack)
        rate_bad += slack < -1e-10
        for e in net.edges:
            r = effective_resistance(sp, e)
            r_worst = max(r_worst, r * p)
            r_bad += r > (1 / p) * (1 + 1e-12)
    ok = rate_bad == 0 and r_bad == 0
    report(3, ok, f"{n_inst} instances: {rate_bad} rate violations (min slack {worst:.3e}), "
                  f"{r_bad} edges with r > 1/p (max r*p = {r_worst:.4f})")


def _replacement_instances(seed=7, count=10_000):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n, d = int(rng.integers(2, 7)), int(rng.integers(1, 3))
        spec = random_spec(rng, kappa_max=50)
        c = rng.uniform(0.1, 3)
        a = rng.uniform(0.1, 5, n) if rng.random() < 0.7 else np.ones(n)
        b = rng.normal(size=d) * 2
        fs = random_roster(rng, spec, n, d, c)
        i = int(rng.integers(n))
        phi1, phi2, nu = sample_random_params(rng, spec, c, 1, d)
        fs2 = list(fs)
        fs2[i] = PiecewiseQuadratic(phi1[0], phi2[0], nu[0], spec)
        p = B.ProblemParams.build(a, spec.alpha, spec.beta, c, b)
        yield p, solve(fs, a, b), solve(fs2, a, b)


@pytest.fixture(scope="module")
def replacement_instances():
    return list(_replacement_instances())


def _figure_shapes():
    left, right = PRESETS["fig1-left"], PRESETS["fig1-right"]

    def bound(cfg, n):
        return B.min_change_bound(B.ProblemParams.build(cfg.weight_vector(n), cfg.alpha, cfg.beta,
                                                        cfg.c, cfg.budget))

    active = [bound(left, n).active for n in sweep_range(left)]
    switches = sum(x != y for x, y in zip(active, active[1:]))
    left_ok = active[0] == "psi" and active[-1] == "theta" and switches == 1
    right_ok = all(bound(right, n).chi <= bound(right, n).theta for n in sweep_range(right))
    cross = next((n for n, s in zip(sweep_range(left), active) if s == "theta"), None)
    return left_ok and right_ok, f"kappa=50 psi->theta at n={cross}, kappa=2 chi<=theta: {right_ok}"


def test_criterion_4_minimizer_change(replacement_instances):
    excess, worst = 0, 0.0
    for p, m1, m2 in replacement_instances:
        jump = float(np.sum((m1.x_star - m2.x_star) ** 2))
        bound = B.min_change_bound(p).m_bar_sq
        worst = max(worst, jump / bound)
        excess += jump > bound * (1 + 1e-12)
    shapes_ok, shapes = _figure_shapes()
    report(4, excess == 0 and shapes_ok,
           f"{len(replacement_instances)} replacements, {excess} exceed min(psi,chi,theta) "
           f"(max ratio {worst:.3f}); {shapes}")


def test_criterion_5_minimizer_containment(replacement_instances):
    bad = 0
    for p, *mins in replacement_instances:
        for m in mins:
            bad += np.linalg.norm(m.x_star) > B.radius_global(p) * (1 + 1e-12)
            bad += np.linalg.norm(m.lambda_star) > B.lambda_star_bound(p) * (1 + 1e-12)
            for ai, xi in zip(p.a, m.x_star):
                bad += np.linalg.norm(xi) > B.local_minimizer_bound(p, ai) * (1 + 1e-12)
    report(5, bad == 0, f"{2 * len(replacement_instances)} minimizers, {bad} containment violations")


def test_criterion_6_open_system_envelope():
    lines, ok = [], True
    for name in SIM_PRESETS:
        cfg = PRESETS[name]
        assert cfg.m_mode == "paper" and cfg.n_realizations == 500 and cfg.horizon == 2000
        system = cfg.system()
        h, ob, _, _ = open_bound_for(cfg, system)
        for policy in cfg.policies:
            t0 = time.perf_counter()
            res = run_ensemble(system, cfg.event_config(policy), h, cfg.horizon, cfg.n_realizations,
                               chunk_size=cfg.chunk_size)
            mean = res.mean_seminorm
            ks = np.arange(mean.shape[0])
            env = ob.a_eta ** ks * (mean[0] - ob.gamma_eta) + ob.gamma_eta
            inside = bool(np.all(mean <= env * (1 + 1e-12)))
            tail = float(mean[-max(1, cfg.horizon // 10):].mean())
            ok &= inside and tail < ob.gamma_eta
            lines.append(f"{name}/{policy}: envelope {'ok' if inside else 'broken'}, "
                         f"tail {tail:.4g} vs Gamma {ob.gamma_eta:.4g} ({time.perf_counter() - t0:.1f}s)")
    report(6, ok, "; ".join(lines))


def test_criterion_7_seminorm_definiteness():
    rng = np.random.default_rng(77)
    zero_hits, worst_kernel, count = 0, 0.0, 10_000
    for t in range(count):
        n, d = int(rng.integers(2, 9)), int(rng.integers(1, 4))
        net = random_connected(rng, n, rng.uniform(0.1, 10, n))
        sp = build_spectrum(net)
        z = project_feasible(net.weights, np.zeros(d), rng.normal(size=(n, d)))
        z *= 10.0 ** rng.uniform(-5.5, 3) / np.linalg.norm(z)
        if np.linalg.norm(z) >= 1e-6:
            zero_hits += seminorm_sq(sp, z) <= 0
        w = rng.normal(size=d) * rng.uniform(0.1, 10)
        worst_kernel = max(worst_kernel, seminorm_sq(sp, np.outer(net.weights, w)))
    ok = zero_hits == 0 and worst_kernel < 1e-18
    report(7, ok, f"{count} projected vectors, {zero_hits} nonpositive; "
                  f"max seminorm on kernel {worst_kernel:.2e} (need < 1e-18)")


def test_criterion_8_spectra():
    worst = 0.0
    for n in range(2, 21):
        sp = build_spectrum(complete(n))
        worst = max(worst, abs(sp.lambda2 - 1 / (n - 1)), abs(sp.lambdan - 1 / (n - 1)))
    rng = np.random.default_rng(88)
    kron_ok = True
    for n in range(2, 7):
        net = random_connected(rng, n, rng.uniform(0.2, 5, n))
        sp = build_spectrum(net)
        for d in range(1, 4):
            big = np.linalg.eigvalsh(np.kron(sp.lp, np.eye(d)))
            expect = np.sort(np.repeat(sp.eigenvalues, d))
            kron_ok &= bool(np.allclose(big, expect, atol=1e-12))
            kron_ok &= int(np.sum(np.abs(big) < 1e-10)) == d
    report(8, worst <= 1e-10 and kron_ok,
           f"complete n=2..20 max eigenvalue error {worst:.2e}; Kronecker multiplicities ok: {kron_ok}")


def test_criterion_9_open_bound_optimality():
    rng = np.random.default_rng(99)
    grid_bad, a_bad, count = 0, 0, 100
    for _ in range(count):
        l2 = rng.uniform(0.01, 1.0)
        ln = l2 * rng.uniform(1.0, 20.0)
        alpha = rng.uniform(0.2, 3)
        beta = alpha * rng.uniform(1, 20)
        h = rng.uniform(0.05, 1.0) * B.admissible_h_general(l2, ln, alpha, beta)
        op = B.OpenParams.build(rng.uniform(0.05, 0.999), h, l2, ln, alpha,
                                rng.uniform(0.1, 50), rng.choice(["paper", "sqrt"]))
        best = B.eta_star(op)
        a_bad += not best.a_eta < 1
        for eta in np.linspace(best.eta_bar, 10 * best.eta_bar, 101)[1:]:
            grid_bad += best.gamma_eta > B.open_bound(op, eta).gamma_eta * (1 + 1e-12)
    # closed-system limit
    closed = B.eta_star(B.OpenParams.build(1.0, h, l2, ln, alpha, 3.0))
    limit_ok = closed.gamma_eta == 0 and abs(closed.a_eta - B.closed_rate(l2, ln, alpha, beta, h)) <= 1e-12
    gammas = [B.eta_star(B.OpenParams.build(1 - 10.0 ** -k, h, l2, ln, alpha, 3.0)).gamma_eta
              for k in range(1, 13)]
    limit_ok &= all(g1 > g2 for g1, g2 in zip(gammas, gammas[1:])) and gammas[-1] < 1e-6 * gammas[0]
    report(9, grid_bad == 0 and a_bad == 0 and limit_ok,
           f"{count} parameter sets, {grid_bad} grid points below Gamma*, {a_bad} with A* >= 1; "
           f"p_U -> 1 limit ok: {limit_ok}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
