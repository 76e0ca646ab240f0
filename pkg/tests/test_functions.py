import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from openrcd.functions import (
    ConvexitySpec,
    PiecewiseQuadratic,
    from_record,
    sample_random,
    sample_random_params,
)

SPEC = ConvexitySpec(2.0, 100.0)


def test_value_example_state():
    assert PiecewiseQuadratic(50, 50, 2, SPEC).value(10) == 3200


def test_value_zero_at_minimizer():
    f = PiecewiseQuadratic(1.5, 4.0, [0.3, -0.2], ConvexitySpec(2, 10))
    assert f.value(f.unconstrained_minimizer) == 0


def test_value_left_branch():
    assert PiecewiseQuadratic(1, 2, 0).value(-3) == 9


def test_gradient_values():
    assert PiecewiseQuadratic(50, 50, 2, SPEC).gradient(10)[0] == 800
    assert PiecewiseQuadratic(1, 3, 1).gradient(0)[0] == -2
    f = PiecewiseQuadratic(1, 3, 1)
    assert np.all(f.gradient(f.unconstrained_minimizer) == 0)


def test_gradient_inverse_values():
    assert PiecewiseQuadratic(50, 50, 2, SPEC).gradient_inverse(800)[0] == 10
    assert PiecewiseQuadratic(1, 2, 0).gradient_inverse(4)[0] == 1
    f = PiecewiseQuadratic(1, 2, 0.7)
    assert f.gradient_inverse(0)[0] == 0.7


def test_dimension_mismatch():
    f = PiecewiseQuadratic(1, 2, [0.0, 1.0])
    with pytest.raises(ValueError):
        f.value([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        f.gradient(1.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        ConvexitySpec(2.0, 1.0)
    with pytest.raises(ValueError):
        ConvexitySpec(0.0, 1.0)
    with pytest.raises(ValueError):
        PiecewiseQuadratic(0.5, 3.0, 0.0, ConvexitySpec(2.0, 4.0))
    assert ConvexitySpec.from_kappa(5.0, 2.0).beta == 10.0


def test_sample_degenerate_interval():
    rng = np.random.default_rng(3)
    for _ in range(20):
        f = sample_random(rng, ConvexitySpec(2, 2), 1.0)
        assert f.phi1 == 1 and f.phi2 == 1


def test_sample_mean_of_curvature():
    rng = np.random.default_rng(11)
    phi1, phi2, nu = sample_random_params(rng, ConvexitySpec(2, 10), 1.0, 10_000)
    # Uniform[1, 5]: mean 3, std 4/sqrt(12)
    se = (4 / np.sqrt(12)) / np.sqrt(phi1.size)
    assert abs(phi1.mean() - 3.0) < 3 * se
    assert abs(phi2.mean() - 3.0) < 3 * se
    assert phi1.min() >= 1 and phi1.max() <= 5


def test_sample_support():
    rng = np.random.default_rng(5)
    _, _, nu = sample_random_params(rng, ConvexitySpec(2, 10), 1.0, 10_000)
    assert np.all(np.abs(nu) <= 1)
    _, _, nu3 = sample_random_params(rng, ConvexitySpec(2, 10), 2.0, 5_000, d=3)
    assert np.all(np.linalg.norm(nu3, axis=1) <= 2 + 1e-12)
    _, _, sph = sample_random_params(rng, ConvexitySpec(2, 10), 2.0, 100, d=3, nu_dist="sphere")
    assert np.allclose(np.linalg.norm(sph, axis=1), 2.0)


def test_sample_scalar_nu_uniform():
    rng = np.random.default_rng(8)
    _, _, nu = sample_random_params(rng, ConvexitySpec(1, 1), 1.0, 20_000)
    # Uniform[-1, 1] has variance 1/3
    assert abs(nu.mean()) < 3 * np.sqrt(1 / 3 / nu.size)
    assert abs(np.mean(nu < 0) - 0.5) < 0.02


def test_record_round_trip():
    f = PiecewiseQuadratic(0.1 + 0.2, 1 / 3, [np.pi, -np.e])
    g = from_record(f.to_record())
    assert g == f
    with pytest.raises(ValueError):
        from_record("pq 2 1.0 1.0 0.5")


curv = st.floats(0.5, 5.0)
points = st.floats(-10, 10)


@settings(max_examples=200, deadline=None)
@given(curv, curv, st.floats(-1, 1), points, points)
def test_assumption_inequalities(p1, p2, nu, x, y):
    spec = ConvexitySpec(1.0, 10.0)
    f = PiecewiseQuadratic(p1, p2, nu, spec)
    gx, gy = f.gradient(x)[0], f.gradient(y)[0]
    tol = 1e-9 * (1 + abs(x) + abs(y)) * spec.beta
    assert abs(gx - gy) <= spec.beta * abs(x - y) + tol
    assert (gx - gy) * (x - y) >= spec.alpha * (x - y) ** 2 - tol


@settings(max_examples=200, deadline=None)
@given(curv, curv, st.floats(-1, 1), points)
def test_inverse_of_gradient(p1, p2, nu, x):
    f = PiecewiseQuadratic(p1, p2, nu)
    assert abs(f.gradient_inverse(f.gradient(x))[0] - x) <= 1e-12 * max(1.0, abs(x))


def test_finite_difference_gradient():
    rng = np.random.default_rng(2)
    spec = ConvexitySpec(1.0, 8.0)
    for _ in range(500):
        f = sample_random(rng, spec, 1.0)
        x = rng.uniform(-5, 5)
        if abs(x - f.nu[0]) <= 1e-3:
            continue
        eps = 1e-6
        fd = (f.value(x + eps) - f.value(x - eps)) / (2 * eps)
        assert fd == pytest.approx(f.gradient(x)[0], rel=1e-6, abs=1e-8)


def test_separable_sum_inequalities():
    rng = np.random.default_rng(4)
    spec = ConvexitySpec(1.0, 6.0)
    for _ in range(200):
        n, d = rng.integers(2, 7), rng.integers(1, 4)
        fs = []
        for _ in range(n):
            phi1, phi2, nu = sample_random_params(rng, spec, 1.0, 1, d)
            fs.append(PiecewiseQuadratic(phi1[0], phi2[0], nu[0], spec))
        x, y = rng.normal(size=(2, n, d)) * 3
        gx = np.stack([f.gradient(xi) for f, xi in zip(fs, x)])
        gy = np.stack([f.gradient(yi) for f, yi in zip(fs, y)])
        diff, gdiff = (x - y).ravel(), (gx - gy).ravel()
        assert np.linalg.norm(gdiff) <= spec.beta * np.linalg.norm(diff) * (1 + 1e-12)
        assert gdiff @ diff >= spec.alpha * (diff @ diff) * (1 - 1e-12)
