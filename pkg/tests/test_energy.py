import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracpvar.domain import HypothesisParams, build_grid, build_kernel, exterior_weight
from fracpvar.energy import EnergyContext, build_context, energy, gradient, negative_part_seminorm
from fracpvar.errors import HypothesisError
from fracpvar.model import Region, constant_weight, power

from conftest import plateau_1d

KAPPA = exterior_weight(-0.5, 1.0, 0.5)


@pytest.fixture
def two_node():
    # p = 2, sp = 0.5; params only carry p here, so q is any admissible value
    kernel = build_kernel(build_grid(1, 1, 1), p=2.0, s=0.25)
    params = HypothesisParams(2.0, 0.25, 1, 2.5, m=1.5)
    return EnergyContext(kernel, np.ones(2), power(3.0), params)


def test_energy_zero(two_node):
    assert energy(two_node, [0.0, 0.0]) == 0.0


def test_energy_two_node(two_node):
    assert energy(two_node, [1.0, 0.0]) == pytest.approx(0.5 * (2 + KAPPA) - 0.25, rel=1e-14)
    assert energy(two_node, [1.0, 0.0]) == pytest.approx(5.2114, abs=1e-4)


def test_energy_truncates_negative_values(two_node):
    assert energy(two_node, [-1.0, 0.0]) == pytest.approx(0.5 * (2 + KAPPA), rel=1e-14)
    assert energy(two_node, [-1.0, 0.0]) == pytest.approx(5.4614, abs=1e-4)


def test_gradient_two_node(two_node):
    g = gradient(two_node, [1.0, 0.0])
    np.testing.assert_allclose(g, [2 + KAPPA - 1, -2.0], rtol=1e-14)
    assert g[0] == pytest.approx(9.9228, abs=1e-4)


def test_gradient_zero_at_origin():
    ctx = build_context(build_grid(2, 0.125, 1), HypothesisParams(2.0, 0.4, 1, 3.0, m=1.5), plateau_1d(),
                        power(3.0))
    assert np.all(gradient(ctx, np.zeros(ctx.kernel.size)) == 0)


def test_energy_shape_mismatch(two_node):
    with pytest.raises(HypothesisError):
        energy(two_node, [1.0, 0.0, 0.0])


def test_gradient_needs_regularization_below_two():
    params = HypothesisParams(1.5, 0.3, 1, 0.2)
    grid = build_grid(1, 0.125, 1)
    ctx = build_context(grid, params, plateau_1d(), power(0.2))
    with pytest.raises(HypothesisError):
        gradient(ctx, np.ones(grid.size))
    ctx = build_context(grid, params, plateau_1d(), power(0.2), regularize=True)
    assert np.all(np.isfinite(gradient(ctx, np.ones(grid.size))))


def test_context_rejects_dimension_mismatch():
    w2 = constant_weight(1.0, Region("ball", (0.0, 0.0), radius=0.5), Region("ball", (0.0, 0.0), radius=1.0))
    with pytest.raises(HypothesisError):
        build_context(build_grid(1, 0.25, 1), HypothesisParams(2.0, 0.4, 1, 3.0, m=1.5), w2, power(3.0))


def _fd_check(ctx, rng, fields=5, directions=5, h=1e-6):
    worst = 0.0
    for _ in range(fields):
        u = rng.standard_normal(ctx.kernel.size)
        g = gradient(ctx, u)
        for _ in range(directions):
            v = rng.standard_normal(ctx.kernel.size)
            fd = (energy(ctx, u + h * v) - energy(ctx, u - h * v)) / (2 * h)
            worst = max(worst, abs(g @ v - fd) / max(abs(fd), 1e-300))
    return worst


def test_gradient_matches_finite_differences_p3(rng):
    ctx = build_context(build_grid(2, 0.125, 1), HypothesisParams(3.0, 0.3, 1, 1.5), plateau_1d(), power(1.5))
    assert _fd_check(ctx, rng, 20, 1) < 1e-6


def test_gradient_matches_finite_differences_2d(rng):
    w = constant_weight(1.0, Region("ball", (0.0, 0.0), radius=0.5), Region("ball", (0.0, 0.0), radius=1.0))
    params = HypothesisParams(2.5, 0.3, 2, 2.0, m=1.5)
    ctx = build_context(build_grid(1, 0.25, 2), params, w, power(2.0))
    assert _fd_check(ctx, rng) < 1e-6


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([2.0, 2.5, 3.0, 4.5]))
def test_gradient_directional_derivative(seed, p):
    params = HypothesisParams(p, 0.2, 1, p - 1.5 if p > 2 else 0.4)
    ctx = build_context(build_grid(1, 0.125, 1), params, plateau_1d(), power(params.q))
    assert _fd_check(ctx, np.random.default_rng(seed), 2, 2) < 1e-5


def test_negative_part_seminorm():
    kernel = build_kernel(build_grid(1, 0.25, 1), p=2.0, s=0.4)
    u = np.array([1.0, 0.5, 2.0, 0.0, 0.0, 3.0, 1.0, 0.2])
    assert negative_part_seminorm(kernel, u) == 0.0
    u[2] = -1.0
    assert negative_part_seminorm(kernel, u) > 0
