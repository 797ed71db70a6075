import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracpvar.domain import HypothesisParams, seminorm_p
from fracpvar.energy import energy, gradient
from fracpvar.errors import HypothesisError, SolverError
from fracpvar.model import Region, constant_weight
from fracpvar.solvers import (MountainPassPath, bump, estimate_constant, find_endpoint, minimize_coercive,
                              mountain_pass_solve, mp_geometry, peak, ps_boundedness_certificate,
                              sphere_check)

from conftest import small_context

SUPER = HypothesisParams(2.0, 0.4, 1, 3.0, m=1.5)


def negative_weight():
    return constant_weight(-1.0, Region("ball", (0.0,), radius=0.5), Region("ball", (0.0,), radius=1.0))


# -- mountain-pass geometry ----------------------------------------------------------


def test_mp_geometry_example():
    rho, r = mp_geometry(1.0, SUPER)
    assert rho == pytest.approx(0.45, rel=1e-15)
    assert r == pytest.approx(0.050625, rel=1e-14)


def test_mp_geometry_scaling():
    rho1, _ = mp_geometry(1.0, SUPER)
    rho2, _ = mp_geometry(2.0, SUPER)
    assert rho1 / rho2 == pytest.approx(math.sqrt(2), rel=1e-14)


def test_mp_geometry_rejects():
    with pytest.raises(HypothesisError):
        mp_geometry(0.0, SUPER)
    with pytest.raises(HypothesisError, match="regime"):
        mp_geometry(1.0, HypothesisParams(3.0, 0.3, 1, 1.5))


# -- coercive regime -----------------------------------------------------------------


@pytest.fixture(scope="module")
def sub_ctx():
    return small_context(p=3.0, s=0.3, q=1.5)


def test_minimize_coercive_default(sub_ctx):
    rep = minimize_coercive(sub_ctx)
    assert rep.energy_value < 0
    assert rep.gradient_norm <= 1e-8
    assert rep.negative_part_certificate <= 1e-10
    values = [h[1] for h in rep.history]
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_minimize_coercive_restarts_from_zero(sub_ctx):
    rep = minimize_coercive(sub_ctx, init=np.zeros(sub_ctx.kernel.size))
    assert rep.energy_value < 0


def test_minimize_coercive_no_seed():
    ctx = small_context(p=3.0, s=0.3, q=1.5, weight=negative_weight())
    with pytest.raises(SolverError, match="no negative-energy seed"):
        minimize_coercive(ctx)


def test_minimize_coercive_rejects_superlinear():
    with pytest.raises(HypothesisError):
        minimize_coercive(small_context())


def test_minimize_coercive_is_global_among_starts(sub_ctx, rng):
    best = minimize_coercive(sub_ctx).energy_value
    for _ in range(3):
        init = np.abs(rng.standard_normal(sub_ctx.kernel.size)) * 0.05
        assert minimize_coercive(sub_ctx, init=init).energy_value == pytest.approx(best, rel=1e-6)


# -- superlinear building blocks -----------------------------------------------------


@pytest.fixture(scope="module")
def sup_ctx():
    return small_context()


def test_estimate_and_sphere(sup_ctx):
    C = estimate_constant(sup_ctx, 4.0, 200, 0)
    rho, r = mp_geometry(C, SUPER)
    rep = sphere_check(sup_ctx, rho, r, 50, 0)
    assert rep["count"] == 50 and rep["passed"]
    assert rep["min_energy"] >= r * (1 - 1e-6)


def test_find_endpoint(sup_ctx):
    zeta = bump(sup_ctx)
    psi, t0 = find_endpoint(sup_ctx, zeta, 0.5)
    assert energy(sup_ctx, psi) <= 0
    assert seminorm_p(sup_ctx.kernel, psi) ** 0.5 > 0.5
    assert t0 >= 1 and math.log2(t0) == int(math.log2(t0))


def test_find_endpoint_errors(sup_ctx):
    with pytest.raises(HypothesisError):
        find_endpoint(sup_ctx, np.zeros(sup_ctx.kernel.size), 0.5)
    neg = small_context(weight=negative_weight())
    with pytest.raises(SolverError):
        find_endpoint(neg, bump(neg), 0.5)


def test_peak_is_ray_maximum(sup_ctx):
    v = bump(sup_ctx)
    t, val = peak(sup_ctx, v)
    for f in (0.9, 0.99, 1.01, 1.1):
        assert energy(sup_ctx, f * t * v) <= val
    assert gradient(sup_ctx, t * v) @ v == pytest.approx(0.0, abs=1e-9)


def test_path_max_index_ties():
    path = MountainPassPath(np.zeros((5, 2)), np.array([0.0, 2.0, 3.0, 3.0, -1.0]))
    assert path.max_index == 2


@pytest.fixture(scope="module")
def mp_run(sup_ctx):
    C = estimate_constant(sup_ctx, 4.0)
    rho, r = mp_geometry(C, SUPER)
    psi, _ = find_endpoint(sup_ctx, bump(sup_ctx), rho)
    return mountain_pass_solve(sup_ctx, psi, 33, 1e-8, r=r), psi, r


def test_mountain_pass_converges(mp_run):
    rep, psi, r = mp_run
    assert rep.gradient_norm <= 1e-8
    assert rep.level >= r
    assert rep.negative_part_certificate <= 1e-10
    assert np.all(rep.solution.values >= -1e-10)


def test_mountain_pass_endpoints_pinned(mp_run):
    rep, psi, _ = mp_run
    assert not rep.path.nodes[0].any()
    assert rep.path.nodes[-1].tobytes() == psi.tobytes()


def test_mountain_pass_level_dominance(mp_run):
    rep, _, _ = mp_run
    hist = rep.path_max_history
    assert all(b <= a for a, b in zip(hist, hist[1:]))
    assert rep.level <= rep.extras["initial_path_max"]


def test_mountain_pass_is_critical_point(mp_run, sup_ctx):
    rep, _, _ = mp_run
    assert np.max(np.abs(gradient(sup_ctx, rep.solution.values))) <= 1e-8


def test_mountain_pass_errors(sup_ctx):
    psi, _ = find_endpoint(sup_ctx, bump(sup_ctx), 0.5)
    with pytest.raises(HypothesisError):
        mountain_pass_solve(sup_ctx, psi, 2)
    with pytest.raises(HypothesisError):
        mountain_pass_solve(sup_ctx, 0.01 * psi, 33)
    with pytest.raises(HypothesisError):
        mountain_pass_solve(small_context(p=3.0, s=0.3, q=1.5), psi, 33)


def test_mountain_pass_rejects_high_floor(sup_ctx):
    psi, _ = find_endpoint(sup_ctx, bump(sup_ctx), 0.5)
    with pytest.raises(SolverError, match="collapsed below r"):
        mountain_pass_solve(sup_ctx, psi, 9, 1e-8, r=1e6)


# -- Palais-Smale certificate --------------------------------------------------------


def test_ps_certificate_zero(sup_ctx):
    assert ps_boundedness_certificate(sup_ctx, np.zeros(sup_ctx.kernel.size), 3.0) == -3.0


def test_ps_certificate_solution(mp_run, sup_ctx):
    rep, _, _ = mp_run
    assert ps_boundedness_certificate(sup_ctx, rep.solution.values, rep.level) <= 1e-8


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_ps_certificate_large_fields(seed):
    ctx = small_context(radius=1.0)
    u = 1e4 * np.random.default_rng(seed).standard_normal(ctx.kernel.size)
    assert ps_boundedness_certificate(ctx, u, 10.0) > 0
