"""Solve on an increasing family of balls and check the uniform estimates.

Grids share one spacing, so the node set of each ball contains the previous
one and a zero-extended solution is an admissible field on the next ball.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .domain import Field, HypothesisParams, as_values, build_grid, seminorm_gradient, seminorm_p
from .energy import EnergyContext, build_context, energy
from .errors import HypothesisError, SolverError
from .model import F_eval, NonlinearitySpec, WeightSpec, f_eval
from .solvers import (SolveReport, bump, estimate_constant, find_endpoint, minimize_coercive,
                      mountain_pass_solve, mp_geometry, ps_boundedness_certificate, seed_scale,
                      sphere_check)

__all__ = [
    "BallEntry",
    "ExhaustionReport",
    "run_exhaustion",
    "uniform_bound",
    "largest_root",
    "nontriviality_functional",
    "distributional_residual",
    "lp_norm",
]

log = logging.getLogger(__name__)


@dataclass
class BallEntry:
    radius: float
    level: float
    seminorm_p: float
    neg_part: float
    T: float
    iterations: int
    gradient_norm: float
    lp_norm: float
    ps_slack: float | None = None

    def as_dict(self) -> dict:
        return {
            "R": self.radius,
            "level": self.level,
            "seminorm_p": self.seminorm_p,
            "neg_part": self.neg_part,
            "T": self.T,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "lp_norm": self.lp_norm,
            "ps_slack": self.ps_slack,
        }


@dataclass
class ExhaustionReport:
    regime: str
    entries: list[BallEntry]
    constants: dict
    verdicts: dict
    limit: Field
    solutions: list[Field] = field(repr=False)
    residual: dict = field(default_factory=dict)
    sphere: list = field(default_factory=list)
    traces: list = field(default_factory=list, repr=False)

    @property
    def radii(self) -> list[float]:
        return [e.radius for e in self.entries]

    @property
    def levels(self) -> list[float]:
        return [e.level for e in self.entries]


def largest_root(a: float, A: float, C: float, B: float, level: float) -> float:
    """Largest ``t >= 0`` with ``a t^A - C t^B = level`` (``a > 0``, ``A > B``, ``C >= 0``)."""
    if not (a > 0 and A > B and C >= 0):
        raise HypothesisError("largest_root needs a > 0, A > B and C >= 0")
    if C == 0:
        if level < 0:
            raise HypothesisError("level below the minimum of the left-hand side")
        return (level / a) ** (1.0 / A)
    lhs = lambda t: a * t**A - C * t**B - level  # noqa: E731
    # left side decreases then increases; its minimizer for B > 0
    if B > 0:
        tmin = (C * B / (a * A)) ** (1.0 / (A - B))
    else:
        tmin = 0.0
    if B > 0 and lhs(tmin) > 0:
        raise HypothesisError(
            f"level {level:g} lies below the minimum {lhs(tmin) + level:g} of the bounding polynomial"
        )
    lo = tmin if tmin > 0 else 1e-300
    if lhs(lo) > 0:
        # B <= 0: left side is increasing from -inf
        lo = 1e-300
    hi = max(2 * lo, 1.0)
    while lhs(hi) < 0:
        hi *= 2.0
    return brentq(lhs, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def uniform_bound(c1: float, params: HypothesisParams, C_omega: float) -> float:
    """Radius ``M`` of the ball in which every solution's seminorm root must lie.

    Superlinear: largest root of ``(1/p - 1/(q+1)) t^p - C t^m = c1``.
    Sublinear: largest root of ``t^p / p - C t^(q+1) = c1`` (``c1 < 0``).
    """
    if C_omega < 0:
        raise HypothesisError("C_omega must be nonnegative")
    p, q = params.p, params.q
    if params.superlinear:
        return largest_root(1.0 / p - 1.0 / (q + 1.0), p, C_omega, params.m, c1)
    return largest_root(1.0 / p, p, C_omega, q + 1.0, c1)


def nontriviality_functional(u: Field, weight: WeightSpec, spec: NonlinearitySpec,
                             params: HypothesisParams) -> float:
    """``sum over nodes in Omega of phi (f(u^+) u / p - F(u^+)) vol``."""
    grid = u.grid
    v = u.values
    vp = np.maximum(v, 0.0)
    inside = weight.Omega.contains(grid.nodes)
    phi = weight.phi(grid.nodes)
    integrand = phi * (f_eval(spec, vp) * v / params.p - F_eval(spec, vp))
    return float(np.sum(np.where(inside, integrand, 0.0) * grid.volumes))


def lp_norm(u: Field, p: float) -> float:
    return float(np.sum(np.abs(u.values) ** p * u.grid.volumes) ** (1.0 / p))


def residual_probes(ctx: EnergyContext, count: int, seed: int = 0, ring: float | None = None):
    """Bump probes supported in ``|x| <= R - ring`` (default ring: two cells)."""
    grid = ctx.grid
    ring = 2 * grid.spacing if ring is None else ring
    reach = grid.radius - ring
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        width = rng.uniform(2 * grid.spacing, max(2 * grid.spacing, reach / 2))
        dist = rng.uniform(0, max(reach - width, 0.0))
        direction = rng.standard_normal(grid.dim)
        center = dist * direction / np.linalg.norm(direction)
        out.append(bump(ctx, center=center, radius=width))
    return out


def distributional_residual(u, ctx: EnergyContext, probe_count: int = 16, *, seed: int = 0,
                            probes=None, ring: float | None = None) -> dict:
    """Weak-form defect ``|<(-Delta)_p^s u, psi> - sum phi f(u^+) psi vol|`` over bump probes."""
    v = as_values(u, ctx.kernel.size)
    grid = ctx.grid
    ring = 2 * grid.spacing if ring is None else ring
    if probes is None:
        probes = residual_probes(ctx, probe_count, seed, ring)
    edge = grid.norms() > grid.radius - ring
    lhs = seminorm_gradient(ctx.kernel, v)
    source = ctx.phi * f_eval(ctx.nonlinearity, np.maximum(v, 0.0)) * grid.volumes
    defects, scaled = [], []
    for psi in probes:
        psi = as_values(psi, ctx.kernel.size)
        if np.any(psi[edge] != 0):
            raise HypothesisError("probe support touches the boundary ring")
        d = abs(float(lhs @ psi) - float(source @ psi))
        defects.append(d)
        scaled.append(d / max(float(np.sum(np.abs(psi))), np.finfo(float).tiny))
    defects = np.asarray(defects)
    return {
        "probes": len(defects),
        "max": float(np.max(defects)) if len(defects) else 0.0,
        "mean": float(np.mean(defects)) if len(defects) else 0.0,
        "max_per_l1": float(np.max(scaled)) if len(scaled) else 0.0,
    }


def run_exhaustion(config, progress=None) -> ExhaustionReport:
    """Solve on every configured ball and evaluate the chain checks.

    ``config`` is a :class:`fracpvar.config.RunConfig`.  ``progress`` receives
    ``(radius, iteration, value, gradient_norm)``.
    """
    params = config.params
    radii = list(config.radii)
    if not radii:
        raise HypothesisError("at least one radius is required")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise HypothesisError("radii must be strictly increasing")
    grids = [build_grid(R, config.spacing, params.dim) for R in radii]
    if config.weight.Omega.outer_radius > radii[0]:
        raise HypothesisError("Omega must lie inside the smallest ball")
    ctxs = [build_context(g, params, config.weight, config.nonlinearity, threads=config.threads)
            for g in grids]
    largest = ctxs[-1]
    slack = config.slack
    sol = config.solver
    constants: dict = {"slack": slack}
    zeta_small = bump(ctxs[0])
    if not np.any(zeta_small):
        raise SolverError("bump vanishes on the grid; omega is too small for this spacing")

    if params.superlinear:
        C_est = estimate_constant(largest, params.q + 1, sol.probes, sol.seed)
        C_est *= max(1.0, params.c_growth / (params.q + 1))
        rho, r = mp_geometry(C_est, params)
        psi_small, t0 = find_endpoint(ctxs[0], zeta_small, rho)
        zeta_large = grids[-1].embed(zeta_small, grids[0])
        while seminorm_p(largest.kernel, t0 * zeta_large) ** (1 / params.p) <= rho:
            t0 *= 2.0
        psi_small = t0 * zeta_small
        phi_sup = float(np.max(np.abs(largest.phi[config.weight.Omega.contains(grids[-1].nodes)])))
        C_omega = params.C_f3 * phi_sup * estimate_constant(largest, params.m, sol.probes, sol.seed,
                                                            weighted=False)
        constants.update({"C_est": C_est, "rho": rho, "r": r, "t0": t0, "C_omega": C_omega})
    else:
        tau = seed_scale(ctxs[0], zeta_small)
        cap = energy(ctxs[0], tau * zeta_small)
        C_omega = (params.c_growth / (params.q + 1)) * estimate_constant(largest, params.q + 1,
                                                                        sol.probes, sol.seed)
        constants.update({"tau": tau, "cap": cap, "C_omega": C_omega})

    entries, solutions, sphere, traces = [], [], [], []
    prev: tuple | None = None
    for R, grid, ctx in zip(radii, grids, ctxs):
        log.info("solving on B(0, %g): %d nodes", R, grid.size)
        trace: list = []
        cb = (lambda it, val, gn, R=R: progress(R, it, val, gn)) if progress else None
        warm = grid.embed(prev[0], prev[1]) if (prev is not None and config.warm_start) else None
        try:
            if params.superlinear:
                psi = grid.embed(psi_small, grids[0])
                rep = mountain_pass_solve(ctx, psi, sol.path_nodes, sol.tol, r=r, seed=warm,
                                          max_sweeps=sol.max_sweeps, string_sweeps=sol.string_sweeps,
                                          progress=cb)
                sphere.append({"R": R, **sphere_check(ctx, rho, r, sol.sphere_samples, sol.seed)})
            else:
                zeta = bump(ctx)
                rep = minimize_coercive(ctx, warm, sol.tol, max_steps=sol.max_steps, progress=cb,
                                        zeta=zeta)
        except (SolverError, HypothesisError) as exc:
            raise type(exc)(f"ball R={R:g}: {exc}") from exc
        trace.extend(rep.history)
        traces.append((R, trace))
        entries.append(_entry(ctx, rep, R, config))
        solutions.append(rep.solution)
        prev = (rep.solution.values, grid)

    M = uniform_bound(entries[0].level if params.superlinear else constants["cap"], params, C_omega)
    constants["M"] = M
    verdicts = _verdicts(params, entries, constants, sphere, slack)
    residual = distributional_residual(solutions[-1], largest, sol.residual_probes, seed=sol.seed)
    return ExhaustionReport(params.regime, entries, constants, verdicts, solutions[-1], solutions,
                            residual, sphere, traces)


def _entry(ctx: EnergyContext, rep: SolveReport, R: float, config) -> BallEntry:
    params = ctx.params
    u = rep.solution
    ps = ps_boundedness_certificate(ctx, u, rep.level) if params.superlinear else None
    return BallEntry(
        radius=float(R),
        level=rep.level,
        seminorm_p=rep.seminorm_p_value,
        neg_part=rep.negative_part_certificate,
        T=nontriviality_functional(u, config.weight, config.nonlinearity, params),
        iterations=rep.iterations,
        gradient_norm=rep.gradient_norm,
        lp_norm=lp_norm(u, params.p),
        ps_slack=ps,
    )


def _verdicts(params, entries, constants, sphere, slack) -> dict:
    p = params.p
    levels = [e.level for e in entries]
    roots = [e.seminorm_p ** (1.0 / p) for e in entries]
    M = constants["M"]
    out = {
        "nonnegative": all(e.neg_part <= 1e-10 for e in entries),
        "uniformly_bounded": all(t <= M + slack for t in roots),
    }
    if params.superlinear:
        r = constants["r"]
        out["monotone"] = (
            None if len(entries) < 2 else all(b <= a + slack for a, b in zip(levels, levels[1:]))
        )
        out["above_r"] = all(c >= r - slack for c in levels)
        out["sphere_check"] = all(s["passed"] for s in sphere)
        out["T_dominates_level"] = all(e.T >= e.level - slack for e in entries)
        out["nontrivial"] = min(e.T for e in entries) > 0
        out["T_above_half_r"] = min(e.T for e in entries) >= r / 2
        out["ps_bounded"] = all(e.ps_slack <= slack for e in entries)
    else:
        cap = constants["cap"]
        out["below_cap"] = cap < 0 and all(c <= cap for c in levels)
        out["monotone"] = (
            None if len(entries) < 2 else all(b <= a + slack for a, b in zip(levels, levels[1:]))
        )
    return out
