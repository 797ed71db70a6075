"""Critical points of the truncated energy on one ball.

Two regimes:

* sublinear growth (``q + 1 < p``): the energy is coercive and bounded below;
  :func:`minimize_coercive` runs Armijo gradient descent to its global minimum.
* superlinear growth (``q + 1 > p``): the energy has mountain-pass geometry;
  :func:`mountain_pass_solve` deforms a path from ``0`` to a low-energy
  endpoint ``psi`` and then refines the path maximum to a saddle point.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .domain import Field, as_values, seminorm_p
from .energy import EnergyContext, energy, gradient, negative_part_seminorm
from .errors import HypothesisError, SolverError
from .model import f_eval

__all__ = [
    "SolveReport",
    "MountainPassPath",
    "bump",
    "seed_scale",
    "minimize_coercive",
    "estimate_constant",
    "mp_geometry",
    "sphere_check",
    "find_endpoint",
    "mountain_pass_solve",
    "ps_boundedness_certificate",
]

log = logging.getLogger(__name__)

ARMIJO_C = 1e-4
BACKTRACK = 0.5
MAX_BACKTRACKS = 60
MAX_DESCENT_STEPS = 100_000
MAX_PATH_SWEEPS = 10_000
NEGATIVE_PART_TOL = 1e-10
ROUNDOFF_ULPS = 8
SAFETY_FACTOR = 2.0
RHO_FACTOR = 0.9

Progress = Callable[[int, float, float], None]


@dataclass
class SolveReport:
    solution: Field
    energy_value: float
    level: float
    gradient_norm: float
    seminorm_p_value: float
    negative_part_certificate: float
    iterations: int
    regime: str
    history: list = field(default_factory=list, repr=False)
    extras: dict = field(default_factory=dict)
    path: "MountainPassPath | None" = field(default=None, repr=False)
    path_max_history: list = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {
            "regime": self.regime,
            "energy": self.energy_value,
            "level": self.level,
            "gradient_norm": self.gradient_norm,
            "seminorm_p": self.seminorm_p_value,
            "negative_part_certificate": self.negative_part_certificate,
            "iterations": self.iterations,
            **self.extras,
        }


@dataclass
class MountainPassPath:
    """Nodes ``gamma(t_k)``; the first is pinned at 0 and the last at ``psi``."""

    nodes: np.ndarray  # (P+1, M)
    energies: np.ndarray  # (P+1,)

    @property
    def max_index(self) -> int:
        # np.argmax returns the lowest index on ties
        return 1 + int(np.argmax(self.energies[1:-1]))

    @property
    def max_energy(self) -> float:
        return float(self.energies[self.max_index])


def bump(ctx: EnergyContext, center=None, radius: float | None = None) -> np.ndarray:
    """``(1 - (|x - c| / r)^2)_+^2`` centred in omega (default: omega's centre and inradius)."""
    omega = ctx.weight.omega
    c = np.asarray(omega.center if center is None else center, dtype=float)
    r = omega.inradius if radius is None else radius
    d2 = np.sum((ctx.grid.nodes - c) ** 2, axis=1) / r**2
    return np.maximum(1.0 - d2, 0.0) ** 2


def _max_norm(g: np.ndarray) -> float:
    return float(np.max(np.abs(g))) if g.size else 0.0


def seed_scale(ctx: EnergyContext, zeta: np.ndarray, kmax: int = 40) -> float:
    """Largest ``t = 2^-k`` (k = 0..kmax) with ``J(t zeta) < 0``."""
    for k in range(kmax + 1):
        t = 2.0**-k
        if energy(ctx, t * zeta) < 0:
            return t
    raise SolverError("no negative-energy seed: J(2^-k zeta) >= 0 for k = 0..%d" % kmax)


def _descend(ctx: EnergyContext, evaluate, u0: np.ndarray, value0: float, tol: float,
             max_steps: int, progress: Progress | None, history: list, offset: int = 0):
    """Steepest descent with Barzilai-Borwein trial steps and Armijo backtracking.

    ``evaluate(x)`` maps a trial point to ``(point, value)``; the gradient is taken
    at the returned point.  Once the Armijo decrease ``c alpha |g|^2`` drops
    below the rounding level of the value, a step is also accepted if the value
    moves by at most a few ulps and the gradient max-norm decreases.
    """
    u, J = u0, value0
    g = gradient(ctx, u)
    alpha = 1.0 / max(_max_norm(g), 1.0)
    prev = None
    for it in range(max_steps + 1):
        gn = _max_norm(g)
        history.append((offset + it, J, gn))
        if progress:
            progress(offset + it, J, gn)
        if gn <= tol:
            return u, J, g, it
        if it == max_steps:
            break
        if prev is not None:
            ds, dg = u - prev[0], g - prev[1]
            sy, ss = float(ds @ dg), float(ds @ ds)
            if sy > 0 and ss > 0:
                alpha = ss / sy
            else:
                alpha = 2.0 * alpha
        gg = float(g @ g)
        roundoff = ROUNDOFF_ULPS * np.finfo(float).eps * max(abs(J), 1.0)
        accepted = None
        for _ in range(MAX_BACKTRACKS):
            cand, val = evaluate(u - alpha * g)
            if math.isfinite(val):
                if val <= J - ARMIJO_C * alpha * gg:
                    accepted = cand, val, gradient(ctx, cand)
                    break
                if ARMIJO_C * alpha * gg <= roundoff and val <= J + roundoff:
                    gc = gradient(ctx, cand)
                    if _max_norm(gc) < gn:
                        accepted = cand, val, gc
                        break
            alpha *= BACKTRACK
        if accepted is None:
            raise SolverError(
                f"line search failed at step {offset + it}: no decrease (value={J:.17g}, |g|={gn:.3g})"
            )
        prev = (u, g)
        u, J, g = accepted
    raise SolverError(f"iteration cap {max_steps} reached (|g|={_max_norm(g):.3g} > {tol:g})")


def minimize_coercive(ctx: EnergyContext, init=None, tol: float = 1e-8, *,
                      max_steps: int = MAX_DESCENT_STEPS, progress: Progress | None = None,
                      zeta: np.ndarray | None = None) -> SolveReport:
    """Global minimizer of the coercive (sublinear) energy.

    Starts from ``init`` or, by default, from ``tau * zeta`` with the bump ``zeta``
    and the first scale ``tau = 2^-k`` of negative energy.  A start that is
    already a critical point with nonnegative energy (e.g. ``u = 0``) is replaced
    by the seeded bump.
    """
    params = ctx.params
    if params.superlinear:
        raise HypothesisError("minimize_coercive needs the sublinear regime (q + 1 < p)")
    if tol <= 0:
        raise HypothesisError("tolerance must be positive")
    zeta = bump(ctx) if zeta is None else zeta
    if not np.any(zeta):
        raise SolverError("bump vanishes on the grid; omega is too small for this spacing")
    tau = seed_scale(ctx, zeta)
    seed = tau * zeta
    if init is None:
        u0 = seed
    else:
        u0 = as_values(init, ctx.kernel.size).astype(float)
        if energy(ctx, u0) >= 0 and _max_norm(gradient(ctx, u0)) <= tol:
            log.info("start is a trivial critical point; restarting from the seeded bump")
            u0 = seed
    history: list = []
    u, J, g, it = _descend(ctx, lambda x: (x, energy(ctx, x)), u0, energy(ctx, u0), tol,
                           max_steps, progress, history)
    if J >= 0:
        raise SolverError(f"descent ended at nonnegative energy {J:g}")
    report = _report(ctx, u, J, J, g, it, history)
    report.extras.update({"tau": tau, "seed_energy": energy(ctx, seed)})
    _certify_sign(report)
    return report


def _report(ctx, u, J, level, g, it, history) -> SolveReport:
    return SolveReport(
        solution=Field(u, ctx.grid),
        energy_value=float(J),
        level=float(level),
        gradient_norm=_max_norm(g),
        seminorm_p_value=seminorm_p(ctx.kernel, u),
        negative_part_certificate=negative_part_seminorm(ctx.kernel, u),
        iterations=int(it),
        regime=ctx.params.regime,
        history=history,
    )


def _certify_sign(report: SolveReport, tol: float = NEGATIVE_PART_TOL):
    if report.negative_part_certificate > tol:
        raise SolverError(
            f"critical point is not nonnegative: S(u^-) = {report.negative_part_certificate:g} > {tol:g}"
        )


# -- mountain pass ---------------------------------------------------------------


def _probe_fields(ctx: EnergyContext, count: int, seed: int, region=None) -> list[np.ndarray]:
    """Deterministic probe family: the bump family in omega plus random bump sums in ``region``."""
    rng = np.random.default_rng(seed)
    region = ctx.weight.Omega if region is None else region
    omega = ctx.weight.omega
    out = [bump(ctx, radius=omega.inradius * f) for f in (1.0, 0.75, 0.5)]
    out = [z for z in out if np.any(z)]
    c0 = np.asarray(region.center, dtype=float)
    span = region.inradius
    h = ctx.grid.spacing
    for _ in range(count):
        v = np.zeros(ctx.kernel.size)
        for _ in range(int(rng.integers(1, 4))):
            c = c0 + rng.uniform(-span, span, size=c0.size)
            r = rng.uniform(2 * h, max(2 * h, span))
            v += rng.uniform(0.2, 1.0) * bump(ctx, center=c, radius=r)
        if np.any(v):
            out.append(v)
    return out


def estimate_constant(ctx: EnergyContext, exponent: float, count: int = 200, seed: int = 0,
                      region=None, weighted: bool = True) -> float:
    """Empirical ``sup sum_region phi^+ |u|^exponent vol / S(u)^(exponent/p)`` times the safety factor.

    With ``weighted=False`` the weight is replaced by 1 on the region.
    """
    region = ctx.weight.Omega if region is None else region
    inside = region.contains(ctx.grid.nodes)
    wts = (np.maximum(ctx.phi, 0.0) if weighted else np.ones_like(ctx.phi)) * inside * ctx.grid.volumes
    best = 0.0
    for v in _probe_fields(ctx, count, seed, region):
        S = seminorm_p(ctx.kernel, v)
        if S <= 0:
            continue
        best = max(best, float(np.sum(wts * np.abs(v) ** exponent)) / S ** (exponent / ctx.p))
    if best <= 0:
        raise SolverError("constant estimate is zero: weight has no positive mass on the probes")
    return SAFETY_FACTOR * best


def mp_geometry(C_est: float, params) -> tuple[float, float]:
    """Sphere radius ``rho`` and energy floor ``r = rho^p / (2p)``."""
    if not C_est > 0:
        raise HypothesisError(f"C_est must be positive, got {C_est}")
    p, q = params.p, params.q
    if not q > p - 1:
        raise HypothesisError("regime violation: mountain-pass geometry needs q > p - 1")
    rho = RHO_FACTOR * (1.0 / (2.0 * p * C_est)) ** (1.0 / (q - p + 1.0))
    return rho, rho**p / (2.0 * p)


def sphere_check(ctx: EnergyContext, rho: float, r: float, count: int = 50, seed: int = 0) -> dict:
    """Energy of random fields rescaled to ``S(u)^(1/p) = rho``."""
    rng = np.random.default_rng(seed)
    probes = _probe_fields(ctx, count // 2, seed + 1)[: count // 2]
    while len(probes) < count:
        probes.append(rng.standard_normal(ctx.kernel.size))
    energies = []
    for v in probes:
        v = v * (rho / seminorm_p(ctx.kernel, v) ** (1.0 / ctx.p))
        energies.append(energy(ctx, v))
    energies = np.asarray(energies)
    return {
        "count": len(energies),
        "min_energy": float(np.min(energies)),
        "passed": bool(np.all(energies >= r * (1 - 1e-6))),
    }


def find_endpoint(ctx: EnergyContext, zeta, rho: float, max_doublings: int = 60) -> tuple[np.ndarray, float]:
    """``psi = t0 zeta`` with ``J(psi) <= 0`` and ``S(psi)^(1/p) > rho``; returns ``(psi, t0)``."""
    z = as_values(zeta, ctx.kernel.size)
    if not np.any(z):
        raise HypothesisError("zeta must be nonzero")
    if not np.any((ctx.phi > 0) & (z != 0)):
        raise SolverError("phi <= 0 on the support of zeta: the potential can never beat the seminorm")
    t = 1.0
    for _ in range(max_doublings + 1):
        v = t * z
        if energy(ctx, v) <= 0 and seminorm_p(ctx.kernel, v) ** (1.0 / ctx.p) > rho:
            return v, t
        t *= 2.0
    raise SolverError(f"no endpoint with J(t zeta) <= 0 within {max_doublings} doublings")


def _ray_derivative(ctx: EnergyContext, S: float, v: np.ndarray, t: float) -> float:
    vp = np.maximum(v, 0.0)
    src = ctx.phi * f_eval(ctx.nonlinearity, t * vp) * v * ctx.grid.volumes
    return t ** (ctx.p - 1) * S - float(np.sum(src))


def peak(ctx: EnergyContext, v: np.ndarray) -> tuple[float, float]:
    """Maximize ``t -> J(t v)`` over ``t > 0``; returns ``(t*, J(t* v))`` or ``(inf, inf)``."""
    S = seminorm_p(ctx.kernel, v)
    if S <= 0:
        return math.inf, math.inf
    h = lambda t: _ray_derivative(ctx, S, v, t)  # noqa: E731
    lo, hi = 1.0, 1.0
    if h(1.0) > 0:
        for _ in range(200):
            hi *= 2.0
            if h(hi) < 0:
                break
            lo = hi
        else:
            return math.inf, math.inf
    else:
        for _ in range(200):
            lo *= 0.5
            if h(lo) > 0:
                break
            hi = lo
        else:
            return 0.0, 0.0
    t = brentq(h, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return t, energy(ctx, t * v)


def _reparametrize(nodes: np.ndarray) -> np.ndarray:
    """Equal-arclength redistribution of the interior nodes (endpoints untouched)."""
    seg = np.sqrt(np.sum(np.diff(nodes, axis=0) ** 2, axis=1))
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    total = arc[-1]
    if total <= 0:
        return nodes
    out = nodes.copy()
    targets = np.linspace(0.0, total, nodes.shape[0])
    for k in range(1, nodes.shape[0] - 1):
        j = int(np.searchsorted(arc, targets[k], side="right")) - 1
        j = min(max(j, 0), nodes.shape[0] - 2)
        frac = (targets[k] - arc[j]) / seg[j] if seg[j] > 0 else 0.0
        out[k] = nodes[j] + frac * (nodes[j + 1] - nodes[j])
    return out


def _string_phase(ctx: EnergyContext, path: MountainPassPath, sweeps: int, stall: float,
                  floor: float, progress: Progress | None, history: list, max_history: list):
    """Armijo descent of every positive-energy interior node, then reparametrization.

    Nodes follow the gradient component normal to the path (the tangential part
    is what the reparametrization controls).
    Each node moves at most half the distance to its nearer neighbour, so the
    polygon keeps resolving the ridge; a reparametrization that would raise the
    node maximum is discarded.
    """
    K = path.nodes.shape[0]
    alphas = np.ones(K)
    grads = np.array([gradient(ctx, v) for v in path.nodes])
    psi_bits = path.nodes[-1].tobytes()
    last = path.max_energy
    for sweep in range(1, sweeps + 1):
        nodes = path.nodes.copy()
        energies = path.energies.copy()
        seg = np.sqrt(np.sum(np.diff(path.nodes, axis=0) ** 2, axis=1))
        for k in range(1, K - 1):
            tangent = path.nodes[k + 1] - path.nodes[k - 1]
            tn = float(tangent @ tangent)
            g = grads[k]
            if tn > 0:
                g = g - (float(g @ tangent) / tn) * tangent
            gg = float(g @ g)
            # nodes already below the ridge stay put; the energy is unbounded below there
            if gg == 0.0 or energies[k] <= 0.0:
                continue
            a = min(alphas[k] * 2.0, 0.5 * min(seg[k - 1], seg[k]) / math.sqrt(gg))
            for _ in range(MAX_BACKTRACKS):
                trial = nodes[k] - a * g
                Et = energy(ctx, trial)
                if Et <= energies[k] - ARMIJO_C * a * gg:
                    nodes[k], energies[k] = trial, Et
                    break
                a *= BACKTRACK
            alphas[k] = a
        moved_max = float(np.max(energies[1:-1]))
        redistributed = _reparametrize(nodes)
        re_energies = np.array([energy(ctx, v) for v in redistributed])
        if float(np.max(re_energies[1:-1])) <= moved_max:
            nodes, energies = redistributed, re_energies
        path.nodes, path.energies = nodes, energies
        if path.nodes[0].any() or path.nodes[-1].tobytes() != psi_bits:
            raise SolverError("path endpoints moved")  # structural guard
        grads = np.array([gradient(ctx, v) for v in nodes])
        imax = path.max_index
        gn = _max_norm(grads[imax])
        history.append((sweep, path.max_energy, gn))
        max_history.append(path.max_energy)
        if progress:
            progress(sweep, path.max_energy, gn)
        if path.max_energy < floor or abs(last - path.max_energy) <= stall * abs(last):
            break
        last = path.max_energy
    return path


def mountain_pass_solve(ctx: EnergyContext, psi, path_nodes: int = 33, tol: float = 1e-8, *,
                        r: float | None = None, seed=None, max_sweeps: int = MAX_PATH_SWEEPS,
                        string_sweeps: int = 200, progress: Progress | None = None) -> SolveReport:
    """Mountain-pass critical point between ``0`` and ``psi``.

    ``path_nodes`` counts the path nodes including both pinned endpoints.  The
    string phase deforms the segment ``t psi``; the maximizing node (or
    ``seed``, a warm start, if its ray peak is lower) is then refined by
    Armijo descent of the ray-peak energy ``max_t J(t v)`` until the gradient
    at the peak is below ``tol``.
    """
    params = ctx.params
    if not params.superlinear:
        raise HypothesisError("mountain_pass_solve needs the superlinear regime (q + 1 > p)")
    if path_nodes < 3:
        raise HypothesisError("the path needs at least one interior node (path_nodes >= 3)")
    if tol <= 0:
        raise HypothesisError("tolerance must be positive")
    psi = as_values(psi, ctx.kernel.size).astype(float)
    if energy(ctx, psi) > 0:
        raise HypothesisError("endpoint psi must have nonpositive energy")

    ts = np.linspace(0.0, 1.0, path_nodes)
    nodes = ts[:, None] * psi[None, :]
    nodes[-1] = psi
    path = MountainPassPath(nodes, np.array([energy(ctx, v) for v in nodes]))
    initial_max = path.max_energy
    history: list = [(0, initial_max, _max_norm(gradient(ctx, path.nodes[path.max_index])))]
    max_history = [initial_max]
    if progress:
        progress(*history[0])
    floor = r if r is not None else 0.0
    path = _string_phase(ctx, path, min(string_sweeps, max_sweeps), 1e-10, floor, progress,
                         history, max_history)
    sweeps_used = len(history) - 1

    start = path.nodes[path.max_index]
    t_start, phi_start = peak(ctx, start)
    if seed is not None:
        sv = as_values(seed, ctx.kernel.size).astype(float)
        t_seed, phi_seed = peak(ctx, sv)
        if phi_seed < phi_start:
            start, t_start, phi_start = sv, t_seed, phi_seed
    if not math.isfinite(phi_start):
        raise SolverError("path maximum has no finite ray peak")
    def on_peak(x):
        t, val = peak(ctx, x)
        return (t * x if math.isfinite(t) else x), val

    w, level, g, it = _descend(ctx, on_peak, t_start * start, phi_start, tol,
                               max_sweeps - sweeps_used, progress, history, sweeps_used)
    if r is not None and level < r - tol:
        raise SolverError(f"level {level:g} collapsed below r = {r:g}; C_est/rho misestimated")
    report = _report(ctx, w, level, level, g, sweeps_used + it, history)
    report.extras.update({
        "initial_path_max": initial_max,
        "string_sweeps": sweeps_used,
        "refinement_steps": it,
    })
    report.path = path
    report.path_max_history = max_history
    _certify_sign(report)
    return report


def ps_boundedness_certificate(ctx: EnergyContext, u, c_level: float, C_n: float | None = None) -> float:
    """Slack ``(1/p - 1/(q+1)) S(u) - C_n S(u)^(m/p) - c_level``.

    Nonpositive slack means ``u`` lies inside the a-priori bound that
    Palais-Smale sequences at level ``c_level`` must obey.  ``C_n`` defaults to
    ``C_f3 * max|phi|``.
    """
    params = ctx.params
    if not params.superlinear:
        raise HypothesisError("the Palais-Smale bound is stated for the superlinear regime")
    if C_n is None:
        C_n = params.C_f3 * float(np.max(np.abs(ctx.phi)))
    S = seminorm_p(ctx.kernel, u)
    p, q, m = params.p, params.q, params.m
    return (1.0 / p - 1.0 / (q + 1.0)) * S - C_n * S ** (m / p) - c_level

