"""Sanity instruments: Pohozaev residual and sign test, negative-part fuzzer, Sobolev ratio."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .domain import Field, Grid, HypothesisParams, KernelOperator, seminorm_p
from .errors import HypothesisError
from .model import F_eval, NonlinearitySpec, WeightSpec, f_eval

__all__ = [
    "pohozaev_residual",
    "pohozaev_sign_test",
    "SignVerdict",
    "Exponents",
    "fuzz_negative_part_inequality",
    "sobolev_ratio",
    "FIXED_POSITIVE",
    "FIXED_NEGATIVE",
    "MIXED",
]

FIXED_POSITIVE = "FIXED_POSITIVE"
FIXED_NEGATIVE = "FIXED_NEGATIVE"
MIXED = "MIXED"

RING_POINTS = 64
FUZZ_RANGE = 10.0
FUZZ_SLACK = 1e-12
FUZZ_CHUNK = 1 << 16


def pohozaev_residual(u: Field, weight: WeightSpec, spec: NonlinearitySpec,
                      params: HypothesisParams) -> float:
    """Discrete ``sum [(N-sp) phi f(u)u - pN phi F(u) - p (x . grad phi) F(u)] vol``.

    Reported as data only; the identity is formal away from ``p = 2``.
    """
    grid = u.grid
    x = grid.nodes
    v = np.maximum(u.values, 0.0)
    phi = weight.phi(x)
    x_grad = np.sum(x * weight.grad(x), axis=1)
    N, p = params.dim, params.p
    fu = f_eval(spec, v) * v
    Fu = F_eval(spec, v)
    integrand = (N - params.sp) * phi * fu - p * N * phi * Fu - p * x_grad * Fu
    return float(np.sum(integrand * grid.volumes))


class Exponents(NamedTuple):
    """Bare exponents for the sign test, which is also meaningful at ``q = p*_s - 1``."""

    p: float
    s: float
    dim: int
    q: float


class SignVerdict(dict):
    """Result of :func:`pohozaev_sign_test`; a dict with ``verdict``, ``min``, ``max``, ``note``."""

    @property
    def verdict(self) -> str:
        return self["verdict"]


def _ring(grid: Grid, radius: float) -> np.ndarray:
    if grid.dim == 1:
        return np.array([[-radius], [radius]])
    theta = 2 * np.pi * np.arange(RING_POINTS) / RING_POINTS
    return radius * np.column_stack([np.cos(theta), np.sin(theta)])


def pohozaev_sign_test(weight: WeightSpec, params: HypothesisParams | Exponents, grid: Grid,
                       spec: NonlinearitySpec | None = None) -> SignVerdict:
    """Sign of ``(N-sp) phi - pN/(q+1) phi - p/(q+1) x . grad phi`` on the grid and an outer ring.

    A fixed sign means no solution is expected in the energy space for the
    pure power nonlinearity; a mixed or vanishing sign gives no conclusion.
    ``params`` may be :class:`Exponents` so the critical exponent can be probed.
    """
    if spec is not None and spec.kind != "power":
        raise HypothesisError("the Pohozaev sign test applies to the power nonlinearity only")
    if weight.dim != grid.dim:
        raise HypothesisError("weight and grid dimensions differ")
    x = np.vstack([grid.nodes, _ring(grid, 2 * grid.radius)])
    N, p, q = params.dim, params.p, params.q
    phi = weight.phi(x)
    x_grad = np.sum(x * weight.grad(x), axis=1)
    sp = params.s * params.p
    if not N > sp:
        raise HypothesisError(f"N > sp violated: N={N}, sp={sp:g}")
    g = (N - sp) * phi - p * N / (q + 1) * phi - p / (q + 1) * x_grad
    scale = max(1.0, float(np.max(np.abs(phi))), float(np.max(np.abs(x_grad))))
    zero = np.abs(g) <= 1e-12 * scale
    gmin, gmax = float(np.min(g)), float(np.max(g))
    note = ""
    if np.all(zero):
        verdict, note = MIXED, "degenerate: zero everywhere (critical exponent case, no conclusion)"
    elif np.all(g[~zero] > 0) and not np.any(zero):
        verdict = FIXED_POSITIVE
    elif np.all(g[~zero] < 0) and not np.any(zero):
        verdict = FIXED_NEGATIVE
    else:
        verdict = MIXED
    return SignVerdict(verdict=verdict, min=gmin, max=gmax, points=int(len(g)), note=note)


def _segno_sides(xi: np.ndarray, eta: np.ndarray, p: float):
    a = np.maximum(-xi, 0.0) - np.maximum(-eta, 0.0)
    d = xi - eta
    e = np.maximum(-eta, 0.0) - np.maximum(-xi, 0.0)
    # |a|^(p-2) a a and |d|^(p-2) d e agree bitwise in the equality case a = -d = -e
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs = np.where(a == 0, 0.0, np.abs(a) ** (p - 2) * a * a)
        rhs = np.where(d == 0, 0.0, np.abs(d) ** (p - 2) * d * e)
    return lhs, rhs


def fuzz_negative_part_inequality(p: float, trials: int, seed: int = 0) -> int:
    """Count samples on ``[-10, 10]^2`` violating ``|xi^- - eta^-|^p <= |xi-eta|^(p-2)(xi-eta)(eta^- - xi^-)``."""
    if not p > 1:
        raise HypothesisError("the inequality needs p > 1")
    if trials < 1:
        raise HypothesisError("trials must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    violations = 0
    done = 0
    while done < trials:
        n = min(FUZZ_CHUNK, trials - done)
        xi, eta = rng.uniform(-FUZZ_RANGE, FUZZ_RANGE, size=(2, n))
        lhs, rhs = _segno_sides(xi, eta, p)
        violations += int(np.count_nonzero(lhs - rhs > FUZZ_SLACK))
        done += n
    return violations


def sobolev_ratio(u: Field, kernel: KernelOperator, params: HypothesisParams) -> float:
    """``||u||_{L^{p*}} / S(u)^{1/p}``; scale invariant."""
    v = u.values
    if not np.any(v):
        raise HypothesisError("the Sobolev ratio is undefined for the zero field")
    ps = params.critical_exponent
    top = float(np.sum(np.abs(v) ** ps * u.grid.volumes)) ** (1.0 / ps)
    return top / seminorm_p(kernel, v) ** (1.0 / params.p)
