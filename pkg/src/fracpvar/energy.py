"""The truncated energy on a ball and its derivative.

    J(u) = S(u)/p - sum_i phi_i F(u_i^+) vol_i

The potential term only sees ``u^+``; negative values enter through the
seminorm alone.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import (Field, Grid, HypothesisParams, KernelOperator, as_values, build_kernel,
                     seminorm_gradient, seminorm_p)
from .errors import HypothesisError
from .model import F_eval, NonlinearitySpec, WeightSpec, f_eval

__all__ = [
    "EnergyContext",
    "build_context",
    "energy",
    "potential",
    "gradient",
    "negative_part_seminorm",
    "REGULARIZATION_EPS",
]

REGULARIZATION_EPS = 1e-8


@dataclass(frozen=True, eq=False)
class EnergyContext:
    kernel: KernelOperator
    phi: np.ndarray
    nonlinearity: NonlinearitySpec
    params: HypothesisParams
    weight: WeightSpec | None = None
    regularize: bool = False

    def __post_init__(self):
        if self.phi.shape != (self.kernel.size,):
            raise HypothesisError("weight values do not match the kernel grid")

    @property
    def grid(self) -> Grid:
        return self.kernel.grid

    @property
    def p(self) -> float:
        return self.params.p

    def field(self, values) -> Field:
        return Field(np.asarray(values, dtype=float), self.grid)


def build_context(grid: Grid, params: HypothesisParams, weight: WeightSpec,
                  nonlinearity: NonlinearitySpec, *, threads: int = 1,
                  regularize: bool = False, kernel: KernelOperator | None = None) -> EnergyContext:
    if weight.dim != grid.dim:
        raise HypothesisError(f"weight lives in dimension {weight.dim}, grid in {grid.dim}")
    if kernel is None:
        kernel = build_kernel(grid, params, threads=threads)
    elif kernel.grid is not grid:
        raise HypothesisError("kernel was built on a different grid")
    phi = weight.phi(grid.nodes)
    phi.setflags(write=False)
    return EnergyContext(kernel, phi, nonlinearity, params, weight, regularize)


def potential(ctx: EnergyContext, u) -> float:
    """``sum_i phi_i F(u_i^+) vol_i``."""
    v = as_values(u, ctx.kernel.size)
    return float(np.sum(ctx.phi * F_eval(ctx.nonlinearity, np.maximum(v, 0.0)) * ctx.grid.volumes))


def energy(ctx: EnergyContext, u) -> float:
    v = as_values(u, ctx.kernel.size)
    return seminorm_p(ctx.kernel, v) / ctx.p - potential(ctx, v)


def gradient(ctx: EnergyContext, u) -> np.ndarray:
    """Euclidean gradient of :func:`energy` with respect to the nodal values."""
    v = as_values(u, ctx.kernel.size)
    if ctx.p < 2 and not ctx.regularize:
        raise HypothesisError("p < 2 requires the regularized gradient (regularize=True)")
    eps = REGULARIZATION_EPS if ctx.p < 2 else 0.0
    source = ctx.phi * f_eval(ctx.nonlinearity, np.maximum(v, 0.0)) * ctx.grid.volumes
    return seminorm_gradient(ctx.kernel, v, eps) - source


def negative_part_seminorm(kernel: KernelOperator, u) -> float:
    """``S(u^-)``: zero exactly when the field is nonnegative."""
    v = as_values(u, kernel.size)
    return seminorm_p(kernel, np.maximum(-v, 0.0))
