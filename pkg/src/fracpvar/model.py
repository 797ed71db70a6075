"""Nonlinearities ``f`` with primitives ``F``, sign-changing weights ``phi``, and
falsifiers for the growth/structure hypotheses.

The verifiers sample ``s`` on a log-spaced grid over ``[1e-6, 1e3]``.  A pass
means no counterexample was found there; a fail carries the witness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .domain import Grid, HypothesisParams
from .errors import HypothesisError

__all__ = [
    "NonlinearitySpec",
    "power",
    "piecewise",
    "tabulated",
    "load_tabulated",
    "f_eval",
    "F_eval",
    "Region",
    "WeightSpec",
    "plateau_weight",
    "constant_weight",
    "CheckReport",
    "sample_points",
    "verify_f2",
    "verify_f3",
    "verify_W",
]

SAMPLE_RANGE = (1e-6, 1e3)
# Relative slack on verifier comparisons; absorbs rounding in f and F.
REL_SLACK = 1e-12


class NonlinearitySpec:
    """A nonnegative nonlinearity on ``[0, inf)`` together with its primitive."""

    def __init__(self, kind: str, f: Callable, F: Callable, *, q=None, m=None, table=None):
        self.kind = kind
        self._f = f
        self._F = F
        self.q = q
        self.m = m
        self.table = table

    def f(self, t):
        return f_eval(self, t)

    def F(self, t):
        return F_eval(self, t)

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.q is not None:
            out["q"] = self.q
        if self.m is not None:
            out["m"] = self.m
        if self.table is not None:
            out["table_points"] = int(len(self.table[0]))
        return out

    def __repr__(self):
        return f"NonlinearitySpec({self.describe()})"


def power(q: float) -> NonlinearitySpec:
    """``f(t) = t^q``."""
    if q < 0:
        raise HypothesisError("power nonlinearity needs q >= 0")
    return NonlinearitySpec(
        "power",
        lambda t: t**q,
        lambda t: t ** (q + 1) / (q + 1),
        q=q,
    )


def piecewise(q: float, m: float) -> NonlinearitySpec:
    """``f = 2 t^q`` on ``[0, 1]`` and ``t^q + t^(m-1)`` on ``[1, inf)``."""
    if q < 0:
        raise HypothesisError("piecewise nonlinearity needs q >= 0")

    def f(t):
        lo = 2.0 * t**q
        with np.errstate(divide="ignore", invalid="ignore"):
            hi = t**q + np.where(t > 0, t, 1.0) ** (m - 1)
        return np.where(t <= 1.0, lo, hi)

    def F(t):
        lo = 2.0 * t ** (q + 1) / (q + 1)
        tt = np.maximum(t, 1.0)
        tail = np.log(tt) if m == 0 else (tt**m - 1.0) / m
        hi = 2.0 / (q + 1) + (tt ** (q + 1) - 1.0) / (q + 1) + tail
        return np.where(t <= 1.0, lo, hi)

    return NonlinearitySpec("piecewise", f, F, q=q, m=m)


def tabulated(s_points, f_points, q: float | None = None) -> NonlinearitySpec:
    """Monotone (PCHIP) interpolation of samples; ``F`` is the exact primitive of the interpolant."""
    s_points = np.asarray(s_points, dtype=float)
    f_points = np.asarray(f_points, dtype=float)
    if s_points.ndim != 1 or s_points.shape != f_points.shape or s_points.size < 2:
        raise HypothesisError("tabulated nonlinearity needs two equal-length 1D sample arrays")
    if np.any(np.diff(s_points) <= 0):
        raise HypothesisError("tabulated nonlinearity: abscissae must be strictly increasing")
    if s_points[0] != 0.0:
        raise HypothesisError("tabulated nonlinearity must start at s = 0")
    interp = PchipInterpolator(s_points, f_points, extrapolate=False)
    prim = interp.antiderivative()
    smax = s_points[-1]

    def _check(t):
        if np.any(t > smax):
            raise HypothesisError(f"tabulated nonlinearity evaluated beyond its table (s > {smax:g})")

    def f(t):
        _check(t)
        return interp(t)

    def F(t):
        _check(t)
        return prim(t) - prim(0.0)

    return NonlinearitySpec("tabulated", f, F, q=q, table=(s_points, f_points))


def load_tabulated(path, q: float | None = None) -> NonlinearitySpec:
    """Two-column CSV ``s, f(s)`` (an optional non-numeric header row is skipped)."""
    rows = []
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    for n, line in enumerate(lines):
        parts = [c.strip() for c in line.split(",")]
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except (ValueError, IndexError):
            if n > 0:
                raise HypothesisError(f"{path}: unparsable table row {line!r}") from None
    if len(rows) < 2:
        raise HypothesisError(f"{path}: a table needs at least two rows")
    arr = np.array(rows)
    return tabulated(arr[:, 0], arr[:, 1], q=q)


def _as_nonneg(t):
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise HypothesisError("nonlinearity evaluated at a negative argument; pass u^+")
    return arr


def f_eval(spec: NonlinearitySpec, t):
    arr = _as_nonneg(t)
    out = np.asarray(spec._f(arr), dtype=float)
    return float(out) if out.ndim == 0 else out


def F_eval(spec: NonlinearitySpec, t):
    arr = _as_nonneg(t)
    out = np.asarray(spec._F(arr), dtype=float)
    return float(out) if out.ndim == 0 else out


# -- geometry ------------------------------------------------------------------


@dataclass(frozen=True)
class Region:
    """A closed ball or axis-aligned box."""

    shape: str
    center: tuple
    radius: float | None = None
    half_widths: tuple | None = None

    def __post_init__(self):
        if self.shape not in ("ball", "box"):
            raise HypothesisError(f"unknown region shape {self.shape!r}")
        if self.shape == "ball" and not (self.radius and self.radius > 0):
            raise HypothesisError("ball region needs a positive radius")
        if self.shape == "box":
            if self.half_widths is None or len(self.half_widths) != len(self.center):
                raise HypothesisError("box region needs one half width per axis")
            if min(self.half_widths) <= 0:
                raise HypothesisError("box half widths must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def inradius(self) -> float:
        return self.radius if self.shape == "ball" else float(min(self.half_widths))

    @property
    def outer_radius(self) -> float:
        """Largest ``|x|`` over the region."""
        c = np.asarray(self.center, dtype=float)
        if self.shape == "ball":
            return float(np.linalg.norm(c) + self.radius)
        far = np.abs(c) + np.asarray(self.half_widths, dtype=float)
        return float(np.linalg.norm(far))

    def describe(self) -> dict:
        out = {"shape": self.shape, "center": list(self.center)}
        if self.shape == "ball":
            out["radius"] = self.radius
        else:
            out["half_widths"] = list(self.half_widths)
        return out

    def contains(self, x: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        rel = x - np.asarray(self.center, dtype=float)
        if self.shape == "ball":
            return np.sqrt(np.sum(rel**2, axis=1)) <= self.radius + tol
        return np.all(np.abs(rel) <= np.asarray(self.half_widths) + tol, axis=1)

    def within(self, other: "Region") -> bool:
        c = np.asarray(self.center, dtype=float)
        oc = np.asarray(other.center, dtype=float)
        if self.shape == "ball" and other.shape == "ball":
            return np.linalg.norm(c - oc) + self.radius <= other.radius + 1e-12
        if other.shape == "box":
            ext = np.full(c.shape, self.radius) if self.shape == "ball" else np.asarray(self.half_widths)
            return bool(np.all(np.abs(c - oc) + ext <= np.asarray(other.half_widths) + 1e-12))
        # box inside ball: the farthest corner decides
        far = np.abs(c - oc) + np.asarray(self.half_widths)
        return np.linalg.norm(far) <= other.radius + 1e-12

    def distance_outside(self, x):
        """Distance to the region (0 inside) and its gradient."""
        rel = x - np.asarray(self.center, dtype=float)
        if self.shape == "ball":
            r = np.sqrt(np.sum(rel**2, axis=1))
            d = np.maximum(r - self.radius, 0.0)
            with np.errstate(invalid="ignore", divide="ignore"):
                g = np.where((d > 0)[:, None], rel / np.where(r > 0, r, 1.0)[:, None], 0.0)
            return d, g
        excess = np.maximum(np.abs(rel) - np.asarray(self.half_widths), 0.0)
        d = np.sqrt(np.sum(excess**2, axis=1))
        safe = np.where(d > 0, d, 1.0)[:, None]
        g = np.where((d > 0)[:, None], np.sign(rel) * excess / safe, 0.0)
        return d, g

    def depth_inside(self, x):
        """Distance to the complement (0 outside) and its gradient."""
        rel = x - np.asarray(self.center, dtype=float)
        if self.shape == "ball":
            r = np.sqrt(np.sum(rel**2, axis=1))
            d = np.maximum(self.radius - r, 0.0)
            g = np.where((d > 0)[:, None], -rel / np.where(r > 0, r, 1.0)[:, None], 0.0)
            return d, g
        slack = np.asarray(self.half_widths) - np.abs(rel)
        k = np.argmin(slack, axis=1)
        d = np.maximum(slack[np.arange(len(x)), k], 0.0)
        g = np.zeros_like(rel)
        g[np.arange(len(x)), k] = -np.sign(rel[np.arange(len(x)), k])
        g[d <= 0] = 0.0
        return d, g


class WeightSpec:
    """Weight ``phi`` with inner set ``omega`` (where it is positive) and outer set ``Omega``."""

    def __init__(self, omega: Region, Omega: Region, kind: str, *, beta: float = 1.0,
                 value: float = 1.0, phi: Callable | None = None, grad: Callable | None = None):
        if omega.dim != Omega.dim:
            raise HypothesisError("omega and Omega live in different dimensions")
        self.omega = omega
        self.Omega = Omega
        self.kind = kind
        self.beta = beta
        self.value = value
        self._phi = phi
        self._grad = grad

    @property
    def dim(self) -> int:
        return self.omega.dim

    def describe(self) -> dict:
        out = {"kind": self.kind, "omega": self.omega.describe(), "Omega": self.Omega.describe()}
        if self.kind == "plateau":
            out["beta"] = self.beta
        elif self.kind == "constant":
            out["value"] = self.value
        return out

    def _plateau(self, x):
        d_in, g_in = self.omega.distance_outside(x)
        d_out, g_out = self.Omega.depth_inside(x)
        total = d_in + d_out
        inside_Omega = self.Omega.contains(x, tol=0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            theta = np.where(total > 0, d_in / total, 0.0)
            dtheta = (g_in * d_out[:, None] - d_in[:, None] * g_out) / np.where(total > 0, total, 1.0)[:, None] ** 2
        theta = np.where(inside_Omega, theta, 1.0)
        theta = np.where(d_in <= 0, 0.0, theta)
        band = (d_in > 0) & (d_out > 0) & inside_Omega
        dtheta = np.where(band[:, None], dtheta, 0.0)
        scale = 1.0 + self.beta
        return 1.0 - scale * theta, -scale * dtheta

    def phi(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "plateau":
            return self._plateau(x)[0]
        if self.kind == "constant":
            return np.full(x.shape[0], float(self.value))
        return np.asarray(self._phi(x), dtype=float)

    def grad(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "plateau":
            return self._plateau(x)[1]
        if self.kind == "constant":
            return np.zeros_like(x)
        if self._grad is None:
            raise HypothesisError("custom weight has no gradient")
        return np.asarray(self._grad(x), dtype=float)


def plateau_weight(omega: Region, Omega: Region, beta: float = 1.0) -> WeightSpec:
    """1 on omega, linear decay to ``-beta`` on the boundary of Omega, ``-beta`` outside."""
    if beta <= 0:
        raise HypothesisError("plateau weight needs beta > 0")
    if not omega.within(Omega):
        raise HypothesisError("omega is not contained in Omega")
    return WeightSpec(omega, Omega, "plateau", beta=beta)


def constant_weight(value: float, omega: Region, Omega: Region) -> WeightSpec:
    return WeightSpec(omega, Omega, "constant", value=value)


# -- verifiers ---------------------------------------------------------------


@dataclass
class CheckReport:
    name: str
    passed: bool
    observed: dict = field(default_factory=dict)
    witness: float | None = None
    message: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "observed": self.observed,
            "witness": self.witness,
            "message": self.message,
        }


def sample_points(spec: NonlinearitySpec, sample_count: int) -> np.ndarray:
    lo, hi = SAMPLE_RANGE
    s = np.logspace(math.log10(lo), math.log10(hi), sample_count)
    if spec.table is not None:
        extra = spec.table[0]
        s = np.union1d(s, extra[(extra >= lo) & (extra <= hi)])
        s = s[s <= spec.table[0][-1]]
    return s


def verify_f2(spec: NonlinearitySpec, params: HypothesisParams, sample_count: int = 2000) -> CheckReport:
    """Two-sided growth ``mu s^q <= f(s) <= c s^q`` (with ``f >= 0``)."""
    if sample_count < 1:
        raise HypothesisError("sample_count must be >= 1")
    s = sample_points(spec, sample_count)
    fs = f_eval(spec, s)
    ratio = fs / s**params.q
    lo_i, hi_i = int(np.argmin(ratio)), int(np.argmax(ratio))
    observed = {"mu": float(ratio[lo_i]), "c": float(ratio[hi_i]), "f_min": float(np.min(fs))}
    if np.min(fs) < 0:
        k = int(np.argmin(fs))
        return CheckReport("f1", False, observed, float(s[k]), f"(f1) violated: f({s[k]:g}) < 0")
    if ratio[lo_i] < params.mu * (1 - REL_SLACK):
        return CheckReport("f2", False, observed, float(s[lo_i]),
                           f"(f2) lower bound violated at s={s[lo_i]:g}: f/s^q={ratio[lo_i]:g} < mu={params.mu:g}")
    if ratio[hi_i] > params.c_growth * (1 + REL_SLACK):
        return CheckReport("f2", False, observed, float(s[hi_i]),
                           f"(f2) upper bound violated at s={s[hi_i]:g}: f/s^q={ratio[hi_i]:g} > c={params.c_growth:g}")
    return CheckReport("f2", True, observed, None, "ok")


def verify_f3(spec: NonlinearitySpec, params: HypothesisParams, sample_count: int = 2000) -> CheckReport:
    """Structure bounds ``0 <= (q+1)F - fs <= C s^m`` and ``0 <= fs - pF <= C s^(q+1)``."""
    if not params.superlinear:
        raise HypothesisError("(f3) is only meaningful in the superlinear regime")
    s = sample_points(spec, sample_count)
    fs = f_eval(spec, s)
    Fs = F_eval(spec, s)
    q, p, m, C = params.q, params.p, params.m, params.C_f3
    first = (q + 1) * Fs - fs * s
    second = fs * s - p * Fs
    # rounding floor: both expressions are differences of O(f s) terms
    floor = 1e-12 * np.maximum(fs * s, Fs)
    c1 = first / s**m
    c2 = second / s ** (q + 1)
    observed = {"C_first": float(np.max(c1)), "C_second": float(np.max(c2)),
                "min_first": float(np.min(first)), "min_second": float(np.min(second))}
    violations = []
    bad = np.flatnonzero(first < -floor)
    if bad.size:
        k = int(bad[0])
        violations.append((s[k], f"(f3) (q+1)F - fs >= 0 violated at s={s[k]:g}"))
    bad = np.flatnonzero(first > C * s**m * (1 + REL_SLACK) + floor)
    if bad.size:
        k = int(bad[int(np.argmax(c1[bad]))])
        violations.append((s[k], f"(f3) (q+1)F - fs <= C s^m violated at s={s[k]:g} (needs C >= {c1[k]:g})"))
    bad = np.flatnonzero(second < -floor)
    if bad.size:
        k = int(bad[0])
        violations.append((s[k], f"(f3) fs - pF >= 0 violated at s={s[k]:g}"))
    bad = np.flatnonzero(second > C * s ** (q + 1) * (1 + REL_SLACK) + floor)
    if bad.size:
        k = int(bad[int(np.argmax(c2[bad]))])
        violations.append((s[k], f"(f3) fs - pF <= C s^(q+1) violated at s={s[k]:g} (needs C >= {c2[k]:g})"))
    if violations:
        observed["witnesses"] = [float(w) for w, _ in violations]
        return CheckReport("f3", False, observed, float(violations[0][0]),
                           "; ".join(msg for _, msg in violations))
    return CheckReport("f3", True, observed, None, "ok")


def verify_W(weight: WeightSpec, grid: Grid) -> CheckReport:
    """Sign condition of the weight, sampled at the grid nodes."""
    if not weight.omega.within(weight.Omega):
        raise HypothesisError("omega is not contained in Omega")
    x = grid.nodes
    phi = weight.phi(x)
    in_omega = weight.omega.contains(x)
    outside = ~weight.Omega.contains(x)
    observed = {
        "min_phi_omega": float(np.min(phi[in_omega])) if in_omega.any() else None,
        "max_phi_outside": float(np.max(phi[outside])) if outside.any() else None,
        "omega_nodes": int(in_omega.sum()),
        "outside_nodes": int(outside.sum()),
    }
    if weight.Omega.outer_radius > grid.radius:
        return CheckReport("W", False, observed, None,
                           f"Omega is not contained in the ball of radius {grid.radius:g}")
    if not in_omega.any():
        return CheckReport("W", False, observed, None, "no grid node inside omega")
    if observed["min_phi_omega"] <= 0:
        k = np.flatnonzero(in_omega)[int(np.argmin(phi[in_omega]))]
        return CheckReport("W", False, observed, float(np.linalg.norm(x[k])),
                           "(W) violated: phi is not positive on omega")
    if outside.any() and observed["max_phi_outside"] > 0:
        k = np.flatnonzero(outside)[int(np.argmax(phi[outside]))]
        return CheckReport("W", False, observed, float(np.linalg.norm(x[k])),
                           "(W) violated outside Omega: phi > 0")
    return CheckReport("W", True, observed, None, "ok")
