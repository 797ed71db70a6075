"""Grids on balls, the discrete Gagliardo seminorm and critical-exponent arithmetic.

A discrete function lives on the cell centres of a uniform Cartesian grid
restricted to the ball ``B(0, R)`` and is zero outside the ball.  Its
``p``-th power seminorm is

    S(u) = sum_{i != j} w_ij |u_i - u_j|^p + sum_i kappa_i |u_i|^p vol_i

with ``w_ij = vol_i vol_j / |x_i - x_j|^(N + sp)`` and ``kappa_i`` the
interaction of node ``i`` with the region where the discrete function
vanishes.  In 1D the cells tile the ball and that region is the exterior of
the ball.  In 2D the kept cells form a staircase inside the disk, so
``kappa_i`` also integrates over the uncovered pieces of boundary cells;
otherwise those interactions would be lost and a zero-extended field could
gain energy on a larger ball.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import HypothesisError

__all__ = [
    "HypothesisParams",
    "Grid",
    "KernelOperator",
    "Field",
    "critical_exponent",
    "build_grid",
    "exterior_weight",
    "build_kernel",
    "seminorm_p",
    "seminorm_gradient",
    "write_field_csv",
    "read_field_csv",
]

# Row-block size of every pairwise reduction.  Fixed so that results do not
# depend on the number of worker threads.
ROW_BLOCK = 256

# Cap on dense kernel storage (M x M doubles).
MAX_NODES = 4096

# Gauss-Legendre points per smooth angular piece of a gap-cell integral.
GAP_ORDER = 24


def critical_exponent(p: float, s: float, dim: int) -> float:
    """Fractional Sobolev exponent ``N p / (N - s p)``."""
    if dim <= s * p:
        raise HypothesisError(
            f"N > s*p violated: N={dim}, s*p={s * p:g}; critical exponent undefined"
        )
    return dim * p / (dim - s * p)


@dataclass(frozen=True)
class HypothesisParams:
    """Scalar hypotheses of the problem.

    ``m`` is only needed in the superlinear regime (``q > p - 1``); ``mu`` and
    ``c_growth`` are the two-sided growth constants of ``f`` and ``C_f3`` the
    constant of the structural inequalities on ``F``.
    """

    p: float
    s: float
    dim: int
    q: float
    m: float | None = None
    mu: float = 1.0
    c_growth: float = 1.0
    C_f3: float = 1.0

    def __post_init__(self):
        if not self.p > 1:
            raise HypothesisError(f"p > 1 violated: p={self.p}")
        if not 0 < self.s < 1:
            raise HypothesisError(f"s in (0,1) violated: s={self.s}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise HypothesisError(f"dimension must be a positive integer: {self.dim}")
        pstar = critical_exponent(self.p, self.s, self.dim)
        if not self.q >= 0:
            raise HypothesisError(f"q >= 0 violated: q={self.q}")
        if self.q == self.p - 1:
            raise HypothesisError("regime violation: q = p - 1 is neither sublinear nor superlinear")
        if self.q > self.p - 1:
            if not self.q < pstar - 1:
                raise HypothesisError(
                    f"regime violation: superlinear q must satisfy q < p*_s - 1 = {pstar - 1:g}"
                )
            if self.m is None or not self.m < self.p:
                raise HypothesisError(f"superlinear regime needs m < p, got m={self.m}")
        if not self.mu > 0:
            raise HypothesisError(f"mu > 0 violated: mu={self.mu}")
        if not self.c_growth >= self.mu:
            raise HypothesisError(f"c >= mu violated: c={self.c_growth}, mu={self.mu}")
        if not self.C_f3 > 0:
            raise HypothesisError(f"C > 0 violated: C={self.C_f3}")

    @property
    def sp(self) -> float:
        return self.s * self.p

    @property
    def critical_exponent(self) -> float:
        return critical_exponent(self.p, self.s, self.dim)

    @property
    def kernel_exponent(self) -> float:
        return self.dim + self.s * self.p

    @property
    def regime(self) -> str:
        return "sublinear" if self.q < self.p - 1 else "superlinear"

    @property
    def superlinear(self) -> bool:
        return self.regime == "superlinear"


@dataclass(frozen=True, eq=False)
class Grid:
    radius: float
    spacing: float
    dim: int
    nodes: np.ndarray  # (M, dim) cell centres
    volumes: np.ndarray  # (M,)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    def norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.nodes**2, axis=1))

    def same_nodes(self, other: "Grid") -> bool:
        return self.nodes.shape == other.nodes.shape and bool(np.array_equal(self.nodes, other.nodes))

    def embed(self, values: np.ndarray, coarse: "Grid") -> np.ndarray:
        """Zero-extend ``values`` given on the nested grid ``coarse`` to this grid."""
        if not math.isclose(coarse.spacing, self.spacing) or coarse.radius > self.radius:
            raise HypothesisError("grids are not nested")
        index = {tuple(x): i for i, x in enumerate(self.nodes)}
        out = np.zeros(self.size)
        for x, v in zip(coarse.nodes, values):
            out[index[tuple(x)]] = v
        return out


def build_grid(radius: float, spacing: float, dim: int) -> Grid:
    """Cell-centred nodes of the cells of side ``spacing`` lying inside ``B(0, radius)``."""
    if dim not in (1, 2):
        raise HypothesisError(f"only dimensions 1 and 2 are supported, got {dim}")
    if not (radius > 0 and spacing > 0):
        raise HypothesisError("radius and spacing must be positive")
    k = round(radius / spacing)
    if k < 1 or not math.isclose(k * spacing, radius, rel_tol=1e-9, abs_tol=0.0):
        raise HypothesisError(f"radius {radius} is not an integer multiple of spacing {spacing}")
    # Odd multiples of h/2: identical floats for the same physical point on
    # any grid of the same spacing, so nested grids share node coordinates.
    ticks = (2 * np.arange(2 * k) + 1 - 2 * k) * spacing / 2
    if dim == 1:
        nodes = ticks[:, None]
    else:
        xx, yy = np.meshgrid(ticks, ticks, indexing="ij")
        far = (np.abs(xx) + spacing / 2) ** 2 + (np.abs(yy) + spacing / 2) ** 2
        keep = far <= radius**2 * (1 + 1e-12)
        nodes = np.column_stack([xx[keep], yy[keep]])
    if nodes.shape[0] > MAX_NODES:
        raise HypothesisError(f"grid has {nodes.shape[0]} nodes, above the dense cap {MAX_NODES}")
    volumes = np.full(nodes.shape[0], spacing**dim)
    return Grid(float(radius), float(spacing), dim, nodes, volumes)


def _exterior_weight_radial(a: float, radius: float, sp: float, dim: int) -> float:
    """``2 int_{|y|>R} |x-y|^(-N-sp) dy`` for ``|x| = a``.

    In polar coordinates centred at x every ray leaves the (convex) ball exactly
    once, at distance ``d(theta)``, and the radial integral is ``d^(-sp)/sp``.
    """
    if dim == 1:
        return 2.0 * ((radius - a) ** (-sp) + (radius + a) ** (-sp)) / sp

    def integrand(theta):
        d = -a * math.cos(theta) + math.sqrt(radius**2 - (a * math.sin(theta)) ** 2)
        return d ** (-sp)

    # symmetric about theta = 0; the peak sits at theta = 0 near the boundary
    val, _ = integrate.quad(integrand, 0.0, math.pi, epsabs=1e-9, epsrel=1e-12, limit=400)
    return 2.0 * 2.0 * val / sp


def exterior_weight(x, radius: float, sp: float) -> float:
    """Exterior interaction ``kappa(x)`` of a point strictly inside ``B(0, radius)``.

    The dimension is the length of ``x`` (a scalar means 1D).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size not in (1, 2):
        raise HypothesisError("exterior weights are available for N = 1, 2")
    a = float(np.sqrt(np.sum(x**2)))
    if a >= radius:
        raise HypothesisError(f"|x| = {a} is not inside the ball of radius {radius}")
    if x.size == 1:
        xv = float(x[0])
        return 2.0 * ((radius - xv) ** (-sp) + (radius + xv) ** (-sp)) / sp
    return _exterior_weight_radial(a, radius, sp, 2)


def gap_cells(grid: Grid) -> list[tuple[float, float, float, float]]:
    """Bounds ``(x0, x1, y0, y1)`` of lattice cells that meet the open disk but were not kept."""
    if grid.dim != 2:
        return []
    h, R = grid.spacing, grid.radius
    k = round(R / h)
    ticks = (2 * np.arange(2 * k) + 1 - 2 * k) * h / 2
    xx, yy = np.meshgrid(ticks, ticks, indexing="ij")
    far = (np.abs(xx) + h / 2) ** 2 + (np.abs(yy) + h / 2) ** 2
    near = np.maximum(np.abs(xx) - h / 2, 0) ** 2 + np.maximum(np.abs(yy) - h / 2, 0) ** 2
    gap = (far > R**2 * (1 + 1e-12)) & (near < R**2)
    return [(x - h / 2, x + h / 2, y - h / 2, y + h / 2) for x, y in zip(xx[gap], yy[gap])]


def _piece_vertices(cell, R: float) -> np.ndarray:
    """Vertices of the convex piece ``cell ∩ disk``: corners inside plus edge/circle crossings."""
    x0, x1, y0, y1 = cell
    pts = [(x, y) for x in (x0, x1) for y in (y0, y1) if x * x + y * y <= R * R]
    for c in (x0, x1):
        if abs(c) < R:
            r = math.sqrt(R * R - c * c)
            pts += [(c, y) for y in (r, -r) if y0 < y < y1]
    for c in (y0, y1):
        if abs(c) < R:
            r = math.sqrt(R * R - c * c)
            pts += [(x, c) for x in (r, -r) if x0 < x < x1]
    return np.array(pts)


def _gap_integral(nodes: np.ndarray, cell, R: float, sp: float) -> np.ndarray:
    """``int_{cell ∩ disk} |x - y|^(-2-sp) dy`` for every node outside the cell.

    Polar coordinates about each node: a ray meets the convex piece in one
    segment ``[a, b]`` and the radial integral is ``(a^-sp - b^-sp)/sp``.
    The angular integrand is smooth between vertex directions, so each such
    piece gets a fixed Gauss-Legendre rule.
    """
    verts = _piece_vertices(cell, R)
    x0, x1, y0, y1 = cell
    gl_t, gl_w = np.polynomial.legendre.leggauss(GAP_ORDER)
    rel_v = verts[None, :, :] - nodes[:, None, :]
    ref = np.arctan2(*(np.mean(verts, axis=0)[None, :] - nodes)[:, ::-1].T)
    ang = np.arctan2(rel_v[..., 1], rel_v[..., 0]) - ref[:, None]
    ang = np.sort((ang + np.pi) % (2 * np.pi) - np.pi, axis=1)
    lo, hi = ang[:, :-1], ang[:, 1:]
    half = (hi - lo) / 2
    theta = ref[:, None, None] + (lo + hi)[..., None] / 2 + half[..., None] * gl_t
    dx, dy = np.cos(theta), np.sin(theta)
    px, py = nodes[:, 0][:, None, None], nodes[:, 1][:, None, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        tx0, tx1 = (x0 - px) / dx, (x1 - px) / dx
        ty0, ty1 = (y0 - py) / dy, (y1 - py) / dy
    entry = np.maximum(np.minimum(tx0, tx1), np.minimum(ty0, ty1))
    exit_ = np.minimum(np.maximum(tx0, tx1), np.maximum(ty0, ty1))
    proj = px * dx + py * dy
    disk_exit = -proj + np.sqrt(proj * proj + (R * R - px * px - py * py))
    a = np.maximum(entry, 0.0)
    b = np.minimum(exit_, disk_exit)
    with np.errstate(divide="ignore", invalid="ignore"):
        radial = np.where(b > a, (a ** (-sp) - b ** (-sp)) / sp, 0.0)
    return np.sum(np.sum(radial * gl_w, axis=2) * half, axis=1)


@dataclass(frozen=True, eq=False)
class KernelOperator:
    grid: Grid
    p: float
    s: float
    interior_weights: np.ndarray  # (M, M), symmetric, zero diagonal
    exterior_weights: np.ndarray  # (M,)
    threads: int = 1

    @property
    def exponent(self) -> float:
        return self.grid.dim + self.s * self.p

    @property
    def size(self) -> int:
        return self.grid.size


def build_kernel(grid: Grid, params: HypothesisParams | None = None, *, p=None, s=None,
                 threads: int = 1) -> KernelOperator:
    """Assemble interior pair weights and exterior weights on ``grid``."""
    if params is not None:
        p, s = params.p, params.s
        if params.dim != grid.dim:
            raise HypothesisError(f"params dimension {params.dim} != grid dimension {grid.dim}")
    if p is None or s is None:
        raise TypeError("build_kernel needs params or both p and s")
    sp = s * p
    alpha = grid.dim + sp
    x, vol = grid.nodes, grid.volumes
    M = grid.size
    w = np.empty((M, M))
    for lo in range(0, M, ROW_BLOCK):
        hi = min(lo + ROW_BLOCK, M)
        diff = x[lo:hi, None, :] - x[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        with np.errstate(divide="ignore"):
            block = (vol[lo:hi, None] * vol[None, :]) / dist**alpha
        block[np.arange(hi - lo), np.arange(lo, hi)] = 0.0
        w[lo:hi] = block
    radii = grid.norms()
    cache: dict[float, float] = {}
    kappa = np.empty(M)
    for i in range(M):
        if grid.dim == 1:
            kappa[i] = exterior_weight(x[i, 0], grid.radius, sp)
        else:
            a = float(radii[i])
            if a not in cache:
                cache[a] = _exterior_weight_radial(a, grid.radius, sp, 2)
            kappa[i] = cache[a]
    for cell in gap_cells(grid):
        kappa += 2.0 * _gap_integral(x, cell, grid.radius, sp)
    w.setflags(write=False)
    kappa.setflags(write=False)
    return KernelOperator(grid, float(p), float(s), w, kappa, max(1, int(threads)))


@dataclass(eq=False)
class Field:
    """Nodal values on a grid (zero outside the ball by convention)."""

    values: np.ndarray
    grid: Grid = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.size,):
            raise HypothesisError(
                f"field has {self.values.shape} values for a grid of {self.grid.size} nodes"
            )

    @property
    def positive_part(self) -> np.ndarray:
        return np.maximum(self.values, 0.0)

    @property
    def negative_part(self) -> np.ndarray:
        return np.maximum(-self.values, 0.0)

    def __mul__(self, t: float) -> "Field":
        return Field(t * self.values, self.grid)

    __rmul__ = __mul__


def as_values(u, size: int | None = None) -> np.ndarray:
    v = u.values if isinstance(u, Field) else np.asarray(u, dtype=float)
    if size is not None and v.shape != (size,):
        raise HypothesisError(f"field of shape {v.shape} does not match {size} grid nodes")
    return v


def _map_row_blocks(fn: Callable[[int, int], np.ndarray], M: int, threads: int) -> np.ndarray:
    bounds = [(lo, min(lo + ROW_BLOCK, M)) for lo in range(0, M, ROW_BLOCK)]
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: fn(*b), bounds))
    else:
        parts = [fn(lo, hi) for lo, hi in bounds]
    return np.concatenate(parts)


def _pair_rows(kernel: KernelOperator, u: np.ndarray, want: str, eps: float = 0.0):
    """Per-row pairwise sums.

    ``want == "energy"`` gives ``sum_j w_ij |u_i - u_j|^p``; ``"gradient"`` gives
    ``sum_j w_ij phi_p(u_i - u_j)`` with ``phi_p(t) = |t|^(p-2) t``.
    """
    p = kernel.p
    w = kernel.interior_weights

    def rows(lo, hi):
        d = u[lo:hi, None] - u[None, :]
        if want == "energy":
            return np.sum(w[lo:hi] * np.abs(d) ** p, axis=1)
        if eps > 0.0:
            return np.sum(w[lo:hi] * (d * d + eps * eps) ** ((p - 2) / 2) * d, axis=1)
        return np.sum(w[lo:hi] * np.abs(d) ** (p - 1) * np.sign(d), axis=1)

    return _map_row_blocks(rows, u.size, kernel.threads)


def seminorm_p(kernel: KernelOperator, u) -> float:
    """``p``-th power of the discrete Gagliardo seminorm (ordered pairs)."""
    v = as_values(u, kernel.size)
    inner = _pair_rows(kernel, v, "energy")
    outer = kernel.exterior_weights * np.abs(v) ** kernel.p * kernel.grid.volumes
    return float(np.sum(inner) + np.sum(outer))


def seminorm_gradient(kernel: KernelOperator, u, eps: float = 0.0) -> np.ndarray:
    """Gradient of ``S(u)/p``: the discrete fractional p-Laplacian of ``u`` (times cell volume)."""
    v = as_values(u, kernel.size)
    inner = _pair_rows(kernel, v, "gradient", eps)
    if eps > 0.0:
        outer = (v * v + eps * eps) ** ((kernel.p - 2) / 2) * v
    else:
        outer = np.abs(v) ** (kernel.p - 1) * np.sign(v)
    return 2.0 * inner + kernel.exterior_weights * outer * kernel.grid.volumes


def write_field_csv(path, u: Field) -> None:
    grid = u.grid
    header = [f"x{k}" for k in range(grid.dim)] + ["value"]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for x, v in zip(grid.nodes, u.values):
            out.writerow([repr(float(c)) for c in x] + [repr(float(v))])


def read_field_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(coordinates, values)`` from a field CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][-1] != "value":
        raise OSError(f"{path}: not a field CSV (missing header)")
    data = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float)
    if data.size == 0:
        return np.empty((0, len(rows[0]) - 1)), np.empty(0)
    return data[:, :-1], data[:, -1]


def field_from_coordinates(grid: Grid, coords: np.ndarray, values: Sequence[float]) -> Field:
    """Attach values read from disk to ``grid``; node coordinates must match exactly."""
    coords = np.asarray(coords, dtype=float)
    if coords.shape != grid.nodes.shape or not np.allclose(coords, grid.nodes, rtol=0, atol=1e-12):
        raise HypothesisError("solution coordinates do not match the configured grid")
    return Field(np.asarray(values, dtype=float), grid)
