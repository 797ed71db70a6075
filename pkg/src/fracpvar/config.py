"""Run configuration: flat ``dotted.key = value`` text files.

Example::

    # superlinear regression run
    params.p = 2.0
    params.s = 0.4
    params.q = 3.0
    params.m = 1.5
    grid.radii = [2, 4, 8]
    grid.spacing = 0.125
    weight.kind = plateau
    weight.omega.radius = 0.5
    weight.Omega.radius = 1.0

Values are Python literals (numbers, lists, quoted strings); anything that
does not parse as a literal is kept as a bare string.
"""
from __future__ import annotations

import ast
import os
from dataclasses import dataclass, field
from pathlib import Path

from .domain import HypothesisParams, build_grid
from .errors import HypothesisError
from .model import (NonlinearitySpec, Region, WeightSpec, constant_weight, load_tabulated,
                    piecewise, plateau_weight, power)

__all__ = ["SolverSettings", "RunConfig", "parse_config_text", "load_config", "THREADS_ENV"]

THREADS_ENV = "FRACPVAR_THREADS"

DEFAULTS = {
    "params.dim": 1,
    "params.mu": 1.0,
    "params.c_growth": 1.0,
    "params.C_f3": 1.0,
    "weight.kind": "plateau",
    "weight.beta": 1.0,
    "weight.value": 1.0,
    "weight.omega.shape": "ball",
    "weight.Omega.shape": "ball",
    "nonlinearity.kind": "power",
    "solver.tol": 1e-8,
    "solver.max_steps": 100_000,
    "solver.max_sweeps": 10_000,
    "solver.string_sweeps": 200,
    "solver.path_nodes": 33,
    "solver.seed": 0,
    "solver.probes": 200,
    "solver.sphere_samples": 50,
    "solver.residual_probes": 16,
    "solver.slack": 1e-6,
    "solver.warm_start": True,
    "outputs.dir": "out",
}

KNOWN_PREFIXES = ("params.", "grid.", "weight.", "nonlinearity.", "solver.", "outputs.")


def _literal(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into a flat dict (comments start with ``#``)."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise HypothesisError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key.startswith(KNOWN_PREFIXES):
            raise HypothesisError(f"config line {lineno}: unknown section in key {key!r}")
        if key in out:
            raise HypothesisError(f"config line {lineno}: duplicate key {key!r}")
        out[key] = _literal(value)
    return out


@dataclass(frozen=True)
class SolverSettings:
    tol: float
    max_steps: int
    max_sweeps: int
    string_sweeps: int
    path_nodes: int
    seed: int
    probes: int
    sphere_samples: int
    residual_probes: int


@dataclass
class RunConfig:
    params: HypothesisParams
    radii: list
    spacing: float
    weight: WeightSpec
    nonlinearity: NonlinearitySpec
    solver: SolverSettings
    out_dir: Path
    slack: float = 1e-6
    warm_start: bool = True
    threads: int = 1
    resolved: dict = field(default_factory=dict)

    def echo(self) -> dict:
        """The fully resolved key/value mapping (sorted), for embedding in reports.

        Command-line ``--out`` and thread counts are not part of the echo, so
        reruns elsewhere or with other worker counts produce identical reports.
        """
        return {k: self.resolved[k] for k in sorted(self.resolved)}

    @classmethod
    def from_mapping(cls, raw: dict, base_dir: Path | str = ".", *, seed: int | None = None,
                     threads: int | None = None, out_dir: str | None = None) -> "RunConfig":
        values = dict(DEFAULTS)
        values.update(raw)
        if seed is not None:
            values["solver.seed"] = int(seed)
        base_dir = Path(base_dir)

        def need(key):
            if key not in values:
                raise HypothesisError(f"missing required config key {key!r}")
            return values[key]

        def num(key, kind=float):
            v = need(key)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise HypothesisError(f"config key {key!r} must be numeric, got {v!r}")
            return kind(v)

        dim = num("params.dim", int)
        m = values.get("params.m")
        params = HypothesisParams(
            p=num("params.p"), s=num("params.s"), dim=dim, q=num("params.q"),
            m=None if m is None else float(m),
            mu=num("params.mu"), c_growth=num("params.c_growth"), C_f3=num("params.C_f3"),
        )

        radii = need("grid.radii")
        if isinstance(radii, (int, float)):
            radii = [radii]
        if not isinstance(radii, (list, tuple)) or not radii:
            raise HypothesisError("grid.radii must be a non-empty list")
        radii = [float(r) for r in radii]
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise HypothesisError("grid.radii must be strictly increasing")
        spacing = num("grid.spacing")
        for R in radii:
            # raises on non-multiples
            if abs(round(R / spacing) * spacing - R) > 1e-9 * R:
                raise HypothesisError(f"radius {R:g} is not an integer multiple of spacing {spacing:g}")

        weight = _weight(values, dim)
        if weight.Omega.outer_radius > radii[0]:
            raise HypothesisError(f"Omega does not fit inside the smallest ball B(0, {radii[0]:g})")
        nonlinearity = _nonlinearity(values, params, base_dir)

        tol = num("solver.tol")
        if not tol > 0:
            raise HypothesisError("solver.tol must be positive (tol = 0 is unreachable)")
        solver = SolverSettings(
            tol=tol,
            max_steps=num("solver.max_steps", int),
            max_sweeps=num("solver.max_sweeps", int),
            string_sweeps=num("solver.string_sweeps", int),
            path_nodes=num("solver.path_nodes", int),
            seed=num("solver.seed", int),
            probes=num("solver.probes", int),
            sphere_samples=num("solver.sphere_samples", int),
            residual_probes=num("solver.residual_probes", int),
        )
        if solver.path_nodes < 3:
            raise HypothesisError("solver.path_nodes must be >= 3 (endpoints plus an interior node)")
        if threads is None:
            threads = int(os.environ.get(THREADS_ENV, "1") or 1)
        resolved = dict(values)
        resolved["grid.radii"] = radii
        return cls(
            params=params, radii=radii, spacing=spacing, weight=weight,
            nonlinearity=nonlinearity, solver=solver, out_dir=Path(values["outputs.dir"] if out_dir is None else out_dir),
            slack=num("solver.slack"), warm_start=bool(values["solver.warm_start"]),
            threads=max(1, int(threads)), resolved=resolved,
        )

    def grid(self, radius: float | None = None):
        return build_grid(self.radii[-1] if radius is None else radius, self.spacing, self.params.dim)


def _region(values: dict, prefix: str, dim: int) -> Region:
    shape = values.get(f"{prefix}.shape", "ball")
    center = values.get(f"{prefix}.center", [0.0] * dim)
    if isinstance(center, (int, float)):
        center = [center]
    center = tuple(float(c) for c in center)
    if len(center) != dim:
        raise HypothesisError(f"{prefix}.center must have {dim} coordinates")
    if shape == "ball":
        if f"{prefix}.radius" not in values:
            raise HypothesisError(f"missing required config key '{prefix}.radius'")
        return Region("ball", center, radius=float(values[f"{prefix}.radius"]))
    hw = values.get(f"{prefix}.half_widths")
    if hw is None:
        raise HypothesisError(f"missing required config key '{prefix}.half_widths'")
    if isinstance(hw, (int, float)):
        hw = [hw] * dim
    return Region("box", center, half_widths=tuple(float(h) for h in hw))


def _weight(values: dict, dim: int) -> WeightSpec:
    omega = _region(values, "weight.omega", dim)
    Omega = _region(values, "weight.Omega", dim)
    if not omega.within(Omega):
        raise HypothesisError("(W) geometry: omega is not contained in Omega")
    kind = values["weight.kind"]
    if kind == "plateau":
        return plateau_weight(omega, Omega, float(values["weight.beta"]))
    if kind == "constant":
        return constant_weight(float(values["weight.value"]), omega, Omega)
    raise HypothesisError(f"unknown weight.kind {kind!r}")


def _nonlinearity(values: dict, params: HypothesisParams, base_dir: Path) -> NonlinearitySpec:
    kind = values["nonlinearity.kind"]
    if kind == "power":
        return power(params.q)
    if kind == "piecewise":
        m = values.get("nonlinearity.m", params.m)
        if m is None:
            raise HypothesisError("piecewise nonlinearity needs nonlinearity.m or params.m")
        return piecewise(params.q, float(m))
    if kind == "tabulated":
        table = values.get("nonlinearity.table")
        if not table:
            raise HypothesisError("tabulated nonlinearity needs nonlinearity.table")
        path = Path(table)
        if not path.is_absolute():
            path = base_dir / path
        return load_tabulated(path, q=params.q)
    raise HypothesisError(f"unknown nonlinearity.kind {kind!r}")


def load_config(path, **overrides) -> RunConfig:
    path = Path(path)
    text = path.read_text()
    return RunConfig.from_mapping(parse_config_text(text), path.parent, **overrides)
