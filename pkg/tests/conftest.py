import time
from pathlib import Path

import numpy as np
import pytest

from fracpvar.config import load_config
from fracpvar.domain import HypothesisParams, build_grid
from fracpvar.energy import build_context
from fracpvar.exhaustion import run_exhaustion
from fracpvar.model import Region, plateau_weight, power

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


@pytest.fixture(scope="session")
def config_dir():
    return CONFIGS


def _timed_run(name):
    cfg = load_config(CONFIGS / f"{name}.cfg")
    t0 = time.perf_counter()
    rep = run_exhaustion(cfg)
    return cfg, rep, time.perf_counter() - t0


@pytest.fixture(scope="session")
def superlinear_run():
    return _timed_run("superlinear")


@pytest.fixture(scope="session")
def sublinear_run():
    return _timed_run("sublinear")


def plateau_1d(inner=0.5, outer=1.0, beta=1.0):
    return plateau_weight(Region("ball", (0.0,), radius=inner), Region("ball", (0.0,), radius=outer), beta)


def small_context(p=2.0, s=0.4, q=3.0, m=1.5, radius=2.0, spacing=0.125, weight=None, **kw):
    params = HypothesisParams(p, s, 1, q, m=m if q > p - 1 else None)
    grid = build_grid(radius, spacing, 1)
    return build_context(grid, params, weight or plateau_1d(), power(q), **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


def record_criterion(number: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE[number])
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
