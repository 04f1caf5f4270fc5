from __future__ import annotations

import json
import time

import numpy as np
import pytest

from fatcoag.cli import main
from fatcoag.grids import log_grid
from fatcoag.operators import fbar_profile
from fatcoag.solver import SolverConfig, solve_profile

RHO = 0.7
ALPHA = 1.0 / 3.0
LADDER = (0.05, 0.02, 0.01)

# criterion number -> (passed, detail), filled by the acceptance suite
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def qgrid():
    return log_grid(1e-12, 1e10, 1000)


@pytest.fixture(scope="session")
def Fbar(qgrid):
    return fbar_profile(qgrid, RHO)


@pytest.fixture(scope="session")
def solved():
    """Solver outputs on the epsilon ladder, computed once per session.

    Each entry is (config, profile, report, seconds).
    """
    out = {}
    for eps in LADDER:
        cfg = SolverConfig(RHO, ALPHA, eps)
        t0 = time.perf_counter()
        F, rep = solve_profile(cfg)
        out[eps] = (cfg, F, rep, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="session")
def cli_solves(tmp_path_factory):
    """Two identical ``solve`` runs at eps = 0.02 through the command line."""
    base = tmp_path_factory.mktemp("solve")
    cfg = base / "cfg.json"
    cfg.write_text(json.dumps({"epsilon": 0.02}))
    codes = [main(["solve", "--config", str(cfg), "--out", str(base / name)]) for name in ("a", "b")]
    return base, codes


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
