from __future__ import annotations

import numpy as np
import pytest

from dagame import mge
from dagame.sbgp import SbgpScenario


@pytest.fixture(scope="session")
def sbgp_nominal():
    return SbgpScenario()


@pytest.fixture(scope="session")
def mge_nominal():
    return mge.MgeScenario()


@pytest.fixture(scope="session")
def mge_solutions(mge_nominal):
    return mge.solve(mge_nominal)


def scalar_model(**kw):
    """Boat-game style scalar model with overridable entries."""
    from dagame.model import GameModel

    base = dict(A=0.0, B=1.0, D=1.0, H=1.0, Q=0.0, Qf=1000.0, W=1.0, V=0.25e-6, Y0=1.0,
                gamma=2.0, t0=0.0, tf=1.0)
    base.update(kw)
    return GameModel(**{k: (np.atleast_2d(v) if k not in ("gamma", "t0", "tf") and not callable(v) else v)
                        for k, v in base.items()})


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
