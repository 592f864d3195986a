"""Shared fixtures and the acceptance summary table.

Acceptance tests register one line per criterion through
record_criterion; the table is printed at the end of the session so a
plain pytest run shows the per-criterion verdicts in one place.
"""

from __future__ import annotations

import numpy as np
import pytest

from angiosim import make_grid
from angiosim.sensitivity import SensitivitySpec

_ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record_criterion(name: str, passed: bool, detail: str = "") -> None:
    _ACCEPTANCE_RESULTS.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    tr = terminalreporter
    tr.write_sep("=", "acceptance criteria")
    for name, passed, detail in _ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        line = f"{status}  {name}"
        if detail:
            line += f"  [{detail}]"
        tr.write_line(line, green=passed, red=not passed)


@pytest.fixture(scope="session")
def grid65():
    return make_grid(1.0, 65)


@pytest.fixture(scope="session")
def grid257():
    return make_grid(1.0, 257)


@pytest.fixture(scope="session")
def grid1025():
    return make_grid(1.0, 1025)


def zero_sensitivity() -> SensitivitySpec:
    """V identically zero: decouples the equations for ODE oracles."""

    def z(s):
        return np.zeros_like(np.asarray(s, dtype=float))

    return SensitivitySpec("zero", z, z)


@pytest.fixture()
def zero_V():
    return zero_sensitivity()
