import sys

import pytest

from modflow.cuntz import CuntzAlgebra
from modflow.fermion import FermionAlgebra


@pytest.fixture
def o2():
    return CuntzAlgebra(2)


@pytest.fixture
def car():
    """Two-mode Fermion algebra at lambda = 0.25 (e^beta = 3)."""
    return FermionAlgebra(2, 0.25)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"CRITERION {n:2d} {'PASS' if ok else 'FAIL'}: {detail}")
