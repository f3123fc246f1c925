import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from irrtorus.lattice import TorusSpec  # noqa: E402

SQRT2 = math.sqrt(2.0)


@pytest.fixture(scope="session")
def irrational():
    return TorusSpec.make_irrational(1.0, SQRT2)


@pytest.fixture(scope="session")
def square():
    return TorusSpec.square()


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    RESULTS = getattr(module, "RESULTS", None)
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
