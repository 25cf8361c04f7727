import numpy as np
import pytest
from hypothesis import settings

from gdm_rd.mesh import generate_mesh, single_cell_mesh

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

UNIT_SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


@pytest.fixture
def unit_square():
    return single_cell_mesh(UNIT_SQUARE)


@pytest.fixture(params=["triangular", "rectangular", "hexagonal", "kershaw"])
def small_mesh(request):
    return generate_mesh(request.param, 1.0, 6)


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


# acceptance summary: tests/test_acceptance.py records one line per criterion
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
