import numpy as np
import pytest

from pseudohyp.ads3 import CircleDiffeo, ads_chart, boundary_from_circle_diffeo
from pseudohyp.plateau import solve_maximal
from pseudohyp.spheres import circle_mesh, constant_map


def sine_diffeo(amp=0.3, k=2, n=512):
    return CircleDiffeo.from_function(
        lambda t: t + amp * np.sin(k * t), n,
        lambda t: 1 + amp * k * np.cos(k * t), lambda t: -amp * k * k * np.sin(k * t),
    )


@pytest.fixture(scope="session")
def sine_f():
    return sine_diffeo()


@pytest.fixture(scope="session")
def sine_phi(sine_f):
    return boundary_from_circle_diffeo(sine_f, 256)


@pytest.fixture(scope="session")
def sine_G(sine_phi):
    return solve_maximal(sine_phi, 65, chart=ads_chart())


@pytest.fixture(scope="session")
def flat_phi():
    return constant_map(circle_mesh(128), [1.0, 0.0])


@pytest.fixture(scope="session")
def flat_G(flat_phi):
    return solve_maximal(flat_phi, 65, chart=ads_chart())


# one line per acceptance criterion, echoed at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
