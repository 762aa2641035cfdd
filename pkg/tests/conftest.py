import math
import sys

import pytest

from bowenlab.gamma import Affine, ConstantAmplitude, GammaFamily, GeometricAmplitude, Sinusoidal
from bowenlab.ifs import LinearSystem, PerturbedSystem, base_q_level
from bowenlab.pressure import ContractionBeta

LOG2, LOG3, LOG6 = math.log(2), math.log(3), math.log(6)
B_CANTOR = LOG2 / (2 * LOG3)
L_ALT = LOG6 / 2
B_ALT = L_ALT / (1 + L_ALT)


@pytest.fixture(scope="session")
def base3():
    return LinearSystem.constant(base_q_level(3), name="base3")


@pytest.fixture(scope="session")
def cantor():
    return LinearSystem.constant(base_q_level(3, (0, 2)), name="cantor")


@pytest.fixture(scope="session")
def alternating():
    return LinearSystem(period=(base_q_level(2), base_q_level(3)), name="alternating23")


@pytest.fixture(scope="session")
def beta2():
    return ContractionBeta(2.0)


@pytest.fixture(scope="session")
def beta_alt():
    return ContractionBeta(1.0, 1.0)


@pytest.fixture(scope="session")
def pert_cantor(cantor):
    return PerturbedSystem(cantor, GammaFamily((Sinusoidal(),), GeometricAmplitude(1.0, 0.25)))


@pytest.fixture(scope="session")
def pert_base3_affine(base3):
    """Base-3 with gamma(t) = 0.1 (2t - 1) at every level."""
    return PerturbedSystem(base3, GammaFamily((Affine(),), ConstantAmplitude(0.1)))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if not mod or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for i in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.format_line(i))
