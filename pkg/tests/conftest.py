import math

import pytest

from aoi_energy import SystemConfig, exponential_gain, quantize_channel, quantize_with_thresholds

_ACCEPTANCE: dict[str, str] = {}


@pytest.fixture(scope="session")
def k128_model():
    return quantize_channel(exponential_gain(), 128, 1.0)


@pytest.fixture(scope="session")
def unit_model():
    """Two levels: P_1 = 1 W with failure probability 1/2, plus the silent level."""
    rate = math.log2(1.0 + math.log(2.0))
    return quantize_channel(exponential_gain(), 2, rate)


@pytest.fixture
def small_cfg():
    return SystemConfig(M=2, delta_max=4, c_max=1.0, omega=1.0, gamma=0.99)


@pytest.fixture(scope="session")
def acceptance_report():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k.split()[0])):
        terminalreporter.write_line(_ACCEPTANCE[key])
