from pathlib import Path

import pytest

from magpiezo import PAPER_GAINS, PAPER_MATERIAL, MaterialParams, build_grid

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


@pytest.fixture(scope="session")
def mat():
    return MaterialParams(**PAPER_MATERIAL)


@pytest.fixture(scope="session")
def gains():
    return PAPER_GAINS


@pytest.fixture(scope="session")
def grid30():
    return build_grid(1.0, 30)


@pytest.fixture(scope="session")
def paper_cfg_path():
    return CONFIGS / "paper.cfg"


@pytest.fixture(scope="session")
def smooth_cfg_path():
    return CONFIGS / "smooth.cfg"


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[k])
