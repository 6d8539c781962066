import sys
from pathlib import Path

import numpy as np
import pytest

from bifrom.fom import FomConfig, assemble_operators, generate_snapshots

# experiment scripts double as acceptance drivers
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "scripts"))


@pytest.fixture(scope="session")
def cfg():
    return FomConfig()


@pytest.fixture(scope="session")
def ops(cfg):
    return assemble_operators(cfg)


@pytest.fixture(scope="session")
def snaps72(cfg):
    return generate_snapshots(cfg, 8, 9)


@pytest.fixture(scope="session")
def snaps_small():
    # coarse grid for quick structural tests
    small = FomConfig(n_interior=15)
    return small, generate_snapshots(small, 5, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def local_roms(cfg, snaps72):
    from bifrom.projection import LocalRoms
    from bifrom.selection import build_error_table

    local = LocalRoms.build(cfg, snaps72)
    return local, build_error_table(local)


@pytest.fixture(scope="session")
def coarse_reference(cfg):
    # off-snapshot validation grid, much cheaper than 40 x 41
    return generate_snapshots(cfg, 11, 12)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, when that module ran."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip("abc:"))):
            terminalreporter.write_line(line)
