import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from csipriv.channel_sim import SceneConfig, generate_dataset, generate_scene  # noqa: E402

# acceptance outcomes, filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.fixture(scope="session")
def small_scene():
    return generate_scene(SceneConfig(trajectory_length=60), seed=7)


@pytest.fixture(scope="session")
def small_dataset(small_scene):
    return generate_dataset(small_scene, seed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {status}  {detail}")
