import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qnoisemut.pipeline import bundled_noise_dir, load_corpus  # noqa: E402
from qnoisemut.sim import NoiseModel  # noqa: E402


@pytest.fixture(scope="session")
def corpus():
    return load_corpus()


@pytest.fixture(scope="session")
def noise_models():
    return [NoiseModel.load(p) for p in sorted(bundled_noise_dir().glob("*.json"))]
