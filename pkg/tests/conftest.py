import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gfra import ldpc
from gfra.config import default_config


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def code():
    return ldpc.ParityCheckMatrix.default()


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)
