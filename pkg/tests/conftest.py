import numpy as np
import pytest

from ehnetctl.config import load_config, paper_config_path


@pytest.fixture(scope="session")
def paper_cfg():
    return load_config(paper_config_path())


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.Philox(key=2024))
