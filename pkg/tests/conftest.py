import pytest

from zprainbow.cli import load_config


@pytest.fixture(scope="session")
def config():
    return load_config()


@pytest.fixture(scope="session")
def crystal(config):
    return config.crystal


@pytest.fixture(scope="session")
def detector(config):
    return config.detector


@pytest.fixture(scope="session")
def couplings(config):
    return config.couplings
