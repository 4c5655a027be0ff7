import dataclasses

import pytest

from wurlab import default_config, derive_power, derive_timing


@pytest.fixture(scope="session")
def config():
    return default_config()


@pytest.fixture(scope="session")
def timing(config):
    return derive_timing(config)


@pytest.fixture(scope="session")
def power(config):
    return derive_power(config)


def with_n(config, n):
    return config.replace(
        traffic=dataclasses.replace(config.traffic, n_nodes=n))


def with_lambda(config, lam):
    return config.replace(
        traffic=dataclasses.replace(config.traffic, lam=lam))
