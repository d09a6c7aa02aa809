import functools

import pytest

from catspin.dicke import EnsembleDims, build_operator_set


@functools.lru_cache(maxsize=16)
def cached_ops(n_atoms: int):
    return build_operator_set(EnsembleDims(n_atoms))


@pytest.fixture(scope="session")
def ops40():
    return cached_ops(40)


@pytest.fixture(scope="session")
def ops41():
    return cached_ops(41)


@pytest.fixture(scope="session")
def dims40(ops40):
    return ops40.dims


@pytest.fixture(scope="session")
def dims41(ops41):
    return ops41.dims
