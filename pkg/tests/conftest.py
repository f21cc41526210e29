"""
测试公共配置

项目模块平铺在仓库根目录，这里把根目录加入 sys.path。
带 @pytest.mark.slow 的用例默认跳过，使用 --runslow 运行。
"""
import os
import sys

import numpy as np
import pytest
from scipy.stats import unitary_group

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from qops import QUBIT1, QUBIT2, DensityMatrix  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="运行耗时较长的数值用例")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 耗时较长的数值用例")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="需要 --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_density_matrix(rng, dims=(2, 2), labels=(QUBIT1, QUBIT2), rank=None) -> DensityMatrix:
    """随机酉变换下的随机谱"""
    side = int(np.prod(dims))
    rank = side if rank is None else rank
    spectrum = np.zeros(side)
    spectrum[:rank] = rng.random(rank)
    spectrum /= spectrum.sum()
    U = unitary_group.rvs(side, random_state=rng)
    return DensityMatrix.from_matrix((U * spectrum) @ U.conj().T, dims, labels)


@pytest.fixture
def random_state(rng):
    """工厂：random_state(dims, labels, rank)"""
    def factory(dims=(2, 2), labels=(QUBIT1, QUBIT2), rank=None):
        return random_density_matrix(rng, dims, labels, rank)
    return factory
