import pytest

from cdc_incent import load_golden
from cdc_incent.model import ClusterHeadSpec, WorkerSpec

# reference heads (cpu power, reward pool) and workers (cpu power, unit cost)
HEADS = [(750, 100), (1000, 90), (1250, 80), (1500, 70), (1750, 60)]
WORKERS = [(100 + 50 * j, 0.01 * (j + 1)) for j in range(8)]


@pytest.fixture
def heads():
    return [ClusterHeadSpec(str(i + 1), z, rho) for i, (z, rho) in enumerate(HEADS)]


@pytest.fixture
def workers():
    return [WorkerSpec(str(j + 1), z, d) for j, (z, d) in enumerate(WORKERS)]


@pytest.fixture
def fig2():
    return load_golden("fig2")


@pytest.fixture
def fig9():
    return load_golden("fig9")
