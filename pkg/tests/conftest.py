import numpy as np
import pytest

from mcwaterfall.assetpool import AssetTypeSpec, PoolConfig, base_scenario
from mcwaterfall.engines import EngineParams
from mcwaterfall.pricing import DiscountCurve
from mcwaterfall.waterfall import DealConfig, TrancheSpec

FLAT_INDEX = 0.02
CALIBRATED = EngineParams(sigma=0.1053, mu=0.0, p=0.8646, alpha=4.6305, rho=0.5, w=0.7571)


def make_toy_pool() -> PoolConfig:
    values = [1.0, 1.5, 2.0, 2.5, 3.0]
    lambdas = [0.5, 0.4, 0.45, 0.35, 0.3]
    deltas = [0.98, 0.97, 0.99, 0.96, 0.95]
    types = [AssetTypeSpec(v, l, d, 20) for v, l, d in zip(values, lambdas, deltas)]
    return PoolConfig(types, rent_yield=0.05, fee=0.10, horizon=10.0, rho=0.5)


def make_toy_deal(base) -> DealConfig:
    return DealConfig(
        senior=TrancheSpec("senior", 135.0, spread=0.025),
        mezzanine=TrancheSpec("mezzanine", 31.5, spread=0.05),
        junior=TrancheSpec("junior", 13.5, fixed_rate=0.10),
        lrl=TrancheSpec("lrl", 5.805, spread=0.002),
        times=base.times,
        contractual_profile=np.cumsum(base.amounts),
    )


@pytest.fixture(scope="session")
def toy_pool():
    return make_toy_pool()


@pytest.fixture(scope="session")
def toy_base(toy_pool):
    return base_scenario(toy_pool)


@pytest.fixture(scope="session")
def toy_deal(toy_base):
    return make_toy_deal(toy_base)


@pytest.fixture(scope="session")
def toy_curve(toy_base):
    return DiscountCurve(times=np.array([0.5, 10.0]), zero_rates=np.array([0.02, 0.02]))


@pytest.fixture(scope="session")
def calibrated_params():
    return CALIBRATED
