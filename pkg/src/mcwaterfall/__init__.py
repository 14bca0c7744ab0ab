"""Monte Carlo pricing of securitization waterfalls with adjoint sensitivities.

The package simulates collection uncertainty in amount, timing and baseline
level on top of an expected schedule, allocates each path through a
four-tranche priority-of-payments waterfall, and reports tranche prices,
tape-based parameter gradients, rate and cash-flow bumps, calibrated
parameters and intrinsic valuation metrics.
"""

from .assetpool import AssetTypeSpec, PoolConfig, base_scenario, simulate_pool
from .autodiff import (
    SmoothingConfig,
    Tape,
    Var,
    backward,
    double_sigmoid_mask,
    grad_check,
    interval_mask,
    sigmoid,
    softplus,
)
from .calibration import (
    CalibrationTarget,
    DESettings,
    calibrate,
    differential_evolution,
    make_objective,
    robustness_probe,
)
from .config import load_config, parse_config, toy_deal_document
from .engines import (
    CashFlowSchedule,
    EngineParams,
    compose_engines,
    multiple_stochastic_time,
    one_sigma_engine,
    spread_engine,
)
from .metrics import annuity, asw, irr, tranche_metrics, z_spread
from .modes import ExactOps, SmoothOps, make_ops
from .pricing import (
    DiscountCurve,
    PriceReport,
    forward_prices,
    price_distribution,
    price_tranches,
    pv,
    sensitivities,
)
from .sampling import (
    ParetoSpec,
    RandomStream,
    copula_exponential_times,
    correlated_pareto_interarrivals,
    equicorrelated_normals,
    pareto_inverse_cdf,
)
from .waterfall import (
    DealConfig,
    TrancheSpec,
    WaterfallState,
    ccr,
    run_waterfall,
    run_waterfall_period,
)

__version__ = "0.1.0"
