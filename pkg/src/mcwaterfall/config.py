"""Single-file JSON configuration for whole-deal reproducibility.

One document carries the pool, deal, curve, engine parameters, calibration
targets/settings and run options; command-line flags override only the seed,
path count and mode.  Parse errors name the offending section and field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assetpool import AssetTypeSpec, PoolConfig, base_scenario
from .calibration import DEFAULT_BOUNDS, CalibrationTarget, DESettings
from .engines import EngineParams
from .exceptions import ConfigurationError
from .pricing import DiscountCurve
from .waterfall import DealConfig, TrancheSpec


def _require(section: dict, name: str, where: str):
    if name not in section:
        raise ConfigurationError(f"{where}: missing required field {name!r}")
    return section[name]


def _parse_pool(doc: dict) -> PoolConfig:
    pool = _require(doc, "pool", "config")
    types = []
    for i, raw in enumerate(_require(pool, "asset_types", "pool")):
        where = f"pool.asset_types[{i}]"
        types.append(AssetTypeSpec(
            v0=_require(raw, "v0", where),
            lambda_rate=_require(raw, "lambda_rate", where),
            delta=_require(raw, "delta", where),
            count=raw.get("count", 1),
        ))
    return PoolConfig(
        types,
        rent_yield=_require(pool, "rent_yield", "pool"),
        fee=_require(pool, "fee", "pool"),
        horizon=_require(pool, "horizon", "pool"),
        rho=_require(pool, "rho", "pool"),
        period=pool.get("period", 0.5),
    )


def _parse_tranche(raw: dict, name: str) -> TrancheSpec:
    where = f"deal.tranches.{name}"
    return TrancheSpec(
        name=name,
        notional=_require(raw, "notional", where),
        spread=raw.get("spread", 0.0),
        fixed_rate=raw.get("fixed_rate"),
    )


def _parse_deal(doc: dict, base) -> DealConfig:
    deal = _require(doc, "deal", "config")
    tranches = _require(deal, "tranches", "deal")
    profile = deal.get("contractual_profile")
    if profile is None:
        profile = np.cumsum(base.amounts)
    return DealConfig(
        senior=_parse_tranche(_require(tranches, "senior", "deal.tranches"), "senior"),
        mezzanine=_parse_tranche(_require(tranches, "mezzanine", "deal.tranches"), "mezzanine"),
        junior=_parse_tranche(_require(tranches, "junior", "deal.tranches"), "junior"),
        lrl=_parse_tranche(_require(tranches, "lrl", "deal.tranches"), "lrl"),
        times=base.times,
        contractual_profile=np.asarray(profile, dtype=float),
        ccr_threshold=deal.get("ccr_threshold", 0.9),
        senior_fees=deal.get("senior_fees", 0.0),
        servicer_fee_rate=deal.get("servicer_fee_rate", 0.0),
        reserve_target_rate=deal.get("reserve_target_rate", 0.0),
        lrl_link_ratio=deal.get("lrl_link_ratio"),
        period_length=base.period_length,
    )


def _parse_curve(doc: dict) -> DiscountCurve:
    curve = _require(doc, "curve", "config")
    return DiscountCurve(
        times=np.asarray(_require(curve, "times", "curve"), dtype=float),
        zero_rates=np.asarray(_require(curve, "zero_rates", "curve"), dtype=float),
    )


def _parse_params(doc: dict) -> EngineParams:
    raw = doc.get("engine_params", {})
    return EngineParams(
        sigma=raw.get("sigma", 0.0),
        mu=raw.get("mu", 0.0),
        p=raw.get("p", 0.0),
        alpha=raw.get("alpha", 2.0),
        rho=raw.get("rho", 0.0),
        w=raw.get("w", 1.0),
    )


def _parse_calibration(doc: dict):
    raw = doc.get("calibration", {})
    targets = None
    if "targets" in raw:
        targets = CalibrationTarget(dict(raw["targets"]))
    bounds = dict(DEFAULT_BOUNDS)
    bounds.update({k: tuple(v) for k, v in raw.get("bounds", {}).items()})
    settings = DESettings(
        population=raw.get("population", 40),
        mutation=raw.get("mutation", 0.7),
        crossover=raw.get("crossover", 0.9),
        max_generations=raw.get("max_generations", 500),
        tolerance=raw.get("tolerance", 0.02),
        seed=raw.get("seed", 0),
        bounds=bounds,
    )
    return targets, settings, raw.get("paths", 5000)


@dataclass
class RunConfig:
    pool: PoolConfig
    deal: DealConfig
    curve: DiscountCurve
    params: EngineParams
    base: object
    index_rate: float
    seed: int
    n_paths: int
    mode: str
    calibration_targets: CalibrationTarget | None
    de_settings: DESettings
    calibration_paths: int
    observed_prices: dict | None = None
    eval_dates: list | None = None
    bins: int = 40
    sim_paths: int = 1000


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config parse error at line {exc.lineno}: {exc.msg}") from exc
    return parse_config(doc)


def parse_config(doc: dict) -> RunConfig:
    pool = _parse_pool(doc)
    base = base_scenario(pool)
    deal = _parse_deal(doc, base)
    curve = _parse_curve(doc)
    params = _parse_params(doc)
    targets, settings, calib_paths = _parse_calibration(doc)
    run = doc.get("run", {})
    return RunConfig(
        pool=pool,
        deal=deal,
        curve=curve,
        params=params,
        base=base,
        index_rate=doc.get("index_rate", 0.0),
        seed=run.get("seed", 42),
        n_paths=run.get("paths", 100_000),
        mode=run.get("mode", "exact"),
        calibration_targets=targets,
        de_settings=settings,
        calibration_paths=calib_paths,
        observed_prices=doc.get("observed_prices"),
        eval_dates=run.get("eval_dates"),
        bins=run.get("bins", 40),
        sim_paths=run.get("simulate_paths", 1000),
    )


def toy_deal_document() -> dict:
    """The worked example: five asset types, four tranches, flat 2% rates."""
    return {
        "pool": {
            "asset_types": [
                {"v0": 1.0, "lambda_rate": 0.5, "delta": 0.98, "count": 20},
                {"v0": 1.5, "lambda_rate": 0.4, "delta": 0.97, "count": 20},
                {"v0": 2.0, "lambda_rate": 0.45, "delta": 0.99, "count": 20},
                {"v0": 2.5, "lambda_rate": 0.35, "delta": 0.96, "count": 20},
                {"v0": 3.0, "lambda_rate": 0.3, "delta": 0.95, "count": 20},
            ],
            "rent_yield": 0.05,
            "fee": 0.10,
            "horizon": 10.0,
            "rho": 0.5,
        },
        "deal": {
            "tranches": {
                "senior": {"notional": 135.0, "spread": 0.025},
                "mezzanine": {"notional": 31.5, "spread": 0.05},
                "junior": {"notional": 13.5, "fixed_rate": 0.10},
                "lrl": {"notional": 5.805, "spread": 0.002},
            },
            "ccr_threshold": 0.9,
        },
        "curve": {"times": [0.5, 10.0], "zero_rates": [0.02, 0.02]},
        "index_rate": 0.02,
        "engine_params": {
            "sigma": 0.1053, "mu": 0.0, "p": 0.8646,
            "alpha": 4.6305, "rho": 0.5, "w": 0.7571,
        },
        "calibration": {
            "targets": {"senior": 100.0, "mezzanine": 30.0, "junior": 5.0},
            "population": 40,
            "max_generations": 300,
            "tolerance": 0.02,
            "seed": 7,
            "paths": 5000,
        },
        "run": {"seed": 42, "paths": 100000, "mode": "exact"},
    }
