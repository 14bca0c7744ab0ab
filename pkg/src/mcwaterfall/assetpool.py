"""Toy collateral pool: semi-annual net rent plus copula-timed asset sales.

Each asset pays net rent every full period strictly before its sale period,
then one sale flow at the depreciated value.  Sale times are exponential,
coupled across assets by a one-factor Gaussian copula, shifted by a fair-coin
half-period offset, and placed on the grid by rounding up; assets unsold at
the horizon are force-sold in the final period at the horizon value.

``base_scenario`` is the closed-form expectation of the same discretization
(the copula drops out of the expectation), which is what the stochastic
engines perturb.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engines import CashFlowSchedule
from .exceptions import ConfigurationError
from .sampling import RandomStream, copula_exponential_times


@dataclass(frozen=True)
class AssetTypeSpec:
    """One collateral type: value, sale intensity, price decay, multiplicity."""

    v0: float
    lambda_rate: float
    delta: float
    count: int = 1

    def __post_init__(self):
        if self.v0 <= 0.0:
            raise ConfigurationError("asset value v0 must be positive")
        if self.lambda_rate <= 0.0:
            raise ConfigurationError("lambda_rate must be positive")
        if not 0.0 < self.delta <= 1.0:
            raise ConfigurationError("delta must lie in (0, 1]")
        if self.count < 1:
            raise ConfigurationError("count must be at least 1")


@dataclass(frozen=True)
class PoolConfig:
    asset_types: tuple
    rent_yield: float = 0.05
    fee: float = 0.10
    horizon: float = 10.0
    rho: float = 0.5
    period: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "asset_types", tuple(self.asset_types))
        if not self.asset_types:
            raise ConfigurationError("pool needs at least one asset type")
        if not 0.0 <= self.fee < 1.0:
            raise ConfigurationError("collection fee must lie in [0, 1)")
        if self.horizon <= 0.0 or self.period <= 0.0:
            raise ConfigurationError("horizon and period must be positive")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigurationError("rho must lie in [0, 1]")
        if self.rent_yield < 0.0:
            raise ConfigurationError("rent yield must be non-negative")

    @property
    def n_periods(self) -> int:
        n = round(self.horizon / self.period)
        if abs(n * self.period - self.horizon) > 1e-9:
            raise ConfigurationError("horizon must be a whole number of periods")
        return int(n)

    @property
    def times(self) -> np.ndarray:
        return self.period * np.arange(1, self.n_periods + 1)

    def _expanded(self):
        """Per-asset vectors (v0, lambda, delta) with types repeated by count."""
        v0 = np.concatenate([np.full(t.count, t.v0) for t in self.asset_types])
        lam = np.concatenate([np.full(t.count, t.lambda_rate) for t in self.asset_types])
        dlt = np.concatenate([np.full(t.count, t.delta) for t in self.asset_types])
        return v0, lam, dlt


def simulate_pool(config: PoolConfig, stream: RandomStream, paths: int | None = None):
    """Simulate pool collections; returns a CashFlowSchedule for one path or a
    (paths, n_periods) array when ``paths`` is given."""
    rows = 1 if paths is None else int(paths)
    n = config.n_periods
    v0, lam, dlt = config._expanded()
    n_assets = v0.size

    lambdas = [t.lambda_rate for t in config.asset_types]
    counts = [t.count for t in config.asset_types]
    ts = copula_exponential_times(lambdas, counts, config.rho, stream, paths=rows)
    offsets = 0.5 * stream.bernoulli((rows, n_assets))
    eff = ts + offsets

    forced = eff > config.horizon
    sale_value = np.where(forced, v0 * dlt**config.horizon, v0 * dlt**eff)
    sale_period = np.ceil(eff / config.period - 1e-12).astype(int)
    sale_period = np.clip(sale_period, 1, n)
    sale_period = np.where(forced, n, sale_period)

    out = np.zeros((rows, n))
    rows_idx = np.repeat(np.arange(rows), n_assets)
    cols_idx = (sale_period - 1).ravel()
    np.add.at(out, (rows_idx, cols_idx), sale_value.ravel())

    # net rent in every full period strictly before the (unclipped) sale time,
    # so force-sold assets keep renting through the final period
    rent = config.rent_yield * v0 * config.period * (1.0 - config.fee)
    rent_cut = np.clip(np.ceil(eff / config.period - 1e-12).astype(int), 1, n + 1)
    stop = np.zeros((rows, n + 2))
    np.add.at(stop, (rows_idx, (rent_cut - 1).ravel()),
              np.broadcast_to(rent, rent_cut.shape).ravel())
    cum_stopped = np.cumsum(stop[:, :n], axis=1)
    out += rent.sum() - cum_stopped

    if paths is None:
        return CashFlowSchedule(config.times, out[0], config.period)
    return out


def _exp_decay_segment(lam: float, m: float, a: float, b: float) -> float:
    """E[exp(-m*Ts); a < Ts <= b] for Ts ~ Exp(lam), with a clipped at 0."""
    a = max(a, 0.0)
    if b <= a:
        return 0.0
    r = lam + m
    return lam / r * (np.exp(-r * a) - np.exp(-r * b))


def base_scenario(config: PoolConfig) -> CashFlowSchedule:
    """Analytic per-period expectation of simulate_pool (copula-free)."""
    n = config.n_periods
    dt = config.period
    horizon = config.horizon
    amounts = np.zeros(n)
    for spec in config.asset_types:
        lam, v0, dlt = spec.lambda_rate, spec.v0, spec.delta
        m = -np.log(dlt)
        rent = config.rent_yield * v0 * dt * (1.0 - config.fee)
        for j in range(1, n + 1):
            # rent requires the (offset, unclipped) sale time beyond j*dt
            surv = 0.5 * sum(np.exp(-lam * max(j * dt - h, 0.0)) for h in (0.0, 0.5))
            amounts[j - 1] += spec.count * rent * surv
            # sale lands in period j when the offset time falls in ((j-1)dt, j*dt]
            sale = 0.0
            for h in (0.0, 0.5):
                hi = (j * dt if j < n else horizon) - h
                sale += 0.5 * dlt**h * _exp_decay_segment(lam, m, (j - 1) * dt - h, hi)
            if j == n:
                for h in (0.0, 0.5):
                    sale += 0.5 * dlt**horizon * np.exp(-lam * max(horizon - h, 0.0))
            amounts[j - 1] += spec.count * v0 * sale
    return CashFlowSchedule(config.times, amounts, dt)
