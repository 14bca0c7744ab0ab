"""Single-scenario valuation metrics: IRR, Z-spread, annuity, asset-swap spread.

The null scenario is the deterministic expected collection schedule pushed
through the hard-mode waterfall; its tranche flows and price anchor the
intrinsic metrics of each tranche.  Rate solvers bracket and refine with a
guarded residual check; failure to bracket is an error, never a silent
extrapolation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .exceptions import ConfigurationError, MetricsError
from .modes import ExactOps
from .pricing import DiscountCurve
from .waterfall import TRANCHE_NAMES, DealConfig, run_waterfall

RATE_BRACKET = (-0.99, 10.0)


class GuardedValue(NamedTuple):
    value: float
    guarded: bool


def _solve(f, lo: float, hi: float, what: str) -> float:
    flo, fhi = f(lo), f(hi)
    if not (np.isfinite(flo) and np.isfinite(fhi)):
        raise MetricsError(f"{what} objective not finite on the bracket")
    if flo * fhi > 0.0:
        raise MetricsError(f"{what} not bracketed in ({lo}, {hi})")
    return float(brentq(f, lo, hi, xtol=1e-14, rtol=8.884e-16, maxiter=200))


def irr(flows, times, price: float, bracket=RATE_BRACKET) -> float:
    """Rate r* with sum C_i / (1 + r*)^t_i equal to the observed price."""
    flows = np.asarray(flows, dtype=float)
    times = np.asarray(times, dtype=float)
    if price <= 0.0:
        raise MetricsError("IRR needs a positive observed price")
    if not np.any(flows > 0.0):
        raise MetricsError("IRR needs at least one positive flow")

    def npv_gap(r):
        return float(np.sum(flows / (1.0 + r) ** times) - price)

    root = _solve(npv_gap, bracket[0], bracket[1], "IRR")
    if abs(npv_gap(root)) > 1e-10 * price:
        raise MetricsError("IRR residual exceeds tolerance")
    return root


def z_spread(flows, times, discounts, price: float, bracket=RATE_BRACKET) -> float:
    """Spread z with sum C_i * D_i * exp(-t_i z) equal to the observed price."""
    flows = np.asarray(flows, dtype=float)
    times = np.asarray(times, dtype=float)
    discounts = np.asarray(discounts, dtype=float)
    if price <= 0.0:
        raise MetricsError("Z-spread needs a positive observed price")
    if not np.any(flows > 0.0):
        raise MetricsError("Z-spread needs at least one positive flow")

    def gap(z):
        return float(np.sum(flows * discounts * np.exp(-times * z)) - price)

    root = _solve(gap, bracket[0], bracket[1], "Z-spread")
    if abs(gap(root)) > 1e-10 * price:
        raise MetricsError("Z-spread residual exceeds tolerance")
    return root


def annuity(plan, discounts, year_fractions, notional: float, last_amount: float = 0.0,
            lapse: int = 0, eps: float = 1e-12) -> GuardedValue:
    """Annuity of an amortization plan per 100 of (notional - last amount).

    Terms are D[i+lapse] * (plan[i] - last) * Y[i+lapse] for every i the
    shifted index reaches; the denominator is guarded at eps.
    """
    plan = np.asarray(plan, dtype=float)
    discounts = np.asarray(discounts, dtype=float)
    year_fractions = np.asarray(year_fractions, dtype=float)
    if eps <= 0.0:
        raise ConfigurationError("eps must be positive")
    if lapse < 0:
        raise ConfigurationError("time lapse must be non-negative")
    m = min(len(plan), len(discounts) - lapse, len(year_fractions) - lapse)
    if m < 0:
        raise ConfigurationError("plan length incompatible with the time lapse")
    total = 0.0
    for i in range(m):
        total += discounts[i + lapse] * (plan[i] - last_amount) * year_fractions[i + lapse]
    guarded = (notional - last_amount) < eps
    denom = max(notional - last_amount, eps)
    return GuardedValue(100.0 * total / denom, guarded)


def asw(null_price: float, price: float, annuity_value: float, eps: float = 1e-12) -> GuardedValue:
    """Asset-swap spread (null-scenario price - observed price) / annuity."""
    guarded = abs(annuity_value) < eps
    denom = annuity_value if not guarded else (eps if annuity_value >= 0 else -eps)
    return GuardedValue((null_price - price) / denom, guarded)


@dataclass(frozen=True)
class TrancheMetrics:
    irr: float | None
    z_spread: float | None
    annuity: float
    asw: float
    null_price: float
    observed_price: float


def null_scenario_flows(deal: DealConfig, base, index_fixings=0.0):
    """Tranche flows and plans from the deterministic expected collections."""
    ops = ExactOps()
    flows, _ = run_waterfall(list(base.amounts), deal, index_fixings, ops)
    out = {}
    for name in TRANCHE_NAMES:
        cash = np.array([float(np.asarray(c)) for c in flows.tranche_total(name)])
        plan = np.array([float(np.asarray(o)) for o in flows.outstanding[name]])
        out[name] = (cash, plan)
    return out


def tranche_metrics(deal: DealConfig, base, curve: DiscountCurve,
                    observed_prices: dict | None = None, index_fixings=0.0) -> dict:
    """Per-tranche metric block; observed prices are percent of notional and
    default to the null-scenario price (making the asset-swap spread zero)."""
    flows = null_scenario_flows(deal, base, index_fixings)
    dfs = curve.df(deal.times)
    year_fracs = np.full(len(deal.times), deal.period_length)
    out = {}
    for name in TRANCHE_NAMES:
        cash, plan = flows[name]
        notional = deal.tranches[name].notional
        p0 = float(cash @ dfs)
        if observed_prices is not None and name in observed_prices:
            p_obs = observed_prices[name] / 100.0 * notional
        else:
            p_obs = p0
        try:
            irr_val = irr(cash, deal.times, p_obs)
        except MetricsError:
            irr_val = None
        try:
            z_val = z_spread(cash, deal.times, dfs, p_obs)
        except MetricsError:
            z_val = None
        ann = annuity(plan, dfs, year_fracs, notional, last_amount=float(plan[-1]))
        spread = asw(100.0 * p0 / notional, 100.0 * p_obs / notional, ann.value)
        out[name] = TrancheMetrics(
            irr=irr_val,
            z_spread=z_val,
            annuity=ann.value,
            asw=spread.value,
            null_price=100.0 * p0 / notional,
            observed_price=100.0 * p_obs / notional,
        )
    return out
