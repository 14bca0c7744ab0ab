"""Priority-of-payments state machine over Senior/Mezzanine/Junior/LRL.

One period allocates the collected cash strictly in order: senior expenses,
servicer fees, LRL interest, Senior interest, Mezzanine interest (gated by
the cumulative-collection ratio), reserve top-up, LRL principal linked to the
Senior balance, Senior principal, deferred Mezzanine interest, Mezzanine
principal, Junior coupon, Junior principal, and any residual to Junior as
variable return.  Every payment is min(due, remaining cash), so subordination
of principal is emergent: cash only reaches a junior class after the senior
one is paid in full.

The same function runs in exact mode (hard min / indicators, used for price
validation and conservation checks) and smooth mode (softplus caps and a
sigmoid trigger on a tape) through the mode ops.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Var
from .exceptions import ConfigurationError, WaterfallError

TRANCHE_NAMES = ("senior", "mezzanine", "junior", "lrl")


@dataclass(frozen=True)
class TrancheSpec:
    """Liability slice: notional and coupon (floating index + spread or fixed)."""

    name: str
    notional: float
    spread: float = 0.0
    fixed_rate: float | None = None  # set for fixed-coupon tranches

    def __post_init__(self):
        if self.notional <= 0.0:
            raise ConfigurationError(f"{self.name}: notional must be positive")
        if not np.isfinite(self.spread):
            raise ConfigurationError(f"{self.name}: spread must be finite")

    def coupon(self, fixing: float) -> float:
        """Annual coupon rate for a period with the given index fixing."""
        if self.fixed_rate is not None:
            return self.fixed_rate
        return fixing + self.spread


@dataclass(frozen=True)
class DealConfig:
    """Static deal terms plus the contractual collection profile."""

    senior: TrancheSpec
    mezzanine: TrancheSpec
    junior: TrancheSpec
    lrl: TrancheSpec
    times: np.ndarray
    contractual_profile: np.ndarray  # cumulative expected collections
    ccr_threshold: float = 0.9
    senior_fees: float = 0.0          # currency per period
    servicer_fee_rate: float = 0.0    # fraction of period collections
    reserve_target_rate: float = 0.0  # fraction of outstanding senior notional
    lrl_link_ratio: float | None = None  # default LRL0 / Senior0
    period_length: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "contractual_profile", np.asarray(self.contractual_profile, dtype=float))
        if not 0.0 < self.ccr_threshold <= 1.0:
            raise ConfigurationError("ccr_threshold must lie in (0, 1]")
        if min(self.senior_fees, self.servicer_fee_rate, self.reserve_target_rate) < 0.0:
            raise ConfigurationError("fee and reserve rates must be non-negative")
        if len(self.times) != len(self.contractual_profile):
            raise ConfigurationError("profile length must match the payment grid")
        if np.any(np.diff(self.contractual_profile) < -1e-9):
            raise ConfigurationError("contractual profile must be non-decreasing")
        if self.lrl_link_ratio is None:
            object.__setattr__(self, "lrl_link_ratio", self.lrl.notional / self.senior.notional)

    @property
    def tranches(self) -> dict:
        return {
            "senior": self.senior,
            "mezzanine": self.mezzanine,
            "junior": self.junior,
            "lrl": self.lrl,
        }

    @property
    def n_periods(self) -> int:
        return len(self.times)


@dataclass
class WaterfallState:
    """Evolving balances; values are floats, path vectors, or tape Vars."""

    senior_out: object
    mezz_out: object
    junior_out: object
    lrl_out: object
    reserve: object = 0.0
    deferred_mezz: object = 0.0
    cum_collections: object = 0.0
    period_index: int = 0

    @classmethod
    def initial(cls, deal: DealConfig) -> "WaterfallState":
        return cls(
            senior_out=deal.senior.notional,
            mezz_out=deal.mezzanine.notional,
            junior_out=deal.junior.notional,
            lrl_out=deal.lrl.notional,
        )

    def outstanding(self, name: str):
        return {
            "senior": self.senior_out,
            "mezzanine": self.mezz_out,
            "junior": self.junior_out,
            "lrl": self.lrl_out,
        }[name]


@dataclass
class PeriodFlows:
    """Cash paid out of one period, by purpose."""

    interest: dict = field(default_factory=dict)
    principal: dict = field(default_factory=dict)
    variable: object = 0.0  # junior variable return (step 13)
    fees: object = 0.0
    reserve_delta: object = 0.0
    ccr: object = 1.0


@dataclass
class TrancheCashFlows:
    """Per-tranche, per-period payment record of one waterfall run."""

    times: np.ndarray
    interest: dict
    principal: dict
    variable: list
    fees: list
    reserve_delta: list
    ccr: list
    outstanding: dict  # post-payment notional per tranche per period

    def tranche_total(self, name: str):
        cols = [i + p for i, p in zip(self.interest[name], self.principal[name])]
        if name == "junior":
            cols = [c + v for c, v in zip(cols, self.variable)]
        return cols


def _as_value(x):
    return x.value if isinstance(x, Var) else x


def _check_finite(step: str, *values):
    for v in values:
        arr = _as_value(v)
        if not np.all(np.isfinite(arr)):
            raise WaterfallError(f"non-finite state after step {step!r}")


def ccr(cum_collections, profile_value, ops):
    """Cumulative collection ratio with a guarded denominator."""
    return ops.divide(cum_collections, profile_value)


def run_waterfall_period(available, state: WaterfallState, deal: DealConfig,
                         fixing: float, ops, is_final: bool = False):
    """Allocate one period's cash; returns (new state, period flows).

    ``available`` is the cash collected this period; the reserve carried in
    the state is released into the pool before allocation and rebuilt to its
    target at step 6 (target zero in the final period, releasing it).
    """
    avail_value = _as_value(available)
    if np.any(avail_value < 0.0):
        raise WaterfallError("negative available cash")

    dt = deal.period_length
    collected = available
    cum = state.cum_collections + collected
    profile = deal.contractual_profile[state.period_index]
    ratio = ccr(cum, profile, ops)
    gate = ops.step(ratio - deal.ccr_threshold)

    cash = collected + state.reserve
    flows = PeriodFlows(ccr=ratio)

    # 1. senior expenses
    pay_exp = ops.minimum(deal.senior_fees, cash)
    cash = cash - pay_exp
    # 2. servicer fees (fraction of this period's collections)
    pay_srv = ops.minimum(deal.servicer_fee_rate * collected, cash)
    cash = cash - pay_srv
    flows.fees = pay_exp + pay_srv

    # 3. LRL interest
    lrl_int = ops.minimum(deal.lrl.coupon(fixing) * dt * state.lrl_out, cash)
    cash = cash - lrl_int
    # 4. senior interest
    sen_int = ops.minimum(deal.senior.coupon(fixing) * dt * state.senior_out, cash)
    cash = cash - sen_int
    # 5. mezzanine interest, payable only while the trigger holds
    mezz_due = deal.mezzanine.coupon(fixing) * dt * state.mezz_out
    mezz_int = ops.minimum(gate * mezz_due, cash)
    cash = cash - mezz_int
    deferred = state.deferred_mezz + mezz_due - mezz_int
    _check_finite("mezzanine interest", cash, deferred)

    # 6. cash reserve rebuilt toward its target (released at maturity)
    target = 0.0 if is_final else deal.reserve_target_rate * state.senior_out
    new_reserve = ops.minimum(target, cash)
    cash = cash - new_reserve
    flows.reserve_delta = new_reserve - state.reserve

    # 7. LRL principal amortizes in step with the senior balance: the due
    # amount is the link ratio times the prospective senior repayment (what
    # the senior would receive from the cash at this step), so both reach
    # zero together and the step order stays acyclic
    prospective_senior = ops.minimum(state.senior_out, cash)
    lrl_due = ops.minimum(deal.lrl_link_ratio * prospective_senior, state.lrl_out)
    lrl_prin = ops.minimum(lrl_due, cash)
    cash = cash - lrl_prin
    lrl_out = state.lrl_out - lrl_prin
    # 8. senior principal
    sen_prin = ops.minimum(state.senior_out, cash)
    cash = cash - sen_prin
    senior_out = state.senior_out - sen_prin
    # 9. deferred mezzanine interest, once the trigger recovers or at maturity
    gate9 = 1.0 if is_final else gate
    mezz_def_paid = ops.minimum(gate9 * deferred, cash)
    cash = cash - mezz_def_paid
    deferred = deferred - mezz_def_paid
    # 10. mezzanine principal (cash reaches here only after senior redemption)
    mezz_prin = ops.minimum(state.mezz_out, cash)
    cash = cash - mezz_prin
    mezz_out = state.mezz_out - mezz_prin
    # 11. junior coupon
    jun_int = ops.minimum(deal.junior.coupon(fixing) * dt * state.junior_out, cash)
    cash = cash - jun_int
    # 12. junior principal
    jun_prin = ops.minimum(state.junior_out, cash)
    cash = cash - jun_prin
    junior_out = state.junior_out - jun_prin
    # 13. residual to junior as variable return
    flows.variable = cash

    flows.interest = {
        "senior": sen_int,
        "mezzanine": mezz_int + mezz_def_paid,
        "junior": jun_int,
        "lrl": lrl_int,
    }
    flows.principal = {
        "senior": sen_prin,
        "mezzanine": mezz_prin,
        "junior": jun_prin,
        "lrl": lrl_prin,
    }
    new_state = WaterfallState(
        senior_out=senior_out,
        mezz_out=mezz_out,
        junior_out=junior_out,
        lrl_out=lrl_out,
        reserve=new_reserve,
        deferred_mezz=deferred,
        cum_collections=cum,
        period_index=state.period_index + 1,
    )
    _check_finite("residual", senior_out, mezz_out, junior_out, lrl_out, deferred)
    return new_state, flows


def run_waterfall(collections, deal: DealConfig, fixings, ops):
    """Fold the period allocator over the payment grid.

    collections: list of per-period values (floats, path vectors, or Vars).
    fixings: per-period index fixings (floats) or one flat value.
    """
    n = deal.n_periods
    if len(collections) != n:
        raise ConfigurationError("collections length must match the payment grid")
    fixings = np.broadcast_to(np.asarray(fixings, dtype=float), (n,))

    state = WaterfallState.initial(deal)
    interest = {t: [] for t in TRANCHE_NAMES}
    principal = {t: [] for t in TRANCHE_NAMES}
    outstanding = {t: [] for t in TRANCHE_NAMES}
    variable, fees, reserve_delta, ratios = [], [], [], []
    for t in range(n):
        state, flows = run_waterfall_period(
            collections[t], state, deal, float(fixings[t]), ops, is_final=(t == n - 1)
        )
        for name in TRANCHE_NAMES:
            interest[name].append(flows.interest[name])
            principal[name].append(flows.principal[name])
            outstanding[name].append(state.outstanding(name))
        variable.append(flows.variable)
        fees.append(flows.fees)
        reserve_delta.append(flows.reserve_delta)
        ratios.append(flows.ccr)
    return TrancheCashFlows(
        times=deal.times,
        interest=interest,
        principal=principal,
        variable=variable,
        fees=fees,
        reserve_delta=reserve_delta,
        ccr=ratios,
        outstanding=outstanding,
    ), state
