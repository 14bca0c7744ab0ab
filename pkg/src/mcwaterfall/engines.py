"""The three stochastic cash-flow engines, applied in sequence to a schedule.

Engine order: lognormal amount shocks, stochastic re-timing of a moved
fraction with heavy-tailed interarrival times, then a multiplicative forecast
haircut.  All three are written against the mode ops so the identical logic
runs hard (validation) or smooth (sensitivities); under fixed draws the smooth
output is differentiable in every engine parameter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Var, vsum
from .exceptions import ConfigurationError
from .modes import ExactOps
from .sampling import RandomStream

_AMOUNT_TAG = "engine-amount"
_TIMING_FACTOR_TAG = "engine-timing-factor"
_TIMING_IDIO_TAG = "engine-timing-idio"


@dataclass(frozen=True)
class CashFlowSchedule:
    """Payment grid (year fractions) with per-period expected amounts."""

    times: np.ndarray
    amounts: np.ndarray
    period_length: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "amounts", np.asarray(self.amounts, dtype=float))
        if self.times.shape != self.amounts.shape or self.times.ndim != 1:
            raise ConfigurationError("times and amounts must be equal-length vectors")
        if len(self.times) and np.any(np.diff(self.times) <= 0.0):
            raise ConfigurationError("times must be strictly increasing")
        if not np.all(np.isfinite(self.amounts)):
            raise ConfigurationError("amounts must be finite")
        if self.period_length <= 0.0:
            raise ConfigurationError("period_length must be positive")

    def __len__(self):
        return len(self.times)

    @property
    def total(self) -> float:
        return float(self.amounts.sum())

    def scaled(self, factor: float) -> "CashFlowSchedule":
        return CashFlowSchedule(self.times, self.amounts * factor, self.period_length)


@dataclass(frozen=True)
class EngineParams:
    """The calibratable parameter vector (sigma, mu, p, alpha, rho, w)."""

    sigma: float = 0.0
    mu: float = 0.0
    p: float = 0.0
    alpha: float = 2.0
    rho: float = 0.0
    w: float = 1.0

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ConfigurationError("sigma must be non-negative")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigurationError("moved fraction p must lie in [0, 1]")
        if self.alpha <= 1.0:
            raise ConfigurationError("alpha must exceed 1")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigurationError("rho must lie in [0, 1]")
        if self.w <= 0.0:
            raise ConfigurationError("spread factor w must be positive")

    def replace(self, **kw) -> "EngineParams":
        d = dict(sigma=self.sigma, mu=self.mu, p=self.p, alpha=self.alpha, rho=self.rho, w=self.w)
        d.update(kw)
        return EngineParams(**d)

    def as_dict(self) -> dict:
        return dict(sigma=self.sigma, mu=self.mu, p=self.p, alpha=self.alpha, rho=self.rho, w=self.w)


@dataclass(frozen=True)
class EngineDraws:
    """Frozen standard-normal draws feeding the engines (common random numbers).

    amount:        (paths, n) shocks for the lognormal amounts
    timing_factor: (paths, 1) shared factor of the timing copula
    timing_idio:   (paths, n) idiosyncratic part of the timing copula
    """

    amount: np.ndarray
    timing_factor: np.ndarray
    timing_idio: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.amount.shape[0]

    def chunk(self, lo: int, hi: int) -> "EngineDraws":
        return EngineDraws(self.amount[lo:hi], self.timing_factor[lo:hi], self.timing_idio[lo:hi])


def draw_engine_noise(seed: int, n_paths: int, n_periods: int) -> EngineDraws:
    """Generate the full draw block for a run; rows index paths, so results
    do not depend on how paths are chunked afterwards."""
    return EngineDraws(
        amount=RandomStream(seed, _AMOUNT_TAG).normals((n_paths, n_periods)),
        timing_factor=RandomStream(seed, _TIMING_FACTOR_TAG).normals((n_paths, 1)),
        timing_idio=RandomStream(seed, _TIMING_IDIO_TAG).normals((n_paths, n_periods)),
    )


# ---------------------------------------------------------------------------
# Engine 1: lognormal amount shocks.
# ---------------------------------------------------------------------------

def amount_shock_columns(base: CashFlowSchedule, sigma, mu, z: np.ndarray, ops) -> list:
    """Per-period columns CF_i * exp((mu - sigma^2/2) t_i + sigma sqrt(t_i) Z_i).

    The exponential compensator keeps each period a martingale at mu = 0;
    zero base amounts pass through as zero.
    """
    cols = []
    drift = mu - sigma * sigma * 0.5
    for i, (t, cf) in enumerate(zip(base.times, base.amounts)):
        expo = drift * t + sigma * (np.sqrt(t) * z[:, i])
        cols.append(ops.exp(expo) * cf)
    return cols


def one_sigma_engine(base: CashFlowSchedule, sigma: float, mu: float, stream: RandomStream,
                     paths: int | None = None) -> np.ndarray:
    """Hard-mode amount shocks drawn from a stream; returns (paths, n) or (n,)."""
    if sigma < 0.0:
        raise ConfigurationError("sigma must be non-negative")
    rows = paths if paths is not None else 1
    z = stream.normals((rows, len(base)))
    cols = amount_shock_columns(base, float(sigma), float(mu), z, ExactOps())
    out = np.stack([np.asarray(c, dtype=float) for c in cols], axis=1)
    return out if paths is not None else out[0]


# ---------------------------------------------------------------------------
# Engine 2: moved-fraction re-timing with heavy-tailed interarrival times.
# ---------------------------------------------------------------------------

def interarrival_columns(n: int, alpha, rho, draws: EngineDraws, ops) -> list:
    """Unit-mean Pareto interarrival times, one column per scheduled flow.

    The Gaussian-copula coupling and the quantile transform are expressed in
    primitives so that, with draws fixed, each time is differentiable in
    alpha and rho (the rho reparameterization is exact but flagged
    experimental at the boundaries of [0, 1]).
    """
    sr = ops.pow(rho, 0.5)
    sq = ops.pow(1.0 - rho, 0.5)
    inv_alpha = ops.divide(1.0, alpha)
    x_m = 1.0 - inv_alpha
    taus = []
    for i in range(n):
        z = sr * draws.timing_factor[:, 0] + sq * draws.timing_idio[:, i]
        log_tail = ops.normal_log_sf(z)  # log(1 - Phi(z))
        taus.append(x_m * ops.exp(-(inv_alpha * log_tail)))
    return taus


def arrival_time_columns(taus: list) -> list:
    """Cumulative sums of interarrival times, in units of grid periods."""
    arrivals = []
    acc = None
    for tau in taus:
        acc = tau if acc is None else acc + tau
        arrivals.append(acc)
    return arrivals


def retime_columns(amounts: list, p, arrivals: list, ops) -> list:
    """Move fraction p of each flow to its stochastic arrival bucket.

    Bucket j (1-based period index) collects arrival indices in
    (j - 1/2, j + 1/2]; the first and last buckets are open-ended so mass
    below the grid lands in period 1 and tail mass accrues to the final
    period.  Total mass is conserved by construction.
    """
    n = len(amounts)
    keep = 1.0 - p
    moved = [p * cf for cf in amounts]
    out = []
    for j in range(1, n + 1):
        lo = None if j == 1 else j - 0.5
        hi = None if j == n else j + 0.5
        contribs = [moved[i] * ops.bucket_mask(arrivals[i], lo, hi) for i in range(n)]
        out.append(keep * amounts[j - 1] + vsum(contribs))
    return out


def multiple_stochastic_time(amounts: np.ndarray, p: float, alpha: float, rho: float,
                             stream: RandomStream, paths: int | None = None) -> np.ndarray:
    """Hard-mode re-timing of (paths, n) or (n,) period amounts."""
    EngineParams(p=p, alpha=alpha, rho=rho)  # range checks
    amounts = np.asarray(amounts, dtype=float)
    flat = amounts.ndim == 1
    arr2d = np.atleast_2d(amounts)
    rows, n = arr2d.shape
    draws = EngineDraws(
        amount=np.zeros((rows, n)),
        timing_factor=stream.normals((rows, 1)),
        timing_idio=stream.normals((rows, n)),
    )
    ops = ExactOps()
    taus = interarrival_columns(n, float(alpha), float(rho), draws, ops)
    arrivals = arrival_time_columns(taus)
    cols = retime_columns([arr2d[:, i] for i in range(n)], float(p), arrivals, ops)
    out = np.stack(cols, axis=1)
    return out[0] if flat and paths is None else out


# ---------------------------------------------------------------------------
# Engine 3: multiplicative forecast haircut.
# ---------------------------------------------------------------------------

def spread_engine(amounts, w):
    """Scale every period by the aggregate adjustment factor w > 0."""
    if not isinstance(w, Var) and w <= 0.0:
        raise ConfigurationError("spread factor w must be positive")
    if isinstance(amounts, list):
        return [w * a for a in amounts]
    return np.asarray(amounts, dtype=float) * w


# ---------------------------------------------------------------------------
# Sequential composition.
# ---------------------------------------------------------------------------

def compose_engine_columns(base: CashFlowSchedule, params: dict, draws: EngineDraws, ops) -> list:
    """Amount shocks, then re-timing, then the haircut, as per-period columns.

    params maps the six parameter names to floats (hard mode) or tape Vars
    (smooth mode); draws are fixed, so smooth outputs are pathwise
    differentiable by reparameterization.
    """
    n = len(base)
    shocked = amount_shock_columns(base, params["sigma"], params["mu"], draws.amount, ops)
    taus = interarrival_columns(n, params["alpha"], params["rho"], draws, ops)
    arrivals = arrival_time_columns(taus)
    retimed = retime_columns(shocked, params["p"], arrivals, ops)
    return spread_engine(retimed, params["w"])


def compose_engines(base: CashFlowSchedule, params: EngineParams, seed: int,
                    n_paths: int) -> np.ndarray:
    """Hard-mode convenience wrapper returning a (paths, n) collections array.

    Smooth-mode callers go through compose_engine_columns with their own tape.
    """
    draws = draw_engine_noise(seed, n_paths, len(base))
    cols = compose_engine_columns(base, params.as_dict(), draws, ExactOps())
    return np.stack(cols, axis=1)
