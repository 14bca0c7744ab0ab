"""Deterministic, seedable variate generation for the simulation layer.

Streams are value-like: the pair (seed, stream_id) fully determines the draw
sequence, independent of platform or how many worker threads consume other
streams.  Purpose-tagged streams drawing whole (paths, n) blocks keep results
invariant to how paths are later chunked for evaluation.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri

from .exceptions import ConfigurationError


def _id_words(stream_id) -> tuple[int, ...]:
    """Map a stream id (int, str, or tuple of those) to stable integer words."""
    if isinstance(stream_id, (tuple, list)):
        out: tuple[int, ...] = ()
        for part in stream_id:
            out += _id_words(part)
        return out
    if isinstance(stream_id, (int, np.integer)):
        return (int(stream_id) & 0xFFFFFFFFFFFFFFFF,)
    if isinstance(stream_id, str):
        digest = hashlib.sha256(stream_id.encode("utf-8")).digest()
        return (int.from_bytes(digest[:8], "little"),)
    raise ConfigurationError(f"unsupported stream id component {stream_id!r}")


class RandomStream:
    """Independent random stream keyed by (seed, stream_id)."""

    def __init__(self, seed: int, stream_id=0):
        self.seed = int(seed)
        self.stream_id = stream_id
        ss = np.random.SeedSequence(entropy=(self.seed,) + _id_words(stream_id))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def substream(self, tag) -> "RandomStream":
        """Derive an independent child stream for a sub-purpose."""
        base = self.stream_id if isinstance(self.stream_id, tuple) else (self.stream_id,)
        return RandomStream(self.seed, base + (tag,))

    def normals(self, shape) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def uniforms(self, shape) -> np.ndarray:
        return self._gen.random(shape)

    def bernoulli(self, shape, p: float = 0.5) -> np.ndarray:
        return (self._gen.random(shape) < p).astype(float)


@dataclass(frozen=True)
class ParetoSpec:
    """Pareto shape with the scale pinned so the mean is exactly one."""

    alpha: float

    def __post_init__(self):
        if self.alpha <= 1.0:
            raise ConfigurationError("pareto alpha must exceed 1 (infinite mean otherwise)")

    @property
    def x_m(self) -> float:
        return (self.alpha - 1.0) / self.alpha


def pareto_inverse_cdf(u, spec: ParetoSpec):
    """Quantile of the unit-mean Pareto law: x_m * (1-u)^(-1/alpha)."""
    u = np.asarray(u, dtype=float)
    return spec.x_m * (1.0 - u) ** (-1.0 / spec.alpha)


def pareto_cdf(x, spec: ParetoSpec):
    x = np.asarray(x, dtype=float)
    return np.where(x < spec.x_m, 0.0, 1.0 - (spec.x_m / np.maximum(x, spec.x_m)) ** spec.alpha)


def _check_rho(rho: float) -> float:
    if not 0.0 <= rho <= 1.0:
        raise ConfigurationError("equicorrelation rho must lie in [0, 1]")
    return float(rho)


def equicorrelated_normals(n: int, rho: float, stream: RandomStream, paths: int | None = None):
    """One-factor Gaussian vector: z_i = sqrt(rho)*Z + sqrt(1-rho)*eps_i.

    Marginals are standard normal with pairwise population correlation rho.
    With ``paths`` set, returns a (paths, n) block whose rows are independent;
    the common factor is drawn first, then the idiosyncratic block.
    """
    rho = _check_rho(rho)
    shape = (n,) if paths is None else (paths, n)
    factor_shape = (1,) if paths is None else (paths, 1)
    common = stream.normals(factor_shape)
    idio = stream.normals(shape)
    return np.sqrt(rho) * common + np.sqrt(1.0 - rho) * idio


def correlated_pareto_interarrivals(
    n: int, alpha: float, rho: float, stream: RandomStream, paths: int | None = None
):
    """Unit-mean Pareto interarrival times coupled through a Gaussian copula."""
    spec = ParetoSpec(alpha)
    z = equicorrelated_normals(n, rho, stream, paths)
    return pareto_inverse_cdf(ndtr(z), spec)


def copula_exponential_times(
    lambdas, counts, rho: float, stream: RandomStream, paths: int | None = None
):
    """Exponential sale times for a pool, correlated through one Gaussian factor.

    lambdas and counts are per asset type; the result has one column per asset
    (types expanded in order) and marginals Exponential(lambda of its type).
    """
    lambdas = np.asarray(lambdas, dtype=float)
    counts = np.asarray(counts, dtype=int)
    if np.any(lambdas <= 0.0):
        raise ConfigurationError("exponential rates must be strictly positive")
    if lambdas.shape != counts.shape:
        raise ConfigurationError("lambdas and counts must align")
    rho = _check_rho(rho)
    rates = np.repeat(lambdas, counts)
    z = equicorrelated_normals(rates.size, rho, stream, paths)
    # T = -log(1 - Phi(z)) / lambda, with the tail evaluated in log space
    return -log_ndtr(-z) / rates


def normal_inverse_cdf(u):
    return ndtri(u)
