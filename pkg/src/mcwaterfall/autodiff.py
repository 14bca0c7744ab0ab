"""Reverse-mode automatic differentiation on a scalar operation tape.

Every recorded operation is an elementwise scalar op.  A node's value may be
a python float or a 1-D numpy array holding one lane per Monte Carlo path, so
simulation code written against scalar semantics batches transparently across
paths; gradient accumulation over the path axis is an ordered reduction done
by the caller.

The module also provides the smooth surrogates used to keep cash-flow logic
differentiable: sharp sigmoids, overflow-safe softplus, double-sigmoid bucket
masks and a guarded division/log.  Each surrogate works both on tracked
``Var`` operands (recording a tape node) and on plain floats/arrays, which is
what makes the finite-difference gradient checker possible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit, log_ndtr, ndtr

from .exceptions import ConfigurationError, GradientError

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class SmoothingConfig:
    """Sharpness and guard settings for the smooth surrogates.

    k is the sigmoid sharpness per unit bucket width, beta the softplus
    sharpness, eps the guard applied to denominators and log arguments.
    """

    k: float = 50.0
    beta: float = 50.0
    eps: float = 1e-12

    def __post_init__(self):
        if self.k <= 0 or self.beta <= 0 or self.eps <= 0:
            raise ConfigurationError("smoothing constants must be strictly positive")


class Var:
    """Handle to one tape node: an index plus a reference to its tape."""

    __slots__ = ("tape", "i")

    # force numpy to defer to the reflected operators below instead of
    # broadcasting a Var into an object array
    __array_ufunc__ = None

    def __init__(self, tape: "Tape", i: int):
        self.tape = tape
        self.i = i

    @property
    def value(self):
        return self.tape._val[self.i]

    def __repr__(self):
        return f"Var(node={self.i}, value={self.value!r})"

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Var):
            return self.tape._push("add", self.i, other.i, None)
        return self.tape._push("addc", self.i, -1, other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Var):
            return self.tape._push("sub", self.i, other.i, None)
        return self.tape._push("subc", self.i, -1, other)

    def __rsub__(self, other):
        return self.tape._push("rsubc", self.i, -1, other)

    def __mul__(self, other):
        if isinstance(other, Var):
            return self.tape._push("mul", self.i, other.i, None)
        return self.tape._push("mulc", self.i, -1, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            return self.tape._push("div", self.i, other.i, None)
        return self.tape._push("divc", self.i, -1, other)

    def __rtruediv__(self, other):
        return self.tape._push("rdivc", self.i, -1, other)

    def __neg__(self):
        return self.tape._push("neg", self.i, -1, None)

    def __pow__(self, c):
        if isinstance(c, Var):
            return NotImplemented
        return self.tape._push("powc", self.i, -1, float(c))


class Tape:
    """Append-only record of scalar operations in topological order.

    Parents always precede children, so one reverse sweep over the node list
    propagates adjoints to every leaf.  ``guard_count`` tracks how often the
    eps guard fired on divisions or logs (a diagnostic, not an error).
    """

    def __init__(self, eps: float = 1e-12):
        self.eps = float(eps)
        self._op: list[str] = []
        self._pa: list[int] = []
        self._pb: list[int] = []
        self._aux: list = []
        self._val: list = []
        self.guard_count = 0

    def __len__(self):
        return len(self._op)

    # -- node creation ----------------------------------------------------
    def var(self, value) -> Var:
        """Register a leaf variable."""
        return self._append("leaf", -1, -1, None, value)

    def _append(self, op, a, b, aux, value) -> Var:
        self._op.append(op)
        self._pa.append(a)
        self._pb.append(b)
        self._aux.append(aux)
        self._val.append(value)
        return Var(self, len(self._op) - 1)

    def _guard_div(self, d):
        """Replace near-zero denominators by sign(d)*eps, counting events."""
        eps = self.eps
        if isinstance(d, np.ndarray):
            small = np.abs(d) < eps
            n = int(np.count_nonzero(small))
            if n:
                self.guard_count += n
                sign = np.where(d < 0.0, -1.0, 1.0)
                d = np.where(small, sign * eps, d)
            return d
        if abs(d) < eps:
            self.guard_count += 1
            return eps if d >= 0.0 else -eps
        return d

    def _guard_log(self, a):
        """log argument guard: clamp the band (-eps, eps) up to eps, reject below."""
        eps = self.eps
        if isinstance(a, np.ndarray):
            if np.any(a <= -eps):
                raise ConfigurationError("log of negative input outside guard band")
            small = a < eps
            n = int(np.count_nonzero(small))
            if n:
                self.guard_count += n
                a = np.where(small, eps, a)
            return a
        if a <= -eps:
            raise ConfigurationError("log of negative input outside guard band")
        if a < eps:
            self.guard_count += 1
            return eps
        return a

    def _guard_div_silent(self, d):
        """Same guard as _guard_div but without touching the counter (backward)."""
        eps = self.eps
        if isinstance(d, np.ndarray):
            small = np.abs(d) < eps
            if np.any(small):
                sign = np.where(d < 0.0, -1.0, 1.0)
                return np.where(small, sign * eps, d)
            return d
        if abs(d) < eps:
            return eps if d >= 0.0 else -eps
        return d

    def _guard_log_silent(self, a):
        eps = self.eps
        if isinstance(a, np.ndarray):
            return np.where(a < eps, eps, a)
        return a if a >= eps else eps

    def _push(self, op, a, b, aux) -> Var:
        """Evaluate one primitive and append its node."""
        va = self._val[a]
        if op == "add":
            v = va + self._val[b]
        elif op == "sub":
            v = va - self._val[b]
        elif op == "mul":
            v = va * self._val[b]
        elif op == "div":
            v = va / self._guard_div(self._val[b])
        elif op == "addc":
            v = va + aux
        elif op == "subc":
            v = va - aux
        elif op == "rsubc":
            v = aux - va
        elif op == "mulc":
            v = va * aux
        elif op == "divc":
            v = va / self._guard_div(aux)
        elif op == "rdivc":
            v = aux / self._guard_div(va)
        elif op == "neg":
            v = -va
        elif op == "exp":
            v = np.exp(va)
        elif op == "log":
            v = np.log(self._guard_log(va))
        elif op == "powc":
            v = va ** aux
        elif op == "sigmoid":
            v = expit(aux * va)
        elif op == "softplus":
            z = aux * va
            v = (np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))) / aux
        elif op == "normcdf":
            v = ndtr(va)
        elif op == "nlogsf":
            v = log_ndtr(-va)
        elif op == "bmask":
            lo, hi, k = aux
            s_lo = expit(k * (va - lo)) if lo is not None else 1.0
            s_hi = expit(k * (va - hi)) if hi is not None else 0.0
            v = s_lo * (1.0 - s_hi)
        else:  # pragma: no cover - internal misuse
            raise ValueError(f"unknown op {op!r}")
        return self._append(op, a, b, aux, v)

    # -- contract entry points --------------------------------------------
    def record_binary(self, op: str, a: Var, b) -> Var:
        if op not in ("add", "sub", "mul", "div"):
            raise ConfigurationError(f"unsupported binary op {op!r}")
        if isinstance(b, Var):
            return self._push(op, a.i, b.i, None)
        return self._push({"add": "addc", "sub": "subc", "mul": "mulc", "div": "divc"}[op], a.i, -1, b)

    def record_unary(self, op: str, a: Var, c: float | None = None) -> Var:
        if op == "pow_const":
            return self._push("powc", a.i, -1, float(c))
        if op in ("exp", "log", "neg"):
            return self._push(op, a.i, -1, None)
        raise ConfigurationError(f"unsupported unary op {op!r}")


# ---------------------------------------------------------------------------
# Smooth primitives, dual-dispatch on Var vs float/array.
# ---------------------------------------------------------------------------

def sigmoid(x, k: float = 1.0):
    """Sharp sigmoid 1/(1 + exp(-k*x)), overflow-safe for any k*x."""
    if k <= 0:
        raise ConfigurationError("sigmoid sharpness k must be positive")
    if isinstance(x, Var):
        return x.tape._push("sigmoid", x.i, -1, float(k))
    return expit(k * np.asarray(x, dtype=float)) if isinstance(x, np.ndarray) else float(expit(k * x))


def softplus(x, beta: float = 1.0):
    """Smooth max(x, 0): log(1 + exp(beta*x))/beta, overflow-safe."""
    if beta <= 0:
        raise ConfigurationError("softplus sharpness beta must be positive")
    if isinstance(x, Var):
        return x.tape._push("softplus", x.i, -1, float(beta))
    z = beta * np.asarray(x, dtype=float)
    out = (np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))) / beta
    return out if isinstance(x, np.ndarray) else float(out)


def vexp(x):
    if isinstance(x, Var):
        return x.tape._push("exp", x.i, -1, None)
    return np.exp(x)


def vlog(x):
    if isinstance(x, Var):
        return x.tape._push("log", x.i, -1, None)
    return np.log(x)


def normal_cdf(x):
    """Standard normal CDF as a differentiable primitive."""
    if isinstance(x, Var):
        return x.tape._push("normcdf", x.i, -1, None)
    return ndtr(x)


def normal_log_sf(x):
    """log(1 - Phi(x)), stable deep into the upper tail."""
    if isinstance(x, Var):
        return x.tape._push("nlogsf", x.i, -1, None)
    return log_ndtr(-np.asarray(x, dtype=float)) if isinstance(x, np.ndarray) else float(log_ndtr(-x))


def interval_mask(x, lo, hi, k: float = 50.0):
    """Smooth indicator of x in (lo, hi) as a single fused tape node.

    Either edge may be None for an open-ended interval; the family of masks
    over a partition with open outer edges sums to 1 up to O(exp(-k*width)).
    """
    if k <= 0:
        raise ConfigurationError("mask sharpness k must be positive")
    if isinstance(x, Var):
        return x.tape._push("bmask", x.i, -1, (lo, hi, float(k)))
    s_lo = expit(k * (x - lo)) if lo is not None else 1.0
    s_hi = expit(k * (x - hi)) if hi is not None else 0.0
    return s_lo * (1.0 - s_hi)


def double_sigmoid_mask(tau, bucket: float, k: float = 50.0):
    """Mask of the unit bucket (bucket, bucket+1): sig_k(t-b)*(1-sig_k(t-(b+1)))."""
    if bucket < 0:
        raise ConfigurationError("bucket index must be non-negative")
    return interval_mask(tau, float(bucket), float(bucket) + 1.0, k)


def vsum(items):
    """Ordered left fold of a sequence of Vars/values (deterministic)."""
    it = iter(items)
    try:
        acc = next(it)
    except StopIteration:
        return 0.0
    for x in it:
        acc = acc + x
    return acc


# ---------------------------------------------------------------------------
# Backward sweep.
# ---------------------------------------------------------------------------

class Gradients:
    """Adjoints of one output with respect to every tape node."""

    def __init__(self, tape: Tape, adj: list):
        self._tape = tape
        self._adj = adj

    def wrt(self, v: Var):
        """d(output)/d(v); zero if v does not influence the output."""
        g = self._adj[v.i]
        if g is None:
            val = self._tape._val[v.i]
            return np.zeros_like(val) if isinstance(val, np.ndarray) else 0.0
        return g


def backward(tape: Tape, output: Var, seed=1.0) -> Gradients:
    """Single reverse sweep; returns adjoints for every node up to output.

    The tape is left unchanged, so several outputs of the same recording can
    be differentiated independently.  Raises GradientError at the first node
    whose adjoint contains NaN.
    """
    if output.tape is not tape:
        raise GradientError("output does not belong to this tape")
    op, pa, pb, aux, val = tape._op, tape._pa, tape._pb, tape._aux, tape._val
    adj: list = [None] * len(op)
    adj[output.i] = seed

    def acc(j, g):
        cur = adj[j]
        adj[j] = g if cur is None else cur + g

    for i in range(output.i, -1, -1):
        g = adj[i]
        if g is None:
            continue
        if np.any(np.isnan(g)):
            raise GradientError(f"NaN adjoint at node {i} (op {op[i]!r})")
        o = op[i]
        if o == "leaf":
            continue
        a, b, c = pa[i], pb[i], aux[i]
        if o == "add":
            acc(a, g)
            acc(b, g)
        elif o == "sub":
            acc(a, g)
            acc(b, -g)
        elif o == "mul":
            acc(a, g * val[b])
            acc(b, g * val[a])
        elif o == "div":
            bg = tape._guard_div_silent(val[b])
            acc(a, g / bg)
            acc(b, -g * val[i] / bg)
        elif o == "addc" or o == "subc":
            acc(a, g)
        elif o == "rsubc" or o == "neg":
            acc(a, -g)
        elif o == "mulc":
            acc(a, g * c)
        elif o == "divc":
            acc(a, g / tape._guard_div_silent(c))
        elif o == "rdivc":
            ag = tape._guard_div_silent(val[a])
            acc(a, -g * val[i] / ag)
        elif o == "exp":
            acc(a, g * val[i])
        elif o == "log":
            acc(a, g / tape._guard_div_silent(tape._guard_log_silent(val[a])))
        elif o == "powc":
            acc(a, g * c * val[a] ** (c - 1.0))
        elif o == "sigmoid":
            s = val[i]
            acc(a, g * c * s * (1.0 - s))
        elif o == "softplus":
            acc(a, g * expit(c * val[a]))
        elif o == "normcdf":
            x = val[a]
            acc(a, g * _INV_SQRT_2PI * np.exp(-0.5 * x * x))
        elif o == "nlogsf":
            x = val[a]
            # -phi(x)/sf(x), computed through the stored log survivor
            acc(a, -g * _INV_SQRT_2PI * np.exp(-0.5 * x * x - val[i]))
        elif o == "bmask":
            lo, hi, k = c
            x = val[a]
            s_lo = expit(k * (x - lo)) if lo is not None else 1.0
            s_hi = expit(k * (x - hi)) if hi is not None else 0.0
            d_lo = s_lo * (1.0 - s_lo) * (1.0 - s_hi) if lo is not None else 0.0
            d_hi = s_lo * s_hi * (1.0 - s_hi) if hi is not None else 0.0
            acc(a, g * k * (d_lo - d_hi))
        else:  # pragma: no cover
            raise GradientError(f"unknown op {o!r} in backward sweep")
    return Gradients(tape, adj)


# ---------------------------------------------------------------------------
# Finite-difference validation harness.
# ---------------------------------------------------------------------------

def grad_check(f: Callable[[Sequence], object], x: Sequence[float], h: float = 1e-5) -> float:
    """Max relative error between tape gradients of f and central differences.

    f must accept a sequence of scalars and work both on Var operands (for
    the tape evaluation) and on plain floats (for the bumped evaluations), so
    draws and any randomness inside f must be frozen by the caller.
    """
    x = [float(v) for v in x]
    tape = Tape()
    leaves = [tape.var(v) for v in x]
    y = f(leaves)
    if not isinstance(y, Var):
        raise GradientError("f must return a tracked Var")
    if not np.all(np.isfinite(y.value)):
        raise GradientError("f evaluated to a non-finite value")
    grads = backward(tape, y)
    aad = [float(grads.wrt(v)) for v in leaves]

    worst = 0.0
    for j in range(len(x)):
        up = list(x)
        dn = list(x)
        up[j] += h
        dn[j] -= h
        fu = float(f(up))
        fd = float(f(dn))
        if not (math.isfinite(fu) and math.isfinite(fd)):
            raise GradientError("f evaluated to a non-finite value during bumping")
        fdiff = (fu - fd) / (2.0 * h)
        err = abs(aad[j] - fdiff) / max(abs(fdiff), 1e-8)
        worst = max(worst, err)
    return worst
