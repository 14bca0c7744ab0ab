import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcwaterfall.autodiff import (
    SmoothingConfig,
    Tape,
    Var,
    backward,
    double_sigmoid_mask,
    grad_check,
    interval_mask,
    normal_cdf,
    normal_log_sf,
    sigmoid,
    softplus,
    vexp,
    vlog,
    vsum,
)
from mcwaterfall.exceptions import ConfigurationError, GradientError


def test_smoothing_config_validation():
    SmoothingConfig()
    for bad in (dict(k=0.0), dict(beta=-1.0), dict(eps=0.0)):
        with pytest.raises(ConfigurationError):
            SmoothingConfig(**bad)


def test_binary_op_values_and_partials():
    tape = Tape()
    a, b = tape.var(2.0), tape.var(3.0)
    s = tape.record_binary("add", a, b)
    assert s.value == 5.0
    g = backward(tape, s)
    assert g.wrt(a) == 1.0 and g.wrt(b) == 1.0

    m = tape.record_binary("mul", a, b)
    assert m.value == 6.0
    g = backward(tape, m)
    assert g.wrt(a) == 3.0 and g.wrt(b) == 2.0


def test_div_guard_at_zero():
    tape = Tape(eps=1e-12)
    a, b = tape.var(1.0), tape.var(0.0)
    q = tape.record_binary("div", a, b)
    assert q.value == pytest.approx(1e12)
    assert tape.guard_count == 1


def test_unary_examples():
    tape = Tape()
    x = tape.var(0.0)
    e = tape.record_unary("exp", x)
    assert e.value == 1.0
    assert backward(tape, e).wrt(x) == 1.0

    y = tape.var(1.0)
    l = tape.record_unary("log", y)
    assert l.value == 0.0
    assert backward(tape, l).wrt(y) == 1.0

    z = tape.var(2.0)
    p = tape.record_unary("pow_const", z, 3.0)
    assert p.value == 8.0
    assert backward(tape, p).wrt(z) == 12.0


def test_log_guard_and_error():
    tape = Tape(eps=1e-12)
    x = tape.var(0.0)
    v = vlog(x)
    assert np.isfinite(v.value)
    assert tape.guard_count == 1
    bad = tape.var(-1.0)
    with pytest.raises(ConfigurationError):
        vlog(bad)


def test_sigmoid_values():
    tape = Tape()
    assert sigmoid(tape.var(0.0), 7.0).value == pytest.approx(0.5)
    assert sigmoid(tape.var(2.0), 50.0).value == pytest.approx(1.0, abs=1e-12)
    # frozen from direct evaluation of 1/(1+exp(-1))
    assert sigmoid(tape.var(1.0), 1.0).value == pytest.approx(0.7310585786300049, abs=1e-12)
    # overflow-safe far in the tails
    assert sigmoid(tape.var(-100.0), 50.0).value == 0.0
    assert sigmoid(tape.var(100.0), 50.0).value == 1.0


def test_softplus_values_and_derivative():
    tape = Tape()
    assert softplus(tape.var(0.0), 1.0).value == pytest.approx(math.log(2.0), abs=1e-12)
    assert softplus(tape.var(10.0), 10.0).value == pytest.approx(10.0, abs=1e-4)
    x = tape.var(0.0)
    y = softplus(x, 1.0)
    assert backward(tape, y).wrt(x) == pytest.approx(0.5)


def test_double_sigmoid_mask_examples():
    tape = Tape()
    i = 3
    assert double_sigmoid_mask(tape.var(i + 0.5), i, 50.0).value == pytest.approx(1.0, abs=1e-9)
    assert double_sigmoid_mask(tape.var(float(i)), i, 500.0).value == pytest.approx(0.5, abs=1e-6)
    v = double_sigmoid_mask(tape.var(2.25), 2, 50.0).value
    assert 0.0 < v < 1.0
    with pytest.raises(ConfigurationError):
        double_sigmoid_mask(tape.var(0.0), -1, 50.0)


@pytest.mark.parametrize("k", [20.0, 50.0, 200.0])
def test_mask_partition_sums_to_one(k):
    # buckets 0..9 with open outer edges; interior tau at least 10/k from edges
    rng = np.random.default_rng(7)
    taus = rng.uniform(0.5 + 10.0 / k, 8.5 - 10.0 / k, size=200)
    for tau in taus:
        masks = [interval_mask(tau, None, 1.0, k)]
        masks += [interval_mask(tau, float(j), float(j) + 1.0, k) for j in range(1, 9)]
        masks.append(interval_mask(tau, 9.0, None, k))
        assert sum(masks) == pytest.approx(1.0, abs=1e-6)
        assert all(0.0 <= m <= 1.0 for m in masks)


def test_backward_examples():
    tape = Tape()
    x, y = tape.var(2.0), tape.var(3.0)
    f = x * y
    g = backward(tape, f)
    assert (g.wrt(x), g.wrt(y)) == (3.0, 2.0)

    tape = Tape()
    x = tape.var(0.0)
    f = softplus(x, 1.0) + sigmoid(x, 1.0)
    g = backward(tape, f)
    assert g.wrt(x) == pytest.approx(0.75)

    tape = Tape()
    x = tape.var(1.7)
    f = vlog(vexp(x))
    assert backward(tape, f).wrt(x) == pytest.approx(1.0, abs=1e-12)


def test_backward_is_linear():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, b = rng.normal(size=2)
        x0 = rng.uniform(0.2, 2.0)

        def build(tape):
            x = tape.var(x0)
            f = sigmoid(x, 3.0) * x + softplus(x, 2.0)
            g = vexp(x * 0.3) + vlog(x)
            return x, f, g

        t1 = Tape()
        x, f, g = build(t1)
        combo = f * a + g * b
        gc = backward(t1, combo).wrt(x)
        gf = backward(t1, f).wrt(x)
        gg = backward(t1, g).wrt(x)
        assert gc == pytest.approx(a * gf + b * gg, rel=1e-12)


def test_backward_vector_values_and_seed():
    tape = Tape()
    x = tape.var(np.array([1.0, 2.0, 3.0]))
    y = x * x
    g = backward(tape, y)
    np.testing.assert_allclose(g.wrt(x), [2.0, 4.0, 6.0])
    g2 = backward(tape, y, seed=np.array([1.0, 0.0, 0.5]))
    np.testing.assert_allclose(g2.wrt(x), [2.0, 0.0, 3.0])


def test_backward_nan_detection():
    tape = Tape()
    x = tape.var(np.array([1.0, 2.0]))
    z = tape.var(np.array([1.0, np.nan]))
    y = x * z
    with pytest.raises(GradientError, match="node"):
        backward(tape, y)


def test_backward_tape_unchanged():
    tape = Tape()
    x = tape.var(1.5)
    y = vexp(x)
    n = len(tape)
    backward(tape, y)
    assert len(tape) == n


def test_unused_leaf_gets_zero_gradient():
    tape = Tape()
    x, z = tape.var(1.0), tape.var(4.0)
    y = x * 2.0
    g = backward(tape, y)
    assert g.wrt(z) == 0.0


PRIMITIVES = [
    ("mul+add", lambda x: x[0] * x[1] + x[0], 2, (0.1, 3.0)),
    ("div", lambda x: x[0] / x[1], 2, (0.3, 3.0)),
    ("exp", lambda x: vexp(x[0]), 1, (-2.0, 2.0)),
    ("log", lambda x: vlog(x[0]), 1, (0.2, 4.0)),
    ("pow", lambda x: x[0] ** 2.7, 1, (0.3, 3.0)),
    ("sigmoid", lambda x: sigmoid(x[0], 3.0), 1, (-2.0, 2.0)),
    ("softplus", lambda x: softplus(x[0], 2.5), 1, (-2.0, 2.0)),
    ("normcdf", lambda x: normal_cdf(x[0]), 1, (-2.0, 2.0)),
    ("nlogsf", lambda x: normal_log_sf(x[0]), 1, (-2.0, 2.0)),
    ("mask", lambda x: interval_mask(x[0], 0.0, 1.0, 4.0), 1, (-1.0, 2.0)),
]


@pytest.mark.parametrize("name,f,arity,dom", PRIMITIVES, ids=[p[0] for p in PRIMITIVES])
def test_primitive_gradients_match_finite_differences(name, f, arity, dom):
    rng = np.random.default_rng(11)
    for _ in range(100):
        x = rng.uniform(dom[0], dom[1], size=arity)
        assert grad_check(f, x, h=1e-6) < 1e-6


def test_grad_check_examples():
    assert grad_check(lambda x: x[0] * x[0], [3.0], h=1e-5) < 1e-9

    def pipeline(x):
        m = interval_mask(x[0], 0.0, 1.0, 8.0)
        return softplus(m * x[1], 3.0) + sigmoid(x[0] - x[1], 5.0)

    assert grad_check(pipeline, [0.4, 0.8], h=1e-5) < 1e-5


def test_grad_check_flags_hard_max_kink():
    # exact-mode style hard max records only the active branch; at the kink
    # the finite difference straddles both, so a large error is expected
    def hard(x):
        if isinstance(x[0], Var):
            return x[0] * 1.0 if x[0].value >= 0 else x[0] * 0.0
        return max(x[0], 0.0)

    err = grad_check(hard, [1e-7], h=1e-5)
    assert err > 1e-2


def test_grad_check_rejects_nonfinite():
    with np.errstate(over="ignore"), pytest.raises(GradientError):
        grad_check(lambda x: vexp(x[0] * 1000.0), [2.0])


@given(st.floats(-30.0, 30.0), st.floats(0.5, 100.0))
@settings(max_examples=60, deadline=None)
def test_mask_values_stay_in_unit_interval(tau, k):
    m = interval_mask(tau, 0.0, 1.0, k)
    assert 0.0 <= m <= 1.0


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=6))
@settings(max_examples=40, deadline=None)
def test_recorded_ops_stay_finite_in_domain(xs):
    tape = Tape()
    vs = [tape.var(v) for v in xs]
    out = vsum([sigmoid(v, 10.0) + softplus(v, 5.0) for v in vs])
    assert np.isfinite(out.value)
    g = backward(tape, out)
    assert all(np.isfinite(g.wrt(v)) for v in vs)
