import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial.hermite_e import hermegauss

from oracles import cayley_kubo, lstsq_slope, rotate
from projsde.core import ConfigurationError, NonConvergenceError, UnsupportedModelError
from projsde.models import build_model, exact_kubo, kubo
from projsde.noise import TruncationConfig
from projsde.schemes import (
    LABELS,
    METHODS,
    SCHEMES,
    SchemeConfig,
    discrete_gradient,
    get_scheme,
    taylor_step,
)

NO_TRUNC = TruncationConfig(enabled=False)
J = np.array([[0.0, -1.0], [1.0, 0.0]])


def cfg(method, **kw):
    return SchemeConfig(method=method, **kw)


def test_method_table():
    assert set(METHODS) == set(SCHEMES) == set(LABELS)
    with pytest.raises(ConfigurationError):
        get_scheme("rk4")
    with pytest.raises(ConfigurationError):
        SchemeConfig(method="rk4")
    with pytest.raises(ConfigurationError):
        SchemeConfig(implicit_tol=0.0)


def test_euler_kubo_hand_formula():
    a, s, h, dW = 1.3, 0.7, 0.05, 0.11
    x = np.array([0.6, -0.2])
    got = get_scheme("euler")(kubo(a, s), x, h, np.array([dW]), cfg("euler", truncation=NO_TRUNC))
    want = x + h * (a * J @ x - 0.5 * s * s * x) + s * dW * J @ x
    np.testing.assert_allclose(got, want, rtol=1e-15)


def test_milstein_kubo_hand_formula():
    a, s, h, dW = 1.3, 0.7, 0.05, 0.11
    x = np.array([0.6, -0.2])
    got = get_scheme("milstein")(kubo(a, s), x, h, np.array([dW]), cfg("milstein", truncation=NO_TRUNC))
    want = x + h * a * J @ x + s * dW * J @ x - 0.5 * (s * dW) ** 2 * x
    np.testing.assert_allclose(got, want, rtol=1e-15)


def test_milstein_two_channels_cross_term():
    m = build_model("pendulum", c1=0.8, c2=0.3)
    x, h, dW = np.array([0.2, 0.9]), 0.01, np.array([0.05, -0.08])
    f = m.drift(x)
    ff = m.drift_jacobian(x) @ f
    S = 0.8 * dW[0] + 0.3 * dW[1]
    want = x + h * f + S * f + 0.5 * S * S * ff
    got = get_scheme("milstein")(m, x, h, dW, cfg("milstein", truncation=NO_TRUNC))
    np.testing.assert_allclose(got, want, rtol=1e-14)


def test_milstein_rejects_noncommutative_models():
    from dataclasses import replace

    m = replace(kubo(), commutative=False)
    with pytest.raises(UnsupportedModelError):
        get_scheme("milstein")(m, np.ones(2), 0.1, np.zeros(1), cfg("milstein"))


@pytest.mark.parametrize("h,dW", [(0.02, 0.1), (0.25, -0.4), (0.5, 1.2)])
def test_midpoint_is_cayley_on_kubo(h, dW):
    x = np.array([1.0, 0.0])
    got = get_scheme("mid")(kubo(), x, h, np.array([dW]), cfg("mid"))
    np.testing.assert_allclose(got, cayley_kubo(x, h, dW), atol=1e-12)


def test_midpoint_needs_truncation():
    with pytest.raises(ConfigurationError):
        get_scheme("mid")(kubo(), np.ones(2), 0.1, np.zeros(1), cfg("mid", truncation=NO_TRUNC))


def test_midpoint_nonconvergence_is_reported():
    m = build_model("lotka")
    bad = cfg("mid", implicit_max_iter=1, implicit_tol=1e-16)
    with pytest.raises(NonConvergenceError) as info:
        get_scheme("mid")(m, np.array([[1.0, 2.0, 1.0]]), 0.25, np.array([[0.4]]), bad)
    assert info.value.state["row"] == 0 and info.value.state["h"] == 0.25


def test_midpoint_without_analytic_jacobian():
    from dataclasses import replace

    m = build_model("pendulum")
    x, dW = np.array([0.3, 1.0]), np.array([0.05, -0.02])
    a = get_scheme("mid")(m, x, 0.1, dW, cfg("mid"))
    b = get_scheme("mid")(replace(m, drift_jacobian=None), x, 0.1, dW, cfg("mid"))
    np.testing.assert_allclose(a, b, atol=1e-13)


def test_t2_is_truncated_exponential_on_kubo():
    a, s, h, dW = 1.0, 1.0, 0.1, 0.2
    x = np.array([0.6, -0.8])
    ds = h + s / a * dW
    B = a * ds * J
    want = x + sum(np.linalg.matrix_power(B, k) @ x / math.factorial(k) for k in range(1, 5))
    got = taylor_step(kubo(a, s), x, h, np.array([dW]), cfg("t2", truncation=NO_TRUNC), "T2")
    np.testing.assert_allclose(got, want, rtol=1e-14)


def test_t2_one_step_slope_five_against_rotation():
    x = np.array([1.0, 0.0])
    m = kubo()
    ds = np.array([2.0 ** -k for k in range(3, 9)])
    err = []
    for d in ds:
        X = taylor_step(m, x, 0.0, np.array([d]), cfg("t2"), "T2")
        err.append(np.linalg.norm(X - rotate(x, d)))
    assert 4.8 <= lstsq_slope(ds, err) <= 5.2


@pytest.mark.parametrize("name", ["kubo", "pendulum", "lotka"])
def test_t32_closed_form(name):
    m = build_model(name)
    x = m.sample_states(4, np.random.default_rng(0))
    h = 0.03
    dW = np.random.default_rng(1).standard_normal((4, m.noise_count)) * math.sqrt(h)
    sc = m.special_class
    S = (dW @ np.asarray(sc.c))[:, None]
    q = sc.c_sq
    v = sc.ode_taylor_coeffs(x, 4)
    ds = h + S
    want = x + v[0] * ds + v[1] * ds ** 2 + v[2] * (S ** 3 + 3 * q * h * h) + 3 * q * q * h * h * v[3]
    got = taylor_step(m, x, h, dW, cfg("t32", truncation=NO_TRUNC), "T32")
    np.testing.assert_allclose(got, want, rtol=1e-13, atol=1e-15)


def test_taylor_requires_special_class():
    with pytest.raises(UnsupportedModelError):
        taylor_step(kubo(a=0.0), np.ones(2), 0.1, np.zeros(1), cfg("t2"), "T2")
    with pytest.raises(ConfigurationError):
        taylor_step(kubo(), np.ones(2), 0.1, np.zeros(1), cfg("t2"), "T5")


# Local errors on the Kubo oscillator, integrated exactly over the Gaussian
# increment with 80-point Gauss-Hermite quadrature; slopes of (|mean error|,
# rms error) against h follow from the strong order of each scheme.
LOCAL_SLOPES = {"euler": (2.0, 1.0), "milstein": (2.0, 1.5), "t32": (3.0, 2.0),
                "t2": (3.0, 2.5), "t2ito": (3.0, 2.5)}


@pytest.mark.parametrize("method", sorted(LOCAL_SLOPES))
def test_local_error_slopes_by_quadrature(method):
    z, w = hermegauss(80)
    w = w / w.sum()
    m, x0 = kubo(), np.array([0.6, -0.8])
    hs = [2.0 ** -k for k in range(4, 10)]
    mean_err, rms_err = [], []
    for h in hs:
        dW = math.sqrt(h) * z[:, None]
        X = get_scheme(method)(m, np.broadcast_to(x0, (len(z), 2)), h, dW,
                               cfg(method, truncation=NO_TRUNC))
        d = X - exact_kubo(x0, h, dW[:, 0])
        mean_err.append(np.linalg.norm(w @ d))
        rms_err.append(math.sqrt(w @ np.sum(d * d, axis=1)))
    want_mean, want_rms = LOCAL_SLOPES[method]
    assert lstsq_slope(hs, mean_err) == pytest.approx(want_mean, abs=0.1)
    assert lstsq_slope(hs, rms_err) == pytest.approx(want_rms, abs=0.1)


@pytest.mark.parametrize("name", ["kubo", "pendulum", "lotka"])
@pytest.mark.parametrize("method", METHODS)
def test_zero_step_identity(name, method):
    m = build_model(name)
    x = m.sample_states(6, np.random.default_rng(3))
    out = get_scheme(method)(m, x, 0.0, np.zeros((6, m.noise_count)), cfg(method))
    np.testing.assert_array_equal(out, x)


@pytest.mark.parametrize("method", METHODS)
def test_batch_equals_single_rows(method):
    m = build_model("pendulum")
    x = m.sample_states(3, np.random.default_rng(4))
    dW = 0.1 * np.random.default_rng(5).standard_normal((3, 2))
    batch = get_scheme(method)(m, x, 0.01, dW, cfg(method))
    for i in range(3):
        np.testing.assert_allclose(batch[i], get_scheme(method)(m, x[i], 0.01, dW[i], cfg(method)),
                                   rtol=1e-12, atol=1e-14)


def test_steps_apply_truncation():
    m, h = kubo(), 2.0 ** -4
    big, clipped = np.array([50.0]), np.array([math.sqrt(2 * 6 * math.log(16) * h)])
    for method in ("euler", "t2"):
        np.testing.assert_array_equal(get_scheme(method)(m, np.ones(2), h, big, cfg(method)),
                                      get_scheme(method)(m, np.ones(2), h, clipped, cfg(method)))


def test_negative_step_rejected():
    with pytest.raises(ConfigurationError):
        get_scheme("euler")(kubo(), np.ones(2), -0.1, np.zeros(1), cfg("euler"))


@given(st.lists(st.floats(0.2, 3.0), min_size=6, max_size=6))
def test_gonzalez_identity_lotka(vals):
    m = build_model("lotka")
    x, y = np.array(vals[:3]), np.array(vals[3:])
    for inv in m.invariants:
        lhs = discrete_gradient(inv, x, y) @ (y - x)
        assert abs(lhs - (inv.value(y) - inv.value(x))) <= 1e-13 * max(1.0, abs(inv.value(y)))


def test_discrete_gradient_coincident_points():
    inv = build_model("pendulum").invariants[0]
    x = np.array([0.3, 0.4])
    np.testing.assert_array_equal(discrete_gradient(inv, x, x), inv.gradient(x))


@pytest.mark.parametrize("name", ["kubo", "pendulum", "lotka"])
def test_discrete_gradient_step_conserves_first_invariant(name):
    m = build_model(name)
    x = np.asarray(m.default_x0, dtype=float)
    rng = np.random.default_rng(6)
    c = cfg("dg")
    I0 = m.invariants[0].value(x)
    for _ in range(50):
        x = get_scheme("dg")(m, x, 0.05, 0.2 * rng.standard_normal(m.noise_count), c)
    assert abs(m.invariants[0].value(x) - I0) <= 1e-12 * max(1.0, abs(I0))


def test_discrete_gradient_step_needs_sg_form():
    from dataclasses import replace

    with pytest.raises(UnsupportedModelError):
        get_scheme("dg")(replace(kubo(), sg_form=None), np.ones(2), 0.1, np.zeros(1), cfg("dg"))
