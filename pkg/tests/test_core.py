import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from projsde.core import (
    ConfigurationError,
    ConservationCheckError,
    DegenerateGradientError,
    Invariant,
    NonConvergenceError,
    SdeModel,
    SingularMatrixError,
    check_conserved,
    default_skew_gradient,
    finite_diff_gradient,
    finite_diff_jacobian,
    solve_dense,
)
from projsde.models import build_model, kubo


def _toy(drift, diffusion, value, gradient):
    return SdeModel(name="toy", dim=2, noise_count=1, drift=drift, diffusions=(diffusion,),
                    invariants=(Invariant(value, gradient),))


def test_model_rejects_mismatched_noise_count():
    with pytest.raises(ConfigurationError):
        SdeModel(name="bad", dim=2, noise_count=2, drift=lambda x: x, diffusions=(lambda x: x,),
                 invariants=(Invariant(lambda x: x[..., 0], lambda x: x),))


def test_model_requires_an_invariant():
    with pytest.raises(ConfigurationError):
        SdeModel(name="bad", dim=2, noise_count=1, drift=lambda x: x,
                 diffusions=(lambda x: x,), invariants=())


def test_invariant_stacks_have_expected_shapes():
    m = build_model("lotka")
    x = np.random.default_rng(0).uniform(0.5, 2, size=(7, 3))
    assert m.invariant_values(x).shape == (7, 2)
    assert m.invariant_jacobian(x).shape == (7, 2, 3)
    np.testing.assert_allclose(m.invariant_values(x)[:, 1], np.prod(x, axis=1))


def test_sample_states_respects_box_and_gradient_floor():
    m = build_model("pendulum")
    x = m.sample_states(500, np.random.default_rng(1))
    assert x.shape == (500, 2)
    assert np.all(np.abs(x) <= 2.0)
    assert np.all(np.linalg.norm(m.invariant_jacobian(x), axis=-1) >= m.min_grad_norm)


@pytest.mark.parametrize("name", ["kubo", "pendulum", "lotka"])
def test_bundled_models_are_conservative(name):
    rep = check_conserved(build_model(name), samples=300, seed=3)
    assert max(r for per in rep.values() for r in per.values()) <= 1e-12


def test_check_conserved_detects_a_non_conservative_field():
    # drift is radial, so |x|^2 is not conserved
    m = _toy(lambda x: x, lambda x: 0 * x, lambda x: 0.5 * np.sum(x * x, -1), lambda x: x)
    rep = check_conserved(m, samples=20)
    assert rep["I"]["drift"] == pytest.approx(1.0)


def test_check_conserved_reports_the_failing_state():
    def boom(x):
        raise RuntimeError("nope")

    m = _toy(boom, boom, lambda x: x[..., 0], lambda x: np.ones_like(x))
    with pytest.raises(ConservationCheckError) as info:
        check_conserved(m, samples=3)
    assert info.value.x.shape == (2,)


def test_default_skew_gradient_kubo_closed_form():
    # f = a J x and grad I = x, so S = (f x^T - x f^T)/|x|^2 = a J exactly
    m = kubo(a=2.0, sigma=0.5)
    S, (T,) = default_skew_gradient(m, np.array([0.3, -1.1]))
    np.testing.assert_allclose(S, [[0, -2.0], [2.0, 0]], atol=1e-15)
    np.testing.assert_allclose(T, [[0, -0.5], [0.5, 0]], atol=1e-15)


def test_default_skew_gradient_rejects_vanishing_gradient():
    with pytest.raises(DegenerateGradientError):
        default_skew_gradient(kubo(), np.zeros(2))


def test_solve_dense_matches_numpy_on_batch():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((40, 4, 4)) + 4 * np.eye(4)
    b = rng.standard_normal((40, 4))
    np.testing.assert_allclose(solve_dense(A, b), np.linalg.solve(A, b[..., None])[..., 0],
                               rtol=1e-12, atol=1e-12)


def test_solve_dense_needs_pivoting():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_array_equal(solve_dense(A, np.array([2.0, 3.0])), [3.0, 2.0])


def test_solve_dense_singular():
    with pytest.raises(SingularMatrixError):
        solve_dense(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))


def test_solve_dense_rejects_bad_input():
    with pytest.raises(ConfigurationError):
        solve_dense(np.ones((2, 3)), np.ones(2))
    with pytest.raises(ConfigurationError):
        solve_dense(np.array([[np.nan, 0], [0, 1.0]]), np.ones(2))


@given(arrays(float, (3, 3), elements=st.floats(-5, 5)), arrays(float, 3, elements=st.floats(-5, 5)))
def test_solve_dense_residual_property(A, b):
    A = A + 16 * np.eye(3)  # strictly diagonally dominant, hence well conditioned
    x = solve_dense(A, b)
    assert np.abs(A @ x - b).max() <= 1e-12 * max(1.0, np.abs(b).max())


def test_nonconvergence_error_keeps_state():
    err = NonConvergenceError("stuck", x=np.ones(2), h=0.1)
    assert err.state["h"] == 0.1 and isinstance(err, ArithmeticError)


def test_finite_difference_helpers_against_analytic():
    m = build_model("pendulum")
    x = np.array([0.4, 1.3])
    np.testing.assert_allclose(finite_diff_gradient(m.invariants[0], x),
                               m.invariants[0].gradient(x), atol=1e-9)
    np.testing.assert_allclose(finite_diff_jacobian(m.drift, x), m.drift_jacobian(x), atol=1e-8)
