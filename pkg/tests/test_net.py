import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import central_difference, gradient_relative_error, random_spec
from phflow.net import (
    IDENTITY,
    Activation,
    NetworkSpec,
    batch_loss_and_grad,
    flatten,
    forward,
    forward_batch,
    loss_and_grad,
    softplus,
    unflatten,
)


def test_identity_network_is_identity_map():
    spec = NetworkSpec([2, 2])
    theta = flatten([(np.eye(2), np.zeros(2))])
    np.testing.assert_array_equal(forward(spec, theta, [0.6, 0.6]), [0.6, 0.6])


def test_softplus_at_zero_is_log2_over_gamma():
    spec = NetworkSpec([1, 1], [softplus(10.0)])
    y = forward(spec, np.array([1.0, 0.0]), [0.0])
    assert y[0] == pytest.approx(math.log(2) / 10, rel=1e-15)
    assert y[0] == pytest.approx(0.0693, abs=5e-5)


@pytest.mark.parametrize("widths,p", [([2, 16, 16, 2], 354), ([2, 2], 6), ([4, 8, 8, 3], 139), ([1, 1], 2)])
def test_parameter_count(widths, p):
    assert NetworkSpec(widths).parameter_count == p


def test_parameter_layout_is_row_major_weights_then_bias():
    spec = NetworkSpec([2, 2])
    theta = np.arange(1.0, 7.0)  # w11 w12 w21 w22 b1 b2
    (W, b), = unflatten(spec, theta)
    np.testing.assert_array_equal(W, [[1, 2], [3, 4]])
    np.testing.assert_array_equal(b, [5, 6])
    np.testing.assert_array_equal(forward(spec, theta, [1.0, 0.0]), [1 + 5, 3 + 6])


def test_flatten_roundtrip(rng):
    for _ in range(20):
        spec = random_spec(rng)
        theta = rng.standard_normal(spec.parameter_count)
        np.testing.assert_array_equal(flatten(unflatten(spec, theta)), theta)


def test_spec_dict_roundtrip():
    spec = NetworkSpec.mlp([2, 16, 16, 2], hidden=softplus(10.0))
    assert NetworkSpec.from_dict(spec.to_dict()) == spec
    assert spec.activations[-1] == IDENTITY


def test_perfect_fit_has_zero_loss_and_gradient():
    spec = NetworkSpec([2, 2])
    theta = np.array([1.0, 0.5, -0.2, 2.0, 0.1, -0.3])
    u = np.array([0.6, 0.6])
    y = forward(spec, theta, u)
    loss, grad = loss_and_grad(spec, theta, u, y, alpha=1.0, beta=0.0)
    assert loss == 0.0
    np.testing.assert_array_equal(grad, np.zeros(6))


def test_affine_gradient_is_residual_outer_augmented_input():
    # d/dtheta of 0.5*alpha*|y - (W u + b)|^2 + 0.5*beta*|theta|^2
    spec = NetworkSpec([2, 2])
    theta = np.array([0.6, -2.3, -0.1, -1.1, -1.2, 0.3])
    u = np.array([0.6, 0.6])
    y = np.array([1.0, 0.0])
    alpha, beta = 2.0, 0.3
    resid = y - forward(spec, theta, u)
    expected = -alpha * np.concatenate([np.outer(resid, u).ravel(), resid]) + beta * theta
    _, grad = loss_and_grad(spec, theta, u, y, alpha, beta)
    np.testing.assert_allclose(grad, expected, rtol=1e-14, atol=1e-15)


def test_gradient_matches_finite_differences(rng):
    for _ in range(30):
        spec = random_spec(rng)
        n = int(rng.integers(1, 5))
        U = rng.standard_normal((n, spec.n_inputs))
        Y = rng.standard_normal((n, spec.n_outputs))
        theta = rng.standard_normal(spec.parameter_count)
        alpha, beta = rng.uniform(0.1, 2.0), rng.uniform(0.0, 1.0)
        _, grad = batch_loss_and_grad(spec, theta, U, Y, alpha, beta)
        fd = central_difference(lambda t: batch_loss_and_grad(spec, t, U, Y, alpha, beta)[0], theta)
        assert gradient_relative_error(grad, fd) < 1e-6


def test_batch_loss_is_mean_of_sample_losses(rng):
    spec = random_spec(rng)
    U = rng.standard_normal((5, spec.n_inputs))
    Y = rng.standard_normal((5, spec.n_outputs))
    theta = rng.standard_normal(spec.parameter_count)
    loss, grad = batch_loss_and_grad(spec, theta, U, Y, 1.3, 0.2)
    singles = [loss_and_grad(spec, theta, u, y, 1.3, 0.2) for u, y in zip(U, Y)]
    assert loss == pytest.approx(np.mean([s[0] for s in singles]), rel=1e-13)
    np.testing.assert_allclose(grad, np.mean([s[1] for s in singles], axis=0), rtol=1e-12, atol=1e-14)


def test_forward_batch_matches_rowwise(rng):
    spec = random_spec(rng)
    theta = rng.standard_normal(spec.parameter_count)
    U = rng.standard_normal((7, spec.n_inputs))
    np.testing.assert_allclose(forward_batch(spec, theta, U), np.array([forward(spec, theta, u) for u in U]),
                               rtol=1e-14, atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50))
def test_softplus_positive_and_monotone(a, b):
    sp = softplus(10.0)
    lo, hi = min(a, b), max(a, b)
    assert sp(np.float64(lo)) > 0
    assert sp(np.float64(hi)) >= sp(np.float64(lo))


def test_softplus_approaches_relu_within_log2_over_gamma():
    x = np.linspace(-5, 5, 2001)
    gap = softplus(10.0)(x) - np.maximum(0.0, x)
    assert np.all(gap >= -1e-15)  # rounding of x + log1p(exp(-gx))/g for large x
    assert gap.max() <= math.log(2) / 10 + 1e-15


def test_softplus_derivative_matches_finite_difference():
    sp = softplus(3.0)
    x = np.linspace(-4, 4, 41)
    fd = (sp(x + 1e-6) - sp(x - 1e-6)) / 2e-6
    np.testing.assert_allclose(sp.derivative(x), fd, rtol=1e-7, atol=1e-9)


def test_softplus_has_no_overflow_for_large_arguments():
    sp = softplus(10.0)
    with np.errstate(over="raise"):
        assert sp(np.float64(1e4)) == pytest.approx(1e4)
        assert sp(np.float64(-1e4)) >= 0


@pytest.mark.parametrize("bad", [
    lambda: NetworkSpec([2]),
    lambda: NetworkSpec([2, 0, 1]),
    lambda: NetworkSpec([2, 2], [IDENTITY, IDENTITY]),
    lambda: Activation("relu"),
    lambda: softplus(0.0),
])
def test_invalid_specs_rejected(bad):
    with pytest.raises(ValueError):
        bad()


def test_dimension_mismatch_raises():
    spec = NetworkSpec([2, 2])
    with pytest.raises(ValueError):
        forward(spec, np.zeros(5), [0.0, 0.0])
    with pytest.raises(ValueError):
        forward(spec, np.zeros(6), [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        batch_loss_and_grad(spec, np.zeros(6), np.zeros((3, 2)), np.zeros((2, 2)), 1.0, 0.0)
