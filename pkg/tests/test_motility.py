import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fvtaxis.errors import HypothesisViolation
from fvtaxis.motility import Motility, MotilityBounds, builtin_motility, compute_bounds


def scan_bounds(phi, vbar, n=100_001):
    xs = np.linspace(0.0, vbar, n)
    f = phi.eval(xs)
    return f.min(), f.max(), np.abs(phi.deriv(xs)).max()


def test_affine_bounds_match_scan():
    phi = builtin_motility("affine", [1.0, 2.0])
    b = compute_bounds(phi, 0.5)
    # endpoint extrema are padded outward by |slope| * search resolution
    assert b.kappa1 <= 1.0 and b.kappa2 >= 2.0 and b.kappa3 >= 2.0
    np.testing.assert_allclose([b.kappa1, b.kappa2, b.kappa3], [1.0, 2.0, 2.0], rtol=1e-11)
    np.testing.assert_allclose([b.kappa1, b.kappa2, b.kappa3], scan_bounds(phi, 0.5), rtol=1e-11)


def test_rational_value_and_derivative():
    phi = builtin_motility("rational", [2.0])
    assert phi(0.5) == pytest.approx(0.5)
    h = 1e-6
    fd = (phi.eval(0.5 + h) - phi.eval(0.5 - h)) / (2 * h)
    assert phi.deriv(0.5) == pytest.approx(fd, abs=1e-8)
    assert phi.deriv(0.5) == pytest.approx(-0.5)


@pytest.mark.parametrize("name, params", [("constant", [2.5]), ("exp_decay", [1.3]),
                                          ("rational", [0.7]), ("affine", [0.5, 3.0])])
def test_derivatives_central_difference(name, params):
    phi = builtin_motility(name, params)
    xs = np.linspace(0.05, 2.0, 17)
    h = 1e-6
    fd = (phi.eval(xs + h) - phi.eval(xs - h)) / (2 * h)
    np.testing.assert_allclose(phi.deriv(xs), fd, atol=1e-7)


@pytest.mark.parametrize("name, params", [("exp_decay", [1.0]), ("rational", [3.0]),
                                          ("affine", [0.2, 1.0])])
@pytest.mark.parametrize("vbar", [0.3, 1.0, 4.0])
def test_bounds_against_dense_scan(name, params, vbar):
    phi = builtin_motility(name, params)
    b = compute_bounds(phi, vbar)
    k1, k2, k3 = scan_bounds(phi, vbar)
    assert b.kappa1 <= k1 and b.kappa2 >= k2 and b.kappa3 >= k3
    np.testing.assert_allclose([b.kappa1, b.kappa2, b.kappa3], [k1, k2, k3], rtol=1e-9)


def test_interior_extremum_found():
    # phi = 1 + (x - 0.3)^2 has its minimum between sample points
    phi = Motility("bowl", lambda x: 1 + (np.asarray(x) - 0.3) ** 2, lambda x: 2 * (np.asarray(x) - 0.3))
    b = compute_bounds(phi, 1.0, samples=7)
    assert b.kappa1 == pytest.approx(1.0, abs=1e-12)
    assert b.kappa1 <= 1.0


def test_zero_vbar():
    b = compute_bounds(builtin_motility("exp_decay", [1.0]), 0.0)
    assert b.kappa1 == b.kappa2 == 1.0 and b.kappa3 == 1.0


@pytest.mark.parametrize("name, params", [("constant", [0.0]), ("constant", [-1.0]),
                                          ("rational", [-0.5]), ("affine", [0.0, 1.0]),
                                          ("affine", [1.0, -1.0])])
def test_builtins_reject_nonpositive(name, params):
    with pytest.raises(HypothesisViolation):
        builtin_motility(name, params)


def test_builtin_errors():
    with pytest.raises(ValueError):
        builtin_motility("logistic", [1.0])
    with pytest.raises(ValueError):
        builtin_motility("affine", [1.0])
    with pytest.raises(ValueError):
        builtin_motility("exp_decay", [math.nan])


def test_compute_bounds_rejects_sign_change():
    phi = Motility("line", lambda x: 0.5 - np.asarray(x), lambda x: -np.ones_like(np.asarray(x)))
    with pytest.raises(HypothesisViolation):
        compute_bounds(phi, 1.0)


def test_bounds_contains():
    b = MotilityBounds(0.5, 1.0, 2.0, 1.0)
    assert b.contains(np.array([0.5, 1.0]))
    assert not b.contains(np.array([0.49]))
    assert not b.contains(np.array([0.7]), np.array([2.5]))
    with pytest.raises(HypothesisViolation):
        MotilityBounds(0.0, 1.0, 1.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["exp_decay", "rational"]), st.floats(0.0, 5.0),
       st.floats(0.01, 10.0), st.floats(0.0, 1.0))
def test_bounds_enclose_samples(name, a, vbar, frac):
    phi = builtin_motility(name, [a])
    b = compute_bounds(phi, vbar)
    x = np.array([frac * vbar])
    assert b.contains(phi.eval(x), phi.deriv(x))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.01, 5.0), st.floats(1.0, 3.0))
def test_bounds_monotone_in_vbar(a, vbar, factor):
    phi = builtin_motility("exp_decay", [a])
    small, big = compute_bounds(phi, vbar), compute_bounds(phi, vbar * factor)
    assert big.kappa1 <= small.kappa1 * (1 + 1e-12)
    assert big.kappa2 >= small.kappa2 * (1 - 1e-12)
    assert big.kappa3 >= small.kappa3 * (1 - 1e-12)
