import math

import numpy as np
import pytest

from gclab import gauss_codazzi as gc
from gclab.errors import DegenerateStateError, HyperbolicityError, ParameterError
from gclab.gauss_codazzi import FundamentalFormState, InvariantBox, StateField
from gclab.geometry import helicoid_metric, metric_derivatives

rng = np.random.default_rng(7)


def box_states(n):
    return rng.uniform(-10, -0.1, n), rng.uniform(-0.999, 0.999, n)


def test_scale_examples():
    assert gc.scale(FundamentalFormState(-1.0, 0.0, 1.0), 1.0, -1.0) == (-1.0, 0.0, 1.0)
    l, m, n = gc.scale(FundamentalFormState(0.0, -1 / math.sqrt(2), 0.0), math.sqrt(2), -0.25)
    assert (l, n) == (0.0, 0.0) and m == pytest.approx(-1.0, abs=1e-15)


def test_unscale_examples():
    assert tuple(gc.unscale((-1.0, 0.0, 1.0), 1.0, -1.0)) == (-1.0, 0.0, 1.0)
    L, M, N = gc.unscale((0.0, -1.0, 0.0), math.sqrt(2), -0.25)
    assert M == pytest.approx(-1 / math.sqrt(2), abs=1e-15)
    assert tuple(gc.unscale((-1.0, 0.0, 1.0), 2.0, -1.0)) == (-4.0, 0.0, 1.0)


def test_scale_round_trip():
    ell, m = box_states(1000)
    n = gc.closure_n(ell, m)
    b = rng.uniform(0.5, 100, 1000)
    K = -10 ** rng.uniform(-6, 1, 1000)
    back = gc.scale(gc.unscale((ell, m, n), b, K), b, K)
    for a, c in zip(back, (ell, m, n)):
        assert np.max(np.abs(a - c) / np.maximum(1, np.abs(c))) <= 1e-13


def test_closure():
    assert gc.closure_n(-1.0, 0.0) == 1.0
    assert gc.closure_n(-2.0, 1.0) == 0.0
    with pytest.raises(DegenerateStateError):
        gc.closure_n(0.0, 0.3)
    ell, m = box_states(1000)
    assert np.max(np.abs(ell * gc.closure_n(ell, m) - m * m + 1)) <= 1e-13


@pytest.mark.parametrize("state, b, expected", [((-1, 0), 1, (0, -1)), ((-1, 0), 2, (0, -0.5)), ((-1, 0.5), 1, (-0.5, -0.75))])
def test_flux_examples(state, b, expected):
    assert tuple(gc.flux(*state, b)) == pytest.approx(expected, abs=1e-15)


def test_source_examples():
    assert tuple(gc.source(-1.3, 0.2, 0.0, 0.0)) == (0.0, 0.0)
    d = metric_derivatives(helicoid_metric(1.0), 1.0)
    assert tuple(gc.source_from_metric(-1.0, 0.0, d)) == pytest.approx((0, 0), abs=1e-15)
    assert tuple(gc.source_from_metric(-1.0, 0.5, d)) == pytest.approx((0.125, 0), abs=1e-15)


def test_eigenvalue_examples():
    assert gc.eigenvalues(-1.0, 0.0, 1.0) == (-1.0, 1.0)
    l1, l2 = gc.eigenvalues(-2.0, 1.0, 1.0)
    assert (l1, l2) == (0.0, 1.0)


def test_eigenvalues_are_scaled_riemann_invariants():
    ell, m = box_states(1000)
    b = rng.uniform(0.5, 3, 1000)
    u, v = gc.riemann_invariants(ell, m)
    l1, l2 = gc.eigenvalues(ell, m, b)
    assert np.allclose(l1, u / b, rtol=1e-14, atol=0)
    assert np.allclose(l2, v / b, rtol=1e-14, atol=0)
    assert np.all(l1 < l2)


def test_jacobian_matches_finite_differences():
    ell, m = box_states(100)
    b = 1.7
    J = gc.flux_jacobian(ell, m, b)
    h = 1e-6
    for k, (dl, dm) in enumerate(((h, 0), (0, h))):
        fd = (gc.flux(ell + dl, m + dm, b) - gc.flux(ell - dl, m - dm, b)) / (2 * h)
        assert np.max(np.abs(fd - J[:, k]) / np.maximum(1, np.abs(J[:, k]))) <= 1e-7


def test_jacobian_eigenvalues_and_vectors():
    ell, m = box_states(100)
    b = 2.0
    J = gc.flux_jacobian(ell, m, b)
    l1, l2 = gc.eigenvalues(ell, m, b)
    r1, r2 = gc.right_eigenvectors(ell, m, b)
    for lam, r in ((l1, r1), (l2, r2)):
        Jr = np.einsum("ij...,j...->i...", J, r)
        assert np.max(np.abs(Jr - lam * r)) <= 1e-12 * np.max(np.abs(lam * r))


def test_linear_degeneracy():
    ell, m = box_states(200)
    b = 1.3
    r1, r2 = gc.right_eigenvectors(ell, m, b)
    h = 1e-6
    for i, r in ((0, r1), (1, r2)):
        lp = gc.eigenvalues(ell + h * r[0], m + h * r[1], b)[i]
        lm = gc.eigenvalues(ell - h * r[0], m - h * r[1], b)[i]
        assert np.max(np.abs(lp - lm) / (2 * h)) <= 1e-8 * max(1, np.max(np.abs(lp)))


def test_riemann_examples_and_inverse():
    assert gc.riemann_invariants(-1.0, 0.0) == (-1.0, 1.0)
    assert gc.riemann_invariants(-2.0, 1.0) == (0.0, 1.0)
    assert gc.inverse_riemann(-1.0, 1.0) == (-1.0, 0.0)
    assert gc.inverse_riemann(0.0, 1.0) == (-2.0, 1.0)
    with pytest.raises(DegenerateStateError):
        gc.inverse_riemann(0.4, 0.4)
    ell, m = box_states(1000)
    l2, m2 = gc.inverse_riemann(*gc.riemann_invariants(ell, m))
    assert np.max(np.abs(l2 - ell) / np.abs(ell)) <= 1e-14
    assert np.max(np.abs(m2 - m)) <= 1e-14


def test_hyperbolicity_guard():
    with pytest.raises(HyperbolicityError):
        gc.flux(0.5, 0.0, 1.0)
    with pytest.raises(HyperbolicityError):
        gc.eigenvalues(np.array([-1.0, np.nan]), 0.0, 1.0)


def test_invariant_box():
    box = InvariantBox()
    assert box.as_tuple() == (0.1, 10.0)
    assert box.contains(-1.0, 0.0) and not box.contains(-1.0, 1.0) and not box.contains(-0.05, 0.0)
    assert box.margin(np.array([-1.0]), np.array([0.5])) == pytest.approx(0.5)
    with pytest.raises(ParameterError):
        InvariantBox(2.0, 1.0)


def test_state_field_validation():
    f = StateField(0.0, 0.25, -np.ones(4), np.zeros(4))
    assert np.allclose(f.x, [0.125, 0.375, 0.625, 0.875])
    assert f.length == 1.0
    with pytest.raises(ParameterError):
        StateField(0.0, 0.25, -np.ones(3), np.zeros(3))
    with pytest.raises(HyperbolicityError):
        StateField(0.0, 0.25, np.ones(4), np.zeros(4))
    with pytest.raises(ParameterError):
        StateField(0.0, 0.25, -np.ones(4), np.zeros(4), boundary="reflecting")
