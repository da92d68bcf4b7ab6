import numpy as np
import pytest

from gclab import entropy as en
from gclab import gauss_codazzi as gc
from gclab.gauss_codazzi import InvariantBox

rng = np.random.default_rng(11)
B0 = InvariantBox()
BBAR = InvariantBox(0.5, 5.0)


@pytest.mark.parametrize("state, eta", [((-1, 0), 1), ((-2, 1), 1), ((-1, 2), 5)])
def test_entropy_examples(state, eta):
    assert en.entropy(*state) == eta


@pytest.mark.parametrize("state, q", [((-1, 0), 0), ((-2, 1), 0), ((-1, 2), 6)])
def test_entropy_flux_examples(state, q):
    assert en.entropy_flux(*state, 1.0) == q


def test_entropy_derivatives_examples():
    d = en.entropy_derivatives(-1.0, 0.0)
    assert tuple(d.grad) == (1.0, 0.0)
    assert np.allclose(d.hessian, 2 * np.eye(2), atol=0)
    assert (d.mu1, d.mu2, d.det) == pytest.approx((2, 2, 4), abs=1e-15)
    d = en.entropy_derivatives(-2.0, 0.0)
    assert np.allclose(d.hessian, np.diag([0.25, 1.0]), atol=0)
    assert (d.mu1, d.mu2, d.det) == pytest.approx((0.25, 1, 0.25), abs=1e-15)


def test_gradient_and_hessian_match_finite_differences():
    ell, m = en.sample_box(B0, 100, rng)
    h = 1e-6
    g = en.entropy_gradient(ell, m)
    H = en.entropy_hessian(ell, m)
    for k, (dl, dm) in enumerate(((h, 0), (0, h))):
        fd = (en.entropy(ell + dl, m + dm) - en.entropy(ell - dl, m - dm)) / (2 * h)
        assert np.max(np.abs(fd - g[k]) / np.maximum(1, np.abs(g[k]))) <= 1e-8
        fdg = (en.entropy_gradient(ell + dl, m + dm) - en.entropy_gradient(ell - dl, m - dm)) / (2 * h)
        assert np.max(np.abs(fdg - H[:, k]) / np.maximum(1, np.abs(H[:, k]))) <= 1e-7
        fq = (en.entropy_flux(ell + dl, m + dm, 1.3) - en.entropy_flux(ell - dl, m - dm, 1.3)) / (2 * h)
        gq = en.entropy_flux_gradient(ell, m, 1.3)[k]
        assert np.max(np.abs(fq - gq) / np.maximum(1, np.abs(gq))) <= 1e-7


def test_closed_form_eigenvalues_match_numeric_solver():
    ell, m = en.sample_box(B0, 200, rng)
    mu1, mu2 = en.hessian_eigenvalues(ell, m)
    H = np.moveaxis(en.entropy_hessian(ell, m), -1, 0)
    ev = np.linalg.eigvalsh(H)
    assert np.allclose(mu1, ev[:, 0], rtol=1e-12, atol=0)
    assert np.allclose(mu2, ev[:, 1], rtol=1e-12, atol=0)


@pytest.mark.parametrize("b", [1.0, 3.0])
def test_compatibility_identity(b):
    ell, m = en.sample_box(B0, 100, rng)
    assert en.check_entropy_compatibility(ell, m, b) <= 1e-10


def test_compatibility_negative_control():
    ell, m = en.sample_box(B0, 100, rng)
    flipped = lambda l, mm, b: -gc.flux_jacobian(l, mm, b)
    assert en.check_entropy_compatibility(ell, m, 1.0, jacobian=flipped) > 1e-2


def test_relative_entropy_examples():
    assert en.relative_entropy(-1.0, 0.0, -1.0, 0.0) == 0.0
    assert en.relative_entropy(-2.0, 0.0, -1.0, 0.0) == pytest.approx(0.5, abs=1e-15)
    assert en.relative_entropy_definition(-2.0, 0.0, -1.0, 0.0) == pytest.approx(0.5, abs=1e-15)


def test_relative_flux_examples():
    assert tuple(en.relative_flux(-1.0, 0.2, 1.0, -1.0, 0.2, 1.0)) == (0.0, 0.0)
    assert tuple(en.relative_flux(-2.0, 0.0, 1.0, -1.0, 0.0, 1.0)) == pytest.approx((0, -0.5), abs=1e-15)
    assert tuple(en.relative_flux_definition(-2.0, 0.0, 1.0, -1.0, 0.0, 1.0)) == pytest.approx((0, -0.5), abs=1e-15)
    assert tuple(en.relative_flux(-1.0, 0.0, 2.0, -1.0, 0.0, 1.0)) == pytest.approx((0, 0.5), abs=1e-15)


def test_relative_gradient_examples():
    assert tuple(en.relative_gradient(-1.5, 0.3, -1.5, 0.3)) == (0.0, 0.0)
    assert tuple(en.relative_gradient(-2.0, 0.0, -1.0, 0.0)) == pytest.approx((1.25, 0), abs=1e-15)
    assert tuple(en.relative_gradient_definition(-2.0, 0.0, -1.0, 0.0)) == pytest.approx((1.25, 0), abs=1e-15)


def test_relative_entropy_flux_examples():
    assert en.relative_entropy_flux(-1.2, 0.1, 1.0, -1.2, 0.1, 1.0) == 0.0
    assert en.relative_entropy_flux(-2.0, 0.0, 1.0, -1.0, 0.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert en.relative_entropy_flux(-1.0, 0.5, 1.0, -1.0, 0.0, 1.0) == pytest.approx(0.125, abs=1e-15)


def test_closed_forms_agree_with_definitions():
    ell, m = en.sample_box(B0, 10_000, rng)
    lb, mb = en.sample_box(BBAR, 10_000, rng)
    b, bb = rng.uniform(0.5, 3, 10_000), rng.uniform(0.5, 3, 10_000)
    assert np.max(np.abs(en.relative_entropy(ell, m, lb, mb) - en.relative_entropy_definition(ell, m, lb, mb))) <= 1e-12
    assert np.max(np.abs(en.relative_flux(ell, m, b, lb, mb, bb) - en.relative_flux_definition(ell, m, b, lb, mb, bb))) <= 1e-12
    assert np.max(np.abs(en.relative_gradient(ell, m, lb, mb) - en.relative_gradient_definition(ell, m, lb, mb))) <= 1e-12


def test_relative_entropy_nonnegative_and_zero_on_diagonal():
    ell, m = en.sample_box(B0, 10_000, rng)
    lb, mb = en.sample_box(BBAR, 10_000, rng)
    assert np.all(en.relative_entropy(ell, m, lb, mb) > 0)
    assert np.max(np.abs(en.relative_entropy(lb, mb, lb, mb))) <= 1e-14


def test_sandwich_and_gradient_bound():
    s = en.measure_sandwich(B0, BBAR, samples=10_000, seed=3)
    assert 0 < s.c0 <= s.c1 < np.inf
    assert np.isfinite(s.C_grad) and s.C_grad > 0
    # the constants hold on fresh samples up to sampling error of the extremes
    ell, m = en.sample_box(B0, 2000, rng)
    lb, mb = en.sample_box(BBAR, 2000, rng)
    rel = en.relative_entropy(ell, m, lb, mb)
    d2 = (ell - lb) ** 2 + (m - mb) ** 2
    assert np.all(rel >= 0.5 * s.c0 * d2) and np.all(rel <= 2 * s.c1 * d2)


def test_relative_flux_is_quadratic_at_equal_b():
    ell, m = en.sample_box(B0, 10_000, rng)
    lb, mb = en.sample_box(BBAR, 10_000, rng)
    rf = en.relative_flux(ell, m, 1.0, lb, mb, 1.0)
    d2 = (ell - lb) ** 2 + (m - mb) ** 2
    C = np.max(np.hypot(*rf) / d2)
    assert np.isfinite(C)
    # shrinking the separation shrinks the relative flux quadratically
    small = en.relative_flux(lb + 1e-3, mb, 1.0, lb, mb, 1.0)
    assert np.max(np.hypot(*small)) <= C * 1e-6 * 1.0001


def test_convexity_on_grid():
    L, M = np.meshgrid(np.linspace(-10, -0.1, 200), np.linspace(-1, 1, 200))
    mu1, _ = en.hessian_eigenvalues(L, M)
    assert np.all(mu1 > 0)
