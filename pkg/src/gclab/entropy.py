"""Entropy pair of the scaled Gauss-Codazzi system and relative quantities.

    eta(l, m) = -(m^2 + 1)/l,      q(l, m; b) = (m^3 - m)/(b l^2).

eta is strictly convex for l < 0. Relative quantities compare a state
U = (l, m) against a reference Ubar = (lb, mb); each has an expanded closed
form (used for speed and for exact cancellation at U = Ubar) and a
``*_definition`` counterpart written straight from the Taylor-remainder
definition, which the tests use as an independent check.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gauss_codazzi as gc
from .gauss_codazzi import InvariantBox, _require_hyperbolic


def entropy(ell, m):
    _require_hyperbolic(ell)
    return -(m * m + 1.0) / ell


def entropy_flux(ell, m, b):
    _require_hyperbolic(ell)
    return (m ** 3 - m) / (b * ell * ell)


def entropy_gradient(ell, m):
    _require_hyperbolic(ell)
    return np.stack([(m * m + 1.0) / (ell * ell), -2.0 * m / ell])


def entropy_hessian(ell, m):
    """-(2/l) [[(m^2+1)/l^2, -m/l], [-m/l, 1]], shape (2, 2, ...)."""
    _require_hyperbolic(ell)
    ell = np.asarray(ell, dtype=float)
    m = np.asarray(m, dtype=float)
    s = -2.0 / ell
    return np.array([[s * (m * m + 1.0) / ell ** 2, -s * m / ell], [-s * m / ell, s + 0.0 * m]])


def entropy_flux_gradient(ell, m, b):
    _require_hyperbolic(ell)
    return np.stack([-2.0 * (m ** 3 - m) / (b * ell ** 3), (3.0 * m * m - 1.0) / (b * ell * ell)])


def hessian_eigenvalues(ell, m):
    """mu1 <= mu2 from the closed form (S -/+ sqrt(S^2 - 4 l^2)) / |l|^3, S = m^2 + 1 + l^2.

    mu1 uses the conjugate S - sqrt(D) = 4 l^2/(S + sqrt(D)) to avoid cancellation.
    """
    _require_hyperbolic(ell)
    S = m * m + 1.0 + ell * ell
    root = np.sqrt(m ** 4 + 2.0 * m * m * (1.0 + ell * ell) + (ell * ell - 1.0) ** 2)
    a3 = -(ell ** 3)
    mu2 = (S + root) / a3
    mu1 = 4.0 * ell * ell / ((S + root) * a3)
    return mu1, mu2


@dataclass
class EntropyEval:
    eta: np.ndarray
    q: np.ndarray
    grad: np.ndarray
    hessian: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    det: np.ndarray


def entropy_derivatives(ell, m, b=1.0) -> EntropyEval:
    H = entropy_hessian(ell, m)
    mu1, mu2 = hessian_eigenvalues(ell, m)
    return EntropyEval(
        eta=entropy(ell, m),
        q=entropy_flux(ell, m, b),
        grad=entropy_gradient(ell, m),
        hessian=H,
        mu1=mu1,
        mu2=mu2,
        det=H[0, 0] * H[1, 1] - H[0, 1] * H[1, 0],
    )


# -- relative quantities ------------------------------------------------------


def relative_entropy(ell, m, ell_bar, m_bar):
    """eta(U|Ubar) in expanded form:

    -(1/lb) [ (m - mb)^2 + (1 + mb^2)(l - lb)^2/(l lb) + (m + mb)(mb - m)(l - lb)/l ].
    """
    _require_hyperbolic(ell)
    _require_hyperbolic(ell_bar)
    dl = ell - ell_bar
    dm = m - m_bar
    return -(dm * dm + (1.0 + m_bar * m_bar) * dl * dl / (ell * ell_bar) - (m + m_bar) * dm * dl / ell) / ell_bar


def relative_entropy_definition(ell, m, ell_bar, m_bar):
    g = entropy_gradient(ell_bar, m_bar)
    return entropy(ell, m) - entropy(ell_bar, m_bar) - (g[0] * (ell - ell_bar) + g[1] * (m - m_bar))


def relative_flux(ell, m, b, ell_bar, m_bar, b_bar):
    """f(U;b) - f(Ubar;bbar) - Df(Ubar;bbar)(U - Ubar), expanded."""
    rel = relative_entropy(ell, m, ell_bar, m_bar)
    dl = ell - ell_bar
    w = 1.0 / b_bar - 1.0 / b
    first = w * m
    second = w * (m * m - 1.0) / ell + (rel + 2.0 * dl * dl / (ell * ell_bar * ell_bar)) / b_bar
    return np.stack([first + 0.0 * second, second])


def relative_flux_definition(ell, m, b, ell_bar, m_bar, b_bar):
    J = gc.flux_jacobian(ell_bar, m_bar, b_bar)
    dU = (ell - ell_bar, m - m_bar)
    lin = np.stack([J[0, 0] * dU[0] + J[0, 1] * dU[1], J[1, 0] * dU[0] + J[1, 1] * dU[1]])
    return gc.flux(ell, m, b) - gc.flux(ell_bar, m_bar, b_bar) - lin


def relative_gradient(ell, m, ell_bar, m_bar):
    """grad eta(U) - grad eta(Ubar) - Hess eta(Ubar)(U - Ubar), expanded.

    -(1/lb) [ -(l + lb)(1 + mb^2)(l - lb)^2/(l^2 lb^2) + eta(U|Ubar) + (m^2 - mb^2)(l - lb)/l^2,
              -(2/l)(m - mb)(l - lb) + 2 mb (l - lb)^2/(l lb) ]
    """
    rel = relative_entropy(ell, m, ell_bar, m_bar)
    dl = ell - ell_bar
    dm = m - m_bar
    first = (
        -(ell + ell_bar) * (1.0 + m_bar * m_bar) * dl * dl / (ell * ell * ell_bar * ell_bar)
        + rel
        + (m + m_bar) * dm * dl / (ell * ell)
    )
    second = -2.0 * dm * dl / ell + 2.0 * m_bar * dl * dl / (ell * ell_bar)
    return -np.stack([first, second]) / ell_bar


def relative_gradient_definition(ell, m, ell_bar, m_bar):
    H = entropy_hessian(ell_bar, m_bar)
    dU = (ell - ell_bar, m - m_bar)
    lin = np.stack([H[0, 0] * dU[0] + H[0, 1] * dU[1], H[1, 0] * dU[0] + H[1, 1] * dU[1]])
    return entropy_gradient(ell, m) - entropy_gradient(ell_bar, m_bar) - lin


def relative_entropy_flux(ell, m, b, ell_bar, m_bar, b_bar):
    g = entropy_gradient(ell_bar, m_bar)
    df = gc.flux(ell, m, b) - gc.flux(ell_bar, m_bar, b_bar)
    return entropy_flux(ell, m, b) - entropy_flux(ell_bar, m_bar, b_bar) - (g[0] * df[0] + g[1] * df[1])


def check_entropy_compatibility(ell, m, b, jacobian=gc.flux_jacobian) -> float:
    """max |grad q - grad eta . Df| over the samples (analytic gradients).

    ``jacobian`` can be swapped for a perturbed flux Jacobian as a negative control.
    """
    gq = entropy_flux_gradient(ell, m, b)
    ge = entropy_gradient(ell, m)
    J = jacobian(ell, m, b)
    lhs0 = ge[0] * J[0, 0] + ge[1] * J[1, 0]
    lhs1 = ge[0] * J[0, 1] + ge[1] * J[1, 1]
    return float(max(np.max(np.abs(gq[0] - lhs0)), np.max(np.abs(gq[1] - lhs1))))


# -- sampling -----------------------------------------------------------------


def sample_box(box: InvariantBox, size: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Uniform samples of B = [-R0, -r0] x (-1, 1)."""
    ell = rng.uniform(-box.R0, -box.r0, size)
    m = rng.uniform(-1.0, 1.0, size)
    # the m-interval is open
    m = np.clip(m, -1.0 + 1e-12, 1.0 - 1e-12)
    return ell, m


@dataclass
class SandwichConstants:
    c0: float
    c1: float
    C_grad: float
    samples: int


def measure_sandwich(box: InvariantBox, box_bar: InvariantBox, samples: int = 10_000, seed: int = 0,
                     min_separation: float = 1e-6) -> SandwichConstants:
    """Estimate c0, c1 in c0|U - Ubar|^2 <= eta(U|Ubar) <= c1|U - Ubar|^2 and
    C_grad in |grad eta(U|Ubar)| <= C_grad eta(U|Ubar) by sampling B x Bbar.

    Pairs closer than ``min_separation`` are dropped: the ratios are 0/0 there.
    """
    rng = np.random.default_rng(seed)
    ell, m = sample_box(box, samples, rng)
    lb, mb = sample_box(box_bar, samples, rng)
    d2 = (ell - lb) ** 2 + (m - mb) ** 2
    keep = d2 > min_separation ** 2
    ell, m, lb, mb, d2 = ell[keep], m[keep], lb[keep], mb[keep], d2[keep]
    rel = relative_entropy(ell, m, lb, mb)
    ratio = rel / d2
    rg = relative_gradient(ell, m, lb, mb)
    grad_ratio = np.hypot(rg[0], rg[1]) / rel
    return SandwichConstants(
        c0=float(ratio.min()), c1=float(ratio.max()), C_grad=float(grad_ratio.max()), samples=int(keep.sum())
    )
