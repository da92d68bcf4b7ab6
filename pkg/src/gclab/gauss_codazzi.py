"""Scaled Gauss-Codazzi system as a 2x2 balance law.

Convention: (L, M, N) = (h_xx, h_xt, h_tt) are the second fundamental form
coefficients in geodesic coordinates g = dt^2 + b^2 dx^2, so that the Gauss
equation reads L N - M^2 = K b^2 (no division by sqrt|g|). The scaled
unknowns are

    l = L / (b^2 sqrt|K|),   m = M / (b sqrt|K|),   n = N / sqrt|K|,

with the constraint l n - m^2 = -1, so n = (m^2 - 1)/l is eliminated. The
conserved quantity U = (l, m) obeys

    dU/dt + d/dx f(U; b) + P(U; b) = 0,
    f = -(1/b) (m, (m^2 - 1)/l),
    P = ((l - n) dlnb + (l/2) dlnK,  2 m dlnb + (m/2) dlnK),

which is strictly hyperbolic for l < 0 with linearly degenerate fields.

Every function here broadcasts over numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateStateError, DomainError, HyperbolicityError, ParameterError

DEFAULT_R0 = 0.1
DEFAULT_R0_OUTER = 10.0


class ScaledState(NamedTuple):
    ell: float
    m: float

    @property
    def n(self):
        return closure_n(self.ell, self.m)


class FundamentalFormState(NamedTuple):
    L: float
    M: float
    N: float


def _require_hyperbolic(ell):
    if np.any(~(np.asarray(ell) < 0)):
        raise HyperbolicityError("state with l >= 0 (or NaN): strict hyperbolicity requires l < 0")


def _require_negative_K(K):
    if np.any(~(np.asarray(K) < 0)):
        raise DomainError("Gauss curvature must be negative")


def scale(form: FundamentalFormState, b, K):
    """(L, M, N) -> (l, m, n)."""
    _require_negative_K(K)
    L, M, N = form
    rk = np.sqrt(np.abs(K))
    return L / (b * b * rk), M / (b * rk), N / rk


def unscale(lmn, b, K) -> FundamentalFormState:
    _require_negative_K(K)
    ell, m, n = lmn
    rk = np.sqrt(np.abs(K))
    return FundamentalFormState(ell * b * b * rk, m * b * rk, n * rk)


def closure_n(ell, m):
    """n from the constraint l n - m^2 = -1."""
    if np.any(np.asarray(ell) == 0):
        raise DegenerateStateError("l = 0: the constraint l n - m^2 = -1 cannot be solved for n")
    return (m * m - 1.0) / ell


def flux(ell, m, b):
    _require_hyperbolic(ell)
    return np.stack([-m / b, -(m * m - 1.0) / (b * ell)])


def source(ell, m, dlnb, dlnK):
    """Source P(U; b); ``dlnb`` and ``dlnK`` are d/dt ln b and d/dt ln|K|."""
    _require_hyperbolic(ell)
    n = (m * m - 1.0) / ell
    return np.stack([(ell - n) * dlnb + 0.5 * ell * dlnK, 2.0 * m * dlnb + 0.5 * m * dlnK])


def source_from_metric(ell, m, derivs):
    return source(ell, m, derivs.dlnb, derivs.dlnK)


def flux_jacobian(ell, m, b):
    """Analytic df/dU, shape (2, 2, ...)."""
    _require_hyperbolic(ell)
    ell = np.asarray(ell, dtype=float)
    m = np.asarray(m, dtype=float)
    zero = np.zeros(np.broadcast(ell, m, b).shape)
    return np.array(
        [
            [zero, zero - 1.0 / b],
            [zero + (m * m - 1.0) / (b * ell * ell), zero - 2.0 * m / (b * ell)],
        ]
    )


def eigenvalues(ell, m, b):
    """(lambda1, lambda2) with lambda1 < lambda2 for l < 0."""
    _require_hyperbolic(ell)
    return (-m + 1.0) / (b * ell), (-m - 1.0) / (b * ell)


def eigenstructure(ell, m, b):
    lam1, lam2 = eigenvalues(ell, m, b)
    return lam1, lam2, flux_jacobian(ell, m, b)


def right_eigenvectors(ell, m, b):
    """Right eigenvectors r1, r2 of the flux Jacobian.

    From (J - lambda I) r = 0 with the first row -lambda r_l - r_m / b = 0,
    r = (1, -b lambda).
    """
    lam1, lam2 = eigenvalues(ell, m, b)
    one = np.ones_like(np.asarray(lam1, dtype=float))
    return np.stack([one, -b * lam1]), np.stack([one, -b * lam2])


def riemann_invariants(ell, m):
    """u = (1 - m)/l, v = -(1 + m)/l; v - u = -2/l."""
    _require_hyperbolic(ell)
    return (1.0 - m) / ell, -(1.0 + m) / ell


def inverse_riemann(u, v):
    gap = np.asarray(v) - np.asarray(u)
    if np.any(~(gap > 0)):
        raise DegenerateStateError("Riemann invariants need v > u (l = -2/(v - u) must be finite and negative)")
    return -2.0 / gap, (u + v) / gap


@dataclass(frozen=True)
class InvariantBox:
    """B = [-R0, -r0] x (-1, 1) in the (l, m) plane."""

    r0: float = DEFAULT_R0
    R0: float = DEFAULT_R0_OUTER

    def __post_init__(self):
        if not 0 < self.r0 < self.R0:
            raise ParameterError(f"invariant box needs 0 < r0 < R0, got r0={self.r0}, R0={self.R0}")

    def contains(self, ell, m):
        ell = np.asarray(ell)
        m = np.asarray(m)
        return (ell >= -self.R0) & (ell <= -self.r0) & (np.abs(m) < 1.0)

    def margin(self, ell, m):
        """Signed distance to the box boundary (negative outside), minimum over cells."""
        ell = np.asarray(ell)
        m = np.asarray(m)
        d = np.minimum(np.minimum(ell + self.R0, -self.r0 - ell), 1.0 - np.abs(m))
        return float(np.min(d))

    def as_tuple(self):
        return (self.r0, self.R0)


BOUNDARY_MODES = ("periodic", "constant-extension")


@dataclass
class StateField:
    """Cell averages of (l, m) on a uniform grid.

    Cell j has centre x0 + (j + 1/2) dx.
    """

    x0: float
    dx: float
    ell: np.ndarray
    m: np.ndarray
    boundary: str = "periodic"

    def __post_init__(self):
        self.ell = np.asarray(self.ell, dtype=float)
        self.m = np.asarray(self.m, dtype=float)
        if self.ell.ndim != 1 or self.ell.shape != self.m.shape:
            raise ParameterError("l and m must be 1-D arrays of equal length")
        if self.ell.size < 4:
            raise ParameterError(f"state field needs at least 4 cells, got {self.ell.size}")
        if not self.dx > 0:
            raise ParameterError(f"dx must be positive, got {self.dx}")
        if self.boundary not in BOUNDARY_MODES:
            raise ParameterError(f"boundary must be one of {BOUNDARY_MODES}, got {self.boundary!r}")
        _require_hyperbolic(self.ell)

    @property
    def count(self) -> int:
        return self.ell.size

    @property
    def x(self) -> np.ndarray:
        return self.x0 + (np.arange(self.count) + 0.5) * self.dx

    @property
    def length(self) -> float:
        return self.count * self.dx

    @property
    def n(self):
        return closure_n(self.ell, self.m)

    def riemann(self):
        return riemann_invariants(self.ell, self.m)

    def same_grid(self, other: "StateField") -> bool:
        return (
            self.count == other.count
            and self.x0 == other.x0
            and self.dx == other.dx
            and self.boundary == other.boundary
        )

    def copy(self) -> "StateField":
        return StateField(self.x0, self.dx, self.ell.copy(), self.m.copy(), self.boundary)
