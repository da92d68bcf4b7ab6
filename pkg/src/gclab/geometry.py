"""Metric profiles g = dt^2 + b(t)^2 dx^2 of negatively curved surfaces.

A profile bundles b(t), its t-derivative, the Gauss curvature K(t) < 0 and the
two logarithmic derivatives that enter the balance-law source. Three families
are provided:

* ``helicoid`` -- closed form b_c(t) = sqrt(c^2 + t^2)/c, K_c = -c^2/(c^2 + t^2)^2.
* ``hong`` -- |K| = C/(1 + |t|)^(2+delta), with b obtained by integrating
  b'' = |K| b, b(0) = 1, b'(0) = 0.
* ``tabulated`` -- b (and optionally K) sampled on a grid, monotone cubic
  interpolation.

``frozen`` is a constant-coefficient profile (b, K constant) for solver tests;
it does not satisfy the Jacobi equation and is rejected by validate_metric.
All evaluators are vectorized over t.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import BPoly, PchipInterpolator

from .errors import DomainError, MetricValidationError, NumericError, ParameterError

HONG_RTOL = 1e-10
HONG_ATOL = 1e-12


class MetricDerivatives(NamedTuple):
    b: np.ndarray
    db: np.ndarray
    dlnb: np.ndarray
    K: np.ndarray
    dlnK: np.ndarray


@dataclass(frozen=True)
class MetricProfile:
    family: str
    params: dict
    t_min: float
    t_max: float
    _b: Callable = field(repr=False)
    _db: Callable = field(repr=False)
    _K: Callable = field(repr=False)
    _dlnb: Callable = field(repr=False)
    _dlnK: Callable = field(repr=False)
    jacobi_tol: float = 1e-10
    kinks: tuple = ()
    # optional direct evaluator of b'' (tabulated profiles differentiate the table instead)
    _d2b: Callable | None = field(default=None, repr=False)

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_min) or np.any(t > self.t_max) or np.any(np.isnan(t)):
            bad = t[(t < self.t_min) | (t > self.t_max) | np.isnan(t)]
            raise DomainError(
                f"t={np.ravel(bad)[0]!r} outside the {self.family} domain "
                f"[{self.t_min:g}, {self.t_max:g}]"
            )
        return t

    def b(self, t):
        return self._b(self._check(t))

    def db(self, t):
        return self._db(self._check(t))

    def K(self, t):
        return self._K(self._check(t))

    def dlnb(self, t):
        return self._dlnb(self._check(t))

    def dlnK(self, t):
        return self._dlnK(self._check(t))

    def contains(self, t0, t1) -> bool:
        lo, hi = min(t0, t1), max(t0, t1)
        return lo >= self.t_min and hi <= self.t_max

    def describe(self) -> dict:
        return {"family": self.family, **self.params, "t_min": self.t_min, "t_max": self.t_max}


def helicoid_metric(c: float, t_min: float = -np.inf, t_max: float = np.inf) -> MetricProfile:
    """Metric of the helicoid-type surface (t sin(x/c), t cos(x/c), x).

    b_c(t) = sqrt(c^2 + t^2)/c and K_c(t) = -c^2/(c^2 + t^2)^2, so that
    d/dt ln b = t/(c^2 + t^2) and d/dt ln|K| = -4t/(c^2 + t^2).
    """
    c = float(c)
    if not c > 0:
        raise ParameterError(f"helicoid parameter c must be positive, got {c!r}")
    c2 = c * c

    return MetricProfile(
        family="helicoid",
        params={"c": c},
        t_min=float(t_min),
        t_max=float(t_max),
        _b=lambda t: np.sqrt(c2 + t * t) / c,
        _db=lambda t: t / (c * np.sqrt(c2 + t * t)),
        _K=lambda t: -c2 / (c2 + t * t) ** 2,
        _dlnb=lambda t: t / (c2 + t * t),
        _dlnK=lambda t: -4.0 * t / (c2 + t * t),
    )


def frozen_metric(b: float = 1.0, K: float = -1.0, t_min=-np.inf, t_max=np.inf) -> MetricProfile:
    b, K = float(b), float(K)
    if not b > 0:
        raise ParameterError(f"frozen b must be positive, got {b!r}")
    if not K < 0:
        raise ParameterError(f"frozen K must be negative, got {K!r}")
    const = lambda v: (lambda t: np.full(np.shape(t), v) if np.ndim(t) else v)
    return MetricProfile(
        family="frozen",
        params={"b": b, "K": K},
        t_min=float(t_min),
        t_max=float(t_max),
        _b=const(b),
        _db=const(0.0),
        _K=const(K),
        _dlnb=const(0.0),
        _dlnK=const(0.0),
    )


def hong_metric(C: float, delta: float, t_max: float = 200.0) -> MetricProfile:
    """Profile with |K| = C/(1+|t|)^(2+delta) on [-t_max, t_max].

    b solves b'' = |K| b with b(0) = 1, b'(0) = 0. The ODE is integrated on
    [0, t_max] with an adaptive 4(5) Runge-Kutta pair; b and b' are then
    represented by quintic Hermite splines through the accepted steps, using
    the exact higher derivatives b'' = |K| b and b''' = |K|' b + |K| b'.
    b is even in t. |K| has a kink at t = 0, recorded in ``kinks``.
    """
    C, delta, t_max = float(C), float(delta), float(t_max)
    if not C > 0:
        raise ParameterError(f"hong parameter C must be positive, got {C!r}")
    if not 0 < delta < 2:
        raise ParameterError(f"hong parameter delta must lie in (0, 2), got {delta!r}")
    if not t_max > 0:
        raise ParameterError(f"t_max must be positive, got {t_max!r}")
    p = 2.0 + delta

    def absK(t):
        return C / (1.0 + np.abs(t)) ** p

    sol = solve_ivp(
        lambda t, y: (y[1], absK(t) * y[0]),
        (0.0, t_max),
        (1.0, 0.0),
        method="RK45",
        rtol=HONG_RTOL,
        atol=HONG_ATOL,
    )
    if not sol.success:
        raise NumericError(f"Jacobi ODE integration failed: {sol.message}")
    ts, (bs, dbs) = sol.t, sol.y
    k = absK(ts)
    d2bs = k * bs
    d3bs = -p * k / (1.0 + ts) * bs + k * dbs
    b_spl = BPoly.from_derivatives(ts, np.column_stack([bs, dbs, d2bs]))
    db_spl = BPoly.from_derivatives(ts, np.column_stack([dbs, d2bs, d3bs]))

    def b(t):
        return b_spl(np.abs(t))

    def db(t):
        return np.sign(t) * db_spl(np.abs(t))

    return MetricProfile(
        family="hong",
        params={"C": C, "delta": delta},
        t_min=-t_max,
        t_max=t_max,
        _b=b,
        _db=db,
        _K=lambda t: -absK(t),
        _dlnb=lambda t: db(t) / b(t),
        # kink at t = 0; the symmetric value 0 is used there
        _dlnK=lambda t: -p * np.sign(t) / (1.0 + np.abs(t)),
        jacobi_tol=10 * HONG_RTOL,
        kinks=(0.0,),
    )


def tabulated_metric(t, b, K=None, jacobi_tol: float = 1e-4) -> MetricProfile:
    """Profile from samples of b (and optionally K) using monotone cubic interpolation.

    The interpolant is only C^1, so b'' is taken from second differences on the
    table nodes (O(dt^2)) and interpolated. Without a K column the curvature
    comes from the Jacobi equation, K = -b''/b, on the nodes.
    """
    t = np.asarray(t, dtype=float)
    b = np.asarray(b, dtype=float)
    if t.ndim != 1 or t.shape != b.shape or t.size < 4:
        raise ParameterError("tabulated metric needs matching 1-D t and b columns with at least 4 rows")
    if np.any(np.diff(t) <= 0):
        raise ParameterError("tabulated t column must be strictly increasing")
    b_int = PchipInterpolator(t, b)
    db_int = b_int.derivative()
    d2b_nodes = _node_second_derivative(t, b)
    d2b_int = PchipInterpolator(t, d2b_nodes)
    if K is None:
        K_int = PchipInterpolator(t, -d2b_nodes / b)
        dK_int = K_int.derivative()
        K_fn = K_int
        dlnK = lambda s: dK_int(s) / K_int(s)
    else:
        K = np.asarray(K, dtype=float)
        if K.shape != t.shape:
            raise ParameterError("tabulated K column must match t")
        K_int = PchipInterpolator(t, K)
        dK_int = K_int.derivative()
        K_fn = K_int
        dlnK = lambda s: dK_int(s) / K_int(s)
    return MetricProfile(
        family="tabulated",
        params={"rows": int(t.size)},
        t_min=float(t[0]),
        t_max=float(t[-1]),
        _b=b_int,
        _db=db_int,
        _K=K_fn,
        _dlnb=lambda s: db_int(s) / b_int(s),
        _dlnK=dlnK,
        jacobi_tol=jacobi_tol,
        _d2b=d2b_int,
    )


def _node_second_derivative(t, f):
    """Second differences on a nonuniform grid; cubic fits through 4 nodes at the ends."""
    h0, h1 = np.diff(t)[:-1], np.diff(t)[1:]
    out = np.empty_like(f)
    out[1:-1] = 2.0 * ((f[2:] - f[1:-1]) / h1 - (f[1:-1] - f[:-2]) / h0) / (h0 + h1)
    for end, sl in ((0, slice(0, 4)), (-1, slice(-4, None))):
        c = np.polyfit(t[sl] - t[end], f[sl], 3)
        out[end] = 2.0 * c[1]
    return out


def read_metric_table(path) -> MetricProfile:
    """Read a tabulated profile from CSV with columns t, b[, K] (header row optional)."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in rec])
            except ValueError:
                if rows:
                    raise ParameterError(f"{path}: non-numeric row {rec!r}")
                continue  # header
    if not rows:
        raise ParameterError(f"{path}: no data rows")
    arr = np.array(rows)
    if arr.shape[1] not in (2, 3):
        raise ParameterError(f"{path}: expected 2 or 3 columns (t, b[, K]), got {arr.shape[1]}")
    return tabulated_metric(arr[:, 0], arr[:, 1], arr[:, 2] if arr.shape[1] == 3 else None)


def metric_derivatives(g: MetricProfile, t) -> MetricDerivatives:
    return MetricDerivatives(g.b(t), g.db(t), g.dlnb(t), g.K(t), g.dlnK(t))


def second_derivative_b(g: MetricProfile, t, h: float = 1e-3):
    """b'' by a fourth-order central difference of the b' evaluator.

    Profiles that carry their own b'' evaluator (tabulated ones) use it instead.
    Near the ends of a finite domain, and where the central stencil would
    straddle a kink of K, a fourth-order one-sided stencil is used instead.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if g._d2b is not None:
        g._check(t)
        return np.asarray(g._d2b(t), dtype=float)
    out = np.empty_like(t)
    lo = np.full_like(t, g.t_min)
    hi = np.full_like(t, g.t_max)
    for k in g.kinks:
        lo = np.where(t >= k, np.maximum(lo, k), lo)
        hi = np.where(t < k, np.minimum(hi, k), hi)
    inner = (t - 2 * h >= lo) & (t + 2 * h <= hi)
    ti = t[inner]
    out[inner] = (
        -g.db(ti + 2 * h) + 8 * g.db(ti + h) - 8 * g.db(ti - h) + g.db(ti - 2 * h)
    ) / (12 * h)
    left = ~inner & (t - 2 * h < lo)
    tl = t[left]
    out[left] = _one_sided(g.db, tl, h)
    right = ~inner & ~left
    out[right] = -_one_sided(g.db, t[right], -h)
    return out


def _one_sided(f, t, h):
    return (-25 * f(t) + 48 * f(t + h) - 36 * f(t + 2 * h) + 16 * f(t + 3 * h) - 3 * f(t + 4 * h)) / (12 * abs(h))


@dataclass
class MetricReport:
    family: str
    samples: int
    max_jacobi_residual: float
    jacobi_tol: float
    positivity_ok: bool
    negativity_ok: bool
    offending_t: list

    @property
    def passed(self) -> bool:
        return self.positivity_ok and self.negativity_ok and self.max_jacobi_residual <= self.jacobi_tol

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "samples": self.samples,
            "max_jacobi_residual": self.max_jacobi_residual,
            "jacobi_tol": self.jacobi_tol,
            "positivity_ok": self.positivity_ok,
            "negativity_ok": self.negativity_ok,
            "offending_t": self.offending_t,
            "passed": self.passed,
        }


def validate_metric(g: MetricProfile, ts, tol: float | None = None, strict: bool = True) -> MetricReport:
    """Check b > 0, K < 0 and the Jacobi equation b'' + K b = 0 at the sample times.

    The Jacobi residual is measured as |b'' + K b| / (1 + |K b|). With
    ``strict`` a sign violation raises MetricValidationError listing the
    offending times; otherwise the report carries them.
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    tol = g.jacobi_tol if tol is None else float(tol)
    b = np.atleast_1d(g.b(ts))
    K = np.atleast_1d(g.K(ts))
    d2b = second_derivative_b(g, ts)
    res = np.abs(d2b + K * b) / (1.0 + np.abs(K * b))
    pos = b > 0
    neg = K < 0
    offending = ts[~(pos & neg)].tolist()
    report = MetricReport(
        family=g.family,
        samples=int(ts.size),
        max_jacobi_residual=float(np.max(res)),
        jacobi_tol=tol,
        positivity_ok=bool(np.all(pos)),
        negativity_ok=bool(np.all(neg)),
        offending_t=offending,
    )
    if strict and offending:
        raise MetricValidationError(
            f"{g.family} profile violates b > 0 or K < 0 at {len(offending)} sample(s), "
            f"first at t={offending[0]!r}",
            offending,
        )
    return report
