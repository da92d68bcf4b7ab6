"""Viscous finite-volume integration of dU/dt + d/dx f(U; b) + P(U; b) = 0.

The default scheme is Lax-Friedrichs with an unsplit explicit source. Its
numerical viscosity dx^2/(2 dt) is O(dx) at fixed CFL, the discrete analogue of
a vanishing-viscosity approximation. An explicit-viscosity central scheme
(mu = kappa dx) and Strang splitting of the source are available as options.

Backward runs use the substitution s = -(t - t0): in s the system reads
dU/ds - d/dx f - P = 0, so the same forward machinery applies with the flux
and source multiplied by the direction sign.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import gauss_codazzi as gc
from .entropy import entropy, entropy_flux, entropy_gradient
from .errors import (
    CFLViolation,
    DomainError,
    InvariantRegionViolation,
    NumericError,
    ParameterError,
)
from .gauss_codazzi import InvariantBox, StateField
from .geometry import MetricProfile

VISCOSITY_MODES = ("lax-friedrichs", "explicit")
SOURCE_MODES = ("unsplit", "strang")


@dataclass(frozen=True)
class SolverConfig:
    cfl: float = 0.45
    viscosity: str = "lax-friedrichs"
    kappa: float = 0.5
    source: str = "unsplit"
    box: InvariantBox = field(default_factory=InvariantBox)
    direction: int = 1
    store_every: int = 1
    output_dt: float | None = None

    def __post_init__(self):
        if not 0 < self.cfl < 1:
            raise ParameterError(f"CFL number must lie in (0, 1), got {self.cfl}")
        if self.viscosity not in VISCOSITY_MODES:
            raise ParameterError(f"viscosity must be one of {VISCOSITY_MODES}, got {self.viscosity!r}")
        if self.source not in SOURCE_MODES:
            raise ParameterError(f"source coupling must be one of {SOURCE_MODES}, got {self.source!r}")
        if not self.kappa > 0:
            raise ParameterError(f"kappa must be positive, got {self.kappa}")
        if self.direction not in (1, -1):
            raise ParameterError(f"direction must be +1 or -1, got {self.direction}")
        if int(self.store_every) < 1:
            raise ParameterError("store_every must be >= 1")
        if self.output_dt is not None and not self.output_dt > 0:
            raise ParameterError(f"output_dt must be positive, got {self.output_dt}")


def _check_box(ell, m, t, box: InvariantBox):
    bad = ~box.contains(ell, m)
    if np.any(bad):
        j = int(np.argmax(bad))
        raise InvariantRegionViolation(j, (ell[j], m[j]), t, box.as_tuple())


def max_wave_speed(ell, m, b) -> float:
    lam1, lam2 = gc.eigenvalues(ell, m, b)
    s = float(max(np.max(np.abs(lam1)), np.max(np.abs(lam2))))
    if not math.isfinite(s):
        raise NumericError("non-finite characteristic speed")
    return s


def cfl_dt(fld: StateField, b: float, cfg: SolverConfig) -> float:
    """Largest stable step: cfl * dx / max|lambda| (and dx/(2 kappa) for the explicit-viscosity scheme)."""
    s = max_wave_speed(fld.ell, fld.m, b)
    dt = cfg.cfl * fld.dx / s
    if cfg.viscosity == "explicit":
        dt = min(dt, fld.dx / (2.0 * cfg.kappa))
    return dt


def _extend(a, boundary):
    if boundary == "periodic":
        return np.concatenate([a[..., -1:], a, a[..., :1]], axis=-1)
    return np.concatenate([a[..., :1], a, a[..., -1:]], axis=-1)


def _hyperbolic_update(U, t, dt, g, fld, cfg):
    sigma = cfg.direction
    F = sigma * gc.flux(U[0], U[1], g.b(t))
    Ue = _extend(U, fld.boundary)
    Fe = _extend(F, fld.boundary)
    alpha = fld.dx / dt if cfg.viscosity == "lax-friedrichs" else 2.0 * cfg.kappa
    Fhat = 0.5 * (Fe[:, :-1] + Fe[:, 1:]) - 0.5 * alpha * (Ue[:, 1:] - Ue[:, :-1])
    return U - (dt / fld.dx) * (Fhat[:, 1:] - Fhat[:, :-1])


def _source_rate(U, t, g, sigma):
    return -sigma * gc.source(U[0], U[1], g.dlnb(t), g.dlnK(t))


def _source_heun(U, t, h, g, sigma):
    k1 = _source_rate(U, t, g, sigma)
    U1 = U + h * k1
    k2 = _source_rate(U1, t + sigma * h, g, sigma)
    return U + 0.5 * h * (k1 + k2)


def step(fld: StateField, t: float, dt: float, g: MetricProfile, cfg: SolverConfig) -> StateField:
    """Advance one step of size dt (> 0) in the configured time direction from time t."""
    if not dt > 0:
        raise ParameterError(f"step size must be positive, got {dt}")
    _check_box(fld.ell, fld.m, t, cfg.box)
    bound = cfl_dt(fld, g.b(t), cfg)
    if dt > bound * (1.0 + 1e-9):
        raise CFLViolation(f"dt={dt:.6g} exceeds the stability bound {bound:.6g}")
    sigma = cfg.direction
    U = np.stack([fld.ell, fld.m])
    if cfg.source == "unsplit":
        Unew = _hyperbolic_update(U, t, dt, g, fld, cfg) + dt * _source_rate(U, t, g, sigma)
    else:
        half = 0.5 * dt
        U = _source_heun(U, t, half, g, sigma)
        # the flux step uses b at the midpoint
        Unew = _hyperbolic_update(U, t + sigma * half, dt, g, fld, cfg)
        Unew = _source_heun(Unew, t + sigma * half, half, g, sigma)
    if not np.all(np.isfinite(Unew)):
        raise NumericError(f"non-finite state after step at t={t:.6g}")
    t_new = t + sigma * dt
    _check_box(Unew[0], Unew[1], t_new, cfg.box)
    return StateField(fld.x0, fld.dx, Unew[0], Unew[1], fld.boundary)


@dataclass
class Trajectory:
    """Stored frames of a run.

    ``ell`` and ``m`` have shape (frames, cells); ``is_output`` marks frames at
    the requested output times (always including the start and end).
    """

    config: SolverConfig
    metric: MetricProfile
    x0: float
    dx: float
    boundary: str
    times: np.ndarray
    ell: np.ndarray
    m: np.ndarray
    is_output: np.ndarray
    max_speed_history: np.ndarray
    margin_history: np.ndarray
    steps: int = 0

    @property
    def direction(self) -> int:
        return self.config.direction

    @property
    def x(self) -> np.ndarray:
        return self.x0 + (np.arange(self.ell.shape[1]) + 0.5) * self.dx

    def frame(self, i: int) -> StateField:
        return StateField(self.x0, self.dx, self.ell[i], self.m[i], self.boundary)

    @property
    def final(self) -> StateField:
        return self.frame(-1)

    def output_indices(self) -> np.ndarray:
        return np.flatnonzero(self.is_output)

    def index_of(self, t: float, atol: float = 1e-12) -> int:
        hit = np.flatnonzero(np.abs(self.times - t) <= atol)
        if hit.size == 0:
            raise DomainError(f"no stored frame at t={t!r}")
        return int(hit[0])

    def same_grid(self, other: "Trajectory") -> bool:
        return (
            self.ell.shape[1] == other.ell.shape[1]
            and self.x0 == other.x0
            and self.dx == other.dx
            and self.boundary == other.boundary
        )

    def subset(self, indices) -> "Trajectory":
        idx = np.asarray(indices)
        return Trajectory(
            self.config, self.metric, self.x0, self.dx, self.boundary,
            self.times[idx], self.ell[idx], self.m[idx], self.is_output[idx],
            self.max_speed_history, self.margin_history, self.steps,
        )

    def outputs(self) -> "Trajectory":
        return self.subset(self.output_indices())


def output_schedule(t0: float, t1: float, output_dt: float | None) -> np.ndarray:
    sigma = 1 if t1 >= t0 else -1
    span = abs(t1 - t0)
    if output_dt is None:
        return np.array([t0, t1], dtype=float)
    k = int(math.floor(span / output_dt + 1e-9))
    ts = [t0 + sigma * i * output_dt for i in range(k + 1)]
    if span - k * output_dt > 1e-12 * max(1.0, span):
        ts.append(t1)
    ts[-1] = t1
    return np.array(ts, dtype=float)


def solve(initial: StateField, g: MetricProfile, t_span, cfg: SolverConfig, output_times=None) -> Trajectory:
    """Integrate from t_span[0] to t_span[1].

    The direction of t_span must match ``cfg.direction``. Step sizes are chosen
    so that every output time is hit exactly without sliver steps.
    """
    t0, t1 = (float(v) for v in t_span)
    if t1 == t0:
        raise ParameterError("empty time span")
    sigma = 1 if t1 > t0 else -1
    if sigma != cfg.direction:
        raise ParameterError(f"t_span {t_span} runs against the configured direction {cfg.direction:+d}")
    if not g.contains(t0, t1):
        raise DomainError(f"t_span {t_span} leaves the metric domain [{g.t_min:g}, {g.t_max:g}]")
    _check_box(initial.ell, initial.m, t0, cfg.box)

    if output_times is None:
        targets = output_schedule(t0, t1, cfg.output_dt)
    else:
        targets = np.array(sorted(set(float(v) for v in output_times) | {t0, t1}, key=lambda v: sigma * v))
        if np.any(sigma * (targets - t0) < 0) or np.any(sigma * (targets - t1) > 0):
            raise ParameterError("output times must lie inside t_span")

    times, ells, ms, outs = [t0], [initial.ell.copy()], [initial.m.copy()], [True]
    speeds, margins = [], []
    fld, t, nsteps = initial, t0, 0
    for target in targets[1:]:
        while sigma * (target - t) > 0:
            b = g.b(t)
            try:
                dt_max = cfl_dt(fld, b, cfg)
            except NumericError as exc:
                raise NumericError(f"{exc} at t={t:.6g}") from exc
            remaining = abs(target - t)
            n = max(1, math.ceil(remaining / dt_max - 1e-9))
            dt = remaining / n
            fld = step(fld, t, dt, g, cfg)
            nsteps += 1
            t = target if n == 1 else t + sigma * dt
            speeds.append(max_wave_speed(fld.ell, fld.m, g.b(t)))
            margins.append(cfg.box.margin(fld.ell, fld.m))
            at_target = n == 1
            if at_target or nsteps % cfg.store_every == 0:
                times.append(t)
                ells.append(fld.ell.copy())
                ms.append(fld.m.copy())
                outs.append(at_target)
    return Trajectory(
        config=cfg,
        metric=g,
        x0=initial.x0,
        dx=initial.dx,
        boundary=initial.boundary,
        times=np.array(times),
        ell=np.array(ells),
        m=np.array(ms),
        is_output=np.array(outs, dtype=bool),
        max_speed_history=np.array(speeds),
        margin_history=np.array(margins),
        steps=nsteps,
    )


# -- initial data -------------------------------------------------------------

FIXTURES = ("constant", "sine", "bump", "step")


def _bump(xi):
    """C-infinity bump supported on |xi - 1/2| < 1/4, peak value 1."""
    r = (xi - 0.5) / 0.25
    out = np.zeros_like(xi)
    inside = np.abs(r) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def initial_field(
    cells: int,
    x0: float = 0.0,
    length: float = 1.0,
    fixture: str = "sine",
    u0: float = -1.0,
    v0: float = 1.0,
    eps: float = 0.1,
    wavenumber: int = 1,
    eps2: float = 0.0,
    wavenumber2: int = 2,
    boundary: str = "periodic",
) -> StateField:
    """Initial data (l, m) = inverse_riemann(u0 + eps phi + eps2 phi2, v0 + eps psi + eps2 psi2).

    Fixtures (xi = (x - x0)/length):
      constant  phi = psi = 0
      sine      phi = sin(2 pi k xi), psi = cos(2 pi k xi)
      bump      phi = psi = smooth compact bump centred at xi = 1/2
      step      phi = sign(sin(2 pi k xi)), psi = -phi (discontinuous)
    The secondary term uses phi2 = sin(2 pi k2 xi), psi2 = cos(2 pi k2 xi).
    """
    if fixture not in FIXTURES:
        raise ParameterError(f"unknown fixture {fixture!r}; choose from {FIXTURES}")
    dx = length / cells
    xi = (np.arange(cells) + 0.5) / cells
    w = 2.0 * np.pi * wavenumber * xi
    if fixture == "constant":
        phi = psi = np.zeros(cells)
    elif fixture == "sine":
        phi, psi = np.sin(w), np.cos(w)
    elif fixture == "bump":
        phi = psi = _bump(xi)
    else:
        phi = np.sign(np.sin(w))
        psi = -phi
    w2 = 2.0 * np.pi * wavenumber2 * xi
    u = u0 + eps * phi + eps2 * np.sin(w2)
    v = v0 + eps * psi + eps2 * np.cos(w2)
    ell, m = gc.inverse_riemann(u, v)
    return StateField(x0, dx, ell, m, boundary)


# -- convergence and entropy diagnostics --------------------------------------


def restrict(values: np.ndarray, factor: int) -> np.ndarray:
    """Average groups of ``factor`` neighbouring cells (last axis)."""
    values = np.asarray(values)
    n = values.shape[-1]
    if n % factor:
        raise ParameterError(f"cannot restrict {n} cells by {factor}")
    return values.reshape(values.shape[:-1] + (n // factor, factor)).mean(axis=-1)


def self_convergence_order(coarse: StateField, mid: StateField, fine: StateField) -> float:
    """Observed order log2(|U_N - R U_2N| / |U_2N - R U_4N|) in the L1 norm."""
    def diff(a, b):
        e = np.abs(a.ell - restrict(b.ell, 2)) + np.abs(a.m - restrict(b.m, 2))
        return float(np.sum(e) * a.dx)

    return math.log2(diff(coarse, mid) / diff(mid, fine))


@dataclass
class EntropyResidual:
    """Discrete d/dt eta + d/dx q + grad eta . P on the stored frames.

    The residual is multiplied by the run direction, so for both forward and
    backward runs dissipation shows up as negative values.
    """

    times: np.ndarray
    residual: np.ndarray
    dx: float

    @property
    def l1(self) -> float:
        per_frame = np.sum(np.abs(self.residual), axis=1) * self.dx
        return float(np.abs(np.trapezoid(per_frame, self.times)))

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.residual)))

    @property
    def max_positive(self) -> float:
        return float(max(0.0, np.max(self.residual)))

    @property
    def integrated(self) -> np.ndarray:
        """Per-frame integral over x (the entropy budget; flux terms cancel for periodic data)."""
        return np.sum(self.residual, axis=1) * self.dx

    @property
    def max_integrated_positive(self) -> float:
        return float(max(0.0, np.max(self.integrated)))

    @property
    def min_integrated(self) -> float:
        return float(np.min(self.integrated))

    def summary(self) -> dict:
        return {
            "l1": self.l1,
            "max_abs": self.max_abs,
            "max_positive": self.max_positive,
            "max_integrated_positive": self.max_integrated_positive,
            "min_integrated": self.min_integrated,
        }


def entropy_residual(traj: Trajectory) -> EntropyResidual:
    if traj.times.size < 3:
        raise ParameterError(f"entropy residual needs at least 3 stored frames, got {traj.times.size}")
    g = traj.metric
    t = traj.times
    ell, m = traj.ell, traj.m
    b = np.asarray(g.b(t))[:, None]
    eta = entropy(ell, m)
    q = entropy_flux(ell, m, b)
    qe = _extend(q, traj.boundary)
    dqdx = (qe[:, 2:] - qe[:, :-2]) / (2.0 * traj.dx)
    detadt = np.gradient(eta, t, axis=0, edge_order=2)
    grad = entropy_gradient(ell, m)
    P = gc.source(ell, m, np.asarray(g.dlnb(t))[:, None], np.asarray(g.dlnK(t))[:, None])
    res = detadt + dqdx + grad[0] * P[0] + grad[1] * P[1]
    return EntropyResidual(times=t, residual=traj.direction * res, dx=traj.dx)
