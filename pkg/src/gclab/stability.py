"""Relative-entropy stability checks for pairs of trajectories.

Given a run U on metric g and a smooth run Ubar on metric gbar, the relative
entropy E(t) = int eta(U|Ubar) dx is compared with the Gronwall bound

    bound(t) = e^{Phi(t)} E(0) + C_g int_0^t e^{Phi(t) - Phi(s)} psi(s) ds,
    Phi(t) = int_0^t phi,
    phi = C0 (1 + 1/bbar + |dlnb| + |dlnK|),
    psi = |dlnb - dlnbbar|^2 + |dlnK - dlnKbar|^2 + |1/bbar - 1/b|.

Time integrals run from the first stored time in the direction of the run.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp

from . import gauss_codazzi as gc
from .entropy import entropy_gradient, entropy_hessian, relative_entropy, relative_flux, relative_gradient
from .errors import DomainError, GridMismatchError, ParameterError, SmoothnessError
from .gauss_codazzi import InvariantBox, StateField
from .geometry import MetricProfile, helicoid_metric
from .solver import SolverConfig, Trajectory, entropy_residual, initial_field, solve

# -- scalar metric functionals ----------------------------------------------


def psi(g: MetricProfile, g_bar: MetricProfile, t):
    """Metric mismatch |dlnb - dlnbbar|^2 + |dlnK - dlnKbar|^2 + |1/bbar - 1/b|."""
    return (
        (g.dlnb(t) - g_bar.dlnb(t)) ** 2
        + (g.dlnK(t) - g_bar.dlnK(t)) ** 2
        + np.abs(1.0 / g_bar.b(t) - 1.0 / g.b(t))
    )


def psi_terms(g: MetricProfile, g_bar: MetricProfile, t) -> dict:
    return {
        "dlnb": (g.dlnb(t) - g_bar.dlnb(t)) ** 2,
        "dlnK": (g.dlnK(t) - g_bar.dlnK(t)) ** 2,
        "inv_b": np.abs(1.0 / g_bar.b(t) - 1.0 / g.b(t)),
    }


def phi(g_bar: MetricProfile, g: MetricProfile, t, C0: float):
    """Growth rate C0 (1 + 1/bbar + |dlnb| + |dlnK|); b and K belong to ``g``."""
    if not C0 > 0:
        raise ParameterError(f"C0 must be positive, got {C0}")
    return C0 * (1.0 + 1.0 / g_bar.b(t) + np.abs(g.dlnb(t)) + np.abs(g.dlnK(t)))


@dataclass
class GronwallIntegrals:
    times: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    Phi: np.ndarray
    J: np.ndarray  # int_0^t e^{-Phi(s)} psi(s) ds

    def bound(self, E0: float, C_g: float) -> np.ndarray:
        return np.exp(self.Phi) * (E0 + C_g * self.J)


def gronwall_integrals(g: MetricProfile, g_bar: MetricProfile, times, C0: float,
                       rtol: float = 1e-11, atol: float = 1e-14) -> GronwallIntegrals:
    """Phi and J on the given (monotone) time stamps, integrated as one ODE system."""
    times = np.asarray(times, dtype=float)
    if times.size < 1:
        raise ParameterError("need at least one time stamp")
    sigma = 1.0 if times[-1] >= times[0] else -1.0

    def rhs(t, y):
        return [sigma * phi(g_bar, g, t, C0), sigma * math.exp(-y[0]) * psi(g, g_bar, t)]

    if times.size == 1 or times[-1] == times[0]:
        Phi = np.zeros_like(times)
        J = np.zeros_like(times)
    else:
        sol = solve_ivp(rhs, (times[0], times[-1]), [0.0, 0.0], method="DOP853",
                        t_eval=times, rtol=rtol, atol=atol)
        if not sol.success:
            raise DomainError(f"time integration of phi/psi failed: {sol.message}")
        Phi, J = sol.y
        Phi[0] = J[0] = 0.0
    return GronwallIntegrals(
        times=times,
        phi=np.asarray(phi(g_bar, g, times, C0), dtype=float),
        psi=np.asarray(psi(g, g_bar, times), dtype=float),
        Phi=Phi,
        J=J,
    )


# -- spatial integrals --------------------------------------------------------


def _require_same_grid(a: StateField, b: StateField):
    if not a.same_grid(b):
        raise GridMismatchError(
            f"grids differ: ({a.x0}, {a.dx}, {a.count}, {a.boundary}) vs ({b.x0}, {b.dx}, {b.count}, {b.boundary})"
        )


def relative_entropy_integral(fld: StateField, fld_bar: StateField) -> float:
    """Midpoint rule for int eta(U|Ubar) dx over the cells."""
    _require_same_grid(fld, fld_bar)
    return float(np.sum(relative_entropy(fld.ell, fld.m, fld_bar.ell, fld_bar.m)) * fld.dx)


def l2_distance(fld: StateField, fld_bar: StateField) -> float:
    """int |l - lbar|^2 + |m - mbar|^2 dx (squared L2 distance)."""
    _require_same_grid(fld, fld_bar)
    return float(np.sum((fld.ell - fld_bar.ell) ** 2 + (fld.m - fld_bar.m) ** 2) * fld.dx)


def _pair_frames(traj: Trajectory, traj_bar: Trajectory, atol=1e-12):
    if not traj.same_grid(traj_bar):
        raise GridMismatchError("trajectories are stored on different grids")
    a = traj.outputs()
    b = traj_bar.outputs()
    if a.times.shape != b.times.shape or np.any(np.abs(a.times - b.times) > atol):
        raise GridMismatchError("trajectories have different output times")
    return a, b


# -- hypotheses ---------------------------------------------------------------


def _integrate(fn, t0, t1, kinks=()):
    lo, hi = min(t0, t1), max(t0, t1)
    pts = [k for k in kinks if lo < k < hi]
    val, err = quad(fn, lo, hi, points=pts or None, limit=200, epsabs=1e-13, epsrel=1e-11)
    return float(val)


@dataclass
class HypothesisReport:
    box: tuple
    box_ok: bool
    first_box_violation: float | None
    structure_ok: bool
    integrability: dict
    integrability_ok: bool
    mismatch: dict
    mismatch_ok: bool
    l1_norm_bar: list
    total_variation_bar: list
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.box_ok and self.structure_ok and self.integrability_ok and self.mismatch_ok

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def _first_violation(traj: Trajectory, box: InvariantBox):
    inside = box.contains(traj.ell, traj.m).all(axis=1)
    if inside.all():
        return None
    return float(traj.times[int(np.argmin(inside))])


def check_hypotheses(g: MetricProfile, g_bar: MetricProfile, traj: Trajectory, traj_bar: Trajectory,
                     T: float | None = None, box: InvariantBox | None = None) -> HypothesisReport:
    """Check the standing assumptions of the stability estimate on a pair of runs.

    Box containment of both runs, structural facts (b > 0, K < 0, l < 0), integrability
    of 1/bbar, dlnb, dlnK over the time span, and finiteness of the metric mismatch
    integrals. L1 norm and total variation of Ubar are reported per output frame.
    """
    a, b = _pair_frames(traj, traj_bar)
    box = box or traj.config.box
    t0 = float(a.times[0])
    t1 = float(a.times[-1]) if T is None else t0 + traj.direction * abs(T)
    if not (g.contains(t0, t1) and g_bar.contains(t0, t1)):
        raise DomainError(f"[{t0}, {t1}] leaves a metric domain")
    v1 = _first_violation(traj, box)
    v2 = _first_violation(traj_bar, box)
    hits = [v for v in (v1, v2) if v is not None]
    first = None if not hits else (min(hits) if traj.direction > 0 else max(hits))

    ts = np.linspace(min(t0, t1), max(t0, t1), 401)
    structure_ok = bool(
        np.all(g.b(ts) > 0) and np.all(g_bar.b(ts) > 0) and np.all(g.K(ts) < 0) and np.all(g_bar.K(ts) < 0)
        and np.all(traj.ell < 0) and np.all(traj_bar.ell < 0)
    )
    kinks = tuple(g.kinks) + tuple(g_bar.kinks)
    integ = {
        "inv_b_bar": _integrate(lambda s: 1.0 / g_bar.b(s), t0, t1, kinks),
        "abs_dlnb": _integrate(lambda s: abs(g.dlnb(s)), t0, t1, kinks),
        "abs_dlnK": _integrate(lambda s: abs(g.dlnK(s)), t0, t1, kinks),
        "abs_dlnb_bar": _integrate(lambda s: abs(g_bar.dlnb(s)), t0, t1, kinks),
        "abs_dlnK_bar": _integrate(lambda s: abs(g_bar.dlnK(s)), t0, t1, kinks),
    }
    mism = {
        "inv_b_diff": _integrate(lambda s: abs(1.0 / g_bar.b(s) - 1.0 / g.b(s)), t0, t1, kinks),
        "dlnb_diff_sq": _integrate(lambda s: (g.dlnb(s) - g_bar.dlnb(s)) ** 2, t0, t1, kinks),
        "dlnK_diff_sq": _integrate(lambda s: (g.dlnK(s) - g_bar.dlnK(s)) ** 2, t0, t1, kinks),
    }
    l1 = [float(np.sum(np.abs(b.ell[k]) + np.abs(b.m[k])) * b.dx) for k in range(b.times.size)]
    if b.boundary == "periodic":
        tv = [float(np.sum(np.abs(np.roll(b.ell[k], -1) - b.ell[k]) + np.abs(np.roll(b.m[k], -1) - b.m[k])))
              for k in range(b.times.size)]
    else:
        tv = [float(np.sum(np.abs(np.diff(b.ell[k])) + np.abs(np.diff(b.m[k])))) for k in range(b.times.size)]
    notes = []
    if b.boundary == "periodic":
        notes.append("periodic data: L1 and total variation are taken over one period, not the whole line")
    return HypothesisReport(
        box=box.as_tuple(),
        box_ok=first is None,
        first_box_violation=first,
        structure_ok=structure_ok,
        integrability=integ,
        integrability_ok=all(math.isfinite(v) for v in integ.values()),
        mismatch=mism,
        mismatch_ok=all(math.isfinite(v) for v in mism.values()),
        l1_norm_bar=l1,
        total_variation_bar=tv,
        notes=notes,
    )


# -- constants ------------------------------------------------------------------


@dataclass
class StabilityConstants:
    """Constants entering phi and the bound.

    c0, c1: sandwich constants of eta(U|Ubar) against |U - Ubar|^2.
    C0: prefactor of phi. C_g: prefactor of the psi integral.
    ``details`` records the ingredients they were assembled from.
    """

    c0: float
    c1: float
    C0: float
    C_g: float
    details: dict = field(default_factory=dict)

    def with_overrides(self, C0: float | None = None, C_g: float | None = None) -> "StabilityConstants":
        d = dict(self.details)
        if C0 is not None:
            d["C0_measured"] = self.C0
        if C_g is not None:
            d["C_g_measured"] = self.C_g
        return StabilityConstants(
            self.c0, self.c1, self.C0 if C0 is None else float(C0), self.C_g if C_g is None else float(C_g), d
        )


def _range_box(ell, m, pad=1e-9):
    return (float(ell.min()) - pad, min(float(ell.max()) + pad, -1e-12),
            max(float(m.min()) - pad, -1 + 1e-12), min(float(m.max()) + pad, 1 - 1e-12))


def _sample_rect(rect, size, rng):
    lo_l, hi_l, lo_m, hi_m = rect
    return rng.uniform(lo_l, hi_l, size), rng.uniform(lo_m, hi_m, size)


def _rect_grid(rect, n=48):
    lo_l, hi_l, lo_m, hi_m = rect
    L, M = np.meshgrid(np.linspace(lo_l, hi_l, n), np.linspace(lo_m, hi_m, n))
    return L.ravel(), M.ravel()


def _spectral_norm_2x2(A):
    """Largest singular value of a (2, 2, ...) stack."""
    a, b, c, d = A[0, 0], A[0, 1], A[1, 0], A[1, 1]
    s = a * a + b * b + c * c + d * d
    det = a * d - b * c
    return np.sqrt(0.5 * (s + np.sqrt(np.maximum(s * s - 4 * det * det, 0.0))))


def _source_parts(ell, m):
    """P = A(U) dlnb + B(U) dlnK with A = (l - n, 2m), B = (l/2, m/2)."""
    n = (m * m - 1.0) / ell
    return np.stack([ell - n, 2.0 * m]), np.stack([0.5 * ell, 0.5 * m])


def measure_constants(traj: Trajectory, traj_bar: Trajectory, samples: int = 20_000, seed: int = 0) -> StabilityConstants:
    """Assemble c0, c1, C0, C_g for a pair of runs.

    The ingredients are sampled over the bounding rectangles of the values the
    two runs actually take (and over the stored cell pairs themselves):

      c0, c1   min/max of eta(U|Ubar)/|U - Ubar|^2
      C_grad   max |grad eta(U|Ubar)| / eta(U|Ubar)
      G        max |Hess eta| (Lipschitz constant of grad eta)
      Q        max |relative flux at b = 1| / eta(U|Ubar)
      Lip_A    Lipschitz constant of A(U) = (l - n, 2m); B(U) = (l, m)/2 has 1/2
      A, B     sup norms of A, B over the smooth run, F sup norm of (m, (m^2-1)/l)
      Hx       |d/dx Ubar| |Hess eta(Ubar)|, sup over cells and max over frames of its integral

    The relative-entropy balance then gives
      C0  = max(1/c0, Hx_inf Q, G max(Lip_A, 1/2)/c0 + C_grad max(A, B))
      C_g = max(F Hx_L1, G^2 max(A, B)^2).
    """
    a, b = _pair_frames(traj, traj_bar)
    rng = np.random.default_rng(seed)
    rect = _range_box(a.ell, a.m)
    rect_bar = _range_box(b.ell, b.m)
    hull = (min(rect[0], rect_bar[0]), max(rect[1], rect_bar[1]), min(rect[2], rect_bar[2]), max(rect[3], rect_bar[3]))

    l, m = _sample_rect(rect, samples, rng)
    lb, mb = _sample_rect(rect_bar, samples, rng)
    # add the stored cell pairs so the bounds hold on every frame
    l = np.concatenate([l, a.ell.ravel()])
    m = np.concatenate([m, a.m.ravel()])
    lb = np.concatenate([lb, b.ell.ravel()])
    mb = np.concatenate([mb, b.m.ravel()])
    d2 = (l - lb) ** 2 + (m - mb) ** 2
    keep = d2 > 1e-12
    if keep.sum() < 10:
        # (nearly) identical runs: fall back to the rectangle samples against themselves
        l2, m2 = _sample_rect(hull, samples, rng)
        lb2, mb2 = _sample_rect(hull, samples, rng)
        l, m, lb, mb = l2, m2, lb2, mb2
        d2 = (l - lb) ** 2 + (m - mb) ** 2
        keep = d2 > 1e-12
    l, m, lb, mb, d2 = l[keep], m[keep], lb[keep], mb[keep], d2[keep]
    rel = relative_entropy(l, m, lb, mb)
    ratio = rel / d2
    c0, c1 = float(ratio.min()), float(ratio.max())
    rg = relative_gradient(l, m, lb, mb)
    C_grad = float(np.max(np.hypot(rg[0], rg[1]) / rel))
    rf = relative_flux(l, m, 1.0, lb, mb, 1.0)
    Q = float(np.max(np.hypot(rf[0], rf[1]) / rel))

    hl, hm = _rect_grid(hull)
    G = float(np.max(_spectral_norm_2x2(entropy_hessian(hl, hm))))
    one = np.ones_like(hl)
    JA = np.array([[1.0 + (hm * hm - 1.0) / hl ** 2, -2.0 * hm / hl], [0.0 * one, 2.0 * one]])
    lip_A = float(np.max(_spectral_norm_2x2(JA)))

    A_bar, B_bar = _source_parts(b.ell, b.m)
    A_sup = float(np.max(np.hypot(A_bar[0], A_bar[1])))
    B_sup = float(np.max(np.hypot(B_bar[0], B_bar[1])))
    ul, um = _rect_grid(rect)
    F_sup = float(np.max(np.hypot(um, (um * um - 1.0) / ul)))

    if b.boundary == "periodic":
        dl = (np.roll(b.ell, -1, axis=1) - np.roll(b.ell, 1, axis=1)) / (2 * b.dx)
        dm = (np.roll(b.m, -1, axis=1) - np.roll(b.m, 1, axis=1)) / (2 * b.dx)
    else:
        dl = np.gradient(b.ell, b.dx, axis=1)
        dm = np.gradient(b.m, b.dx, axis=1)
    hx = np.hypot(dl, dm) * _spectral_norm_2x2(entropy_hessian(b.ell, b.m))
    Hx_inf = float(hx.max())
    Hx_L1 = float(np.max(np.sum(hx, axis=1) * b.dx))

    C0 = max(1.0 / c0, Hx_inf * Q, G * max(lip_A, 0.5) / c0 + C_grad * max(A_sup, B_sup))
    C_g = max(F_sup * Hx_L1, G * G * max(A_sup, B_sup) ** 2)
    details = dict(C_grad=C_grad, Q=Q, G=G, Lip_A=lip_A, A_sup=A_sup, B_sup=B_sup, F_sup=F_sup,
                   Hx_inf=Hx_inf, Hx_L1=Hx_L1, samples=int(keep.sum()), range_box=list(rect),
                   range_box_bar=list(rect_bar))
    return StabilityConstants(c0=c0, c1=c1, C0=float(C0), C_g=float(C_g), details=details)


# -- verification ---------------------------------------------------------------

DEFAULT_SMOOTHNESS_THRESHOLD = 1.0


@dataclass
class StabilityReport:
    times: np.ndarray
    E: np.ndarray
    D: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    Phi: np.ndarray
    bound: np.ndarray
    constants: StabilityConstants
    hypotheses: HypothesisReport | None
    bound_ok: bool
    sandwich_ok: bool
    smoothness_residual: float
    rtol: float
    atol: float
    notes: list = field(default_factory=list)

    @property
    def hypotheses_ok(self) -> bool:
        return self.hypotheses is None or self.hypotheses.passed

    @property
    def verdict(self) -> bool:
        return self.bound_ok

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "bound_satisfied": self.bound_ok,
            "hypotheses_satisfied": self.hypotheses_ok,
            "sandwich_satisfied": self.sandwich_ok,
            "constants": {"c0": self.constants.c0, "c1": self.constants.c1, "C0": self.constants.C0,
                          "C_g": self.constants.C_g, "details": self.constants.details},
            "hypotheses": None if self.hypotheses is None else self.hypotheses.to_dict(),
            "smoothness_residual": self.smoothness_residual,
            "tolerance": {"rtol": self.rtol, "atol": self.atol},
            "E0": float(self.E[0]),
            "E_final": float(self.E[-1]),
            "bound_final": float(self.bound[-1]),
            "max_ratio": float(np.max(np.where(self.bound > 0, self.E / np.where(self.bound > 0, self.bound, 1), 0.0))),
            "frames": int(self.times.size),
            "notes": self.notes,
        }

    def rows(self):
        for k in range(self.times.size):
            yield (self.times[k], self.E[k], self.D[k], self.phi[k], self.psi[k], self.Phi[k], self.bound[k])

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(_jsonable(self.to_dict()), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "E", "D", "phi", "psi", "Phi", "bound"])
            for row in self.rows():
                w.writerow([format(float(v), ".17g") for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def certify_smooth(traj_bar: Trajectory, threshold: float = DEFAULT_SMOOTHNESS_THRESHOLD) -> float:
    """Max |entropy residual| of the reference run; raises SmoothnessError above ``threshold``."""
    r = entropy_residual(traj_bar).max_abs
    if not r <= threshold:
        raise SmoothnessError(
            f"reference run is not certified smooth: max |entropy residual| = {r:.6g} exceeds {threshold:.6g}"
        )
    return r


def verify_stability(traj: Trajectory, traj_bar: Trajectory, g: MetricProfile, g_bar: MetricProfile,
                     constants: StabilityConstants | None = None, rtol: float = 1e-6, atol: float = 1e-13,
                     smoothness_threshold: float = DEFAULT_SMOOTHNESS_THRESHOLD,
                     hypotheses: bool = True) -> StabilityReport:
    """Compare E(t) with the Gronwall bound at the common output times.

    ``traj_bar`` must be the smooth run; it is certified by its entropy residual.
    The verdict is E(t) <= bound(t) (1 + rtol) + atol at every output time.
    """
    smooth = certify_smooth(traj_bar, smoothness_threshold)
    a, b = _pair_frames(traj, traj_bar)
    if constants is None:
        constants = measure_constants(traj, traj_bar)
    E = np.array([relative_entropy_integral(a.frame(k), b.frame(k)) for k in range(a.times.size)])
    D = np.array([l2_distance(a.frame(k), b.frame(k)) for k in range(a.times.size)])
    gi = gronwall_integrals(g, g_bar, a.times, constants.C0)
    bound = gi.bound(float(E[0]), constants.C_g)
    bound_ok = bool(np.all(E <= bound * (1.0 + rtol) + atol))
    slack = 1e-12 * max(1.0, float(D.max()))
    sandwich_ok = bool(np.all(constants.c0 * D <= E + slack) and np.all(E <= constants.c1 * D + slack))
    hyp = check_hypotheses(g, g_bar, traj, traj_bar) if hypotheses else None
    notes = ["spatial integrals are taken over the computational cell (periodic or constant-extension data)"]
    if hyp is not None:
        notes.extend(hyp.notes)
    return StabilityReport(
        times=a.times, E=E, D=D, phi=gi.phi, psi=gi.psi, Phi=gi.Phi, bound=bound, constants=constants,
        hypotheses=hyp, bound_ok=bound_ok, sandwich_ok=sandwich_ok, smoothness_residual=smooth,
        rtol=rtol, atol=atol, notes=notes,
    )


# -- helicoid parameter sweep -------------------------------------------------


def parameter_distance(c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    return np.abs(c * c - 1.0) / (c * c)


@dataclass
class SweepReport:
    T: float
    c: list
    distance: list  # |c^2 - 1|/c^2
    D: list  # final l2 distance to the c = 1 run (None for failed runs)
    failures: dict
    monotone: bool
    slope: float | None
    intercept: float | None
    residual: float | None

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["c", "distance", "D"])
            for c, x, d in zip(self.c, self.distance, self.D):
                w.writerow([format(c, ".17g"), format(x, ".17g"), "nan" if d is None else format(d, ".17g")])


def helicoid_sweep(cs, T: float = 1.0, cells: int = 200, cfg: SolverConfig | None = None,
                   data: dict | None = None) -> SweepReport:
    """Final D(T) between helicoid runs with parameter c and the c = 1 run, all from shared data.

    The constant state (-1, 0) is stationary for every helicoid, so the shared data
    must be perturbed (see ``initial_field``) for the metrics to separate the runs.
    """
    cs = [float(c) for c in cs]
    if not cs:
        raise ParameterError("empty c list")
    cfg = cfg or SolverConfig()
    data = dict(data or {"fixture": "sine", "eps": 0.1})
    data.setdefault("cells", cells)
    init = initial_field(**data)
    t_span = (0.0, cfg.direction * T)
    ref = solve(init, helicoid_metric(1.0), t_span, cfg).final
    Ds, failures = [], {}
    for c in cs:
        try:
            run = ref if c == 1.0 else solve(init, helicoid_metric(c), t_span, cfg).final
            Ds.append(l2_distance(run, ref))
        except Exception as exc:  # reported, not raised: the sweep returns a partial report
            Ds.append(None)
            failures[str(c)] = f"{type(exc).__name__}: {exc}"
    x = parameter_distance(cs)
    ok = [(xi, d) for xi, d in zip(x, Ds) if d is not None]
    order = sorted(ok)
    monotone = all(d2 > d1 for (_, d1), (_, d2) in zip(order, order[1:]))
    fit = [(xi, d) for xi, d in ok if xi > 0 and d > 0]
    slope = intercept = resid = None
    if len(fit) >= 2:
        lx = np.log([p[0] for p in fit])
        ld = np.log([p[1] for p in fit])
        coef, res, *_ = np.polyfit(lx, ld, 1, full=True)
        slope, intercept = float(coef[0]), float(coef[1])
        resid = float(np.sqrt(res[0] / len(fit))) if res.size else 0.0
    return SweepReport(T=T, c=cs, distance=[float(v) for v in x], D=Ds, failures=failures,
                       monotone=monotone, slope=slope, intercept=intercept, residual=resid)


# -- asymptotics for the slow-decay family --------------------------------------


def hong_psi_asymptotic(t, delta: float) -> dict:
    """Large-t approximation of psi for a slow-decay metric against the unit helicoid.

    Uses dlnb ~ 1/t, dln|K| ~ -(2 + delta)/t and b ~ 1 + t^delta as the leading
    behaviour; the O(t^(-1-delta)) correction of dlnb is dropped.
    """
    t = np.asarray(t, dtype=float)
    terms = {
        "dlnb": (t / (1 + t * t) - 1.0 / t) ** 2,
        "dlnK": (4 * t / (1 + t * t) - (2 + delta) / t) ** 2,
        "inv_b": np.abs(1.0 / (1 + t ** delta) - 1.0 / np.sqrt(1 + t * t)),
    }
    terms["total"] = terms["dlnb"] + terms["dlnK"] + terms["inv_b"]
    return terms
