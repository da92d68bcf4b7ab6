"""Surface reconstruction from the first and second fundamental forms.

For g = dt^2 + b(t)^2 dx^2 and h = (L, M, N) = (h_xx, h_xt, h_tt), the frame
F = (r1, r2, n) with r1 = y_x, r2 = y_t obeys the Gauss-Weingarten system

    F_x = A F,  A = [[0, -b b', L], [b'/b, 0, M], [-L/b^2, -M, 0]],
    F_t = B F,  B = [[b'/b, 0, M], [0, 0, N], [-M/b^2, -N, 0]],

(rows of F are the vectors), together with y_x = r1, y_t = r2. The system is
solvable iff A_t - B_x + [A, B] = 0, which is the Gauss-Codazzi system.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import CompatibilityError, DegenerateStateError, GridMismatchError, ParameterError
from .geometry import MetricProfile


@dataclass
class Christoffel:
    """Nonzero symbols of dt^2 + b^2 dx^2; ``full[k, i, j]`` uses index 0 = x, 1 = t."""

    x_xt: np.ndarray
    t_xx: np.ndarray

    @property
    def full(self) -> np.ndarray:
        x_xt = np.asarray(self.x_xt, dtype=float)
        G = np.zeros((2, 2, 2) + x_xt.shape)
        G[0, 0, 1] = G[0, 1, 0] = x_xt
        G[1, 0, 0] = self.t_xx
        return G


def christoffel(g: MetricProfile, t) -> Christoffel:
    b, db = g.b(t), g.db(t)
    return Christoffel(x_xt=db / b, t_xx=-b * db)


# -- frame system -------------------------------------------------------------


def _frame_matrices(b, db, L, M, N):
    """A and B with shape (..., 3, 3) for broadcast arrays of coefficients."""
    b, db, L, M, N = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (b, db, L, M, N)))
    z = np.zeros_like(b)
    A = np.stack([
        np.stack([z, -b * db, L], -1),
        np.stack([db / b, z, M], -1),
        np.stack([-L / b ** 2, -M, z], -1),
    ], -2)
    B = np.stack([
        np.stack([db / b, z, M], -1),
        np.stack([z, z, N], -1),
        np.stack([-M / b ** 2, -N, z], -1),
    ], -2)
    return A, B


@dataclass
class FormFields:
    """Second fundamental form sampled on the grid; arrays have shape (len(x), len(t))."""

    x: np.ndarray
    t: np.ndarray
    L: np.ndarray
    M: np.ndarray
    N: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.t = np.asarray(self.t, dtype=float)
        shape = (self.x.size, self.t.size)
        for name in ("L", "M", "N"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), shape).copy()
            setattr(self, name, arr)
        if self.x.size < 3 or self.t.size < 3:
            raise ParameterError("reconstruction needs at least 3 x 3 grid points")
        if np.any(np.diff(self.x) <= 0) or np.any(np.diff(self.t) <= 0):
            raise ParameterError("grid coordinates must be strictly increasing")

    def scaled(self, factor: float) -> "FormFields":
        return FormFields(self.x, self.t, factor * self.L, factor * self.M, factor * self.N)


def unit_helicoid_forms(x, t) -> FormFields:
    """Exact (L, M, N) = (0, -1/sqrt(1 + t^2), 0) of y = (t sin x, t cos x, x)."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    M = np.broadcast_to(-1.0 / np.sqrt(1.0 + t * t), (x.size, t.size))
    return FormFields(x, t, 0.0, M, 0.0)


def unit_helicoid_surface(x, t) -> np.ndarray:
    X, T = np.meshgrid(np.asarray(x, float), np.asarray(t, float), indexing="ij")
    return np.stack([T * np.sin(X), T * np.cos(X), X], -1)


def compatibility_residual(g: MetricProfile, h: FormFields) -> np.ndarray:
    """Frobenius norm of A_t - B_x + [A, B] on the grid.

    Metric entries are differentiated exactly (b'' = -K b); the form fields by
    second-order differences.
    """
    t = h.t
    b, db, K = g.b(t), g.db(t), g.K(t)
    d2b = -K * b
    A, B = _frame_matrices(b[None, :], db[None, :], h.L, h.M, h.N)
    Lt = np.gradient(h.L, t, axis=1, edge_order=2)
    Mt = np.gradient(h.M, t, axis=1, edge_order=2)
    # d/dt of A with b-dependent entries done by hand
    b2, db2, d2b2 = b[None, :], db[None, :], d2b[None, :]
    z = np.zeros_like(h.L)
    A_t = np.stack([
        np.stack([z, z - (db2 * db2 + b2 * d2b2), Lt], -1),
        np.stack([z + d2b2 / b2 - (db2 / b2) ** 2, z, Mt], -1),
        np.stack([-Lt / b2 ** 2 + 2 * h.L * db2 / b2 ** 3, -Mt, z], -1),
    ], -2)
    B_x = np.gradient(B, h.x, axis=0, edge_order=2)
    C = A_t - B_x + A @ B - B @ A
    return np.sqrt(np.sum(C * C, axis=(-2, -1)))


# -- anchor ---------------------------------------------------------------------


@dataclass
class Anchor:
    y: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    n: np.ndarray

    def frame(self) -> np.ndarray:
        return np.array([self.r1, self.r2, self.n], dtype=float)

    def moved(self, rotation, translation=(0.0, 0.0, 0.0)) -> "Anchor":
        R = np.asarray(rotation, dtype=float)
        return Anchor(R @ self.y + np.asarray(translation, float), R @ self.r1, R @ self.r2, R @ self.n)


def default_anchor(g: MetricProfile, t0: float) -> Anchor:
    r1 = g.b(t0) * np.array([1.0, 0.0, 0.0])
    r2 = np.array([0.0, 0.0, 1.0])
    c = np.cross(r1, r2)
    return Anchor(np.zeros(3), r1, r2, c / np.linalg.norm(c))


def check_anchor(anchor: Anchor, b0: float, tol: float = 1e-10):
    r1, r2, n = (np.asarray(v, float) for v in (anchor.r1, anchor.r2, anchor.n))
    c = np.cross(r1, r2)
    nc = np.linalg.norm(c)
    errs = {
        "|r2| - 1": abs(np.linalg.norm(r2) - 1.0),
        "|r1| - b": abs(np.linalg.norm(r1) - b0),
        "r1.r2": abs(r1 @ r2),
        "n - r1 x r2/|r1 x r2|": np.inf if nc == 0 else float(np.max(np.abs(n - c / nc))),
    }
    bad = {k: v for k, v in errs.items() if not v <= tol * max(1.0, b0)}
    if bad:
        raise ParameterError(f"anchor frame is not compatible with the metric: {bad}")


# -- integration ----------------------------------------------------------------


def _rk4_line(coord, state, rhs, project=None):
    """Classical RK4 along ``coord``; ``state`` is (F, y) batched over leading axes.

    ``project(s, F)``, if given, is applied to the frame after every step.

    Returns arrays with the integration axis first.
    """
    F, y = state
    Fs, ys = [F], [y]
    for k in range(coord.size - 1):
        s, h = coord[k], coord[k + 1] - coord[k]
        k1F, k1y = rhs(s, F, y)
        k2F, k2y = rhs(s + h / 2, F + h / 2 * k1F, y + h / 2 * k1y)
        k3F, k3y = rhs(s + h / 2, F + h / 2 * k2F, y + h / 2 * k2y)
        k4F, k4y = rhs(s + h, F + h * k3F, y + h * k3y)
        F = F + h / 6 * (k1F + 2 * k2F + 2 * k3F + k4F)
        y = y + h / 6 * (k1y + 2 * k2y + 2 * k3y + k4y)
        if project is not None:
            F = project(coord[k + 1], F)
        Fs.append(F)
        ys.append(y)
    return np.array(Fs), np.array(ys)


def _gram_schmidt(F, b):
    r2 = F[..., 1, :] / np.linalg.norm(F[..., 1, :], axis=-1, keepdims=True)
    r1 = F[..., 0, :] - np.sum(F[..., 0, :] * r2, -1, keepdims=True) * r2
    r1 = r1 / np.linalg.norm(r1, axis=-1, keepdims=True) * np.asarray(b)[..., None]
    n = np.cross(r1, r2)
    n = n / np.linalg.norm(n, axis=-1, keepdims=True)
    return np.stack([r1, r2, n], -2)


@dataclass
class SurfaceMesh:
    """Vertices and frames on the (x, t) grid; arrays are indexed [i_x, j_t, ...]."""

    x: np.ndarray
    t: np.ndarray
    y: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    n: np.ndarray
    metric_residual: np.ndarray
    max_commutator: float = 0.0
    order: str = "tx"

    @property
    def shape(self):
        return self.x.size, self.t.size

    @property
    def vertices(self) -> np.ndarray:
        return self.y.reshape(-1, 3)

    @property
    def max_metric_residual(self) -> float:
        return float(self.metric_residual.max())


def _metric_residual(F, b):
    r1, r2, n = F[..., 0, :], F[..., 1, :], F[..., 2, :]
    b = np.asarray(b)
    res = np.stack([
        np.abs(np.sum(r1 * r1, -1) - b * b),
        np.abs(np.sum(r2 * r2, -1) - 1.0),
        np.abs(np.sum(r1 * r2, -1)),
        np.abs(np.sum(n * n, -1) - 1.0),
        np.abs(np.sum(n * r1, -1)),
        np.abs(np.sum(n * r2, -1)),
    ])
    return res.max(axis=0)


def reconstruct_surface(g: MetricProfile, h: FormFields, anchor: Anchor | None = None, order: str = "tx",
                        check: bool = True, threshold: float | None = None,
                        reorthogonalize: bool = False) -> SurfaceMesh:
    """Integrate the frame system from the anchor at (x[0], t[0]).

    ``order="tx"`` integrates the spine x = x[0] in t and then every t-row in x;
    ``order="xt"`` does the reverse. Both use RK4 with the form coefficients
    interpolated by cubic splines between grid lines.

    With ``check`` the fields must pass the compatibility test: the largest
    |A_t - B_x + [A, B]| must not exceed ``threshold`` (default 1e-3 times the grid diameter).
    """
    if order not in ("tx", "xt"):
        raise ParameterError(f"order must be 'tx' or 'xt', got {order!r}")
    x, t = h.x, h.t
    if not g.contains(t[0], t[-1]):
        raise ParameterError("t grid leaves the metric domain")
    comm = float(compatibility_residual(g, h).max())
    if check:
        thr = 1e-3 * float(np.hypot(x[-1] - x[0], t[-1] - t[0])) if threshold is None else threshold
        if comm > thr:
            raise CompatibilityError(
                f"fundamental forms are incompatible: max commutator {comm:.6g} exceeds {thr:.6g}", comm
            )
    anchor = anchor or default_anchor(g, t[0])
    check_anchor(anchor, float(g.b(t[0])))

    F0 = anchor.frame()
    y0 = np.asarray(anchor.y, dtype=float)

    def spline(values, coord, axis):
        return CubicSpline(coord, values, axis=axis)

    def t_rhs(Ls, Ms, Ns):
        def rhs(s, F, y):
            _, B = _frame_matrices(g.b(s), g.db(s), Ls(s), Ms(s), Ns(s))
            return B @ F, F[..., 1, :]
        return rhs

    def x_rhs(Ls, Ms, Ns, b, db):
        def rhs(s, F, y):
            A, _ = _frame_matrices(b, db, Ls(s), Ms(s), Ns(s))
            return A @ F, F[..., 0, :]
        return rhs

    b_t, db_t = g.b(t), g.db(t)

    def along_t(s, F):
        return _gram_schmidt(F, g.b(s))

    def along_x(b):
        return lambda s, F: _gram_schmidt(F, b)

    gs = reorthogonalize

    if order == "tx":
        sp = [spline(v[0], t, 0) for v in (h.L, h.M, h.N)]
        Fs, ys = _rk4_line(t, (F0, y0), t_rhs(*sp), along_t if gs else None)  # (nt, 3, 3), (nt, 3)
        rows = [spline(v, x, 0) for v in (h.L, h.M, h.N)]  # each evaluates to (nt,)
        Fx, yx = _rk4_line(x, (Fs, ys), x_rhs(*rows, b_t, db_t), along_x(b_t) if gs else None)
        F, y = Fx, yx  # (nx, nt, ...)
    else:
        sp = [spline(v[:, 0], x, 0) for v in (h.L, h.M, h.N)]
        Fs, ys = _rk4_line(x, (F0, y0), x_rhs(*sp, b_t[0], db_t[0]), along_x(b_t[0]) if gs else None)  # (nx, ...)
        cols = [spline(v, t, 1) for v in (h.L, h.M, h.N)]  # each evaluates to (nx,)
        Ft, yt = _rk4_line(t, (Fs, ys), t_rhs(*cols), along_t if gs else None)  # (nt, nx, ...)
        F, y = np.swapaxes(Ft, 0, 1), np.swapaxes(yt, 0, 1)
    res = _metric_residual(F, b_t[None, :])
    return SurfaceMesh(x=x, t=t, y=y, r1=F[..., 0, :], r2=F[..., 1, :], n=F[..., 2, :],
                       metric_residual=res, max_commutator=comm, order=order)


# -- residuals and alignment ---------------------------------------------------


@dataclass
class FormResiduals:
    metric_max: float
    metric_mean: float
    second_form_max: float
    second_form_mean: float
    per_component: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "metric_max": self.metric_max,
            "metric_mean": self.metric_mean,
            "second_form_max": self.second_form_max,
            "second_form_mean": self.second_form_mean,
            "per_component": self.per_component,
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def form_residuals(mesh: SurfaceMesh, g: MetricProfile, h: FormFields) -> FormResiduals:
    """Recompute g_ij and h_ij from the vertex positions by central differences."""
    x, t, y = mesh.x, mesh.t, mesh.y
    if x.size < 3 or t.size < 3:
        raise ParameterError("form residuals need at least 3 x 3 vertices")
    if y.shape[:2] != (h.x.size, h.t.size):
        raise GridMismatchError("mesh and form fields live on different grids")
    yx = np.gradient(y, x, axis=0, edge_order=2)
    yt = np.gradient(y, t, axis=1, edge_order=2)
    yxx = np.gradient(yx, x, axis=0, edge_order=2)
    yxt = np.gradient(yx, t, axis=1, edge_order=2)
    ytt = np.gradient(yt, t, axis=1, edge_order=2)
    c = np.cross(yx, yt)
    nc = np.linalg.norm(c, axis=-1)
    if np.any(nc < 1e-12):
        i, j = np.unravel_index(int(np.argmin(nc)), nc.shape)
        raise DegenerateStateError(f"degenerate mesh cell at (x={x[i]:.6g}, t={t[j]:.6g}): |y_x x y_t| < 1e-12")
    nrm = c / nc[..., None]
    b = g.b(t)[None, :]
    comp = {
        "g_xx": np.abs(np.sum(yx * yx, -1) - b * b),
        "g_xt": np.abs(np.sum(yx * yt, -1)),
        "g_tt": np.abs(np.sum(yt * yt, -1) - 1.0),
        "L": np.abs(np.sum(yxx * nrm, -1) - h.L),
        "M": np.abs(np.sum(yxt * nrm, -1) - h.M),
        "N": np.abs(np.sum(ytt * nrm, -1) - h.N),
    }
    gm = np.max([comp[k] for k in ("g_xx", "g_xt", "g_tt")], axis=0)
    hm = np.max([comp[k] for k in ("L", "M", "N")], axis=0)
    return FormResiduals(
        metric_max=float(gm.max()), metric_mean=float(gm.mean()),
        second_form_max=float(hm.max()), second_form_mean=float(hm.mean()),
        per_component={k: float(v.max()) for k, v in comp.items()},
    )


@dataclass
class Alignment:
    rotation: np.ndarray
    translation: np.ndarray
    max_distance: float
    rms_distance: float
    reflection_preferred: bool


def _points(obj) -> np.ndarray:
    if isinstance(obj, SurfaceMesh):
        return obj.vertices
    return np.asarray(obj, dtype=float).reshape(-1, 3)


def rigid_align(a, b) -> Alignment:
    """Proper rigid motion (R, T) minimizing sum |R a + T - b|^2 (Kabsch).

    ``reflection_preferred`` flags point sets whose best unconstrained fit is a
    reflection; the returned rotation always has determinant +1.
    """
    P, Q = _points(a), _points(b)
    if P.shape != Q.shape:
        raise GridMismatchError(f"point sets differ in shape: {P.shape} vs {Q.shape}")
    pc, qc = P.mean(0), Q.mean(0)
    H = (P - pc).T @ (Q - qc)
    U, S, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    d = 1.0 if d == 0 else d
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    T = qc - R @ pc
    dist = np.linalg.norm(P @ R.T + T - Q, axis=1)
    return Alignment(R, T, float(dist.max()), float(np.sqrt(np.mean(dist ** 2))), bool(d < 0))


# -- mesh I/O ---------------------------------------------------------------------


def export_mesh(mesh, path):
    """Wavefront OBJ with quad faces; vertex k = i * len(t) + j for grid point (x_i, t_j)."""
    y = mesh.y if isinstance(mesh, SurfaceMesh) else np.asarray(mesh, dtype=float)
    nx, nt = y.shape[:2]
    lines = [f"# grid {nx} {nt}"]
    lines += ["v " + " ".join(format(float(c), ".17g") for c in p) for p in y.reshape(-1, 3)]
    for i in range(nx - 1):
        for j in range(nt - 1):
            a = i * nt + j + 1
            lines.append(f"f {a} {a + nt} {a + nt + 1} {a + 1}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path) -> np.ndarray:
    """Vertices of an exported mesh as an (nx, nt, 3) array (flat (k, 3) if the grid line is absent)."""
    verts, dims = [], None
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "#" and len(parts) == 4 and parts[1] == "grid":
                dims = (int(parts[2]), int(parts[3]))
            elif parts[0] == "v":
                verts.append([float(v) for v in parts[1:4]])
    arr = np.array(verts, dtype=float)
    return arr.reshape(dims + (3,)) if dims else arr


# -- convenience --------------------------------------------------------------------


def forms_from_trajectory(traj, frames=None) -> FormFields:
    """Unscaled (L, M, N) of a solver run on (cell centres) x (stored times)."""
    from . import gauss_codazzi as gc

    idx = traj.output_indices() if frames is None else np.asarray(frames)
    times = traj.times[idx]
    order = np.argsort(times)
    times = times[order]
    ell = traj.ell[idx][order].T
    m = traj.m[idx][order].T
    n = gc.closure_n(ell, m)
    g = traj.metric
    b = g.b(times)[None, :]
    K = g.K(times)[None, :]
    L, M, N = gc.unscale((ell, m, n), b, K)
    return FormFields(traj.x, times, L, M, N)

