"""Command-line scenario runner.

    gclab run SCENARIO.ini [--out DIR]
    gclab compare SCENARIO.ini [--out DIR]
    gclab sweep SCENARIO.ini [--out DIR]
    gclab reconstruct SCENARIO.ini [--out DIR]
    gclab validate-metric SCENARIO.ini [--out DIR]

Exit status: 0 success (or verdict true), 1 verdict false, 2 configuration
error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import gauss_codazzi as gc
from .errors import (
    CompatibilityError,
    ConfigError,
    GCLabError,
    MetricValidationError,
    ParameterError,
    SmoothnessError,
)
from .gauss_codazzi import BOUNDARY_MODES, InvariantBox, StateField
from .geometry import frozen_metric, helicoid_metric, hong_metric, read_metric_table, validate_metric
from .solver import FIXTURES, SOURCE_MODES, VISCOSITY_MODES, SolverConfig, Trajectory, entropy_residual, initial_field, solve

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

# allowed keys per section; None marks free-form sections
SCHEMA = {
    "metric": {"family", "c", "C", "delta", "t_max", "b", "K", "path"},
    "metric2": {"family", "c", "C", "delta", "t_max", "b", "K", "path"},
    "grid": {"cells", "x0", "length", "boundary"},
    "data": {"fixture", "u0", "v0", "eps", "wavenumber", "eps2", "wavenumber2"},
    "data2": {"fixture", "u0", "v0", "eps", "wavenumber", "eps2", "wavenumber2"},
    "solver": {"cfl", "viscosity", "kappa", "source", "r0", "R0", "t0", "T", "direction", "output_dt", "store_every"},
    "stability": {"C0", "C_g", "rtol", "atol", "smoothness_threshold"},
    "sweep": {"c", "T"},
    "reconstruct": {"source", "nx", "nt", "x_max", "t_max", "order", "check", "threshold", "reorthogonalize"},
    "validate": {"t_min", "t_max", "samples", "tol"},
    "output": {"dir", "all_frames"},
}


def fmt(v) -> str:
    return format(float(v), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def write_json(path, data):
    # repr of floats in json is already the shortest round-trip form
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- scenario parsing --------------------------------------------------------------


class Section:
    """Typed access to one config section; errors name the offending field."""

    def __init__(self, parser: configparser.ConfigParser, name: str):
        self.name = name
        self.present = parser.has_section(name)
        self.items = dict(parser.items(name)) if self.present else {}

    def _raw(self, key, default):
        if key in self.items:
            return self.items[key]
        if default is _REQUIRED:
            raise ConfigError(f"[{self.name}] {key}: missing required field")
        return default

    def str(self, key, default=None, choices=None):
        v = self._raw(key, default)
        if v is not None and choices is not None and v not in choices:
            raise ConfigError(f"[{self.name}] {key}: {v!r} is not one of {list(choices)}")
        return v

    def float(self, key, default=None):
        v = self._raw(key, default)
        if v is None or isinstance(v, float):
            return v
        try:
            return float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"[{self.name}] {key}: expected a number, got {v!r}") from None

    def int(self, key, default=None):
        v = self._raw(key, default)
        if v is None or isinstance(v, int):
            return v
        try:
            return int(v)
        except (TypeError, ValueError):
            raise ConfigError(f"[{self.name}] {key}: expected an integer, got {v!r}") from None

    def bool(self, key, default=False):
        v = self._raw(key, default)
        if isinstance(v, bool):
            return v
        if str(v).lower() in ("1", "true", "yes", "on"):
            return True
        if str(v).lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"[{self.name}] {key}: expected true/false, got {v!r}")

    def floats(self, key, default=None):
        v = self._raw(key, default)
        if v is None:
            return None
        parts = [p for p in str(v).replace(",", " ").split()]
        try:
            return [float(p) for p in parts]
        except ValueError:
            raise ConfigError(f"[{self.name}] {key}: expected a list of numbers, got {v!r}") from None


_REQUIRED = object()


def load_config(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case sensitive (C vs c)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"[{sec}]: unknown section")
        for key in parser[sec]:
            if key not in SCHEMA[sec]:
                raise ConfigError(f"[{sec}] {key}: unknown field")
    return parser


def build_metric(sec: Section):
    family = sec.str("family", _REQUIRED, choices=("helicoid", "hong", "frozen", "table"))
    try:
        if family == "helicoid":
            return helicoid_metric(sec.float("c", 1.0))
        if family == "hong":
            return hong_metric(sec.float("C", 1.0), sec.float("delta", 1.0), t_max=sec.float("t_max", 200.0))
        if family == "frozen":
            return frozen_metric(sec.float("b", 1.0), sec.float("K", -1.0))
        return read_metric_table(sec.str("path", _REQUIRED))
    except ParameterError as exc:
        raise ConfigError(f"[{sec.name}]: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"[{sec.name}] path: {exc}") from None


@dataclass
class RunSpec:
    metric: object
    initial: StateField
    cfg: SolverConfig
    t0: float
    T: float
    direction: str
    data: dict = field(default_factory=dict)


def build_initial(grid: Section, data: Section) -> tuple[StateField, dict]:
    params = dict(
        cells=grid.int("cells", 200),
        x0=grid.float("x0", 0.0),
        length=grid.float("length", 1.0),
        boundary=grid.str("boundary", "periodic", choices=BOUNDARY_MODES),
        fixture=data.str("fixture", "sine", choices=FIXTURES),
        u0=data.float("u0", -1.0),
        v0=data.float("v0", 1.0),
        eps=data.float("eps", 0.1),
        wavenumber=data.int("wavenumber", 1),
        eps2=data.float("eps2", 0.0),
        wavenumber2=data.int("wavenumber2", 2),
    )
    if params["cells"] < 4:
        raise ConfigError(f"[{grid.name}] cells: need at least 4 cells, got {params['cells']}")
    if not params["length"] > 0:
        raise ConfigError(f"[{grid.name}] length: must be positive")
    try:
        fld = initial_field(**params)
    except GCLabError as exc:
        raise ConfigError(f"[{data.name}] u0/v0/eps: initial data not admissible: {exc}") from None
    return fld, params


def build_solver(sec: Section) -> tuple[SolverConfig, float, float, str]:
    direction = sec.str("direction", "forward", choices=("forward", "backward", "both"))
    t0 = sec.float("t0", 0.0)
    T = sec.float("T", 1.0)
    if not T > 0:
        raise ConfigError(f"[solver] T: must be positive, got {T}")
    try:
        box = InvariantBox(sec.float("r0", gc.DEFAULT_R0), sec.float("R0", gc.DEFAULT_R0_OUTER))
    except ParameterError as exc:
        raise ConfigError(f"[solver] r0/R0: {exc}") from None
    kw = dict(
        cfl=sec.float("cfl", 0.45),
        viscosity=sec.str("viscosity", "lax-friedrichs", choices=VISCOSITY_MODES),
        kappa=sec.float("kappa", 0.5),
        source=sec.str("source", "unsplit", choices=SOURCE_MODES),
        box=box,
        output_dt=sec.float("output_dt", None),
        store_every=sec.int("store_every", 1),
    )
    try:
        cfg = SolverConfig(**kw)
    except ParameterError as exc:
        raise ConfigError(f"[solver]: {exc}") from None
    return cfg, t0, T, direction


def build_runs(parser, second: bool = False) -> tuple[RunSpec, RunSpec | None]:
    grid = Section(parser, "grid")
    cfg, t0, T, direction = build_solver(Section(parser, "solver"))
    metric = build_metric(Section(parser, "metric"))
    init, params = build_initial(grid, Section(parser, "data"))
    run = RunSpec(metric, init, cfg, t0, T, direction, params)
    if not second:
        return run, None
    m2 = Section(parser, "metric2")
    d2 = Section(parser, "data2")
    metric2 = build_metric(m2) if m2.present else metric
    init2, params2 = build_initial(grid, d2) if d2.present else (init, params)
    return run, RunSpec(metric2, init2, cfg, t0, T, direction, params2)


def _with_direction(cfg: SolverConfig, sign: int) -> SolverConfig:
    from dataclasses import replace

    return replace(cfg, direction=sign)


def execute(run: RunSpec, sign: int) -> Trajectory:
    return solve(run.initial, run.metric, (run.t0, run.t0 + sign * run.T), _with_direction(run.cfg, sign))


# -- outputs -------------------------------------------------------------------------


def trajectory_rows(traj: Trajectory, all_frames: bool = False):
    idx = range(traj.times.size) if all_frames else traj.output_indices()
    x = traj.x
    for k in idx:
        ell, m = traj.ell[k], traj.m[k]
        n = gc.closure_n(ell, m)
        u, v = gc.riemann_invariants(ell, m)
        for j in range(x.size):
            yield (traj.times[k], x[j], ell[j], m[j], n[j], u[j], v[j])


def write_trajectory_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "l", "m", "n", "u", "v"])
        for r in rows:
            w.writerow([fmt(v) for v in r])


def diagnostics(traj: Trajectory) -> dict:
    d = {
        "direction": traj.direction,
        "t_start": float(traj.times[0]),
        "t_end": float(traj.times[-1]),
        "steps": traj.steps,
        "stored_frames": int(traj.times.size),
        "output_frames": int(traj.is_output.sum()),
        "max_speed": float(traj.max_speed_history.max()) if traj.max_speed_history.size else None,
        "min_box_margin": float(traj.margin_history.min()) if traj.margin_history.size else None,
        "metric": traj.metric.describe(),
    }
    if traj.times.size >= 3:
        d["entropy_residual"] = entropy_residual(traj).summary()
    return d


def _outdir(args, parser) -> str:
    out = args.out or Section(parser, "output").str("dir", ".")
    os.makedirs(out, exist_ok=True)
    return out


def cmd_run(args, parser) -> int:
    run, _ = build_runs(parser)
    out = _outdir(args, parser)
    all_frames = Section(parser, "output").bool("all_frames", False)
    signs = {"forward": [1], "backward": [-1], "both": [-1, 1]}[run.direction]
    trajs = {s: execute(run, s) for s in signs}
    rows = []
    for s in signs:
        r = list(trajectory_rows(trajs[s], all_frames))
        if s == -1:
            # backward frames in increasing t; t0 is written once, by the forward run if present
            nx = trajs[s].x.size
            frames = [r[i:i + nx] for i in range(0, len(r), nx)][::-1]
            if 1 in signs:
                frames = frames[:-1]
            r = [row for fr in frames for row in fr]
        rows.extend(r)
    write_trajectory_csv(os.path.join(out, "trajectory.csv"), rows)
    diag = {
        "scenario": {"data": run.data, "solver": _cfg_dict(run.cfg), "t0": run.t0, "T": run.T,
                     "direction": run.direction},
        "runs": {("forward" if s > 0 else "backward"): diagnostics(trajs[s]) for s in signs},
        "notes": ["initial data fixtures are synthetic perturbations chosen for testing, not data from the analysis"],
    }
    write_json(os.path.join(out, "diagnostics.json"), diag)
    return EXIT_OK


def _cfg_dict(cfg: SolverConfig) -> dict:
    return {"cfl": cfg.cfl, "viscosity": cfg.viscosity, "kappa": cfg.kappa, "source": cfg.source,
            "box": list(cfg.box.as_tuple()), "output_dt": cfg.output_dt, "store_every": cfg.store_every}


def cmd_compare(args, parser) -> int:
    from .stability import measure_constants, verify_stability

    run, ref = build_runs(parser, second=True)
    if run.direction == "both":
        raise ConfigError("[solver] direction: compare supports forward or backward, not both")
    sign = 1 if run.direction == "forward" else -1
    st = Section(parser, "stability")
    out = _outdir(args, parser)
    traj = execute(run, sign)
    traj_bar = execute(ref, sign)
    consts = measure_constants(traj, traj_bar).with_overrides(st.float("C0", None), st.float("C_g", None))
    report = verify_stability(
        traj, traj_bar, run.metric, ref.metric, consts,
        rtol=st.float("rtol", 1e-6), atol=st.float("atol", 1e-13),
        smoothness_threshold=st.float("smoothness_threshold", 1.0),
    )
    report.write_csv(os.path.join(out, "timeseries.csv"))
    d = report.to_dict()
    d["metric"] = run.metric.describe()
    d["metric_reference"] = ref.metric.describe()
    write_json(os.path.join(out, "report.json"), d)
    return EXIT_OK if report.verdict else EXIT_VERDICT


def cmd_sweep(args, parser) -> int:
    from .stability import helicoid_sweep

    sw = Section(parser, "sweep")
    cs = sw.floats("c", None)
    if not cs:
        raise ConfigError("[sweep] c: empty or missing list of helicoid parameters")
    if any(not c > 0 for c in cs):
        raise ConfigError("[sweep] c: parameters must be positive")
    cfg, t0, T, direction = build_solver(Section(parser, "solver"))
    if direction == "both":
        raise ConfigError("[solver] direction: sweep supports forward or backward, not both")
    cfg = _with_direction(cfg, 1 if direction == "forward" else -1)
    _, params = build_initial(Section(parser, "grid"), Section(parser, "data"))
    out = _outdir(args, parser)
    rep = helicoid_sweep(cs, T=sw.float("T", T), cfg=cfg, data=params)
    rep.write_csv(os.path.join(out, "sweep.csv"))
    write_json(os.path.join(out, "sweep.json"), rep.to_dict())
    return EXIT_NUMERIC if rep.failures else EXIT_OK


def cmd_reconstruct(args, parser) -> int:
    from .reconstruction import (
        export_mesh,
        form_residuals,
        forms_from_trajectory,
        reconstruct_surface,
        rigid_align,
        unit_helicoid_forms,
        unit_helicoid_surface,
    )

    rc = Section(parser, "reconstruct")
    source = rc.str("source", "helicoid", choices=("helicoid", "run"))
    out = _outdir(args, parser)
    summary = {"source": source}
    if source == "helicoid":
        nx, nt = rc.int("nx", 256), rc.int("nt", 64)
        x = np.linspace(0.0, rc.float("x_max", 2 * math.pi), nx + 1)
        t = np.linspace(0.0, rc.float("t_max", 1.0), nt + 1)
        g = helicoid_metric(1.0)
        h = unit_helicoid_forms(x, t)
    else:
        run, _ = build_runs(parser)
        if run.direction == "both":
            raise ConfigError("[solver] direction: reconstruct from a run supports forward or backward")
        traj = execute(run, 1 if run.direction == "forward" else -1)
        g = run.metric
        h = forms_from_trajectory(traj)
    mesh = reconstruct_surface(g, h, order=rc.str("order", "tx", choices=("tx", "xt")),
                               check=rc.bool("check", True), threshold=rc.float("threshold", None),
                               reorthogonalize=rc.bool("reorthogonalize", False))
    export_mesh(mesh, os.path.join(out, "mesh.obj"))
    summary["max_commutator"] = mesh.max_commutator
    summary["max_metric_residual"] = mesh.max_metric_residual
    summary["form_residuals"] = form_residuals(mesh, g, h).to_dict()
    summary["grid"] = [int(h.x.size), int(h.t.size)]
    if source == "helicoid":
        al = rigid_align(mesh.y, unit_helicoid_surface(h.x, h.t))
        summary["max_deviation_from_closed_form"] = al.max_distance
    write_json(os.path.join(out, "residuals.json"), summary)
    return EXIT_OK


def cmd_validate_metric(args, parser) -> int:
    g = build_metric(Section(parser, "metric"))
    v = Section(parser, "validate")
    t_min = v.float("t_min", 0.0)
    t_max = v.float("t_max", 10.0)
    samples = v.int("samples", 1000)
    if not t_max > t_min:
        raise ConfigError("[validate] t_max: must exceed t_min")
    if samples < 2:
        raise ConfigError("[validate] samples: need at least 2")
    out = _outdir(args, parser)
    ts = np.linspace(t_min, t_max, samples)
    try:
        rep = validate_metric(g, ts, tol=v.float("tol", None), strict=True)
    except MetricValidationError as exc:
        write_json(os.path.join(out, "metric_report.json"),
                   {"passed": False, "error": str(exc), "offending_t": exc.offending_t})
        return EXIT_VERDICT
    write_json(os.path.join(out, "metric_report.json"), rep.to_dict())
    return EXIT_OK if rep.passed else EXIT_VERDICT


COMMANDS = {
    "run": cmd_run,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "reconstruct": cmd_reconstruct,
    "validate-metric": cmd_validate_metric,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gclab", description="Gauss-Codazzi experiments from scenario files.")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "run": "integrate one scenario and write trajectory.csv and diagnostics.json",
        "compare": "run two scenarios and check the relative-entropy bound (report.json, timeseries.csv)",
        "sweep": "helicoid parameter sweep against c = 1 (sweep.csv, sweep.json)",
        "reconstruct": "rebuild a surface from its fundamental forms (mesh.obj, residuals.json)",
        "validate-metric": "check b > 0, K < 0 and the Jacobi equation (metric_report.json)",
    }
    for name, text in helps.items():
        s = sub.add_parser(name, help=text)
        s.add_argument("config", help="scenario file (INI sections)")
        s.add_argument("--out", help="output directory (default: [output] dir or .)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        parser = load_config(args.config)
        return COMMANDS[args.command](args, parser)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SmoothnessError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_VERDICT
    except (GCLabError, ArithmeticError) as exc:
        kind = "incompatible forms" if isinstance(exc, CompatibilityError) else "numerical failure"
        print(f"{kind}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
