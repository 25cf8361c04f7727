"""Command-line front-end: configuration, glioma presets and exports.

Configuration files hold flat ``section.key = value`` lines; ``#`` starts a
comment.  A ``preset = name`` line loads one of :data:`PRESETS` first and
later lines override it.  ``mesh.kind`` and ``model.kappa`` accept
comma-separated lists, which expand into one run per combination.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .analysis import SOLUTIONS, convergence_study, fa_histogram
from .core import TimeGrid, l2_norm, total_mass
from .cr import build_cr
from .errors import ConfigError, GdmError, IoError, SolverError
from .hmm import build_hmm
from .mesh import MESH_KINDS, PRESET_RESOLUTIONS, generate_mesh, read_mesh, write_mesh
from .physics import (DiffusionField, ReactionTerm, TensorParams, constant_initial,
                      gaussian_initial, glioma_initial)
from .solver import BoundaryCondition, SolverConfig, run_simulation

log = logging.getLogger(__name__)


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _words(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text):
    return None if text.strip().lower() in ("", "none") else int(text)


def _opt_float(text):
    return None if text.strip().lower() in ("", "none") else float(text)


# key -> (parser, default); a default of None means "derived" or "absent"
SCHEMA = {
    "run.mode": (str, "simulate"),
    "mesh.kind": (_words, ("triangular",)),
    "mesh.n": (_opt_int, None),
    "mesh.ny": (_opt_int, None),
    "mesh.distortion": (_opt_float, None),
    "mesh.file": (str, None),
    "mesh.L": (float, 20.0),
    "scheme": (str, "hmm"),
    "model.kappa": (_floats, (0.0,)),
    "model.delta": (float, 0.05),
    "model.r": (float, 1.0),
    "model.mu": (float, 1.0),
    "model.reaction": (str, "bistable"),
    "model.rho": (float, 1.0),
    "model.alpha": (float, 0.1),
    "model.initial": (str, "glioma"),
    "model.initial_amplitude": (float, 0.05),
    "model.initial_width": (float, 2.0),
    "model.initial_x": (float, 0.0),
    "model.initial_y": (float, 0.0),
    "bc.kind": (str, "neumann"),
    "bc.g": (str, "zero"),
    "time.T": (float, None),
    "time.dt": (float, 0.05),
    "solver.stepper": (str, "implicit"),
    "solver.nonlinear": (str, "newton"),
    "solver.nonlinear_tol": (float, 1e-10),
    "solver.max_nonlinear_iters": (int, 50),
    "solver.linear": (str, "auto"),
    "solver.linear_tol": (float, 1e-12),
    "solver.clamp_reaction": (_bool, True),
    "solver.picard_switch": (_opt_int, 3),
    "output.dir": (str, "out"),
    "output.snapshots": (_floats, None),
    "output.formats": (_words, ("vtk", "csv")),
    "output.histogram_bins": (int, 20),
}

_GLIOMA = {"model.reaction": "bistable", "model.rho": "1", "model.alpha": "0.1",
           "model.delta": "0.05", "model.r": "1", "model.mu": "1", "mesh.L": "20",
           "model.initial": "glioma", "bc.kind": "neumann"}

PRESETS = {
    **{f"fig{i + 1}": {**_GLIOMA, "model.kappa": str(k), "mesh.kind": "triangular",
                       "time.T": "20", "time.dt": "0.05", "solver.stepper": "imex",
                       "output.snapshots": "0.2,5,15,20"}
       for i, k in enumerate((0, 5, 10, 30))},
    "fig5": {**_GLIOMA, "run.mode": "histogram", "model.kappa": "0,5,10,30",
             "mesh.kind": "triangular", "time.T": "10"},
    "fig7": {**_GLIOMA, "model.kappa": "0", "mesh.kind": ",".join(MESH_KINDS),
             "time.T": "2", "time.dt": "0.05", "solver.stepper": "imex",
             "output.snapshots": "2"},
    "fig8": {**_GLIOMA, "model.kappa": "100", "mesh.kind": ",".join(MESH_KINDS),
             "time.T": "2", "time.dt": "0.05", "solver.stepper": "imex",
             "output.snapshots": "2"},
}

BOUNDARY_DATA = {
    "zero": lambda x, y, t: 0.0 * np.asarray(x),
    "one": lambda x, y, t: 1.0 + 0.0 * np.asarray(x),
    "quadratic": lambda x, y, t: np.exp(-t) * (np.asarray(x) ** 2 + np.asarray(y) ** 2),
}

INITIAL_KINDS = ("glioma", "gaussian", "constant", "zero")


@dataclass(frozen=True)
class RunConfig:
    values: dict = field(repr=False)
    name: str = "run"

    def __getitem__(self, key):
        return self.values[key]

    @property
    def solver(self) -> SolverConfig:
        v = self.values
        return SolverConfig(v["solver.stepper"], v["solver.nonlinear"], v["solver.nonlinear_tol"],
                            v["solver.max_nonlinear_iters"], v["solver.linear"],
                            v["solver.linear_tol"], v["solver.clamp_reaction"],
                            v["solver.picard_switch"])

    def tensor_params(self, kappa: float | None = None) -> TensorParams:
        v = self.values
        k = v["model.kappa"][0] if kappa is None else kappa
        return TensorParams(k, v["model.delta"], v["model.r"], v["model.mu"])

    @property
    def reaction(self) -> ReactionTerm:
        v = self.values
        return ReactionTerm(v["model.reaction"], v["model.rho"], v["model.alpha"])

    @property
    def initial(self):
        v = self.values
        kind = v["model.initial"]
        if kind == "glioma":
            return glioma_initial
        if kind == "gaussian":
            return gaussian_initial(v["model.initial_amplitude"],
                                    (v["model.initial_x"], v["model.initial_y"]),
                                    v["model.initial_width"])
        if kind == "constant":
            return constant_initial(v["model.initial_amplitude"])
        return constant_initial(0.0)

    @property
    def boundary(self) -> BoundaryCondition:
        if self.values["bc.kind"] == "dirichlet":
            return BoundaryCondition.dirichlet(BOUNDARY_DATA[self.values["bc.g"]])
        return BoundaryCondition.neumann()

    @property
    def time_grid(self) -> TimeGrid:
        return TimeGrid.uniform(self.values["time.T"], self.values["time.dt"])

    @property
    def snapshots(self) -> tuple:
        s = self.values["output.snapshots"]
        return (self.values["time.T"],) if s is None else s

    def expand(self) -> list:
        """One single-mesh, single-kappa config per combination."""
        kinds = self.values["mesh.kind"]
        kappas = self.values["model.kappa"]
        out = []
        for kind, kappa in itertools.product(kinds, kappas):
            label = self.name
            if len(kinds) > 1:
                label += f"_{kind}"
            if len(kappas) > 1:
                label += f"_kappa{kappa:g}"
            out.append(RunConfig({**self.values, "mesh.kind": (kind,), "model.kappa": (kappa,)},
                                 label))
        return out

    def build_mesh(self):
        v = self.values
        if v["mesh.file"]:
            return read_mesh(v["mesh.file"])
        kind = v["mesh.kind"][0]
        n, ny = v["mesh.n"], v["mesh.ny"]
        if n is None:
            preset = PRESET_RESOLUTIONS[kind]
            n, ny = preset["n"], preset.get("ny") if ny is None else ny
        return generate_mesh(kind, v["mesh.L"], n, v["mesh.distortion"], ny)


def _lines(text):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        yield lineno, key, value


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse and validate a configuration (a bare preset name is also accepted)."""
    raw = {}
    name = "run"
    stripped = text.strip()
    if stripped in PRESETS:
        stripped = f"preset = {stripped}"
    for lineno, key, value in _lines(stripped):
        if key == "preset":
            if value not in PRESETS:
                raise ConfigError(f"unknown preset {value!r}", "preset")
            raw.update(PRESETS[value])
            name = value
        elif key not in SCHEMA:
            raise ConfigError(f"unknown key (line {lineno})", key)
        else:
            raw[key] = value
    raw.update(overrides or {})
    values = {}
    for key, (conv, default) in SCHEMA.items():
        if key in raw:
            try:
                values[key] = conv(raw[key])
            except ValueError as exc:
                raise ConfigError(f"bad value {raw[key]!r} ({exc})", key) from None
        else:
            values[key] = default
    for key in raw:
        if key not in SCHEMA:
            raise ConfigError("unknown key", key)
    cfg = RunConfig(values, name)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    v = cfg.values
    if v["run.mode"] not in ("simulate", "histogram"):
        raise ConfigError(f"unknown mode {v['run.mode']!r}", "run.mode")
    if v["time.T"] is None:
        raise ConfigError("final time is required", "time.T")
    if v["time.T"] < 0:
        raise ConfigError("must be >= 0", "time.T")
    if v["time.dt"] <= 0:
        raise ConfigError("must be positive", "time.dt")
    if v["mesh.L"] <= 0:
        raise ConfigError("must be positive", "mesh.L")
    for kind in v["mesh.kind"]:
        if kind not in MESH_KINDS:
            raise ConfigError(f"unknown mesh kind {kind!r}", "mesh.kind")
    if v["scheme"] not in ("hmm", "cr"):
        raise ConfigError(f"unknown scheme {v['scheme']!r}", "scheme")
    if v["scheme"] == "cr" and not v["mesh.file"] and any(k != "triangular" for k in v["mesh.kind"]):
        raise ConfigError("Crouzeix-Raviart needs a triangular mesh", "scheme")
    if v["model.initial"] not in INITIAL_KINDS:
        raise ConfigError(f"unknown initial data {v['model.initial']!r}", "model.initial")
    if v["bc.kind"] not in ("neumann", "dirichlet"):
        raise ConfigError(f"unknown boundary condition {v['bc.kind']!r}", "bc.kind")
    if v["bc.g"] not in BOUNDARY_DATA:
        raise ConfigError(f"unknown boundary data {v['bc.g']!r}", "bc.g")
    for fmt in v["output.formats"]:
        if fmt not in ("vtk", "csv"):
            raise ConfigError(f"unknown format {fmt!r}", "output.formats")
    if v["output.histogram_bins"] < 1:
        raise ConfigError("must be >= 1", "output.histogram_bins")
    for t in cfg.snapshots:
        if not 0.0 <= t <= v["time.T"] + 1e-12:
            raise ConfigError(f"snapshot time {t} outside [0, T]", "output.snapshots")
    # remaining checks are delegated to the domain constructors
    try:
        cfg.solver
        for kappa in v["model.kappa"]:
            cfg.tensor_params(kappa)
        cfg.reaction
    except GdmError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# exports


def vtk_text(mesh, density, title: str = "density") -> str:
    """Legacy ASCII VTK (2.0) unstructured grid of polygons with cell scalar ``density``."""
    out = io.StringIO()
    out.write("# vtk DataFile Version 2.0\n")
    out.write(f"{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
    out.write(f"POINTS {mesh.n_vertices} double\n")
    for x, y in mesh.vertices:
        out.write(f"{x:.17g} {y:.17g} 0\n")
    loops = mesh.cell_loops
    size = sum(len(lp) + 1 for lp in loops)
    out.write(f"CELLS {mesh.n_cells} {size}\n")
    for lp in loops:
        out.write(" ".join([str(len(lp))] + [str(int(i)) for i in lp]) + "\n")
    out.write(f"CELL_TYPES {mesh.n_cells}\n")
    out.write("7\n" * mesh.n_cells)
    out.write(f"CELL_DATA {mesh.n_cells}\nSCALARS density double 1\nLOOKUP_TABLE default\n")
    for v in density:
        out.write(f"{float(v):.17g}\n")
    return out.getvalue()


def _write(path, text):
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None
    return path


def timeseries_csv(d, result) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "mass", "l2_norm"])
    for t, v in zip(result.times, result.states):
        w.writerow([f"{t:.10g}", f"{total_mass(d, v):.12e}", f"{l2_norm(d, v):.12e}"])
    return buf.getvalue()


def _snapshot_name(label, t):
    return f"{label}_t{t:g}.vtk"


def export_result(result, config: RunConfig, out_dir: str | None = None, histogram=None) -> list:
    """Write VTK snapshots, the mass/L2 time series and the FA histogram."""
    out_dir = config["output.dir"] if out_dir is None else out_dir
    d = result.discretisation
    fmts = config["output.formats"]
    files = []
    if "vtk" in fmts:
        for t in config.snapshots:
            dens = d.cell_values(result.at(t))
            files.append(_write(os.path.join(out_dir, _snapshot_name(config.name, t)),
                                vtk_text(d.mesh, dens, f"{config.name} t={t:g}")))
    if "csv" in fmts:
        files.append(_write(os.path.join(out_dir, f"{config.name}_timeseries.csv"),
                            timeseries_csv(d, result)))
        if histogram is not None:
            files.append(_write(os.path.join(out_dir, f"{config.name}_fa_histogram.csv"),
                                histogram.to_csv()))
    return files


# ---------------------------------------------------------------------------
# drivers


def build_discretisation(config: RunConfig, mesh):
    if config["scheme"] == "cr":
        if not mesh.is_simplicial:
            raise ConfigError("Crouzeix-Raviart needs a triangular mesh", "scheme")
        return build_cr(mesh)
    return build_hmm(mesh)


def run_config(config: RunConfig, out_dir: str | None = None, progress=None) -> list:
    """Run every expanded case of ``config``; returns ``(case, result, files)`` tuples."""
    done = []
    for case in config.expand():
        mesh = case.build_mesh()
        A_field = DiffusionField.dti(case.tensor_params())
        hist = fa_histogram(mesh, A_field, case["output.histogram_bins"])
        if case["run.mode"] == "histogram":
            files = []
            if "csv" in case["output.formats"]:
                d = out_dir if out_dir is not None else case["output.dir"]
                files.append(_write(os.path.join(d, f"{case.name}_fa_histogram.csv"),
                                    hist.to_csv()))
            done.append((case, hist, files))
            continue
        d = build_discretisation(case, mesh)
        log.info("%s: %d cells, %d unknowns", case.name, mesh.n_cells, d.ndof)
        res = run_simulation(d, case.initial, case.boundary, A_field, case.reaction,
                             case.time_grid, case.solver, progress=progress)
        files = export_result(res, case, out_dir, hist)
        done.append((case, res, files))
    return done


def _cmd_run(args) -> int:
    overrides = {}
    for item in args.set or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    if args.preset:
        text = f"preset = {args.preset}"
    else:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    config = parse_config(text, overrides)
    for case, _, files in run_config(config, args.out):
        for f in files:
            print(f)
    return 0


def _cmd_convergence(args) -> int:
    if args.scheme not in ("hmm", "cr"):
        raise ConfigError(f"unknown scheme {args.scheme!r}", "scheme")
    if args.levels < 2:
        raise ConfigError("need at least 2 levels", "levels")
    sol = SOLUTIONS[args.solution]()
    mesh_kind = args.mesh
    if args.scheme == "cr" and mesh_kind not in (None, "triangular"):
        raise ConfigError("Crouzeix-Raviart needs a triangular mesh", "mesh")
    rep = convergence_study(args.scheme, sol, args.levels, mesh_kind, args.base_n)
    text = rep.to_csv()
    if args.out:
        _write(args.out, text)
        print(args.out)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_mesh(args) -> int:
    if args.kind not in MESH_KINDS:
        raise ConfigError(f"unknown mesh kind {args.kind!r}", "kind")
    mesh = generate_mesh(args.kind, args.L, args.n, args.distortion)
    try:
        write_mesh(mesh, args.out)
    except OSError as exc:
        raise IoError(f"cannot write {args.out}: {exc}") from None
    print(f"{args.out}: {mesh.n_cells} cells, {mesh.n_faces} faces")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gdm-rd", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a configuration or preset")
    g = r.add_mutually_exclusive_group(required=True)
    g.add_argument("--config", help="path to a key = value config file")
    g.add_argument("--preset", choices=sorted(PRESETS))
    r.add_argument("--out", help="output directory (overrides output.dir)")
    r.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    r.set_defaults(func=_cmd_run)

    c = sub.add_parser("convergence", help="manufactured-solution convergence study")
    c.add_argument("--scheme", default="hmm")
    c.add_argument("--levels", type=int, default=4)
    c.add_argument("--solution", choices=sorted(SOLUTIONS), default="heat")
    c.add_argument("--mesh", choices=MESH_KINDS, default=None)
    c.add_argument("--base-n", type=int, default=8)
    c.add_argument("--out", help="CSV path (default: stdout)")
    c.set_defaults(func=_cmd_convergence)

    m = sub.add_parser("mesh", help="generate and write a mesh")
    m.add_argument("--kind", required=True)
    m.add_argument("--n", type=int, required=True)
    m.add_argument("--L", type=float, default=20.0)
    m.add_argument("--distortion", type=float, default=None)
    m.add_argument("--out", required=True)
    m.set_defaults(func=_cmd_mesh)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except SolverError as exc:
        step = getattr(exc, "step", None)
        where = f" at step {step}" if step is not None else ""
        print(f"solver failure{where}: {exc}", file=sys.stderr)
        return 2
    except (GdmError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
