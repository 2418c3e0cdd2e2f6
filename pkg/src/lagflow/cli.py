"""Configuration-driven entry point: canned experiments, studies, output writers.

Run configurations are INI-style text with sections [run] [mesh] [model]
[solver] [output]; the four experiment presets fill in the parameter sets of
the canned simulations.  Outputs are plain CSV (frames, diagnostics), the
mesh export, and optional legacy ASCII VTK frames.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import analysis, mesh as meshmod, model as modelmod
from .assembly import LagrangianState
from .stepper import RunError, SolverConfig, run

__all__ = [
    "RunConfig",
    "ConfigError",
    "preset_config",
    "parse_config",
    "render_config",
    "run_experiment",
    "run_study",
    "main",
]

PRESETS = ("experiment1", "experiment2", "experiment3", "experiment4")

DIAGNOSTICS_HEADER = "t,energy,mass,min_det,newton_iters,dissipation,l1_error"


class ConfigError(ValueError):
    """Invalid run configuration; carries one message per violation."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n" + "\n".join(self.violations))


@dataclass
class RunConfig:
    preset: str = ""
    # mesh
    domain: str = ""
    bounds: tuple = ()
    radius: float = 0.0
    h_max: float = 0.0
    # model
    m: float = 3.0
    potential: str = "zero"
    potential_lambda: float = 0.0
    initial: str = ""
    initial_t0: float = 0.01
    # run
    t0: float = 0.0
    tau: float = 0.0
    T: float = 0.0
    potential_quadrature: str = "exact_gradient"
    frame_cadence: int = 0
    # solver
    newton_tol: float = 1e-9
    max_newton_iters: int = 50
    max_damping_halvings: int = 30
    linear_solver: str = "direct"
    regularization_floor: float = 0.0
    # output
    out_dir: str = "lagflow_out"
    write_vtk: bool = False


def preset_config(name: str, out_dir: str | None = None) -> RunConfig:
    """Parameter sets of the four canned experiments."""
    if name == "experiment1":
        t0 = 0.01
        cfg = RunConfig(
            preset=name,
            domain="quarter_disc",
            radius=analysis.barenblatt_free_support_radius(t0, mass=1.0),
            h_max=0.05,
            m=3.0,
            potential="zero",
            initial="barenblatt_t0",
            initial_t0=t0,
            t0=t0,
            tau=0.001,
            T=2.0,
            frame_cadence=200,
        )
    elif name == "experiment2":
        cfg = RunConfig(
            preset=name,
            domain="square",
            bounds=(-1.5, -1.5, 1.5, 1.5),
            h_max=0.1,
            m=3.0,
            potential="zero",
            initial="exp2",
            tau=0.001,
            T=0.1,
            frame_cadence=10,
        )
        # the first few implicit steps from this far-from-equilibrium datum
        # need many more damped iterations than the default budget
        cfg.max_newton_iters = 2000
    elif name == "experiment3":
        cfg = RunConfig(
            preset=name,
            domain="square",
            bounds=(-1.5, -1.5, 1.5, 1.5),
            h_max=0.1,
            m=3.0,
            potential="quadratic",
            potential_lambda=5.0,
            initial="two_peaks",
            tau=0.001,
            T=0.2,
            frame_cadence=20,
        )
    elif name == "experiment4":
        cfg = RunConfig(
            preset=name,
            domain="disc",
            radius=1.0,
            h_max=0.1,
            m=3.0,
            potential="quartic",
            initial="bump",
            tau=0.005,
            T=0.02,
            frame_cadence=1,
        )
    else:
        raise ValueError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")
    if out_dir is not None:
        cfg.out_dir = out_dir
    else:
        cfg.out_dir = f"lagflow_{name}"
    return cfg


_SECTION_KEYS = {
    "run": ("preset", "t0", "tau", "T", "potential_quadrature", "frame_cadence"),
    "mesh": ("domain", "bounds", "radius", "h_max"),
    "model": ("m", "potential", "lambda", "initial", "initial_t0"),
    "solver": (
        "newton_tol",
        "max_newton_iters",
        "max_damping_halvings",
        "linear_solver",
        "regularization_floor",
    ),
    "output": ("dir", "vtk"),
}

_KEY_TO_FIELD = {
    ("model", "lambda"): "potential_lambda",
    ("output", "dir"): "out_dir",
    ("output", "vtk"): "write_vtk",
}


def parse_config(text: str) -> RunConfig:
    """Parse INI-style configuration text; raises ConfigError listing all violations."""
    entries = {}
    violations = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTION_KEYS:
                violations.append(f"line {lineno}: unknown section [{section}]")
                section = None
            continue
        if "=" not in line:
            violations.append(f"line {lineno}: expected 'key = value', got {line!r}")
            continue
        if section is None:
            violations.append(f"line {lineno}: key outside any known section")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _SECTION_KEYS[section]:
            violations.append(f"line {lineno}: unknown key {key!r} in section [{section}]")
            continue
        entries[(section, key)] = (value, lineno)

    preset = entries.pop(("run", "preset"), None)
    if preset is not None:
        try:
            cfg = preset_config(preset[0])
        except ValueError as exc:
            raise ConfigError(violations + [f"line {preset[1]}: {exc}"])
    else:
        cfg = RunConfig()

    def grab(section, key, conv, check=None, constraint=""):
        item = entries.pop((section, key), None)
        if item is None:
            return None
        value, lineno = item
        try:
            out = conv(value)
        except ValueError:
            violations.append(
                f"line {lineno}: value {value!r} for {key!r} is not a valid {conv.__name__}"
            )
            return None
        if check is not None and not check(out):
            violations.append(f"line {lineno}: {key} = {value} violates {constraint}")
            return None
        setattr(cfg, _KEY_TO_FIELD.get((section, key), key), out)
        return out

    def boolean(text):
        if text.lower() in ("true", "yes", "1", "on"):
            return True
        if text.lower() in ("false", "no", "0", "off"):
            return False
        raise ValueError(text)

    def bounds4(text):
        parts = [float(p) for p in text.split()]
        if len(parts) != 4:
            raise ValueError(text)
        return tuple(parts)

    def choice(*options):
        def conv(text):
            if text not in options:
                raise ValueError(text)
            return text

        conv.__name__ = f"choice of {options}"
        return conv

    grab("run", "t0", float, lambda v: v >= 0.0, "t0 >= 0")
    grab("run", "tau", float, lambda v: v > 0.0, "tau > 0")
    grab("run", "T", float, lambda v: v > 0.0, "T > 0")
    grab("run", "potential_quadrature", choice("exact_gradient", "paper61"))
    grab("run", "frame_cadence", int, lambda v: v >= 0, "frame_cadence >= 0")
    grab("mesh", "domain", choice("square", "disc", "quarter_disc"))
    grab("mesh", "bounds", bounds4)
    grab("mesh", "radius", float, lambda v: v > 0.0, "radius > 0")
    grab("mesh", "h_max", float, lambda v: v > 0.0, "h_max > 0")
    grab("model", "m", float, lambda v: v > 1.0, "m > 1")
    grab("model", "potential", choice("zero", "quadratic", "quartic"))
    grab("model", "lambda", float)
    grab("model", "initial", choice("barenblatt_t0", "exp2", "two_peaks", "bump"))
    grab("model", "initial_t0", float, lambda v: v > 0.0, "initial_t0 > 0")
    grab("solver", "newton_tol", float, lambda v: v > 0.0, "newton_tol > 0")
    grab("solver", "max_newton_iters", int, lambda v: v >= 1, "max_newton_iters >= 1")
    grab("solver", "max_damping_halvings", int, lambda v: v >= 0, "max_damping_halvings >= 0")
    grab("solver", "linear_solver", choice("direct", "iterative"))
    grab("solver", "regularization_floor", float, lambda v: v >= 0.0, "regularization_floor >= 0")
    grab("output", "dir", str)
    grab("output", "vtk", boolean)

    for name, value in (("domain", cfg.domain), ("initial", cfg.initial)):
        if not value:
            violations.append(f"missing required key {name!r} (and no preset given)")
    for name, value in (("tau", cfg.tau), ("T", cfg.T), ("h_max", cfg.h_max)):
        if not value > 0.0:
            violations.append(f"missing or non-positive required key {name!r}")
    if cfg.domain == "square" and len(cfg.bounds) != 4:
        violations.append("square domain needs 'bounds = x0 y0 x1 y1'")
    if cfg.domain in ("disc", "quarter_disc") and not cfg.radius > 0.0:
        violations.append(f"{cfg.domain} domain needs a positive 'radius'")
    if cfg.potential == "quadratic" and cfg.potential_lambda == 0.0:
        violations.append("quadratic potential needs a nonzero 'lambda'")
    if violations:
        raise ConfigError(violations)
    return cfg


def render_config(cfg: RunConfig) -> str:
    """Write a configuration back to text; parse(render(cfg)) == cfg."""

    def g(v):
        return f"{v:.17g}"

    lines = ["[run]"]
    if cfg.preset:
        lines.append(f"preset = {cfg.preset}")
    lines += [
        f"t0 = {g(cfg.t0)}",
        f"tau = {g(cfg.tau)}",
        f"T = {g(cfg.T)}",
        f"potential_quadrature = {cfg.potential_quadrature}",
        f"frame_cadence = {cfg.frame_cadence}",
        "",
        "[mesh]",
        f"domain = {cfg.domain}",
    ]
    if cfg.bounds:
        lines.append("bounds = " + " ".join(g(b) for b in cfg.bounds))
    if cfg.radius:
        lines.append(f"radius = {g(cfg.radius)}")
    lines += [
        f"h_max = {g(cfg.h_max)}",
        "",
        "[model]",
        f"m = {g(cfg.m)}",
        f"potential = {cfg.potential}",
    ]
    if cfg.potential_lambda:
        lines.append(f"lambda = {g(cfg.potential_lambda)}")
    lines += [
        f"initial = {cfg.initial}",
        f"initial_t0 = {g(cfg.initial_t0)}",
        "",
        "[solver]",
        f"newton_tol = {g(cfg.newton_tol)}",
        f"max_newton_iters = {cfg.max_newton_iters}",
        f"max_damping_halvings = {cfg.max_damping_halvings}",
        f"linear_solver = {cfg.linear_solver}",
        f"regularization_floor = {g(cfg.regularization_floor)}",
        "",
        "[output]",
        f"dir = {cfg.out_dir}",
        f"vtk = {'true' if cfg.write_vtk else 'false'}",
    ]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# problem assembly and output writers

def build_problem(cfg: RunConfig):
    """Instantiate (mesh, ref, model, initial state, l1 oracle) from a config."""
    if cfg.domain == "square":
        mesh = meshmod.build_domain_mesh("square", cfg.h_max, bounds=cfg.bounds)
    else:
        mesh = meshmod.build_domain_mesh(cfg.domain, cfg.h_max, radius=cfg.radius)
    internal = modelmod.make_power_law(cfg.m)
    if cfg.potential == "zero":
        potential = modelmod.zero_potential()
    elif cfg.potential == "quadratic":
        potential = modelmod.quadratic_potential(cfg.potential_lambda)
    else:
        potential = modelmod.quartic_potential()
    model = modelmod.EnergyModel(internal, potential)
    rho0 = modelmod.preset_initial_density(cfg.initial, t0=cfg.initial_t0)
    ref = modelmod.init_reference_density(mesh, rho0)
    state = LagrangianState.identity(mesh, time=cfg.t0)

    if cfg.initial == "barenblatt_t0":
        def oracle(st):
            dens = analysis.pushforward_density(st, mesh, ref)
            return analysis.l1_error(dens, lambda x: analysis.barenblatt_free(st.time, x, mass=1.0))
    elif cfg.initial == "exp2":
        def oracle(st):
            if st.time <= 0.0:
                return math.nan
            dens = analysis.pushforward_density(st, mesh, ref)
            return analysis.l1_error(
                dens, lambda x: analysis.barenblatt_free(st.time, x, mass=ref.total_mass)
            )
    elif cfg.initial == "two_peaks":
        def oracle(st):
            dens = analysis.pushforward_density(st, mesh, ref)
            return analysis.l1_error(
                dens, lambda x: analysis.barenblatt_confined_steady(x, mass=ref.total_mass)
            )
    else:
        oracle = None
    return mesh, ref, model, state, oracle


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_frame_csv(path, state, density) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("id,x,y\n")
        for i, p in enumerate(state.positions):
            f.write(f"{i},{_fmt(p[0])},{_fmt(p[1])}\n")
        f.write("tri,density\n")
        for m, rho in enumerate(density.values):
            f.write(f"{m},{_fmt(rho)}\n")


def read_frame_csv(path):
    """Read back a frame file; returns (positions, densities)."""
    pos, dens = [], []
    table = 0
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line == "id,x,y":
                table = 1
                continue
            if line == "tri,density":
                table = 2
                continue
            if not line:
                continue
            parts = line.split(",")
            if table == 1:
                pos.append((float(parts[1]), float(parts[2])))
            else:
                dens.append(float(parts[1]))
    return np.array(pos), np.array(dens)


def write_frame_vtk(path, state, mesh, density, title="lagflow frame") -> None:
    """Legacy ASCII unstructured-grid frame with per-cell density."""
    L, M = mesh.n_nodes, mesh.n_triangles
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("# vtk DataFile Version 2.0\n")
        f.write(f"{title}\n")
        f.write("ASCII\n")
        f.write("DATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {L} double\n")
        for p in state.positions:
            f.write(f"{_fmt(p[0])} {_fmt(p[1])} 0\n")
        f.write(f"CELLS {M} {4 * M}\n")
        for i, j, k in mesh.triangles:
            f.write(f"3 {i} {j} {k}\n")
        f.write(f"CELL_TYPES {M}\n")
        for _ in range(M):
            f.write("5\n")
        f.write(f"CELL_DATA {M}\n")
        f.write("SCALARS density double 1\n")
        f.write("LOOKUP_TABLE default\n")
        for rho in density.values:
            f.write(f"{_fmt(rho)}\n")


def write_diagnostics_csv(path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(DIAGNOSTICS_HEADER + "\n")
        for r in records:
            f.write(
                ",".join(
                    [
                        _fmt(r.t),
                        _fmt(r.energy),
                        _fmt(r.mass),
                        _fmt(r.min_det),
                        str(r.newton_iters),
                        _fmt(r.step_dissipation),
                        _fmt(r.l1_error),
                    ]
                )
                + "\n"
            )


def _write_outputs(cfg, mesh, ref, frames, records) -> None:
    os.makedirs(cfg.out_dir, exist_ok=True)
    meshmod.write_mesh(mesh, os.path.join(cfg.out_dir, "mesh.txt"))
    write_diagnostics_csv(os.path.join(cfg.out_dir, "diagnostics.csv"), records)
    for n, state in frames:
        dens = analysis.pushforward_density(state, mesh, ref)
        write_frame_csv(os.path.join(cfg.out_dir, f"frame_{n}.csv"), state, dens)
        if cfg.write_vtk:
            write_frame_vtk(
                os.path.join(cfg.out_dir, f"frame_{n}.vtk"), state, mesh, dens,
                title=f"t={state.time:g}",
            )


def run_experiment(cfg: RunConfig) -> int:
    """Execute one configured run; returns the process exit status."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    mesh, ref, model, state, oracle = build_problem(cfg)
    scfg = SolverConfig(
        tau=cfg.tau,
        T=cfg.T,
        newton_tol=cfg.newton_tol,
        max_newton_iters=cfg.max_newton_iters,
        max_damping_halvings=cfg.max_damping_halvings,
        linear_solver=cfg.linear_solver,
        regularization_floor=cfg.regularization_floor,
        quadrature=cfg.potential_quadrature,
    )
    try:
        frames, records = run(state, mesh, ref, model, scfg,
                              frame_cadence=cfg.frame_cadence, l1_oracle=oracle)
    except RunError as exc:
        _write_outputs(cfg, mesh, ref, exc.frames, exc.records)
        with open(os.path.join(cfg.out_dir, "run.log"), "w", encoding="utf-8") as f:
            f.write(f"FAILED: {exc}\n")
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    _write_outputs(cfg, mesh, ref, frames, records)
    with open(os.path.join(cfg.out_dir, "run.log"), "w", encoding="utf-8") as f:
        f.write(f"OK: {len(records) - 1} steps, final t = {records[-1].t:.17g}\n")
    return 0


# ---------------------------------------------------------------------------
# studies

def convergence_study(h_values=(0.2, 0.1, 0.05, 0.025), ratio=0.4, T=0.2, t0=0.01):
    """l1 error of the tracked free Barenblatt at duration T vs mesh size.

    Fixes tau = ratio * h^2 and returns (rows, slope) with rows of
    (h_max, l1_error).
    """
    rows = []
    for h in h_values:
        cfg = preset_config("experiment1")
        cfg.h_max = h
        cfg.tau = ratio * h * h
        cfg.T = T
        mesh, ref, model, state, oracle = build_problem(cfg)
        scfg = SolverConfig(tau=cfg.tau, T=cfg.T)
        frames, records = run(state, mesh, ref, model, scfg, l1_oracle=oracle)
        rows.append((h, records[-1].l1_error))
    slope = analysis.fit_loglog_slope([r[0] for r in rows], [r[1] for r in rows])
    return rows, slope


def consistency_study(eps_values=(0.1, 0.05, 0.025)):
    """Momentum/impulse residuals and fitted orders on both lattice kinds."""
    model_hex = modelmod.EnergyModel(
        modelmod.make_power_law(3.0), modelmod.quadratic_potential(1.0)
    )
    model_skew = modelmod.EnergyModel(modelmod.make_power_law(3.0), modelmod.zero_potential())
    flow_hex = analysis.shear_drift_flow()
    flow_skew = analysis.skew_witness_flow()
    table = {"hexagonal": [], "skew": []}
    for eps in eps_values:
        p, j = analysis.consistency_probe(
            flow_hex, model_hex, eps, eps / 10.0, t=0.5, center=(0.3, 0.2), kind="hexagonal"
        )
        table["hexagonal"].append((eps, p, j))
        p, j = analysis.consistency_probe(
            flow_skew, model_skew, eps, eps / 10.0, t=0.5, center=(0.0, 0.0), kind="skew"
        )
        table["skew"].append((eps, p, j))
    slopes = {}
    for kind, rows in table.items():
        e = [r[0] for r in rows]
        slopes[kind] = (
            analysis.fit_loglog_slope(e, [r[1] for r in rows]),
            analysis.fit_loglog_slope(e, [r[2] for r in rows]),
        )
    return table, slopes


def lemma_study(seed: int = 0):
    """Identity suite: rows of (name, max deviation, tolerance, pass)."""
    rng = np.random.default_rng(seed)
    rows = []
    dev_b1 = 0.0
    for d in (1, 2, 3):
        for _ in range(20):
            lhs, rhs = analysis.lemma_b1_check(d, rng.normal(size=(d + 1, d)))
            dev_b1 = max(dev_b1, abs(lhs - rhs))
    rows.append(("B1", dev_b1, 1e-10))
    devs = analysis.lemma_b2_b5_checks(rng=rng)
    rows.append(("B2", devs["B2"], 1e-12))
    rows.append(("B3", devs["B3"], 1e-12))
    rows.append(("B4", devs["B4"], 1e-10))
    rows.append(("B5", devs["B5"], 1e-12))
    model = modelmod.EnergyModel(modelmod.make_power_law(3.0), modelmod.zero_potential())
    worst = 0.0
    for _ in range(20):
        A = rng.normal(size=(2, 2))
        while np.linalg.det(A) <= 0.05:
            A = rng.normal(size=(2, 2))
        rho = float(rng.uniform(0.5, 2.0))
        ana, fd = analysis.nonconvexity_witness(A, rho, model)
        if ana >= 0.0:
            worst = math.inf
        worst = max(worst, abs(fd - ana) / abs(ana))
        # the swap direction printed in the source has the opposite sign
        if analysis.swap_direction_second_derivative(A, rho, model) < 0.0:
            worst = math.inf
    rows.append(("C_nonconvexity", worst, 1e-6))
    return [(name, dev, tol, dev <= tol) for name, dev, tol in rows]


def run_study(kind: str, out_dir: str = ".") -> int:
    os.makedirs(out_dir, exist_ok=True)
    if kind == "convergence":
        rows, slope = convergence_study()
        path = os.path.join(out_dir, "convergence.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("h_max,l1_error\n")
            for h, err in rows:
                f.write(f"{_fmt(h)},{_fmt(err)}\n")
            f.write(f"# fitted slope = {_fmt(slope)} (reference value from the source: 1.18)\n")
        print(f"convergence slope = {slope:.3f} (rows in {path})")
        return 0
    if kind == "consistency":
        table, slopes = consistency_study()
        path = os.path.join(out_dir, "consistency.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("lattice,eps,momentum_residual,impulse_residual\n")
            for kind_, rows in table.items():
                for eps, p, j in rows:
                    f.write(f"{kind_},{_fmt(eps)},{_fmt(p)},{_fmt(j)}\n")
            for kind_, (sp, sj) in slopes.items():
                f.write(f"# {kind_}: momentum order {_fmt(sp)}, impulse order {_fmt(sj)}\n")
        for kind_, (sp, sj) in slopes.items():
            print(f"{kind_}: momentum order {sp:.2f}, impulse order {sj:.2f}")
        return 0
    if kind == "lemmas":
        rows = lemma_study()
        path = os.path.join(out_dir, "lemmas.csv")
        ok = True
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("identity,max_deviation,tolerance,status\n")
            for name, dev, tol, passed in rows:
                ok &= passed
                f.write(f"{name},{_fmt(dev)},{_fmt(tol)},{'PASS' if passed else 'FAIL'}\n")
        for name, dev, tol, passed in rows:
            print(f"{name}: max deviation {dev:.3e} (tol {tol:g}) {'PASS' if passed else 'FAIL'}")
        return 0 if ok else 1
    print(f"unknown study kind {kind!r}", file=sys.stderr)
    return 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lagflow",
        description="Lagrangian moving-mesh solver for nonlinear Fokker-Planck equations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured simulation")
    p_run.add_argument("config", nargs="?", help="configuration file")
    p_run.add_argument("--preset", choices=PRESETS, help="use a canned experiment")
    p_run.add_argument("--out", help="output directory override")

    p_study = sub.add_parser("study", help="run a parameter study")
    p_study.add_argument("kind", choices=("convergence", "consistency", "lemmas"))
    p_study.add_argument("--out", default=".", help="output directory")

    sub.add_parser("check", help="run the identity/lemma suite")

    args = parser.parse_args(argv)
    if args.command == "run":
        if args.preset:
            cfg = preset_config(args.preset, out_dir=args.out)
        elif args.config:
            with open(args.config, "r", encoding="utf-8") as f:
                try:
                    cfg = parse_config(f.read())
                except ConfigError as exc:
                    print(exc, file=sys.stderr)
                    return 2
            if args.out:
                cfg = replace(cfg, out_dir=args.out)
        else:
            print("need a config file or --preset", file=sys.stderr)
            return 2
        return run_experiment(cfg)
    if args.command == "study":
        return run_study(args.kind, args.out)
    if args.command == "check":
        return run_study("lemmas", ".")
    return 2


if __name__ == "__main__":
    sys.exit(main())
