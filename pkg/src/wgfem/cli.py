"""Command line front end.

Subcommands
    mesh    generate the fitted mesh family for a problem and write
            .node/.ele files per level
    solve   solve one level and write the solution values as CSV
    study   run a convergence study across levels and write tables
    stats   print mesh statistics per level

Options are resolved in three layers: built-in defaults, then a flat
key=value config file (--config), then command line flags. The output
directory can also come from the WGFEM_OUT environment variable (flags and
config still win). Exit codes: 0 success, 1 usage error, 2 data or I/O
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import os
import sys
import tempfile
from dataclasses import dataclass, fields

import numpy as np

from .analysis import convergence_study, error_norms, render_table
from .assembly import (
    AssemblyError,
    assemble,
    build_dof_map,
    dirichlet_values,
    dump_matrixmarket,
    local_dof_values,
)
from .mesh import EdgeKind, MeshError, TriMesh, ingest_mesh, mesh_stats, write_mesh
from .problems import EvaluationError, ProblemSpec, builtin_problem
from .solver import SolverError, solve
from .studies import study_meshes

__all__ = ["main", "cmd_mesh", "cmd_solve", "cmd_study", "cmd_stats", "RunConfig"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

OUTPUT_ENV_VAR = "WGFEM_OUT"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    problem: int = 1
    b: float | None = None
    kappa: float | None = None
    levels: int = 5
    base_h: float | None = None
    mesh_dir: str | None = None
    out: str = "."
    format: str = "both"  # csv | markdown | both
    forcing: str = "fd"
    h_fd: float = 1e-3
    svg: bool = False
    dump_system: bool = False

    def spec(self) -> ProblemSpec:
        return builtin_problem(
            self.problem,
            b=self.b,
            kappa=self.kappa,
            forcing_mode=self.forcing,
            h_fd=self.h_fd,
        )

    def tag(self) -> str:
        parts = [f"p{self.problem}"]
        if self.b is not None:
            parts.append(f"b{self.b:g}")
        if self.kappa is not None:
            parts.append(f"k{self.kappa:g}")
        return "_".join(parts)


_CONFIG_TYPES = {
    "problem": int,
    "b": float,
    "kappa": float,
    "levels": int,
    "base_h": float,
    "mesh_dir": str,
    "out": str,
    "format": str,
    "forcing": str,
    "h_fd": float,
    "svg": lambda s: s.lower() in ("1", "true", "yes", "on"),
    "dump_system": lambda s: s.lower() in ("1", "true", "yes", "on"),
}


def read_config_file(path: str) -> dict:
    """Flat key=value file; '#' starts a comment; keys match RunConfig fields."""
    values: dict = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{lineno}: expected key = value")
                key, _, val = line.partition("=")
                key = key.strip()
                val = val.strip()
                if key not in _CONFIG_TYPES:
                    raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
                try:
                    values[key] = _CONFIG_TYPES[key](val)
                except ValueError as exc:
                    raise UsageError(f"{path}:{lineno}: bad value for {key}") from exc
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if os.environ.get(OUTPUT_ENV_VAR):
        cfg.out = os.environ[OUTPUT_ENV_VAR]
    if getattr(args, "config", None):
        for key, val in read_config_file(args.config).items():
            setattr(cfg, key, val)
    for field in fields(RunConfig):
        val = getattr(args, field.name, None)
        if val is not None:
            setattr(cfg, field.name, val)
    if cfg.levels < 1:
        raise UsageError("levels must be at least 1")
    if cfg.format not in ("csv", "markdown", "both"):
        raise UsageError(f"unknown table format {cfg.format!r}")
    if cfg.forcing not in ("fd", "analytic"):
        raise UsageError(f"unknown forcing mode {cfg.forcing!r}")
    return cfg


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-wgfem-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _mesh_paths(cfg: RunConfig, level: int, directory: str | None = None):
    base = os.path.join(directory or cfg.out, f"{cfg.tag()}_level{level}")
    return base + ".node", base + ".ele"


def _get_meshes(cfg: RunConfig, spec: ProblemSpec) -> list[TriMesh]:
    """Load the per-level meshes from mesh_dir when present, else generate."""
    if cfg.mesh_dir:
        node0, ele0 = _mesh_paths(cfg, 1, cfg.mesh_dir)
        if os.path.exists(node0) and os.path.exists(ele0):
            meshes = []
            for level in range(1, cfg.levels + 1):
                node, ele = _mesh_paths(cfg, level, cfg.mesh_dir)
                meshes.append(
                    ingest_mesh(
                        node, ele, spec.region_predicate, spec.interface_predicate
                    )
                )
            return meshes
    return study_meshes(spec, levels=cfg.levels, base_h=cfg.base_h)


def cmd_mesh(cfg: RunConfig) -> int:
    spec = cfg.spec()
    meshes = study_meshes(spec, levels=cfg.levels, base_h=cfg.base_h)
    for level, mesh in enumerate(meshes, start=1):
        node, ele = _mesh_paths(cfg, level)
        buf_n, buf_e = io.StringIO(), io.StringIO()
        write_mesh(mesh, buf_n, buf_e)
        _atomic_write(node, buf_n.getvalue())
        _atomic_write(ele, buf_e.getvalue())
        print(f"level {level}: {mesh_stats(mesh)} -> {node}")
    return EXIT_OK


def cmd_stats(cfg: RunConfig) -> int:
    spec = cfg.spec()
    meshes = _get_meshes(cfg, spec)
    for level, mesh in enumerate(meshes, start=1):
        print(f"level {level}: {mesh_stats(mesh)}")
    return EXIT_OK


def _solution_csv(mesh: TriMesh, spec, dofs, x) -> str:
    lines = ["kind,index,side,value"]
    local = local_dof_values(mesh, spec, dofs, x)
    for t in range(mesh.n_triangles):
        lines.append(f"cell,{t},,{local[t, 0]:.17g}")
    g = dirichlet_values(mesh, spec, dofs)
    for e in range(mesh.n_edges):
        if mesh.edge_kind[e] == EdgeKind.DIRICHLET:
            lines.append(f"edge,{e},{mesh.edge_region[e]},{g[e]:.17g}")
            continue
        for side in (0, 1):
            dof = dofs.edge_dof[e, side]
            if dof >= 0:
                lines.append(f"edge,{e},{side + 1},{x[dof]:.17g}")
    for e in np.flatnonzero(dofs.lambda_dof >= 0):
        lines.append(f"lambda,{e},,{x[dofs.lambda_dof[e]]:.17g}")
    return "\n".join(lines) + "\n"


def _cells_csv(mesh: TriMesh, w0) -> str:
    cent = mesh.centroids()
    lines = ["x,y,w0"]
    for t in range(mesh.n_triangles):
        lines.append(f"{cent[t, 0]:.17g},{cent[t, 1]:.17g},{w0[t]:.17g}")
    return "\n".join(lines) + "\n"


def _viridis(t: float) -> str:
    # five-stop approximation of a perceptually uniform colormap
    stops = [
        (0.267, 0.005, 0.329),
        (0.229, 0.322, 0.546),
        (0.127, 0.566, 0.551),
        (0.369, 0.789, 0.383),
        (0.993, 0.906, 0.144),
    ]
    t = min(max(t, 0.0), 1.0) * (len(stops) - 1)
    i = min(int(t), len(stops) - 2)
    f = t - i
    rgb = [stops[i][k] * (1 - f) + stops[i + 1][k] * f for k in range(3)]
    return "#%02x%02x%02x" % tuple(int(round(255 * v)) for v in rgb)


def _svg_heatmap(mesh: TriMesh, w0, size: int = 640) -> str:
    box = mesh.bbox()
    scale = size / max(box.width, box.height)
    wpx = box.width * scale
    hpx = box.height * scale
    lo, hi = float(np.min(w0)), float(np.max(w0))
    span = hi - lo if hi > lo else 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{wpx:.0f}" '
        f'height="{hpx:.0f}" viewBox="0 0 {wpx:.2f} {hpx:.2f}">'
    ]
    pts = mesh.vertices.copy()
    pts[:, 0] = (pts[:, 0] - box.x0) * scale
    pts[:, 1] = (box.y1 - pts[:, 1]) * scale
    for t, tri in enumerate(mesh.triangles):
        color = _viridis((w0[t] - lo) / span)
        coords = " ".join(f"{pts[v, 0]:.2f},{pts[v, 1]:.2f}" for v in tri)
        parts.append(f'<polygon points="{coords}" fill="{color}" stroke="none"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_solve(cfg: RunConfig, level: int) -> int:
    spec = cfg.spec()
    if not 1 <= level <= cfg.levels:
        raise UsageError(f"level {level} outside 1..{cfg.levels}")
    meshes = _get_meshes(cfg, spec)
    mesh = meshes[level - 1]
    dofs = build_dof_map(mesh)
    system = assemble(mesh, spec, dofs)
    if cfg.dump_system:
        base = os.path.join(cfg.out, f"{cfg.tag()}_level{level}")
        os.makedirs(cfg.out, exist_ok=True)
        dump_matrixmarket(system, base + "_matrix.mtx", base + "_rhs.txt")
    report = solve(system)
    base = os.path.join(cfg.out, f"{cfg.tag()}_level{level}")
    _atomic_write(base + "_solution.csv", _solution_csv(mesh, spec, dofs, report.solution))
    local = local_dof_values(mesh, spec, dofs, report.solution)
    _atomic_write(base + "_cells.csv", _cells_csv(mesh, local[:, 0]))
    if cfg.svg:
        _atomic_write(base + ".svg", _svg_heatmap(mesh, local[:, 0]))
    record = error_norms(mesh, spec, report.solution, dofs)
    print(
        f"level {level}: unknowns={dofs.n_unknowns} "
        f"residual={report.relative_residual:.3e} "
        f"factor_nnz={report.nnz_factor} time={report.wall_time:.2f}s"
    )
    print(
        f"errors: linf_u={record.linf_solution:.4e} "
        f"linf_grad={record.linf_gradient:.4e} l2_u={record.l2_solution:.4e} "
        f"l2_lambda={record.l2_lambda_flux:.4e}"
    )
    return EXIT_OK


def cmd_study(cfg: RunConfig) -> int:
    spec = cfg.spec()
    if cfg.levels < 2:
        raise UsageError("a study needs at least 2 levels")
    meshes = _get_meshes(cfg, spec)
    report = convergence_study(spec, meshes)
    base = os.path.join(cfg.out, f"{cfg.tag()}_study")
    if cfg.format in ("csv", "both"):
        _atomic_write(base + ".csv", render_table(report, "csv"))
    if cfg.format in ("markdown", "both"):
        _atomic_write(base + ".md", render_table(report, "markdown"))
    print(render_table(report, "markdown"), end="")
    ou = report.overall_order("linf_solution")
    og = report.overall_order("linf_gradient")
    print(f"overall orders (level 1 vs {len(meshes)}): solution {ou:.4f}, "
          f"gradient {og:.4f}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    class Parser(argparse.ArgumentParser):
        def error(self, message):
            self.print_usage(sys.stderr)
            raise UsageError(message)

    parser = Parser(prog="wgfem", description=__doc__,
                    formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--problem", type=int, help="benchmark problem id (1..10)")
        p.add_argument("--b", type=float, help="coefficient contrast (problems 1, 3)")
        p.add_argument("--kappa", type=float, help="wavenumber (problem 2)")
        p.add_argument("--levels", type=int, help="number of refinement levels")
        p.add_argument("--base-h", dest="base_h", type=float,
                       help="coarsest-level target h (default: reference family)")
        p.add_argument("--mesh-dir", dest="mesh_dir",
                       help="read meshes from this directory instead of generating")
        p.add_argument("--out", help="output directory (default '.', or WGFEM_OUT)")
        p.add_argument("--forcing", choices=("fd", "analytic"),
                       help="right-hand side evaluation mode")
        p.add_argument("--hfd", dest="h_fd", type=float,
                       help="finite-difference step for forcing")

    p_mesh = sub.add_parser("mesh", help="generate and write the mesh family")
    common(p_mesh)

    p_solve = sub.add_parser("solve", help="solve one level, write solution CSV")
    common(p_solve)
    p_solve.add_argument("--level", type=int, default=1, help="level to solve")
    p_solve.add_argument("--svg", action="store_true", default=None,
                         help="also write a cell-value SVG heatmap")
    p_solve.add_argument("--dump-system", dest="dump_system", action="store_true",
                         default=None,
                         help="dump the matrix (MatrixMarket) and right-hand side")

    p_study = sub.add_parser("study", help="run a convergence study")
    common(p_study)
    p_study.add_argument("--format", choices=("csv", "markdown", "both"),
                         help="table output format")

    p_stats = sub.add_parser("stats", help="print mesh statistics")
    common(p_stats)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = build_config(args)
        if args.command == "mesh":
            return cmd_mesh(cfg)
        if args.command == "stats":
            return cmd_stats(cfg)
        if args.command == "solve":
            return cmd_solve(cfg, args.level)
        if args.command == "study":
            return cmd_study(cfg)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MeshError, EvaluationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SolverError, AssemblyError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
