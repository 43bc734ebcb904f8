"""Error norms, convergence orders, and study tables.

Max-norm errors are sampled at cell centroids: the solution error compares
the cell constant against the exact branch of the cell's stored region, and
the gradient error compares the weak gradient of the solved local values
against the exact gradient. The interface flux error is the L2 norm, over
interface edges, of the multiplier minus the exact region-1 conormal flux.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assembly import DofMap, local_dof_values
from .element import (
    EDGE_GAUSS_T,
    EDGE_GAUSS_W,
    TRI_QUAD_MID_BARY,
    TRI_QUAD_MID_WEIGHTS,
    ElementBatch,
)
from .mesh import REGION1, REGION2, TriMesh
from .problems import ProblemSpec

__all__ = [
    "ErrorRecord",
    "StudyReport",
    "StudyError",
    "error_norms",
    "convergence_study",
    "render_table",
    "parse_study_csv",
    "CSV_HEADER",
]

CSV_HEADER = "level,h_max,linf_u,order_u,linf_grad,order_grad,l2_u,l2_lambda"

# Centroids closer to a singular point than this are excluded from the
# max-norm sampling and counted in the record instead.
SINGULAR_EXCLUSION_RADIUS = 1e-12


class StudyError(Exception):
    pass


@dataclass(frozen=True)
class ErrorRecord:
    h_max: float
    linf_solution: float
    linf_gradient: float
    l2_solution: float
    l2_lambda_flux: float
    excluded_cells: int = 0


@dataclass(frozen=True)
class StudyReport:
    records: list[ErrorRecord]

    def orders(self, attr: str) -> list[float]:
        """Per-level orders log(e_prev/e)/log(h_prev/h); nan for level 1."""
        out = [math.nan]
        for prev, cur in zip(self.records[:-1], self.records[1:]):
            e0, e1 = getattr(prev, attr), getattr(cur, attr)
            if e0 <= 0.0 or e1 <= 0.0:
                out.append(math.nan)
            else:
                out.append(math.log(e0 / e1) / math.log(prev.h_max / cur.h_max))
        return out

    def overall_order(self, attr: str) -> float:
        """Order computed from the first and last level only."""
        first, last = self.records[0], self.records[-1]
        e0, e1 = getattr(first, attr), getattr(last, attr)
        if e0 <= 0.0 or e1 <= 0.0:
            return math.nan
        return math.log(e0 / e1) / math.log(first.h_max / last.h_max)


def _singular_centroid_mask(mesh: TriMesh, spec: ProblemSpec) -> np.ndarray:
    """True for centroids that sit on a singular point of their branch."""
    cent = mesh.centroids()
    mask = np.zeros(mesh.n_triangles, dtype=bool)
    for region in (REGION1, REGION2):
        pts = spec.branch(region).singular_points
        if not pts:
            continue
        in_region = mesh.tri_region == region
        for sx, sy in pts:
            r = np.hypot(cent[:, 0] - sx, cent[:, 1] - sy)
            mask |= in_region & (r <= SINGULAR_EXCLUSION_RADIUS)
    return mask


def error_norms(
    mesh: TriMesh, spec: ProblemSpec, solution: np.ndarray, dofs: DofMap
) -> ErrorRecord:
    batch = ElementBatch(mesh.vertices, mesh.triangles)
    cent = batch.centroids
    local = local_dof_values(mesh, spec, dofs, solution)
    w0 = local[:, 0]

    excluded = _singular_centroid_mask(mesh, spec)
    keep = ~excluded

    exact_c = np.empty(mesh.n_triangles)
    grad_c = np.empty((mesh.n_triangles, 2))
    for region in (REGION1, REGION2):
        m = (mesh.tri_region == region) & keep
        if m.any():
            exact_c[m] = spec.exact(region, cent[m, 0], cent[m, 1])
            grad_c[m] = spec.exact_grad(region, cent[m, 0], cent[m, 1])

    linf_u = float(np.abs(w0[keep] - exact_c[keep]).max())
    grad_h = batch.eval_field(batch.weak_gradients(local), cent)
    linf_g = float(
        np.linalg.norm(grad_h[keep] - grad_c[keep], axis=1).max()
    )

    # L2 of the cell constant against the exact solution, 3-point rule
    mid = np.einsum("qb,tbd->tqd", TRI_QUAD_MID_BARY, batch.tri_pts)
    exact_q = np.empty(mid.shape[:2])
    for region in (REGION1, REGION2):
        m = mesh.tri_region == region
        if m.any():
            exact_q[m] = spec.exact(region, mid[m][..., 0], mid[m][..., 1])
    sq = ((w0[:, None] - exact_q) ** 2) @ TRI_QUAD_MID_WEIGHTS
    l2_u = float(np.sqrt(np.sum(batch.area * sq)))

    # interface flux error in L2 over the interface
    eids = mesh.interface_edges()
    if len(eids):
        lam = solution[dofs.lambda_dof[eids]]
        p0 = mesh.vertices[mesh.edges[eids, 0]]
        p1 = mesh.vertices[mesh.edges[eids, 1]]
        pts = p0[:, None, :] + EDGE_GAUSS_T[None, :, None] * (p1 - p0)[:, None, :]
        normals = mesh.interface_normals()
        g1 = spec.exact_grad(REGION1, pts[..., 0], pts[..., 1])
        a1 = spec.coefficient(REGION1, pts[..., 0], pts[..., 1])
        flux = a1 * np.einsum("eqd,ed->eq", g1, normals)
        lens = np.linalg.norm(p1 - p0, axis=1)
        sq_l = ((lam[:, None] - flux) ** 2) @ EDGE_GAUSS_W
        l2_lambda = float(np.sqrt(np.sum(lens * sq_l)))
    else:
        l2_lambda = 0.0

    return ErrorRecord(
        h_max=mesh.h_max,
        linf_solution=linf_u,
        linf_gradient=linf_g,
        l2_solution=l2_u,
        l2_lambda_flux=l2_lambda,
        excluded_cells=int(excluded.sum()),
    )


def convergence_study(spec: ProblemSpec, meshes) -> StudyReport:
    """Solve on each mesh (strictly decreasing h_max) and collect error records."""
    from .assembly import assemble, build_dof_map
    from .solver import solve

    meshes = list(meshes)
    if len(meshes) < 2:
        raise StudyError("a convergence study needs at least two levels")
    h = [m.h_max for m in meshes]
    if any(h1 >= h0 for h0, h1 in zip(h[:-1], h[1:])):
        raise StudyError(f"h_max must strictly decrease across levels, got {h}")
    records = []
    for mesh in meshes:
        dofs = build_dof_map(mesh)
        report = solve(assemble(mesh, spec, dofs))
        records.append(error_norms(mesh, spec, report.solution, dofs))
    return StudyReport(records=records)


def _fmt(x: float) -> str:
    return f"{x:.4e}"


def _fmt_order(o: float) -> str:
    return "" if math.isnan(o) else f"{o:.4f}"


def render_table(report: StudyReport, fmt: str = "markdown") -> str:
    """Render a study as CSV or a markdown table (5 significant digits)."""
    ord_u = report.orders("linf_solution")
    ord_g = report.orders("linf_gradient")
    if fmt == "csv":
        lines = [CSV_HEADER]
        for i, r in enumerate(report.records):
            lines.append(
                ",".join(
                    [
                        str(i + 1),
                        _fmt(r.h_max),
                        _fmt(r.linf_solution),
                        _fmt_order(ord_u[i]),
                        _fmt(r.linf_gradient),
                        _fmt_order(ord_g[i]),
                        _fmt(r.l2_solution),
                        _fmt(r.l2_lambda_flux),
                    ]
                )
            )
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        head = (
            "| Level | h_max | solution Linf | order | gradient Linf | order "
            "| solution L2 | flux L2 |"
        )
        rule = "|---|---|---|---|---|---|---|---|"
        lines = [head, rule]
        for i, r in enumerate(report.records):
            lines.append(
                "| "
                + " | ".join(
                    [
                        f"{i + 1}",
                        _fmt(r.h_max),
                        _fmt(r.linf_solution),
                        _fmt_order(ord_u[i]),
                        _fmt(r.linf_gradient),
                        _fmt_order(ord_g[i]),
                        _fmt(r.l2_solution),
                        _fmt(r.l2_lambda_flux),
                    ]
                )
                + " |"
            )
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown table format {fmt!r}")


def parse_study_csv(text: str) -> StudyReport:
    """Inverse of render_table(fmt='csv') up to the printed precision."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise StudyError("unrecognized study CSV header")
    records = []
    for ln in lines[1:]:
        tok = ln.split(",")
        records.append(
            ErrorRecord(
                h_max=float(tok[1]),
                linf_solution=float(tok[2]),
                linf_gradient=float(tok[4]),
                l2_solution=float(tok[6]),
                l2_lambda_flux=float(tok[7]),
            )
        )
    return StudyReport(records=records)
