"""Global assembly of the weak Galerkin saddle-point system.

Unknowns, in order: one constant per triangle (both regions), one constant
per non-Dirichlet edge side (interface edges carry two, one per region), and
one multiplier per interface edge. Dirichlet edges carry no unknown; their
edge constant is the Gauss average of the boundary data and its coupling
columns are folded into the right-hand side.

Per element K the local matrix is S = L^T M_a L where L maps the local
values (w0, wb1, wb2, wb3) to the coefficients of their weak gradient and
M_a is the coefficient-weighted RT0 mass matrix. A Helmholtz term subtracts
k^2 |K| from the cell diagonal. Each interface edge e of length |e| couples
its two edge unknowns to the multiplier with entries -|e| (region-1 side)
and +|e| (region-2 side), used symmetrically in the multiplier row, whose
right-hand side is -|e| times the edge average of the solution jump; the
flux-jump data loads the region-2 edge unknown. The assembled matrix is
symmetric.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .element import EDGE_GAUSS_T, EDGE_GAUSS_W, TRI_QUAD_WEIGHTS, ElementBatch
from .mesh import REGION1, REGION2, EdgeKind, TriMesh
from .problems import ProblemSpec

__all__ = [
    "AssemblyError",
    "WellPosednessError",
    "DofMap",
    "SparseSystem",
    "build_dof_map",
    "dirichlet_values",
    "assemble",
    "local_dof_values",
    "dump_matrixmarket",
]


class AssemblyError(Exception):
    pass


class WellPosednessError(AssemblyError):
    """The mesh cannot produce a uniquely solvable system."""


@dataclass(frozen=True)
class DofMap:
    n_unknowns: int
    cell_dof: np.ndarray  # (T,)
    edge_dof: np.ndarray  # (E, 2): column r-1 is the region-r side, -1 if none
    lambda_dof: np.ndarray  # (E,), -1 unless interface edge
    dirichlet: np.ndarray  # (E,) bool

    def element_dofs(self, mesh: TriMesh) -> np.ndarray:
        """Global indices (T, 4) of each element's cell and edge unknowns; -1
        marks a Dirichlet edge slot."""
        side = mesh.tri_region.astype(np.int64) - 1
        edofs = self.edge_dof[mesh.tri_edges, side[:, None]]
        return np.concatenate([self.cell_dof[:, None], edofs], axis=1)


def build_dof_map(mesh: TriMesh) -> DofMap:
    """Number the unknowns; raises WellPosednessError for meshes without the
    Dirichlet data needed to pin each region down."""
    kinds = mesh.edge_kind
    has_r1 = bool(np.any(mesh.tri_region == REGION1))
    dir_r1 = np.any((kinds == EdgeKind.DIRICHLET) & (mesh.edge_region == REGION1))
    if has_r1 and not dir_r1:
        raise WellPosednessError(
            "region 1 has no Dirichlet boundary edge; the system is singular"
        )
    has_r2 = bool(np.any(mesh.tri_region == REGION2))
    if has_r2:
        dir_r2 = np.any((kinds == EdgeKind.DIRICHLET) & (mesh.edge_region == REGION2))
        coupled = np.any(kinds == EdgeKind.INTERFACE)
        if not (dir_r2 or coupled):
            raise WellPosednessError(
                "region 2 has neither Dirichlet edges nor an interface coupling"
            )

    T = mesh.n_triangles
    E = mesh.n_edges
    cell_dof = np.arange(T, dtype=np.int64)
    edge_dof = np.full((E, 2), -1, dtype=np.int64)
    lambda_dof = np.full(E, -1, dtype=np.int64)
    next_dof = T
    for e in range(E):
        k = kinds[e]
        if k == EdgeKind.INTERIOR:
            edge_dof[e, mesh.edge_region[e] - 1] = next_dof
            next_dof += 1
        elif k == EdgeKind.INTERFACE:
            edge_dof[e, 0] = next_dof
            edge_dof[e, 1] = next_dof + 1
            next_dof += 2
    for e in np.flatnonzero(kinds == EdgeKind.INTERFACE):
        lambda_dof[e] = next_dof
        next_dof += 1
    return DofMap(
        n_unknowns=int(next_dof),
        cell_dof=cell_dof,
        edge_dof=edge_dof,
        lambda_dof=lambda_dof,
        dirichlet=kinds == EdgeKind.DIRICHLET,
    )


@dataclass(frozen=True)
class SparseSystem:
    """Triplet-form symmetric system. Triplets are kept in deterministic
    assembly order; ``matrix()`` sums duplicates into CSR."""

    n: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    rhs: np.ndarray

    def matrix(self) -> sp.csr_matrix:
        A = sp.coo_matrix(
            (self.vals, (self.rows, self.cols)), shape=(self.n, self.n)
        )
        return A.tocsr()


def _edge_gauss_points(mesh: TriMesh, eids: np.ndarray):
    p0 = mesh.vertices[mesh.edges[eids, 0]]
    p1 = mesh.vertices[mesh.edges[eids, 1]]
    pts = p0[:, None, :] + EDGE_GAUSS_T[None, :, None] * (p1 - p0)[:, None, :]
    return pts  # (n, 3, 2)


def dirichlet_values(mesh: TriMesh, spec: ProblemSpec, dofs: DofMap) -> np.ndarray:
    """Gauss averages of the boundary data on Dirichlet edges ((E,) array,
    zero elsewhere)."""
    g = np.zeros(mesh.n_edges)
    for region in (REGION1, REGION2):
        ids = np.flatnonzero(dofs.dirichlet & (mesh.edge_region == region))
        if len(ids) == 0:
            continue
        pts = _edge_gauss_points(mesh, ids)
        vals = spec.dirichlet(region, pts[..., 0], pts[..., 1])
        g[ids] = vals @ EDGE_GAUSS_W
    return g


def _per_region_values(mesh, spec, pts, fn):
    """Evaluate fn(region, x, y) at per-triangle points using each triangle's
    own region label."""
    out = np.empty(pts.shape[:-1])
    for region in (REGION1, REGION2):
        m = mesh.tri_region == region
        if m.any():
            out[m] = fn(region, pts[m][..., 0], pts[m][..., 1])
    return out


def assemble(mesh: TriMesh, spec: ProblemSpec, dofs: DofMap) -> SparseSystem:
    batch = ElementBatch(mesh.vertices, mesh.triangles)
    qpts = batch.quad_points()
    coeff = _per_region_values(mesh, spec, qpts, spec.coefficient)
    if np.any(coeff <= 0.0):
        raise AssemblyError("non-positive diffusion coefficient at a quadrature point")
    S = batch.stiffness(coeff)

    k2 = np.where(
        mesh.tri_region == REGION1, spec.k2(REGION1), spec.k2(REGION2)
    )
    S[:, 0, 0] -= k2 * batch.area

    gdof = dofs.element_dofs(mesh)  # (T, 4), -1 on Dirichlet slots
    gval = np.zeros_like(gdof, dtype=float)
    g_edge = dirichlet_values(mesh, spec, dofs)
    for i in range(3):
        e = mesh.tri_edges[:, i]
        fixed = dofs.dirichlet[e]
        gval[fixed, 1 + i] = g_edge[e[fixed]]

    rhs = np.zeros(dofs.n_unknowns)

    # volume load (f, w0)
    fq = _per_region_values(mesh, spec, qpts, spec.forcing)
    cell_load = batch.area * (fq @ TRI_QUAD_WEIGHTS)
    np.add.at(rhs, dofs.cell_dof, cell_load)

    # scatter local matrices, folding Dirichlet columns into the rhs
    T = len(batch)
    rows = np.repeat(gdof, 4, axis=1).ravel()
    cols = np.tile(gdof, (1, 4)).ravel()
    vals = S.reshape(T, 16).ravel()
    keep = (rows >= 0) & (cols >= 0)
    col_fixed = (rows >= 0) & (cols < 0)
    if col_fixed.any():
        gv = np.tile(gval, (1, 4)).ravel()
        np.add.at(rhs, rows[col_fixed], -vals[col_fixed] * gv[col_fixed])
    rows, cols, vals = rows[keep], cols[keep], vals[keep]

    # interface coupling and jump data
    eids = mesh.interface_edges()
    if len(eids):
        lengths = mesh.edge_lengths()[eids]
        u_dof = dofs.edge_dof[eids, 0]
        v_dof = dofs.edge_dof[eids, 1]
        l_dof = dofs.lambda_dof[eids]
        if np.any(u_dof < 0) or np.any(v_dof < 0) or np.any(l_dof < 0):
            raise AssemblyError("interface edge without the expected unknowns")
        irows = np.concatenate([u_dof, l_dof, v_dof, l_dof])
        icols = np.concatenate([l_dof, u_dof, l_dof, v_dof])
        ivals = np.concatenate([-lengths, -lengths, lengths, lengths])
        rows = np.concatenate([rows, irows])
        cols = np.concatenate([cols, icols])
        vals = np.concatenate([vals, ivals])

        pts = _edge_gauss_points(mesh, eids)
        normals = mesh.interface_normals()
        phi_avg = spec.phi(pts[..., 0], pts[..., 1]) @ EDGE_GAUSS_W
        psi_vals = spec.psi(
            pts[..., 0], pts[..., 1], np.broadcast_to(normals[:, None, :], pts.shape)
        )
        psi_avg = psi_vals @ EDGE_GAUSS_W
        # multiplier row carries <v_b - u_b, mu> = -<phi, mu>
        np.add.at(rhs, l_dof, -lengths * phi_avg)
        np.add.at(rhs, v_dof, lengths * psi_avg)

    return SparseSystem(
        n=dofs.n_unknowns,
        rows=rows.astype(np.int64),
        cols=cols.astype(np.int64),
        vals=vals,
        rhs=rhs,
    )


def local_dof_values(
    mesh: TriMesh, spec: ProblemSpec, dofs: DofMap, x: np.ndarray
) -> np.ndarray:
    """Per-element (w0, wb1, wb2, wb3) values of a solution vector, with
    Dirichlet slots filled from the boundary data."""
    gdof = dofs.element_dofs(mesh)
    vals = np.where(gdof >= 0, x[np.maximum(gdof, 0)], 0.0)
    g_edge = dirichlet_values(mesh, spec, dofs)
    for i in range(3):
        e = mesh.tri_edges[:, i]
        fixed = dofs.dirichlet[e]
        vals[fixed, 1 + i] = g_edge[e[fixed]]
    return vals


def dump_matrixmarket(system: SparseSystem, matrix_path, rhs_path) -> None:
    """Debug dump: symmetric MatrixMarket coordinate file plus a plain-text
    right-hand side (one value per line)."""
    A = system.matrix().tocoo()
    lower = A.row >= A.col
    lines = [
        "%%MatrixMarket matrix coordinate real symmetric",
        f"{system.n} {system.n} {int(lower.sum())}",
    ]
    order = np.lexsort((A.row[lower], A.col[lower]))
    r, c, v = A.row[lower][order], A.col[lower][order], A.data[lower][order]
    for i in range(len(r)):
        lines.append(f"{r[i] + 1} {c[i] + 1} {v[i]:.17g}")
    with open(matrix_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(rhs_path, "w") as fh:
        fh.write("\n".join(f"{b:.17g}" for b in system.rhs) + "\n")
