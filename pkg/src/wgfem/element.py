"""Element-local kernels for the lowest-order weak Galerkin discretization.

A triangle is given by its three vertices in counterclockwise order. Local
edge i is the edge opposite vertex i, so it connects vertices (i+1) % 3 and
(i+2) % 3 and carries the outward unit normal n_i.

The Raviart-Thomas basis of lowest order used throughout is normalized by
total outward edge flux,

    phi_i(x) = (x - p_i) / (2 |K|),

with p_i the vertex opposite edge i. This gives

    int_{e_j} phi_i . n_j ds = delta_ij   and   int_K div phi_i dK = 1,

so the discrete weak gradient of a cell/edge pair (w0, wb) is the RT0 field
whose coefficient vector c solves M c = b with M the RT0 mass matrix of the
triangle and load b_i = wb_i - w0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ElementError",
    "RT0Basis",
    "ElementBatch",
    "TRI_QUAD_BARY",
    "TRI_QUAD_WEIGHTS",
    "TRI_QUAD_MID_BARY",
    "TRI_QUAD_MID_WEIGHTS",
    "EDGE_GAUSS_T",
    "EDGE_GAUSS_W",
    "rt0_mass_matrix",
    "weak_gradient",
    "project_cell",
    "project_edge",
    "rt0_interpolate",
    "eval_rt0",
]


class ElementError(Exception):
    """Degenerate triangle or a singular element-local system."""


# Six-point, degree-4 rule on the triangle (barycentric points, weights
# normalized to sum to one; multiply by |K| to integrate).
_A1, _B1, _W1 = 0.816847572980459, 0.091576213509771, 0.109951743655322
_A2, _B2, _W2 = 0.108103018168070, 0.445948490915965, 0.223381589678011
TRI_QUAD_BARY = np.array(
    [
        [_A1, _B1, _B1],
        [_B1, _A1, _B1],
        [_B1, _B1, _A1],
        [_A2, _B2, _B2],
        [_B2, _A2, _B2],
        [_B2, _B2, _A2],
    ]
)
TRI_QUAD_WEIGHTS = np.array([_W1, _W1, _W1, _W2, _W2, _W2])
TRI_QUAD_WEIGHTS = TRI_QUAD_WEIGHTS / TRI_QUAD_WEIGHTS.sum()

# Interior three-point rule, degree 2 (used for L2 norms of cell constants).
TRI_QUAD_MID_BARY = np.array(
    [
        [2 / 3, 1 / 6, 1 / 6],
        [1 / 6, 2 / 3, 1 / 6],
        [1 / 6, 1 / 6, 2 / 3],
    ]
)
TRI_QUAD_MID_WEIGHTS = np.full(3, 1 / 3)

# Three-point Gauss rule on [0, 1] (degree 5), weights sum to one.
_GS = 0.5 * np.sqrt(3.0 / 5.0)
EDGE_GAUSS_T = np.array([0.5 - _GS, 0.5, 0.5 + _GS])
EDGE_GAUSS_W = np.array([5.0, 8.0, 5.0]) / 18.0


@dataclass(frozen=True)
class RT0Basis:
    """Geometry of one triangle plus the derived RT0 edge data."""

    verts: np.ndarray  # (3, 2), counterclockwise
    area: float
    edge_len: np.ndarray  # (3,)
    normals: np.ndarray  # (3, 2) outward unit normals, edge i opposite vertex i

    @classmethod
    def from_vertices(cls, verts) -> "RT0Basis":
        verts = np.asarray(verts, dtype=float)
        if verts.shape != (3, 2):
            raise ElementError(f"expected (3, 2) vertex array, got {verts.shape}")
        d1 = verts[1] - verts[0]
        d2 = verts[2] - verts[0]
        area2 = d1[0] * d2[1] - d1[1] * d2[0]
        scale = max(np.abs(verts).max(), 1.0)
        if area2 <= 1e-14 * scale * scale:
            raise ElementError("triangle is degenerate or not counterclockwise")
        tang = verts[[2, 0, 1]] - verts[[1, 2, 0]]  # edge i: v_{i+1} -> v_{i+2}
        lens = np.linalg.norm(tang, axis=1)
        normals = np.column_stack([tang[:, 1], -tang[:, 0]]) / lens[:, None]
        return cls(verts=verts, area=0.5 * area2, edge_len=lens, normals=normals)

    @property
    def centroid(self) -> np.ndarray:
        return self.verts.mean(axis=0)

    def phi(self, x) -> np.ndarray:
        """RT0 basis values at points x of shape (..., 2); returns (..., 3, 2)."""
        x = np.asarray(x, dtype=float)
        return (x[..., None, :] - self.verts) / (2.0 * self.area)

    def quad_points(self) -> np.ndarray:
        return TRI_QUAD_BARY @ self.verts


def rt0_mass_matrix(basis: RT0Basis, coefficient=None) -> np.ndarray:
    """Weighted RT0 mass matrix M_ij = int_K a phi_i . phi_j dK.

    ``coefficient`` is a vectorized callable a(x, y) or None for a = 1. The
    quadrature (degree 4) is exact for constant a. Raises ElementError if the
    result is not symmetric positive definite.
    """
    x = basis.quad_points()
    phi = basis.phi(x)  # (6, 3, 2)
    a = np.ones(len(x)) if coefficient is None else np.asarray(
        coefficient(x[:, 0], x[:, 1]), dtype=float
    )
    w = TRI_QUAD_WEIGHTS * a * basis.area
    M = np.einsum("q,qid,qjd->ij", w, phi, phi)
    M = 0.5 * (M + M.T)
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise ElementError("RT0 mass matrix is not positive definite") from exc
    return M


def weak_gradient(basis: RT0Basis, w0: float, wb) -> np.ndarray:
    """RT0 coefficients of the weak gradient of the local pair (w0, wb)."""
    b = np.asarray(wb, dtype=float) - float(w0)
    M = rt0_mass_matrix(basis)
    try:
        return np.linalg.solve(M, b)
    except np.linalg.LinAlgError as exc:
        raise ElementError("singular RT0 mass matrix") from exc


def project_cell(f, verts) -> float:
    """Cell average of f over the triangle (degree-4 quadrature)."""
    verts = np.asarray(verts, dtype=float)
    x = TRI_QUAD_BARY @ verts
    vals = np.asarray(f(x[:, 0], x[:, 1]), dtype=float)
    return float(TRI_QUAD_WEIGHTS @ vals)


def project_edge(g, p0, p1) -> float:
    """Edge average of g over the segment p0-p1 (three-point Gauss)."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    x = p0 + EDGE_GAUSS_T[:, None] * (p1 - p0)
    vals = np.asarray(g(x[:, 0], x[:, 1]), dtype=float)
    return float(EDGE_GAUSS_W @ vals)


def rt0_interpolate(q, basis: RT0Basis) -> np.ndarray:
    """Edge-flux interpolant: c_i = int_{e_i} q . n_i ds by Gauss quadrature."""
    c = np.empty(3)
    for i in range(3):
        p0 = basis.verts[(i + 1) % 3]
        p1 = basis.verts[(i + 2) % 3]
        x = p0 + EDGE_GAUSS_T[:, None] * (p1 - p0)
        qv = np.asarray(q(x[:, 0], x[:, 1]), dtype=float)
        flux = qv @ basis.normals[i]
        c[i] = basis.edge_len[i] * (EDGE_GAUSS_W @ flux)
    return c


def eval_rt0(coeffs, basis: RT0Basis, x) -> np.ndarray:
    """Value of the RT0 field sum_i c_i phi_i at points x of shape (..., 2)."""
    coeffs = np.asarray(coeffs, dtype=float)
    return np.einsum("i,...id->...d", coeffs, basis.phi(x))


# Load map (w0, wb1, wb2, wb3) -> b with b_i = wb_i - w0.
_B_LOCAL = np.array(
    [
        [-1.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 1.0, 0.0],
        [-1.0, 0.0, 0.0, 1.0],
    ]
)


class ElementBatch:
    """Vectorized element kernels for all triangles of a mesh at once.

    Assembly and error evaluation loop over quadrature points (a handful)
    instead of elements, so everything stays in numpy. Results agree with the
    single-element functions above; the test suite cross-checks both paths.
    """

    def __init__(self, vertices, triangles):
        tri_pts = np.asarray(vertices, dtype=float)[np.asarray(triangles, dtype=int)]
        d1 = tri_pts[:, 1] - tri_pts[:, 0]
        d2 = tri_pts[:, 2] - tri_pts[:, 0]
        area2 = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        if np.any(area2 <= 0.0):
            bad = int(np.argmax(area2 <= 0.0))
            raise ElementError(f"triangle {bad} is degenerate or clockwise")
        self.tri_pts = tri_pts
        self.area = 0.5 * area2
        tang = tri_pts[:, [2, 0, 1]] - tri_pts[:, [1, 2, 0]]
        self.edge_len = np.linalg.norm(tang, axis=2)
        self.normals = np.stack([tang[..., 1], -tang[..., 0]], axis=-1)
        self.normals /= self.edge_len[..., None]
        self.centroids = tri_pts.mean(axis=1)
        self._mass_unit = None

    def __len__(self) -> int:
        return len(self.area)

    def quad_points(self) -> np.ndarray:
        """Degree-4 quadrature points, shape (T, 6, 2)."""
        return np.einsum("qb,tbd->tqd", TRI_QUAD_BARY, self.tri_pts)

    def phi_at(self, x) -> np.ndarray:
        """Basis values at per-triangle points x (T, ..., 2) -> (T, ..., 3, 2)."""
        return (x[..., None, :] - self.tri_pts[:, None, :, :]) / (
            2.0 * self.area[:, None, None, None]
        )

    def mass_matrices(self, coeff_q=None) -> np.ndarray:
        """RT0 mass matrices (T, 3, 3); coeff_q holds a(x) at the quad points."""
        if coeff_q is None and self._mass_unit is not None:
            return self._mass_unit
        x = self.quad_points()
        phi = self.phi_at(x)  # (T, 6, 3, 2)
        w = TRI_QUAD_WEIGHTS[None, :] * self.area[:, None]
        if coeff_q is not None:
            w = w * np.asarray(coeff_q, dtype=float)
        M = np.einsum("tq,tqid,tqjd->tij", w, phi, phi)
        M = 0.5 * (M + np.swapaxes(M, 1, 2))
        if coeff_q is None:
            self._mass_unit = M
        return M

    def gradient_operator(self) -> np.ndarray:
        """L of shape (T, 3, 4) mapping local (w0, wb) to weak-gradient coefficients."""
        M = self.mass_matrices()
        return np.linalg.solve(M, np.broadcast_to(_B_LOCAL, (len(self), 3, 4)))

    def stiffness(self, coeff_q) -> np.ndarray:
        """Local matrices of the weighted weak-gradient form, shape (T, 4, 4)."""
        L = self.gradient_operator()
        MA = self.mass_matrices(coeff_q)
        S = np.einsum("tai,tab,tbj->tij", L, MA, L)
        return 0.5 * (S + np.swapaxes(S, 1, 2))

    def weak_gradients(self, local_dofs) -> np.ndarray:
        """Weak-gradient coefficients (T, 3) of per-element (w0, wb1..3) values."""
        return np.einsum(
            "tij,tj->ti", self.gradient_operator(), np.asarray(local_dofs, dtype=float)
        )

    def eval_field(self, coeffs, x) -> np.ndarray:
        """Evaluate per-element RT0 fields at one point per element (T, 2)."""
        phi = (x[:, None, :] - self.tri_pts) / (2.0 * self.area[:, None, None])
        return np.einsum("ti,tid->td", np.asarray(coeffs, dtype=float), phi)
