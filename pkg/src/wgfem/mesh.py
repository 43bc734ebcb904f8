"""Interface-fitted conforming triangle meshes.

A TriMesh stores a triangulation of a rectangle split into two regions by a
polyline interface that is resolved by mesh edges. Region 1 and region 2
triangles are labeled 1 and 2. Every edge is classified as interior to one
region, as a Dirichlet boundary edge of one region, or as an interface edge
(shared by one triangle of each region).

Meshes are immutable after construction; all arrays are marked read-only.

File format: Triangle-style .node/.ele text files, 1-based vertex indices
(0-based inputs are detected and accepted), '#' comments allowed. The writer
uses 17 significant digits so write/read round-trips reproduce coordinates
bit for bit. Region labels are never read from files; they are recomputed
from the caller's region predicate at triangle centroids.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy.spatial import cKDTree

from .cdt import Triangulation, TriangulationError
from .curves import Curve, Polyline, Rect

__all__ = [
    "REGION1",
    "REGION2",
    "EdgeKind",
    "MeshError",
    "MeshFormatError",
    "MeshTopologyError",
    "MeshGenerationError",
    "TriMesh",
    "MeshStats",
    "mesh_from_arrays",
    "ingest_mesh",
    "write_mesh",
    "mesh_stats",
    "generate_structured_fitted",
    "generate_curved_fitted",
    "refine_mesh",
]

REGION1 = 1
REGION2 = 2

# Tolerance factor for "vertex lies on the interface": times domain diameter.
GAMMA_TOL_FACTOR = 1e-9


class EdgeKind(IntEnum):
    INTERIOR = 0
    DIRICHLET = 1
    INTERFACE = 2


class MeshError(Exception):
    pass


class MeshFormatError(MeshError):
    """Malformed mesh file; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class MeshTopologyError(MeshError):
    pass


class MeshGenerationError(MeshError):
    pass


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray  # (N, 2) float64
    triangles: np.ndarray  # (T, 3) int32, counterclockwise
    tri_region: np.ndarray  # (T,) int8, REGION1 or REGION2
    edges: np.ndarray  # (E, 2) int32, sorted vertex pairs
    edge_kind: np.ndarray  # (E,) int8, EdgeKind values
    edge_region: np.ndarray  # (E,) int8, region for interior/Dirichlet, 0 for interface
    tri_edges: np.ndarray  # (T, 3) int32, edge index opposite local vertex i
    edge_tris: np.ndarray  # (E, 2) int32, adjacent triangles, -1 if boundary;
    #                         interface rows store (region-1 triangle, region-2 triangle)
    h_max: float

    def __post_init__(self):
        for arr in (
            self.vertices,
            self.triangles,
            self.tri_region,
            self.edges,
            self.edge_kind,
            self.edge_region,
            self.tri_edges,
            self.edge_tris,
        ):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def tri_coords(self) -> np.ndarray:
        return self.vertices[self.triangles]

    def areas(self) -> np.ndarray:
        p = self.tri_coords()
        return 0.5 * (
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
        )

    def centroids(self) -> np.ndarray:
        return self.tri_coords().mean(axis=1)

    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.linalg.norm(d, axis=1)

    def interface_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_kind == EdgeKind.INTERFACE)

    def interface_normals(self) -> np.ndarray:
        """Unit normals of interface edges pointing from region 1 into region 2."""
        eids = self.interface_edges()
        p0 = self.vertices[self.edges[eids, 0]]
        p1 = self.vertices[self.edges[eids, 1]]
        t = p1 - p0
        n = np.column_stack([t[:, 1], -t[:, 0]])
        n /= np.linalg.norm(n, axis=1)[:, None]
        c1 = self.centroids()[self.edge_tris[eids, 0]]
        c2 = self.centroids()[self.edge_tris[eids, 1]]
        wrong = np.einsum("ed,ed->e", n, c2 - c1) < 0.0
        n[wrong] = -n[wrong]
        return n

    def bbox(self) -> Rect:
        x0, y0 = self.vertices.min(axis=0)
        x1, y1 = self.vertices.max(axis=0)
        return Rect(float(x0), float(x1), float(y0), float(y1))


@dataclass(frozen=True)
class MeshStats:
    h_max: float
    n_tri: int
    n_edge: int
    n_interface_edge: int
    nonacute_fraction: float

    def __str__(self) -> str:
        return (
            f"h_max={self.h_max:.5e} triangles={self.n_tri} edges={self.n_edge} "
            f"interface_edges={self.n_interface_edge} "
            f"nonacute={self.nonacute_fraction:.4f}"
        )


def _build_edges(triangles: np.ndarray):
    """Edge table in first-seen order over triangles; edge i opposite vertex i."""
    edge_index: dict = {}
    edges = []
    tri_edges = np.empty(triangles.shape, dtype=np.int32)
    edge_tris = []
    for t, (a, b, c) in enumerate(triangles):
        for i, (u, v) in enumerate(((b, c), (c, a), (a, b))):
            key = (u, v) if u < v else (v, u)
            e = edge_index.get(key)
            if e is None:
                e = len(edges)
                edge_index[key] = e
                edges.append(key)
                edge_tris.append([t, -1])
            else:
                if edge_tris[e][1] != -1:
                    raise MeshTopologyError(
                        f"edge {key} is shared by more than two triangles"
                    )
                edge_tris[e][1] = t
            tri_edges[t, i] = e
    return (
        np.asarray(edges, dtype=np.int32),
        tri_edges,
        np.asarray(edge_tris, dtype=np.int32),
    )


def mesh_from_arrays(
    vertices,
    triangles,
    tri_region,
    interface_edge_keys: set | None = None,
    interface_test=None,
) -> TriMesh:
    """Assemble and validate a TriMesh from raw arrays.

    Interface edges are the edges whose two triangles carry different region
    labels. When ``interface_edge_keys`` is given (generator path), it must
    coincide with that set. When ``interface_test`` is given (ingest path),
    both endpoints of each region-separating edge must satisfy it.
    """
    vertices = np.ascontiguousarray(vertices, dtype=float)
    triangles = np.ascontiguousarray(triangles, dtype=np.int32)
    tri_region = np.ascontiguousarray(tri_region, dtype=np.int8)
    if not np.isfinite(vertices).all():
        raise MeshTopologyError("non-finite vertex coordinates")
    if triangles.min(initial=0) < 0 or triangles.max(initial=-1) >= len(vertices):
        raise MeshTopologyError("triangle vertex index out of range")

    p = vertices[triangles]
    area2 = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 1, 1] - p[:, 0, 1]
    ) * (p[:, 2, 0] - p[:, 0, 0])
    if np.any(area2 <= 0.0):
        bad = int(np.argmax(area2 <= 0.0))
        raise MeshTopologyError(f"triangle {bad} is degenerate or not counterclockwise")

    used = np.zeros(len(vertices), dtype=bool)
    used[triangles.ravel()] = True
    if not used.all():
        raise MeshTopologyError(f"{int((~used).sum())} vertices unused by triangles")

    edges, tri_edges, edge_tris = _build_edges(triangles)

    kind = np.empty(len(edges), dtype=np.int8)
    region = np.zeros(len(edges), dtype=np.int8)
    boundary = edge_tris[:, 1] < 0
    kind[boundary] = EdgeKind.DIRICHLET
    region[boundary] = tri_region[edge_tris[boundary, 0]]
    inner = ~boundary
    r0 = tri_region[edge_tris[:, 0]]
    r1 = np.where(inner, tri_region[np.where(inner, edge_tris[:, 1], 0)], 0)
    same = inner & (r0 == r1)
    kind[same] = EdgeKind.INTERIOR
    region[same] = r0[same]
    iface = inner & (r0 != r1)
    kind[iface] = EdgeKind.INTERFACE

    if interface_edge_keys is not None:
        found = {
            (int(edges[e, 0]), int(edges[e, 1])) for e in np.flatnonzero(iface)
        }
        if found != interface_edge_keys:
            raise MeshTopologyError(
                "region labels are inconsistent with the fitted interface: "
                f"{len(found ^ interface_edge_keys)} mismatched edges"
            )
    if interface_test is not None and iface.any():
        ids = np.flatnonzero(iface)
        for col in (0, 1):
            vv = vertices[edges[ids, col]]
            ok = np.asarray(interface_test(vv[:, 0], vv[:, 1]), dtype=bool)
            if not ok.all():
                raise MeshTopologyError(
                    "edge separates regions but its endpoints are not on the "
                    "interface (non-fitted mesh or wrong predicates)"
                )

    # canonicalize interface adjacency: first the region-1 triangle
    iface_ids = np.flatnonzero(iface)
    swap = tri_region[edge_tris[iface_ids, 0]] != REGION1
    edge_tris = edge_tris.copy()
    edge_tris[iface_ids[swap]] = edge_tris[iface_ids[swap]][:, ::-1]

    lengths = np.linalg.norm(
        vertices[edges[:, 1]] - vertices[edges[:, 0]], axis=1
    )
    return TriMesh(
        vertices=vertices,
        triangles=triangles,
        tri_region=tri_region,
        edges=edges,
        edge_kind=kind,
        edge_region=region,
        tri_edges=tri_edges,
        edge_tris=edge_tris,
        h_max=float(lengths.max()),
    )


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------


def _data_lines(stream):
    """Yield (lineno, tokens) for non-empty, non-comment lines."""
    for lineno, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("ascii")
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _open_stream(source):
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("ascii")
        return io.StringIO(data)
    return open(source, "r")


def read_node(source) -> np.ndarray:
    with _open_stream(source) as stream:
        lines = _data_lines(stream)
        try:
            lineno, header = next(lines)
        except StopIteration:
            raise MeshFormatError("empty .node file") from None
        try:
            n, dim = int(header[0]), int(header[1])
        except (ValueError, IndexError):
            raise MeshFormatError("bad .node header", lineno) from None
        if dim != 2:
            raise MeshFormatError(f"expected 2D nodes, got dim={dim}", lineno)
        coords = np.empty((n, 2))
        first_index = None
        for k in range(n):
            try:
                lineno, tok = next(lines)
            except StopIteration:
                raise MeshFormatError(f"expected {n} nodes, got {k}") from None
            try:
                idx = int(tok[0])
                x, y = float(tok[1]), float(tok[2])
            except (ValueError, IndexError):
                raise MeshFormatError("bad node line", lineno) from None
            if first_index is None:
                if idx not in (0, 1):
                    raise MeshFormatError(f"node numbering starts at {idx}", lineno)
                first_index = idx
            if idx - first_index != k:
                raise MeshFormatError(f"non-sequential node index {idx}", lineno)
            coords[k] = (x, y)
        if not np.isfinite(coords).all():
            raise MeshFormatError("non-finite node coordinates")
        return coords


def read_ele(source, n_nodes: int) -> np.ndarray:
    with _open_stream(source) as stream:
        lines = _data_lines(stream)
        try:
            lineno, header = next(lines)
        except StopIteration:
            raise MeshFormatError("empty .ele file") from None
        try:
            m, npe = int(header[0]), int(header[1])
        except (ValueError, IndexError):
            raise MeshFormatError("bad .ele header", lineno) from None
        if npe != 3:
            raise MeshFormatError(f"expected 3 nodes per element, got {npe}", lineno)
        tris = np.empty((m, 3), dtype=np.int64)
        first_index = None
        for k in range(m):
            try:
                lineno, tok = next(lines)
            except StopIteration:
                raise MeshFormatError(f"expected {m} elements, got {k}") from None
            try:
                idx = int(tok[0])
                v = [int(tok[1]), int(tok[2]), int(tok[3])]
            except (ValueError, IndexError):
                raise MeshFormatError("bad element line", lineno) from None
            if first_index is None:
                first_index = idx
            if first_index == 1:
                v = [w - 1 for w in v]
            if min(v) < 0 or max(v) >= n_nodes:
                raise MeshFormatError(f"vertex index out of range: {v}", lineno)
            tris[k] = v
        return tris


def ingest_mesh(node_file, ele_file, region_predicate, interface_predicate) -> TriMesh:
    """Read a .node/.ele pair and classify it with the given predicates.

    ``region_predicate(x, y)`` returns region ids (1 or 2) for arrays of
    centroid coordinates; ``interface_predicate(x, y)`` returns True where a
    point lies on the interface (within tolerance). Clockwise triangles in
    the file are reoriented rather than rejected.
    """
    vertices = read_node(node_file)
    triangles = read_ele(ele_file, len(vertices))
    p = vertices[triangles]
    area2 = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 1, 1] - p[:, 0, 1]
    ) * (p[:, 2, 0] - p[:, 0, 0])
    cw = area2 < 0.0
    triangles[cw] = triangles[cw][:, [0, 2, 1]]

    centroids = p.mean(axis=1)
    region = np.asarray(region_predicate(centroids[:, 0], centroids[:, 1]))
    region = region.astype(np.int8)
    if not np.isin(region, (REGION1, REGION2)).all():
        raise MeshTopologyError("region predicate returned values other than 1/2")
    on_gamma = np.asarray(interface_predicate(centroids[:, 0], centroids[:, 1]))
    if np.any(on_gamma):
        bad = int(np.argmax(on_gamma))
        raise MeshTopologyError(
            f"triangle {bad} has its centroid on the interface; "
            "refine or fit the mesh"
        )
    return mesh_from_arrays(
        vertices, triangles, region, interface_test=interface_predicate
    )


def write_mesh(mesh: TriMesh, node_path, ele_path) -> None:
    """Write .node/.ele files (1-based, 17 significant digits, reproducible)."""

    def _write(path, text):
        if hasattr(path, "write"):
            path.write(text)
        else:
            with open(path, "w") as fh:
                fh.write(text)

    lines = [f"{mesh.n_vertices} 2 0 0"]
    for i, (x, y) in enumerate(mesh.vertices, start=1):
        lines.append(f"{i} {x:.17g} {y:.17g}")
    _write(node_path, "\n".join(lines) + "\n")

    lines = [f"{mesh.n_triangles} 3 0"]
    for i, (a, b, c) in enumerate(mesh.triangles, start=1):
        lines.append(f"{i} {a + 1} {b + 1} {c + 1}")
    _write(ele_path, "\n".join(lines) + "\n")


def mesh_stats(mesh: TriMesh) -> MeshStats:
    p = mesh.tri_coords()
    # squared edge lengths opposite each vertex
    sq = np.empty((mesh.n_triangles, 3))
    for i in range(3):
        d = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
        sq[:, i] = np.einsum("td,td->t", d, d)
    # a triangle is non-acute when the largest angle exceeds 90 degrees,
    # i.e. the largest squared edge exceeds the sum of the other two
    largest = sq.max(axis=1)
    nonacute = largest > (sq.sum(axis=1) - largest) * (1.0 + 1e-12)
    return MeshStats(
        h_max=mesh.h_max,
        n_tri=mesh.n_triangles,
        n_edge=mesh.n_edges,
        n_interface_edge=int((mesh.edge_kind == EdgeKind.INTERFACE).sum()),
        nonacute_fraction=float(nonacute.mean()),
    )


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def _point_in_polygon(px: np.ndarray, py: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Crossing-number point-in-polygon test, vectorized over points."""
    inside = np.zeros(px.shape, dtype=bool)
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    for k in range(len(poly)):
        cond = (y0[k] > py) != (y1[k] > py)
        if not cond.any():
            continue
        sel = np.flatnonzero(cond)
        xc = x0[k] + (py[sel] - y0[k]) / (y1[k] - y0[k]) * (x1[k] - x0[k])
        inside[sel] ^= px[sel] < xc
    return inside


def _check_polyline_simple(chain_pts: list[np.ndarray], closed_flags: list[bool]):
    """Reject polylines whose segments cross or that revisit a point."""
    scale = max(
        float(np.abs(np.vstack(chain_pts)).max()), 1.0
    )
    for pts, closed in zip(chain_pts, closed_flags):
        # a revisited vertex is a pinch: two loops touching at one point
        loop = pts if not closed else np.vstack([pts, pts[:1]])
        interior = loop[:-1] if closed else loop
        uniq = np.unique(np.round(interior / (1e-12 * scale)), axis=0)
        if len(uniq) != len(interior):
            raise MeshGenerationError("interface polyline revisits a point")
    starts, ends = [], []
    for pts, closed in zip(chain_pts, closed_flags):
        starts.append(pts[:-1])
        ends.append(pts[1:])
        if closed:
            starts.append(pts[-1:])
            ends.append(pts[:1])
    p = np.vstack(starts)
    q = np.vstack(ends)
    n = len(p)
    step = max(1, int(2e6 / max(n, 1)))
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        pa, qa = p[lo:hi, None, :], q[lo:hi, None, :]
        pb, qb = p[None, :, :], q[None, :, :]
        d = qa - pa
        o1 = d[..., 0] * (pb[..., 1] - pa[..., 1]) - d[..., 1] * (pb[..., 0] - pa[..., 0])
        o2 = d[..., 0] * (qb[..., 1] - pa[..., 1]) - d[..., 1] * (qb[..., 0] - pa[..., 0])
        e = qb - pb
        o3 = e[..., 0] * (pa[..., 1] - pb[..., 1]) - e[..., 1] * (pa[..., 0] - pb[..., 0])
        o4 = e[..., 0] * (qa[..., 1] - pb[..., 1]) - e[..., 1] * (qa[..., 0] - pb[..., 0])
        # strict signs: segments sharing an endpoint never count as crossing
        if np.any((o1 * o2 < 0.0) & (o3 * o4 < 0.0)):
            raise MeshGenerationError("interface polyline intersects itself")


def _close_chain_with_boundary(chain: np.ndarray, domain: Rect) -> np.ndarray:
    """Close an open chain into a polygon by walking the rectangle boundary
    counterclockwise from the chain's end back to its start."""
    t_end = domain.perimeter_coordinate(*chain[-1])
    t_start = domain.perimeter_coordinate(*chain[0])
    w, h = domain.width, domain.height
    total = 2 * (w + h)
    corners = domain.corners()
    corner_t = np.array([0.0, w, w + h, 2 * w + h])
    span = (t_start - t_end) % total
    if span == 0.0:
        return chain
    extra = []
    for k in np.argsort(corner_t):
        dt = (corner_t[k] - t_end) % total
        if 1e-12 * total < dt < span - 1e-12 * total:
            extra.append((dt, corners[k]))
    extra.sort(key=lambda item: item[0])
    return np.vstack([chain] + [p for _, p in extra]) if extra else chain


def _classify_regions(
    centroids: np.ndarray,
    chains: list[tuple[np.ndarray, bool]],
    region_predicate,
    domain: Rect,
):
    """Region ids per triangle, consistent with the polygonal interface.

    Far from the interface the analytic predicate decides; within a couple of
    chord lengths the polygon side decides, so chord sag can never produce a
    label that contradicts the fitted interface edges.
    """
    px, py = centroids[:, 0], centroids[:, 1]
    if not chains:
        region = np.asarray(region_predicate(px, py), dtype=np.int8)
        return region
    if len(chains) > 1:
        raise MeshGenerationError("multiple interface chains are not supported")
    chain, closed = chains[0]
    polygon = chain if closed else _close_chain_with_boundary(chain, domain)

    seg_len = np.linalg.norm(np.diff(chain, axis=0), axis=1)
    max_seg = float(seg_len.max())
    tree = cKDTree(chain)
    dist, _ = tree.query(centroids, k=1)

    near = dist <= 3.0 * max_seg
    region = np.empty(len(centroids), dtype=np.int8)
    if (~near).any():
        region[~near] = np.asarray(
            region_predicate(px[~near], py[~near]), dtype=np.int8
        )
    if near.any():
        inside = _point_in_polygon(px[near], py[near], polygon)
        # map polygon sides to region ids by probing the predicate at the
        # centroid farthest from the chain on each side
        nidx = np.flatnonzero(near)
        rid_in, rid_out = None, None
        for side, mask in (("in", inside), ("out", ~inside)):
            if mask.any():
                sel = nidx[mask]
                far = sel[np.argmax(dist[sel])]
                rid = int(np.asarray(region_predicate(px[far], py[far])))
                if side == "in":
                    rid_in = rid
                else:
                    rid_out = rid
        if rid_in is None and rid_out is not None:
            rid_in = REGION1 + REGION2 - rid_out
        if rid_out is None and rid_in is not None:
            rid_out = REGION1 + REGION2 - rid_in
        if rid_in is None or rid_in == rid_out:
            raise MeshGenerationError("cannot orient regions against the interface")
        region[near] = np.where(inside, rid_in, rid_out).astype(np.int8)

    # sanity: predicate must agree wherever the chord approximation is clean
    check = dist > 0.75 * max_seg
    if check.any():
        want = np.asarray(region_predicate(px[check], py[check]), dtype=np.int8)
        bad = want != region[check]
        if bad.any():
            raise MeshGenerationError(
                f"{int(bad.sum())} triangles classify against the region "
                "predicate away from the interface"
            )
    return region


def _dedupe_chain(chain: np.ndarray, closed: bool, tol: float) -> np.ndarray:
    keep = [0]
    for i in range(1, len(chain)):
        if np.linalg.norm(chain[i] - chain[keep[-1]]) > tol:
            keep.append(i)
    pts = chain[keep]
    if closed and len(pts) > 2 and np.linalg.norm(pts[0] - pts[-1]) <= tol:
        pts = pts[:-1]
    return pts


def _clip_chain_at_boundary(chain: np.ndarray, domain: Rect, spacing: float):
    """Drop samples that hug the domain boundary near an open chain's endpoints.

    Interfaces that meet the boundary at a shallow angle (or tangentially)
    would otherwise force sliver triangles between the interface and the
    boundary. The endpoint itself always stays; the first kept sample is
    reconnected to it by a chord.
    """
    tol = 1e-9 * domain.diameter
    lo = 0.35 * spacing
    n = len(chain)
    if domain.boundary_distance(*chain[0]) <= tol:
        k = 1
        while (
            k < n - 2
            and (
                domain.boundary_distance(*chain[k]) < lo
                or np.linalg.norm(chain[k] - chain[0]) < 0.5 * spacing
            )
        ):
            k += 1
        chain = np.vstack([chain[0], chain[k:]])
        n = len(chain)
    if domain.boundary_distance(*chain[-1]) <= tol:
        k = n - 2
        while (
            k > 1
            and (
                domain.boundary_distance(*chain[k]) < lo
                or np.linalg.norm(chain[k] - chain[-1]) < 0.5 * spacing
            )
        ):
            k -= 1
        chain = np.vstack([chain[: k + 1], chain[-1]])
    return chain


def _fitted_mesh(
    domain: Rect,
    nx: int,
    ny: int,
    chains: list[tuple[np.ndarray, bool]],
    region_predicate,
    smooth_iterations: int = 0,
    exclusion_factor: float = 0.6,
    exclusion_clamp: bool = True,
) -> TriMesh:
    """Shared generator core: grid + interface points, Delaunay, constraints."""
    sx = domain.width / nx
    sy = domain.height / ny
    gx = domain.x0 + sx * np.arange(nx + 1)
    gy = domain.y0 + sy * np.arange(ny + 1)
    gx[-1], gy[-1] = domain.x1, domain.y1
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    grid = np.column_stack([X.ravel(), Y.ravel()])

    if not chains:
        # plain structured triangulation, fixed diagonal direction
        tris = []
        for i in range(nx):
            for j in range(ny):
                v00 = i * (ny + 1) + j
                v10 = (i + 1) * (ny + 1) + j
                v01 = v00 + 1
                v11 = v10 + 1
                tris.append((v00, v10, v11))
                tris.append((v00, v11, v01))
        region = np.asarray(region_predicate(*grid[np.asarray(tris)].mean(axis=1).T))
        return mesh_from_arrays(grid, np.asarray(tris), region, interface_edge_keys=set())

    tol = 1e-9 * domain.diameter
    corners = domain.corners()

    # assemble the unique interface points, snapping onto coincident grid points
    chain_pts: list[np.ndarray] = []
    for pts, closed in chains:
        pts = _dedupe_chain(pts, closed, 0.05 * min(sx, sy))
        if len(pts) < 2:
            raise MeshGenerationError("interface chain collapsed during deduping")
        chain_pts.append(pts)

    _check_polyline_simple(chain_pts, [closed for _, closed in chains])

    all_chain = np.vstack(chain_pts)
    grid_tree = cKDTree(grid)
    d_snap, idx_snap = grid_tree.query(all_chain, k=1)
    snapped = d_snap <= tol
    all_chain = all_chain.copy()
    all_chain[snapped] = grid[idx_snap[snapped]]

    # local target spacing along the interface, per interface point
    local = np.empty(len(all_chain))
    off = 0
    for pts, (_, closed) in zip(chain_pts, chains):
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if closed:
            seg = np.append(seg, np.linalg.norm(pts[0] - pts[-1]))
            per_pt = 0.5 * (seg + np.roll(seg, 1))
        else:
            per_pt = 0.5 * (np.append(seg, seg[-1]) + np.insert(seg, 0, seg[0]))
        local[off : off + len(pts)] = per_pt
        off += len(pts)

    # drop grid points inside the exclusion band around the interface
    iface_tree = cKDTree(all_chain)
    dist, nearest = iface_tree.query(grid, k=1)
    r_local = local[nearest]
    if exclusion_clamp:
        r_local = np.minimum(r_local, np.hypot(sx, sy))
    keep = dist > exclusion_factor * r_local
    keep[grid_tree.query(corners, k=1)[1]] = True  # never drop domain corners
    # grid points coincident with interface points are replaced by them
    keep &= dist > tol

    points = grid[keep]
    index_of = {(x, y): i for i, (x, y) in enumerate(points)}
    new_pts: list[tuple[float, float]] = []
    chain_ids: list[np.ndarray] = []
    off = 0
    for pts in chain_pts:
        ids = np.empty(len(pts), dtype=np.int64)
        for k, (x, y) in enumerate(all_chain[off : off + len(pts)]):
            key = (x, y)
            if key not in index_of:
                index_of[key] = len(points) + len(new_pts)
                new_pts.append(key)
            ids[k] = index_of[key]
        chain_ids.append(ids)
        off += len(pts)
    if new_pts:
        points = np.vstack([points, np.asarray(new_pts)])

    try:
        tri = Triangulation.delaunay(points)
        for ids, (chain, closed) in zip(chain_ids, chains):
            pairs = list(zip(ids[:-1], ids[1:]))
            if closed:
                pairs.append((ids[-1], ids[0]))
            for u, v in pairs:
                tri.insert_constraint(int(u), int(v))
        tri.legalize()
        if smooth_iterations > 0:
            # relax only the band near the interface; the structured interior
            # is already optimal and umbrella averaging would perturb it
            fixed = np.ones(len(points), dtype=bool)
            d_chain, _ = iface_tree.query(points, k=1)
            fixed[d_chain <= 3.0 * max(sx, sy)] = False
            onb = (
                (np.abs(points[:, 0] - domain.x0) <= tol)
                | (np.abs(points[:, 0] - domain.x1) <= tol)
                | (np.abs(points[:, 1] - domain.y0) <= tol)
                | (np.abs(points[:, 1] - domain.y1) <= tol)
            )
            fixed[onb] = True
            for ids in chain_ids:
                fixed[ids] = True
            tri = tri.smoothed(fixed, smooth_iterations)
            points = tri.points
    except TriangulationError as exc:
        raise MeshGenerationError(str(exc)) from exc

    triangles = tri.triangle_array()
    centroids = points[triangles].mean(axis=1)
    sample_chains = [(points[ids], closed) for ids, (_, closed) in zip(chain_ids, chains)]
    region = _classify_regions(centroids, sample_chains, region_predicate, domain)
    iface_keys = set()
    for ids, (chain, closed) in zip(chain_ids, chains):
        pairs = list(zip(ids[:-1], ids[1:]))
        if closed:
            pairs.append((ids[-1], ids[0]))
        iface_keys |= {(min(u, v), max(u, v)) for u, v in map(tuple, pairs)}
    iface_keys = {(int(u), int(v)) for u, v in iface_keys}
    return mesh_from_arrays(points, triangles, region, interface_edge_keys=iface_keys)


def _all_region1(x, y):
    return np.full(np.shape(x), REGION1, dtype=np.int8)


def generate_structured_fitted(
    domain: Rect,
    n: float,
    interface_polyline,
    region_predicate=None,
    smooth_iterations: int = 0,
) -> TriMesh:
    """Uniform triangulation with ``n`` subdivisions per unit length whose edge
    set resolves every segment of ``interface_polyline``.

    Polyline vertices become mesh vertices; each segment is subdivided at
    roughly the grid pitch and recovered as a run of collinear mesh edges.
    An empty polyline yields the plain structured mesh.
    """
    nx = max(1, int(round(domain.width * n)))
    ny = max(1, int(round(domain.height * n)))
    poly = np.asarray(interface_polyline, dtype=float).reshape(-1, 2)
    if len(poly) == 0:
        return _fitted_mesh(domain, nx, ny, [], region_predicate or _all_region1,
                            smooth_iterations)
    if region_predicate is None:
        raise MeshGenerationError("a region predicate is required with an interface")
    spacing = min(domain.width / nx, domain.height / ny)
    closed = bool(np.linalg.norm(poly[0] - poly[-1]) <= 1e-12 * domain.diameter)
    if closed:
        poly = poly[:-1]
    curve = Polyline(poly, closed=closed)
    samples = max(len(poly), int(np.ceil(curve.perimeter() / spacing)))
    chain = curve.chains(samples)[0]
    if not closed:
        chain = _clip_chain_at_boundary(chain, domain, spacing)
    return _fitted_mesh(
        domain, nx, ny, [(chain, closed)], region_predicate, smooth_iterations
    )


def refine_mesh(mesh: TriMesh, curve: Curve | None = None,
                relax: bool = True) -> TriMesh:
    """Uniform red refinement: each triangle splits into four by its edge
    midpoints, halving h_max.

    With ``curve`` given, midpoints of interface edges are projected back
    onto the curve so the refined mesh stays fitted to it at the new nodes.
    A projection that would move a midpoint by more than a quarter of its
    edge length is skipped; this keeps deliberate polygonal shortcuts (for
    example where a curve meets the boundary tangentially) intact instead of
    reintroducing sliver geometry. Children inherit their parent's region.

    ``relax`` runs a Lawson pass afterwards: snapping breaks the local
    Delaunay property next to the interface, and the repair flips never
    cross the interface or mix regions. Away from snapped nodes red
    refinement preserves local Delaunayhood up to cocircular ties, so the
    pass leaves the rest of the mesh untouched.
    """
    V = mesh.vertices
    nV = len(V)
    mid = 0.5 * (V[mesh.edges[:, 0]] + V[mesh.edges[:, 1]])
    snapped_any = False
    if curve is not None:
        ie = mesh.interface_edges()
        if len(ie):
            snapped = curve.project(mid[ie])
            move = np.linalg.norm(snapped - mid[ie], axis=1)
            lens = mesh.edge_lengths()[ie]
            ok = move <= 0.25 * lens
            # where the curve runs tangentially into the boundary, snapping
            # would wedge sliver cells between the interface and the boundary
            # at every level; such midpoints stay on their chord
            box = mesh.bbox()
            clearance = box.boundary_distance(snapped[:, 0], snapped[:, 1])
            ok &= (clearance >= 0.25 * lens) | (move <= 1e-12 * box.diameter)
            mid[ie[ok]] = snapped[ok]
            snapped_any = bool(ok.any())
    new_vertices = np.vstack([V, mid])

    me = nV + mesh.tri_edges  # midpoint vertex of the edge opposite vertex i
    a, b, c = mesh.triangles[:, 0], mesh.triangles[:, 1], mesh.triangles[:, 2]
    ma, mb, mc = me[:, 0], me[:, 1], me[:, 2]
    children = np.empty((4 * mesh.n_triangles, 3), dtype=np.int64)
    children[0::4] = np.column_stack([a, mc, mb])
    children[1::4] = np.column_stack([b, ma, mc])
    children[2::4] = np.column_stack([c, mb, ma])
    children[3::4] = np.column_stack([ma, mb, mc])
    regions = np.repeat(mesh.tri_region, 4)

    keys = set()
    for e in mesh.interface_edges():
        u, v = (int(w) for w in mesh.edges[e])
        m = int(nV + e)
        keys.add((min(u, m), max(u, m)))
        keys.add((min(v, m), max(v, m)))

    if relax and snapped_any:
        tri = Triangulation(new_vertices, children, payload=list(regions))
        for key in keys:
            if key not in tri.edge2t:
                raise MeshGenerationError("interface edge lost during refinement")
            tri.constrained.add(key)
        try:
            tri.legalize()
        except TriangulationError as exc:
            raise MeshGenerationError(str(exc)) from exc
        children = tri.triangle_array()
        regions = tri.payload_array().astype(np.int8)
    return mesh_from_arrays(new_vertices, children, regions, interface_edge_keys=keys)


def generate_curved_fitted(
    domain: Rect,
    target_h: float,
    curve: Curve,
    region_predicate,
    samples: int | None = None,
    smooth_iterations: int = 0,
    samples_per_h: float = 4.0,
    exclusion_factor: float = 0.6,
    exclusion_clamp: bool = True,
    h_tolerance: float = 0.0,
) -> TriMesh:
    """Interface-fitted triangulation with ``h_max <= target_h``.

    The curve is sampled into a polyline (``samples`` points, or about
    ``samples_per_h`` per target h along the curve by default), the polyline
    is imposed as constrained edges on a uniform background grid, and grid
    resolution is increased until the longest edge is below ``target_h``.
    With coarse interface sampling the band of triangles touching the
    polyline can contain edges slightly above the grid scale no matter how
    fine the grid; ``h_tolerance`` relaxes the acceptance to
    ``target_h * (1 + h_tolerance)`` for that case.
    """
    if target_h <= 0:
        raise MeshGenerationError("target_h must be positive")
    if samples is None:
        samples = max(64, int(np.ceil(samples_per_h * curve.perimeter() / target_h)))
    spacing = target_h / np.sqrt(2.0)
    chains_raw = curve.chains(samples)
    nx = max(2, int(np.ceil(domain.width / spacing)))
    ny = max(2, int(np.ceil(domain.height / spacing)))
    best = None
    for _ in range(5):
        chains = []
        for pts in chains_raw:
            chain = np.asarray(pts, dtype=float)
            if not curve.closed:
                chain = _clip_chain_at_boundary(
                    chain, domain, min(domain.width / nx, domain.height / ny)
                )
            chains.append((chain, curve.closed))
        mesh = _fitted_mesh(
            domain, nx, ny, chains, region_predicate, smooth_iterations,
            exclusion_factor=exclusion_factor, exclusion_clamp=exclusion_clamp,
        )
        if best is None or mesh.h_max < best.h_max:
            best = mesh
        if mesh.h_max <= target_h * (1.0 + 1e-12):
            return mesh
        grow = mesh.h_max / target_h
        nx = int(np.ceil(nx * grow))
        ny = int(np.ceil(ny * grow))
    if best.h_max <= target_h * (1.0 + h_tolerance):
        return best
    raise MeshGenerationError(
        f"could not reach target h_max {target_h:g} (got {best.h_max:g})"
    )
