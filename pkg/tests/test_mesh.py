"""Mesh construction, classification, file I/O, and the fitted generators."""

import io

import numpy as np
import pytest

from conftest import SQUARE, X_SPLIT_LINE, x_split_region
from wgfem.curves import Polyline, Rect
from wgfem.mesh import (
    REGION1,
    REGION2,
    EdgeKind,
    MeshFormatError,
    MeshGenerationError,
    MeshTopologyError,
    generate_curved_fitted,
    generate_structured_fitted,
    ingest_mesh,
    mesh_from_arrays,
    mesh_stats,
    refine_mesh,
    write_mesh,
)
from wgfem.problems import builtin_problem
from wgfem.studies import study_meshes

ALL_REGION1 = lambda x, y: np.full(np.shape(x), REGION1, dtype=np.int8)
NEVER_ON_GAMMA = lambda x, y: np.zeros(np.shape(x), dtype=bool)

TWO_TRI_NODE = """\
4 2 0 0
1 0.0 0.0
2 1.0 0.0
3 1.0 1.0
4 0.0 1.0
"""
TWO_TRI_ELE = """\
2 3 0
1 1 2 3
2 1 3 4
"""


class TestIngest:
    def test_two_triangle_square(self):
        mesh = ingest_mesh(
            io.StringIO(TWO_TRI_NODE),
            io.StringIO(TWO_TRI_ELE),
            ALL_REGION1,
            NEVER_ON_GAMMA,
        )
        st = mesh_stats(mesh)
        assert st.n_tri == 2
        assert st.n_edge == 5
        assert st.n_interface_edge == 0
        assert (mesh.edge_kind == EdgeKind.DIRICHLET).sum() == 4
        assert st.h_max == pytest.approx(np.sqrt(2.0), rel=1e-15)

    def test_clockwise_elements_reoriented(self):
        ele_cw = "2 3 0\n1 1 3 2\n2 1 4 3\n"
        mesh = ingest_mesh(
            io.StringIO(TWO_TRI_NODE),
            io.StringIO(ele_cw),
            ALL_REGION1,
            NEVER_ON_GAMMA,
        )
        assert (mesh.areas() > 0).all()

    def test_x_split_classification(self):
        # 2x2 structured square mesh on [-1,1]^2 with the interface on x = 0
        mesh = generate_structured_fitted(
            SQUARE, 1, X_SPLIT_LINE, region_predicate=x_split_region
        )
        node, ele = io.StringIO(), io.StringIO()
        write_mesh(mesh, node, ele)
        on_gamma = lambda x, y: np.abs(np.asarray(x)) < 1e-9
        back = ingest_mesh(
            io.StringIO(node.getvalue()),
            io.StringIO(ele.getvalue()),
            x_split_region,
            on_gamma,
        )
        ie = back.interface_edges()
        mid = 0.5 * (back.vertices[back.edges[ie, 0]] + back.vertices[back.edges[ie, 1]])
        assert np.abs(mid[:, 0]).max() == 0.0
        xs = back.vertices[back.edges[ie]].reshape(-1, 2)[:, 0]
        assert np.abs(xs).max() == 0.0

    def test_malformed_node_reports_line(self):
        bad = "4 2 0 0\n1 0.0 0.0\n2 oops 0.0\n3 1.0 1.0\n4 0.0 1.0\n"
        with pytest.raises(MeshFormatError) as err:
            ingest_mesh(io.StringIO(bad), io.StringIO(TWO_TRI_ELE),
                        ALL_REGION1, NEVER_ON_GAMMA)
        assert err.value.line == 3

    def test_nonconforming_rejected(self):
        # three triangles sharing the same edge
        node = "4 2 0 0\n1 0 0\n2 1 0\n3 0 1\n4 1 1\n"
        ele = "3 3 0\n1 1 2 3\n2 1 2 4\n3 2 1 4\n"
        with pytest.raises(MeshTopologyError):
            ingest_mesh(io.StringIO(node), io.StringIO(ele),
                        ALL_REGION1, NEVER_ON_GAMMA)

    def test_region_interface_disagreement_rejected(self):
        # regions differ across an edge whose endpoints are not on the
        # claimed interface
        mesh = generate_structured_fitted(
            SQUARE, 1, X_SPLIT_LINE, region_predicate=x_split_region
        )
        node, ele = io.StringIO(), io.StringIO()
        write_mesh(mesh, node, ele)
        with pytest.raises(MeshTopologyError):
            ingest_mesh(
                io.StringIO(node.getvalue()),
                io.StringIO(ele.getvalue()),
                x_split_region,
                NEVER_ON_GAMMA,
            )

    def test_centroid_on_interface_rejected(self):
        with pytest.raises(MeshTopologyError):
            ingest_mesh(
                io.StringIO(TWO_TRI_NODE),
                io.StringIO(TWO_TRI_ELE),
                ALL_REGION1,
                lambda x, y: np.ones(np.shape(x), dtype=bool),
            )

    def test_roundtrip_identity(self, mesh_circle_coarse):
        spec = builtin_problem(1)
        node, ele = io.StringIO(), io.StringIO()
        write_mesh(mesh_circle_coarse, node, ele)
        back = ingest_mesh(
            io.StringIO(node.getvalue()),
            io.StringIO(ele.getvalue()),
            spec.region_predicate,
            spec.interface_predicate,
        )
        assert np.array_equal(back.vertices, mesh_circle_coarse.vertices)
        assert np.array_equal(back.triangles, mesh_circle_coarse.triangles)
        assert np.array_equal(back.tri_region, mesh_circle_coarse.tri_region)
        assert np.array_equal(back.edge_kind, mesh_circle_coarse.edge_kind)


class TestStructuredGenerator:
    def test_uniform_counts(self):
        # n x n cells: 2 n^2 triangles, 3 n^2 + 2 n edges
        mesh = generate_structured_fitted(SQUARE, 5, [])
        st = mesh_stats(mesh)
        n = 10
        assert st.n_tri == 2 * n * n
        assert st.n_edge == 3 * n * n + 2 * n
        assert st.n_interface_edge == 0
        assert abs(mesh.areas().sum() - 4.0) <= 1e-12 * 4.0

    def test_x_split_interface_count(self):
        n = 5
        mesh = generate_structured_fitted(
            SQUARE, n, X_SPLIT_LINE, region_predicate=x_split_region
        )
        assert mesh_stats(mesh).n_interface_edge == 2 * n
        ie = mesh.interface_edges()
        mid = 0.5 * (mesh.vertices[mesh.edges[ie, 0]] + mesh.vertices[mesh.edges[ie, 1]])
        assert np.abs(mid[:, 0]).max() == 0.0

    def test_kinked_interface_vertices(self):
        spec = builtin_problem(8)
        mesh = generate_structured_fitted(
            spec.domain, 2.5, spec.curve.points, region_predicate=spec.region_predicate
        )
        # the interface corner is a mesh vertex and both slopes appear
        d = np.linalg.norm(mesh.vertices, axis=1)
        assert d.min() <= 1e-12
        ie = mesh.interface_edges()
        tang = (
            mesh.vertices[mesh.edges[ie, 1]] - mesh.vertices[mesh.edges[ie, 0]]
        )
        slopes = tang[:, 1] / tang[:, 0]
        assert np.any(np.abs(slopes - 2.0) < 1e-9)
        assert np.any(np.abs(slopes + 0.5) < 1e-9)

    def test_generator_ingest_consistency(self):
        spec = builtin_problem(8)
        mesh = generate_structured_fitted(
            spec.domain, 2.5, spec.curve.points, region_predicate=spec.region_predicate
        )
        node, ele = io.StringIO(), io.StringIO()
        write_mesh(mesh, node, ele)
        back = ingest_mesh(
            io.StringIO(node.getvalue()),
            io.StringIO(ele.getvalue()),
            spec.region_predicate,
            spec.interface_predicate,
        )
        assert mesh_stats(back) == mesh_stats(mesh)

    def test_self_intersecting_polyline_rejected(self):
        bowtie = [(-0.5, -0.5), (0.5, 0.5), (0.5, -0.5), (-0.5, 0.5)]
        with pytest.raises(MeshGenerationError):
            generate_structured_fitted(
                SQUARE, 4, bowtie, region_predicate=x_split_region
            )

    def test_interface_requires_predicate(self):
        with pytest.raises(MeshGenerationError):
            generate_structured_fitted(SQUARE, 2, X_SPLIT_LINE)


class TestCurvedGenerator:
    def test_circle_h_target(self, mesh_circle_coarse):
        st = mesh_stats(mesh_circle_coarse)
        assert abs(st.h_max - 2.8553e-01) / 2.8553e-01 <= 0.10
        assert st.n_interface_edge >= 12
        assert abs(mesh_circle_coarse.areas().sum() - 4.0) <= 1e-6 * 4.0

    def test_reference_level2_h(self):
        spec = builtin_problem(1)
        meshes = study_meshes(spec, levels=2)
        assert abs(meshes[1].h_max - 1.5110e-01) / 1.5110e-01 <= 0.10

    def test_interface_vertices_on_circle(self, mesh_circle_coarse):
        ie = mesh_circle_coarse.interface_edges()
        pts = mesh_circle_coarse.vertices[
            np.unique(mesh_circle_coarse.edges[ie].ravel())
        ]
        r = np.hypot(pts[:, 0], pts[:, 1])
        assert np.abs(r - 0.5).max() <= 1e-9 * SQUARE.diameter

    def test_ellipse_vertices_on_curve(self):
        spec = builtin_problem(3)
        mesh = generate_curved_fitted(
            spec.domain, 0.45, spec.curve, spec.region_predicate
        )
        ie = mesh.interface_edges()
        pts = mesh.vertices[np.unique(mesh.edges[ie].ravel())]
        level = (pts[:, 0] / (10 / 27)) ** 2 + (pts[:, 1] / (18 / 27)) ** 2
        assert np.abs(level - 1.0).max() <= 1e-9

    def test_flower_winding_number(self):
        spec = builtin_problem(4)
        mesh = generate_curved_fitted(
            spec.domain, 0.35, spec.curve, spec.region_predicate
        )
        ie = mesh.interface_edges()
        # order the interface vertices into a loop and accumulate the turn
        nbr = {}
        for u, v in mesh.edges[ie]:
            nbr.setdefault(int(u), []).append(int(v))
            nbr.setdefault(int(v), []).append(int(u))
        start = next(iter(nbr))
        loop = [start, nbr[start][0]]
        while loop[-1] != start:
            a, b = nbr[loop[-1]]
            loop.append(a if a != loop[-2] else b)
        pts = mesh.vertices[loop[:-1]]
        ang = np.arctan2(pts[:, 1], pts[:, 0])
        turns = np.diff(np.unwrap(np.concatenate([ang, ang[:1]])))
        winding = np.sum(turns) / (2 * np.pi)
        assert abs(abs(winding) - 1.0) <= 1e-9

    def test_quality_reported_and_smoothing_valid(self):
        spec = builtin_problem(1)
        rough = generate_curved_fitted(
            spec.domain, 0.29, spec.curve, spec.region_predicate
        )
        assert 0.0 <= mesh_stats(rough).nonacute_fraction <= 1.0
        smooth = generate_curved_fitted(
            spec.domain, 0.29, spec.curve, spec.region_predicate,
            smooth_iterations=2, h_tolerance=0.05,
        )
        # smoothing must keep the fitted interface and the mesh valid
        assert mesh_stats(smooth).n_interface_edge == mesh_stats(rough).n_interface_edge
        ie = smooth.interface_edges()
        pts = smooth.vertices[np.unique(smooth.edges[ie].ravel())]
        assert np.abs(np.hypot(pts[:, 0], pts[:, 1]) - 0.5).max() <= 1e-9

    def test_smoothing_improves_jittered_points(self):
        # centroidal smoothing is meant to clean up badly placed interior
        # vertices; obtuse counts drop markedly on a jittered grid
        from wgfem.cdt import Triangulation

        rng = np.random.default_rng(7)
        n = 16
        xs = np.linspace(-1, 1, n + 1)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        onb = (np.abs(np.abs(pts[:, 0]) - 1) < 1e-12) | (
            np.abs(np.abs(pts[:, 1]) - 1) < 1e-12
        )
        pts[~onb] += rng.uniform(-0.35, 0.35, (np.sum(~onb), 2)) * (2 / n)

        def obtuse_fraction(tri):
            t = tri.triangle_array()
            p = tri.points[t]
            sq = np.empty((len(t), 3))
            for i in range(3):
                d = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
                sq[:, i] = np.einsum("td,td->t", d, d)
            largest = sq.max(axis=1)
            return float((largest > (sq.sum(axis=1) - largest) * (1 + 1e-12)).mean())

        rough = Triangulation.delaunay(pts)
        before = obtuse_fraction(rough)
        after = obtuse_fraction(rough.smoothed(onb, 3))
        assert after < before

    def test_bad_target_rejected(self):
        spec = builtin_problem(1)
        with pytest.raises(MeshGenerationError):
            generate_curved_fitted(spec.domain, -1.0, spec.curve, spec.region_predicate)


class TestInvariants:
    def test_edge_triangle_involution(self, mesh_circle_coarse):
        mesh = mesh_circle_coarse
        for t in range(mesh.n_triangles):
            for i in range(3):
                e = mesh.tri_edges[t, i]
                assert t in mesh.edge_tris[e]
        for e in range(mesh.n_edges):
            for t in mesh.edge_tris[e]:
                if t >= 0:
                    assert e in mesh.tri_edges[t]

    def test_all_counterclockwise(self, mesh_circle_coarse):
        assert (mesh_circle_coarse.areas() > 0).all()

    def test_interface_adjacency_ordered_by_region(self, mesh_circle_coarse):
        mesh = mesh_circle_coarse
        ie = mesh.interface_edges()
        assert (mesh.tri_region[mesh.edge_tris[ie, 0]] == REGION1).all()
        assert (mesh.tri_region[mesh.edge_tris[ie, 1]] == REGION2).all()

    def test_interface_normals_point_into_region2(self, mesh_circle_coarse):
        mesh = mesh_circle_coarse
        normals = mesh.interface_normals()
        ie = mesh.interface_edges()
        mid = 0.5 * (mesh.vertices[mesh.edges[ie, 0]] + mesh.vertices[mesh.edges[ie, 1]])
        # region 2 is the inside of the circle, so normals point inward
        radial = mid / np.linalg.norm(mid, axis=1)[:, None]
        assert (np.einsum("ed,ed->e", normals, radial) < 0).all()

    def test_immutable_arrays(self, mesh_circle_coarse):
        with pytest.raises(ValueError):
            mesh_circle_coarse.vertices[0, 0] = 99.0


class TestRefine:
    def test_refine_counts_and_h(self, mesh_x_split):
        fine = refine_mesh(mesh_x_split)
        assert fine.n_triangles == 4 * mesh_x_split.n_triangles
        assert fine.h_max == pytest.approx(0.5 * mesh_x_split.h_max, rel=1e-12)
        assert mesh_stats(fine).n_interface_edge == 2 * mesh_stats(mesh_x_split).n_interface_edge

    def test_refine_snaps_interface_to_curve(self, mesh_circle_coarse):
        spec = builtin_problem(1)
        fine = refine_mesh(mesh_circle_coarse, curve=spec.curve)
        ie = fine.interface_edges()
        pts = fine.vertices[np.unique(fine.edges[ie].ravel())]
        r = np.hypot(pts[:, 0], pts[:, 1])
        assert np.abs(r - 0.5).max() <= 1e-9


class TestFromArrays:
    def test_unused_vertex_rejected(self):
        verts = np.array([[0, 0], [1, 0], [0, 1], [5, 5]], dtype=float)
        tris = np.array([[0, 1, 2]])
        with pytest.raises(MeshTopologyError):
            mesh_from_arrays(verts, tris, np.array([REGION1], dtype=np.int8))

    def test_inconsistent_interface_keys_rejected(self):
        verts = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        tris = np.array([[0, 1, 2], [0, 2, 3]])
        regions = np.array([REGION1, REGION2], dtype=np.int8)
        with pytest.raises(MeshTopologyError):
            mesh_from_arrays(verts, tris, regions, interface_edge_keys=set())
