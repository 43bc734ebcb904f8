"""Element kernels: quadrature exactness, the weak-gradient identity, the
L2 projections, and the edge-flux interpolant."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_ccw_triangles
from wgfem.element import (
    EDGE_GAUSS_T,
    EDGE_GAUSS_W,
    TRI_QUAD_BARY,
    TRI_QUAD_WEIGHTS,
    ElementBatch,
    ElementError,
    RT0Basis,
    eval_rt0,
    project_cell,
    project_edge,
    rt0_interpolate,
    rt0_mass_matrix,
    weak_gradient,
)

UNIT_RIGHT = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])

# Closed-form RT0 mass matrix of the unit right triangle for the unit-flux
# basis phi_i = x - p_i, integrated by hand from the monomial moments
# (int x = int y = 1/6, int x^2 = int y^2 = 1/12, int xy = 1/24).
MASS_UNIT_RIGHT = np.array(
    [
        [1.0 / 6.0, 0.0, 0.0],
        [0.0, 1.0 / 3.0, -1.0 / 6.0],
        [0.0, -1.0 / 6.0, 1.0 / 3.0],
    ]
)


def reference_monomial_integral(a, b):
    # int_T x^a y^b over the unit right triangle
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


class TestQuadrature:
    def test_triangle_rule_degree_four(self):
        pts = TRI_QUAD_BARY @ UNIT_RIGHT
        for a in range(5):
            for b in range(5 - a):
                approx = 0.5 * TRI_QUAD_WEIGHTS @ (pts[:, 0] ** a * pts[:, 1] ** b)
                exact = reference_monomial_integral(a, b)
                assert abs(approx - exact) <= 1e-13 * abs(exact)

    def test_edge_rule_degree_five(self):
        for k in range(6):
            approx = EDGE_GAUSS_W @ (EDGE_GAUSS_T**k)
            assert abs(approx - 1.0 / (k + 1)) <= 1e-14

    def test_weights_sum_to_one(self):
        assert abs(TRI_QUAD_WEIGHTS.sum() - 1.0) <= 1e-15
        assert abs(EDGE_GAUSS_W.sum() - 1.0) <= 1e-15


class TestMassMatrix:
    def test_unit_right_triangle(self):
        M = rt0_mass_matrix(RT0Basis.from_vertices(UNIT_RIGHT))
        assert np.abs(M - MASS_UNIT_RIGHT).max() <= 1e-14

    def test_constant_coefficient_scales_linearly(self):
        basis = RT0Basis.from_vertices([[0.2, -0.3], [1.1, 0.1], [0.4, 0.9]])
        M1 = rt0_mass_matrix(basis)
        Mc = rt0_mass_matrix(basis, lambda x, y: np.full(np.shape(x), 7.5))
        assert np.abs(Mc - 7.5 * M1).max() <= 1e-13 * np.abs(M1).max()

    def test_rigid_motion_invariance(self):
        verts = np.array([[0.1, 0.2], [0.9, 0.3], [0.4, 1.0]])
        angle = 0.7
        R = np.array(
            [[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]]
        )
        moved = verts @ R.T + [3.0, -2.0]
        M0 = rt0_mass_matrix(RT0Basis.from_vertices(verts))
        M1 = rt0_mass_matrix(RT0Basis.from_vertices(moved))
        assert np.abs(M0 - M1).max() <= 1e-12 * np.abs(M0).max()

    def test_degenerate_triangle_rejected(self):
        with pytest.raises(ElementError):
            RT0Basis.from_vertices([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])

    def test_clockwise_rejected(self):
        with pytest.raises(ElementError):
            RT0Basis.from_vertices([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]])


class TestWeakGradient:
    def test_constants_annihilated(self, rng):
        for verts in random_ccw_triangles(rng, 20):
            c = rng.uniform(-5, 5)
            coeffs = weak_gradient(RT0Basis.from_vertices(verts), c, [c, c, c])
            assert np.abs(coeffs).max() <= 1e-14 * max(abs(c), 1.0)

    def test_unit_edge_load_matches_dense_solve(self):
        basis = RT0Basis.from_vertices(UNIT_RIGHT)
        coeffs = weak_gradient(basis, 0.0, [1.0, 0.0, 0.0])
        # M(1)^-1 e_1 for the frozen mass matrix above
        assert np.abs(coeffs - [6.0, 0.0, 0.0]).max() <= 1e-12
        dense = np.linalg.solve(MASS_UNIT_RIGHT, [1.0, 0.0, 0.0])
        assert np.abs(coeffs - dense).max() <= 1e-12

    def test_defining_identity(self, rng):
        # int_K grad_d(w) . phi_j dK must equal wb_j - w0 for every j
        for verts in random_ccw_triangles(rng, 50):
            basis = RT0Basis.from_vertices(verts)
            w0 = rng.uniform(-2, 2)
            wb = rng.uniform(-2, 2, 3)
            coeffs = weak_gradient(basis, w0, wb)
            x = basis.quad_points()
            grad = eval_rt0(coeffs, basis, x)
            phi = basis.phi(x)
            lhs = basis.area * np.einsum(
                "q,qd,qjd->j", TRI_QUAD_WEIGHTS, grad, phi
            )
            rhs = wb - w0
            scale = max(np.abs(rhs).max(), 1e-3)
            assert np.abs(lhs - rhs).max() <= 1e-10 * scale

    def test_linear_exactness(self, rng):
        tris = random_ccw_triangles(rng, 100)
        for verts in tris:
            basis = RT0Basis.from_vertices(verts)
            a, b, c = rng.uniform(-3, 3, 3)
            u = lambda x, y: a * x + b * y + c
            w0 = project_cell(u, verts)
            wb = [
                project_edge(u, verts[(i + 1) % 3], verts[(i + 2) % 3])
                for i in range(3)
            ]
            coeffs = weak_gradient(basis, w0, wb)
            bary = rng.dirichlet(np.ones(3), size=5)
            pts = bary @ verts
            vals = eval_rt0(coeffs, basis, pts)
            assert np.abs(vals - [a, b]).max() <= 1e-11

    @settings(max_examples=40, deadline=None)
    @given(
        w0=st.floats(-10, 10),
        wb=st.tuples(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10)),
    )
    def test_identity_property(self, w0, wb):
        basis = RT0Basis.from_vertices([[0.0, 0.0], [1.3, 0.2], [0.3, 1.1]])
        coeffs = weak_gradient(basis, w0, np.array(wb))
        x = basis.quad_points()
        phi = basis.phi(x)
        grad = eval_rt0(coeffs, basis, x)
        lhs = basis.area * np.einsum("q,qd,qjd->j", TRI_QUAD_WEIGHTS, grad, phi)
        rhs = np.array(wb) - w0
        assert np.abs(lhs - rhs).max() <= 1e-10 * max(1.0, np.abs(rhs).max())


class TestProjections:
    def test_cell_constant(self):
        assert project_cell(lambda x, y: np.full(np.shape(x), 7.0), UNIT_RIGHT) == pytest.approx(7.0, abs=1e-14)

    def test_cell_linear(self):
        assert project_cell(lambda x, y: x, UNIT_RIGHT) == pytest.approx(1 / 3, abs=1e-14)

    def test_cell_quadratic(self):
        assert project_cell(lambda x, y: x * x, UNIT_RIGHT) == pytest.approx(1 / 6, abs=1e-14)

    def test_edge_constant(self):
        assert project_edge(lambda x, y: np.full(np.shape(x), 5.0), (0, 0), (1, 0)) == pytest.approx(5.0, abs=1e-14)

    def test_edge_linear(self):
        assert project_edge(lambda x, y: x, (0, 0), (1, 0)) == pytest.approx(0.5, abs=1e-14)

    def test_edge_quadratic(self):
        assert project_edge(lambda x, y: x * x, (0, 0), (1, 0)) == pytest.approx(1 / 3, abs=1e-14)


class TestInterpolant:
    def test_constant_reproduced(self):
        basis = RT0Basis.from_vertices([[0.3, 0.1], [1.2, 0.4], [0.5, 1.3]])
        coeffs = rt0_interpolate(
            lambda x, y: np.stack(
                [np.ones(np.shape(x)), np.zeros(np.shape(x))], axis=-1
            ),
            basis,
        )
        pts = np.vstack([basis.centroid, basis.verts])
        vals = eval_rt0(coeffs, basis, pts)
        assert np.abs(vals - [1.0, 0.0]).max() <= 1e-13

    def test_swirl_fluxes_by_hand(self):
        # q = (y, x) on the unit right triangle: edge fluxes 1, -1/2, -1/2
        basis = RT0Basis.from_vertices(UNIT_RIGHT)
        coeffs = rt0_interpolate(
            lambda x, y: np.stack([y, x], axis=-1), basis
        )
        assert np.abs(coeffs - [1.0, -0.5, -0.5]).max() <= 1e-14

    def test_commutes_with_weak_gradient_for_linear(self, rng):
        for verts in random_ccw_triangles(rng, 25):
            basis = RT0Basis.from_vertices(verts)
            a, b, c = rng.uniform(-2, 2, 3)
            u = lambda x, y: a * x + b * y + c
            wg = weak_gradient(
                basis,
                project_cell(u, verts),
                [
                    project_edge(u, verts[(i + 1) % 3], verts[(i + 2) % 3])
                    for i in range(3)
                ],
            )
            interp = rt0_interpolate(
                lambda x, y: np.stack(
                    [np.full(np.shape(x), a), np.full(np.shape(x), b)], axis=-1
                ),
                basis,
            )
            centroid_diff = eval_rt0(wg, basis, basis.centroid) - eval_rt0(
                interp, basis, basis.centroid
            )
            assert np.abs(centroid_diff).max() <= 1e-11


class TestEval:
    def test_zero_coefficients(self):
        basis = RT0Basis.from_vertices(UNIT_RIGHT)
        assert np.abs(eval_rt0([0, 0, 0], basis, np.array([0.3, 0.3]))).max() == 0.0

    def test_single_basis_function_at_edge_midpoint(self):
        basis = RT0Basis.from_vertices(UNIT_RIGHT)
        midpoint = 0.5 * (basis.verts[2] + basis.verts[0])  # edge 1 (opposite v1)
        val = eval_rt0([0.0, 1.0, 0.0], basis, midpoint)
        direct = (midpoint - basis.verts[1]) / (2 * basis.area)
        assert np.abs(val - direct).max() <= 1e-15


class TestBatch:
    def test_matches_single_element(self, rng):
        tris = random_ccw_triangles(rng, 40)
        batch = ElementBatch(tris.reshape(-1, 2), np.arange(3 * len(tris)).reshape(-1, 3))
        w = rng.normal(size=(len(tris), 4))
        batched = batch.weak_gradients(w)
        for t, verts in enumerate(tris):
            single = weak_gradient(RT0Basis.from_vertices(verts), w[t, 0], w[t, 1:])
            assert np.abs(single - batched[t]).max() <= 1e-12 * max(
                1.0, np.abs(single).max()
            )

    def test_local_stiffness_kernel_and_psd(self, rng):
        tris = random_ccw_triangles(rng, 60)
        batch = ElementBatch(tris.reshape(-1, 2), np.arange(3 * len(tris)).reshape(-1, 3))
        S = batch.stiffness(np.ones((len(tris), 6)))
        ones = np.ones(4)
        assert np.abs(S @ ones).max() <= 1e-12
        eigs = np.linalg.eigvalsh(S)
        assert eigs.min() >= -1e-12
