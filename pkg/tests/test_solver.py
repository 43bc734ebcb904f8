"""Sparse solve contract: certified residuals, the dense oracle, and the
zero-data uniqueness property realized numerically."""

import numpy as np
import pytest

from wgfem.assembly import SparseSystem, assemble, build_dof_map
from wgfem.problems import builtin_problem
from wgfem.solver import (
    SolverError,
    solve,
    solve_dense,
)
from wgfem.studies import base_mesh


def tiny_system(spec, target_h):
    mesh = base_mesh(spec, target_h)
    dofs = build_dof_map(mesh)
    return assemble(mesh, spec, dofs), dofs


class TestSolve:
    def test_zero_rhs_gives_zero(self):
        spec = builtin_problem(1).with_homogeneous_data()
        system, _ = tiny_system(spec, 0.4)
        report = solve(system)
        assert np.abs(report.solution).max() == 0.0
        assert report.relative_residual == 0.0

    def test_report_fields(self):
        spec = builtin_problem(1)
        system, _ = tiny_system(spec, 0.4)
        report = solve(system)
        assert report.relative_residual <= 1e-10
        assert report.nnz_factor > 0
        assert report.wall_time >= 0.0

    @pytest.mark.parametrize("pid", [1, 5, 8])
    def test_homogeneous_data_solution_is_trivial(self, pid):
        spec = builtin_problem(pid).with_homogeneous_data()
        system, _ = tiny_system(spec, 0.6)
        report = solve(system)
        assert np.abs(report.solution).max() <= 1e-11

    def test_high_contrast_residual(self):
        for b in (10.0, 1000.0):
            spec = builtin_problem(3, b=b)
            system, _ = tiny_system(spec, 0.3)
            report = solve(system)
            assert report.relative_residual <= 1e-10

    def test_singular_matrix_raises(self):
        # last unknown decoupled with inconsistent data
        n = 4
        rows = np.array([0, 1, 2])
        cols = np.array([0, 1, 2])
        vals = np.ones(3)
        rhs = np.array([1.0, 1.0, 1.0, 1.0])
        system = SparseSystem(n=n, rows=rows, cols=cols, vals=vals, rhs=rhs)
        with pytest.raises(SolverError):
            solve(system)


class TestDenseOracle:
    def test_oracle_refuses_large_systems(self):
        spec = builtin_problem(1)
        system, _ = tiny_system(spec, 0.3)
        if system.n > 200:
            with pytest.raises(SolverError):
                solve_dense(system)

    @pytest.mark.parametrize("pid", [1, 5, 8])
    def test_sparse_matches_dense(self, pid):
        from wgfem.mesh import generate_curved_fitted

        spec = builtin_problem(pid)
        if pid == 1:
            mesh = generate_curved_fitted(
                spec.domain, 0.75, spec.curve, spec.region_predicate, samples=12
            )
            dofs = build_dof_map(mesh)
            system = assemble(mesh, spec, dofs)
        else:
            target = {5: 1.3, 8: 1.4}[pid]
            system, _ = tiny_system(spec, target)
        assert system.n <= 200
        x_sparse = solve(system).solution
        x_dense = solve_dense(system)
        scale = max(np.abs(x_dense).max(), 1e-30)
        assert np.abs(x_sparse - x_dense).max() <= 1e-9 * scale
