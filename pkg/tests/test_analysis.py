"""Error norms, order computation, and table rendering."""

import math

import numpy as np
import pytest

from wgfem.analysis import (
    CSV_HEADER,
    ErrorRecord,
    StudyError,
    StudyReport,
    convergence_study,
    error_norms,
    parse_study_csv,
    render_table,
)
from wgfem.assembly import assemble, build_dof_map
from wgfem.problems import builtin_problem
from wgfem.solver import solve
from wgfem.studies import study_meshes


def synthetic_report(orders, levels=5, h0=0.5):
    records = []
    for level in range(levels):
        h = h0 * 0.5**level
        records.append(
            ErrorRecord(
                h_max=h,
                linf_solution=2.0 * h ** orders[0],
                linf_gradient=3.0 * h ** orders[1],
                l2_solution=1.0 * h ** orders[0],
                l2_lambda_flux=0.7 * h ** orders[2],
            )
        )
    return StudyReport(records=records)


class TestOrders:
    @pytest.mark.parametrize("p", [0.5, 1.0, 1.75, 2.0])
    def test_synthetic_orders_recovered(self, p):
        rep = synthetic_report([p, p, p])
        for attr in ("linf_solution", "linf_gradient", "l2_lambda_flux"):
            orders = rep.orders(attr)
            assert math.isnan(orders[0])
            assert np.abs(np.array(orders[1:]) - p).max() <= 1e-10
            assert abs(rep.overall_order(attr) - p) <= 1e-10

    def test_overall_uses_first_and_last(self):
        # a bumpy middle level must not affect the overall order
        rep = synthetic_report([2.0, 1.0, 0.5])
        bumped = list(rep.records)
        bumped[2] = ErrorRecord(
            h_max=bumped[2].h_max,
            linf_solution=10 * bumped[2].linf_solution,
            linf_gradient=bumped[2].linf_gradient,
            l2_solution=bumped[2].l2_solution,
            l2_lambda_flux=bumped[2].l2_lambda_flux,
        )
        assert StudyReport(records=bumped).overall_order("linf_solution") == pytest.approx(2.0, abs=1e-12)


class TestErrorNorms:
    def test_constant_solution_norms_vanish(self):
        from conftest import SQUARE, make_patch_spec
        from wgfem.curves import Polyline
        from wgfem.mesh import generate_structured_fitted

        spec = make_patch_spec(
            SQUARE, Polyline([(0.0, -1.0), (0.0, 1.0)]),
            lambda x, y: np.ones(np.shape(x), bool),
            u_coef=(0.0, 0.0, 2.5), v_coef=(0.0, 0.0, 2.5),
        )
        mesh = generate_structured_fitted(SQUARE, 1.5, [])
        dofs = build_dof_map(mesh)
        record = error_norms(mesh, spec, solve(assemble(mesh, spec, dofs)).solution, dofs)
        assert record.linf_solution <= 1e-11
        assert record.linf_gradient <= 1e-11
        assert record.l2_solution <= 1e-11

    def test_patch_norms_vanish(self, patch_spec_line, mesh_x_split):
        dofs = build_dof_map(mesh_x_split)
        x = solve(assemble(mesh_x_split, patch_spec_line, dofs)).solution
        record = error_norms(mesh_x_split, patch_spec_line, dofs=dofs, solution=x)
        assert record.linf_solution <= 1e-10
        assert record.linf_gradient <= 1e-10
        assert record.l2_lambda_flux <= 1e-10

    def test_study_validations(self):
        spec = builtin_problem(1)
        meshes = study_meshes(spec, levels=2)
        with pytest.raises(StudyError):
            convergence_study(spec, meshes[:1])
        with pytest.raises(StudyError):
            convergence_study(spec, [meshes[0], meshes[0]])


class TestTables:
    def test_csv_roundtrip(self):
        rep = synthetic_report([2.0, 1.0, 0.5], levels=4)
        text = render_table(rep, "csv")
        assert text.splitlines()[0] == CSV_HEADER
        back = parse_study_csv(text)
        for a, b in zip(rep.records, back.records):
            assert b.h_max == pytest.approx(a.h_max, rel=1e-4)
            assert b.linf_solution == pytest.approx(a.linf_solution, rel=1e-4)
            assert b.l2_lambda_flux == pytest.approx(a.l2_lambda_flux, rel=1e-4)

    def test_markdown_layout(self):
        rep = synthetic_report([2.0, 1.0, 0.5], levels=3)
        text = render_table(rep, "markdown")
        lines = text.strip().splitlines()
        assert len(lines) == 2 + 3
        assert all(line.count("|") == 9 for line in lines)
        # level-1 row has blank order cells
        first = [c.strip() for c in lines[2].split("|")[1:-1]]
        assert first[3] == "" and first[5] == ""

    def test_single_level_blank_orders(self):
        rep = StudyReport(records=[ErrorRecord(0.5, 1e-2, 2e-2, 5e-3, 1e-3)])
        text = render_table(rep, "csv")
        row = text.strip().splitlines()[1].split(",")
        assert row[3] == "" and row[5] == ""

    def test_unknown_format_rejected(self):
        rep = synthetic_report([1, 1, 1], levels=2)
        with pytest.raises(ValueError):
            render_table(rep, "latex")

    def test_parse_rejects_alien_header(self):
        with pytest.raises(StudyError):
            parse_study_csv("a,b,c\n1,2,3\n")
