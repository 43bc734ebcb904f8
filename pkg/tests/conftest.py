"""Shared fixtures: small meshes, a manufactured piecewise-linear problem,
and cached benchmark study results used by several test modules."""

import numpy as np
import pytest

from wgfem.curves import Polyline, Rect
from wgfem.mesh import generate_curved_fitted, generate_structured_fitted
from wgfem.problems import Branch, ProblemSpec, builtin_problem


def const_field(c):
    return lambda x, y: np.full(np.broadcast(x, y).shape, float(c))


def linear_field(ax, ay, c):
    def f(x, y):
        return ax * np.asarray(x, float) + ay * np.asarray(y, float) + c

    def grad(x, y):
        shape = np.broadcast(x, y).shape
        return np.stack(
            [np.full(shape, float(ax)), np.full(shape, float(ay))], axis=-1
        )

    return f, grad


def make_patch_spec(domain, curve, region1_mask, a1=3.0, a2=0.5,
                    u_coef=(2.0, -1.0, 1.0), v_coef=(0.6, 0.4, -0.2)):
    """Problem with linear exact branches and constant coefficients.

    The discrete scheme reproduces such solutions exactly, so any solver or
    assembly defect shows up as a nonzero error.
    """
    u, gu = linear_field(*u_coef)
    v, gv = linear_field(*v_coef)
    zero = const_field(0.0)
    return ProblemSpec(
        problem_id=0,
        name="patch",
        domain=domain,
        curve=curve,
        region1_mask=region1_mask,
        branches=(
            Branch(const_field(a1), u, gu, zero),
            Branch(const_field(a2), v, gv, zero),
        ),
        forcing_mode="analytic",
    )


SQUARE = Rect(-1.0, 1.0, -1.0, 1.0)
X_SPLIT_LINE = [(0.0, -1.0), (0.0, 1.0)]


def x_split_region(x, y):
    return np.where(np.asarray(x) < 0.0, 1, 2).astype(np.int8)


@pytest.fixture(scope="session")
def patch_spec_line():
    return make_patch_spec(
        SQUARE, Polyline(X_SPLIT_LINE), lambda x, y: np.asarray(x) < 0.0
    )


@pytest.fixture(scope="session")
def patch_spec_circle():
    base = builtin_problem(1)
    return make_patch_spec(base.domain, base.curve, base.region1_mask)


@pytest.fixture(scope="session")
def mesh_x_split():
    return generate_structured_fitted(
        SQUARE, 2, X_SPLIT_LINE, region_predicate=x_split_region
    )


@pytest.fixture(scope="session")
def mesh_circle_coarse():
    spec = builtin_problem(1)
    return generate_curved_fitted(
        spec.domain, 0.29, spec.curve, spec.region_predicate
    )


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)


def random_ccw_triangles(rng, count, min_area=0.05):
    """Non-degenerate counterclockwise triangles with coordinates in [-1, 1]."""
    out = []
    while len(out) < count:
        v = rng.uniform(-1.0, 1.0, (3, 2))
        d1, d2 = v[1] - v[0], v[2] - v[0]
        area2 = d1[0] * d2[1] - d1[1] * d2[0]
        if area2 < 0:
            v = v[[0, 2, 1]]
            area2 = -area2
        if area2 > 2 * min_area:
            out.append(v)
    return np.asarray(out)
