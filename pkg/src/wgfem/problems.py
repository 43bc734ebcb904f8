"""Built-in benchmark interface problems with known analytic solutions.

Each problem prescribes a rectangular domain split by an interface into
region 1 and region 2, a positive diffusion coefficient per region, optional
Helmholtz wavenumbers, and the exact solution branches u (region 1) and v
(region 2). Forcing, Dirichlet data, and the two interface jump functions

    phi = u - v,                jump of the solution across the interface,
    psi = a1 grad(u) . n1 + a2 grad(v) . n2,   jump of the conormal flux,

are all derived from the exact branches. n1 points from region 1 into
region 2 and n2 = -n1.

Forcing can be evaluated analytically or through a finite-difference oracle
(nested fourth-order central differences of a1 du/dx etc.). The two paths
cross-check each other in the test suite. The catalog:

     1  circle          circular interface, piecewise constant coefficient
     2  helmholtz       circle plus indefinite Helmholtz terms (kappa 2 or 8)
     3  ellipse         elliptic interface, coefficient contrast b inside
     4  flower          five-petal polar interface
     5  c1-sine         C1 interface (parabola + line), C2 solution
     6  c1-mixed        same interface, solution only C1 across x + y = 0
     7  c1-singular     wide domain, solution gradient blows up at the origin
     8  kink-sine       Lipschitz interface with a corner at the origin
     9  kink-mixed      corner interface, C1 solution
    10  kink-singular   corner interface plus singular solution
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .curves import Circle, Curve, Ellipse, PiecewiseGraph, PolarCurve, Polyline, Rect
from .mesh import GAMMA_TOL_FACTOR, REGION1, REGION2

__all__ = [
    "Branch",
    "ProblemSpec",
    "EvaluationError",
    "builtin_problem",
    "forcing",
    "jump_data",
    "default_level_h",
    "PROBLEM_NAMES",
]

# Radius below which evaluating a singular branch is a caller bug.
SINGULAR_GUARD_RADIUS = 1e-12


class EvaluationError(Exception):
    """A field was evaluated where its formula is not smooth enough."""


def _as_xy(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return x, y


@dataclass(frozen=True)
class Branch:
    """One region's data: coefficient, exact solution, and derived fields."""

    coefficient: callable
    exact: callable
    grad: callable  # analytic gradient, returns (..., 2)
    forcing_analytic: callable | None = None
    k2: float = 0.0  # Helmholtz term enters the PDE as -k2 * u
    hazard: callable | None = None  # distance to the formula's kinks/singularities
    singular_points: tuple = ()  # locations with blow-up derivatives

    def hazard_distance(self, x, y):
        if self.hazard is None:
            return np.full(np.broadcast(x, y).shape, np.inf)
        return self.hazard(x, y)

    def guard(self, x, y):
        for sx, sy in self.singular_points:
            r = np.hypot(np.asarray(x) - sx, np.asarray(y) - sy)
            if np.any(r <= SINGULAR_GUARD_RADIUS):
                raise EvaluationError(
                    f"evaluation requested within {SINGULAR_GUARD_RADIUS:g} of the "
                    f"singular point ({sx}, {sy})"
                )


@dataclass(frozen=True)
class ProblemSpec:
    problem_id: int
    name: str
    domain: Rect
    curve: Curve
    region1_mask: callable  # boolean array: True where a point belongs to region 1
    branches: tuple  # (region-1 Branch, region-2 Branch)
    forcing_mode: str = "fd"
    h_fd: float = 1e-3
    params: dict = field(default_factory=dict)

    # -- basic access -----------------------------------------------------

    def branch(self, region: int) -> Branch:
        if region == REGION1:
            return self.branches[0]
        if region == REGION2:
            return self.branches[1]
        raise ValueError(f"bad region id {region}")

    def region_ids(self, x, y) -> np.ndarray:
        x, y = _as_xy(x, y)
        return np.where(self.region1_mask(x, y), REGION1, REGION2).astype(np.int8)

    def region_predicate(self, x, y):
        return self.region_ids(x, y)

    def interface_predicate(self, x, y):
        tol = GAMMA_TOL_FACTOR * self.domain.diameter
        return self.curve.distance(x, y) <= tol

    # -- fields -----------------------------------------------------------

    def coefficient(self, region: int, x, y) -> np.ndarray:
        x, y = _as_xy(x, y)
        return np.asarray(self.branch(region).coefficient(x, y), dtype=float)

    def exact(self, region: int, x, y) -> np.ndarray:
        x, y = _as_xy(x, y)
        return np.asarray(self.branch(region).exact(x, y), dtype=float)

    def exact_grad(self, region: int, x, y) -> np.ndarray:
        x, y = _as_xy(x, y)
        br = self.branch(region)
        br.guard(x, y)
        return np.asarray(br.grad(x, y), dtype=float)

    def k2(self, region: int) -> float:
        return self.branch(region).k2

    def dirichlet(self, region: int, x, y) -> np.ndarray:
        return self.exact(region, x, y)

    # -- forcing ----------------------------------------------------------

    def forcing(self, region: int, x, y) -> np.ndarray:
        if self.forcing_mode == "analytic":
            br = self.branch(region)
            if br.forcing_analytic is None:
                raise EvaluationError(
                    f"problem {self.problem_id} has no analytic forcing for "
                    f"region {region}"
                )
            x, y = _as_xy(x, y)
            br.guard(x, y)
            return np.asarray(br.forcing_analytic(x, y), dtype=float)
        return self.forcing_fd(region, x, y)

    def forcing_fd(self, region: int, x, y, h_fd=None, strict=False) -> np.ndarray:
        """-div(a grad u) - k2 u by nested fourth-order central differences.

        In the default adaptive mode the step shrinks near the interface, the
        domain boundary, and the branch formula's own kinks so that stencils
        never straddle a non-smooth set. In strict mode a stencil that would
        cross any of those sets raises EvaluationError instead.
        """
        x, y = _as_xy(x, y)
        br = self.branch(region)
        br.guard(x, y)
        h0 = self.h_fd if h_fd is None else float(h_fd)
        dist = np.minimum(self.curve.distance(x, y), br.hazard_distance(x, y))
        dist = np.minimum(dist, self.domain.boundary_distance(x, y))
        if strict:
            if np.any(dist <= 2.0 * h0):
                raise EvaluationError(
                    "finite-difference stencil crosses the interface, the domain "
                    "boundary, or a formula kink; shrink h_fd or use analytic mode"
                )
            h = np.full(np.broadcast(x, y).shape, h0)
        else:
            h = np.clip(dist / 3.0, 1e-5, h0)

        a, u = br.coefficient, br.exact

        def d1(f, axis, xx, yy, hh):
            if axis == 0:
                fp2, fp1 = f(xx + 2 * hh, yy), f(xx + hh, yy)
                fm1, fm2 = f(xx - hh, yy), f(xx - 2 * hh, yy)
            else:
                fp2, fp1 = f(xx, yy + 2 * hh), f(xx, yy + hh)
                fm1, fm2 = f(xx, yy - hh), f(xx, yy - 2 * hh)
            return (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * hh)

        def flux(axis, xx, yy):
            return a(xx, yy) * d1(u, axis, xx, yy, h)

        div = d1(lambda xx, yy: flux(0, xx, yy), 0, x, y, h) + d1(
            lambda xx, yy: flux(1, xx, yy), 1, x, y, h
        )
        return -div - br.k2 * u(x, y)

    def fd_gradient(self, region: int, x, y, h=1e-5) -> np.ndarray:
        """Gradient of the exact branch by fourth-order differences (oracle)."""
        x, y = _as_xy(x, y)
        br = self.branch(region)
        br.guard(x, y)
        hh = np.clip(br.hazard_distance(x, y) / 3.0, 1e-7, h)
        u = br.exact
        gx = (-u(x + 2 * hh, y) + 8 * u(x + hh, y) - 8 * u(x - hh, y) + u(x - 2 * hh, y)) / (
            12 * hh
        )
        gy = (-u(x, y + 2 * hh) + 8 * u(x, y + hh) - 8 * u(x, y - hh) + u(x, y - 2 * hh)) / (
            12 * hh
        )
        return np.stack([gx, gy], axis=-1)

    # -- interface data ----------------------------------------------------

    def phi(self, x, y) -> np.ndarray:
        """Solution jump u - v on the interface."""
        return self.exact(REGION1, x, y) - self.exact(REGION2, x, y)

    def psi(self, x, y, n1, use_fd=False) -> np.ndarray:
        """Flux jump a1 grad(u) . n1 + a2 grad(v) . n2 with n2 = -n1."""
        x, y = _as_xy(x, y)
        n1 = np.asarray(n1, dtype=float)
        grad = self.fd_gradient if use_fd else self.exact_grad
        g1 = grad(REGION1, x, y)
        g2 = grad(REGION2, x, y)
        a1 = self.coefficient(REGION1, x, y)
        a2 = self.coefficient(REGION2, x, y)
        return a1 * np.einsum("...d,...d->...", g1, n1) - a2 * np.einsum(
            "...d,...d->...", g2, n1
        )

    def with_homogeneous_data(self) -> "ProblemSpec":
        """Same geometry and coefficients, all data zero (uniqueness checks)."""
        zero = lambda x, y: np.zeros(np.broadcast(x, y).shape)
        zgrad = lambda x, y: np.zeros(np.broadcast(x, y).shape + (2,))
        new_branches = tuple(
            replace(br, exact=zero, grad=zgrad, forcing_analytic=zero,
                    hazard=None, singular_points=())
            for br in self.branches
        )
        return replace(self, branches=new_branches, forcing_mode="analytic")


def forcing(spec: ProblemSpec, region: int, x, y) -> np.ndarray:
    return spec.forcing(region, x, y)


def jump_data(spec: ProblemSpec, x, y, n1):
    """(phi, psi) at interface points with region-1-outward normals n1."""
    return spec.phi(x, y), spec.psi(x, y, n1)


# ---------------------------------------------------------------------------
# the catalog
# ---------------------------------------------------------------------------

PROBLEM_NAMES = {
    1: "circle",
    2: "helmholtz",
    3: "ellipse",
    4: "flower",
    5: "c1-sine",
    6: "c1-mixed",
    7: "c1-singular",
    8: "kink-sine",
    9: "kink-mixed",
    10: "kink-singular",
}


def _const(c):
    return lambda x, y: np.full(np.broadcast(x, y).shape, float(c))


def _circle_region1(x, y):
    return x * x + y * y > 0.25


def _problem_circle(b: float) -> ProblemSpec:
    b = float(b)
    shift = 0.25 * (1.0 - 1.0 / (8.0 * b) - 1.0 / b)

    def u(x, y):
        w = x * x + y * y
        return -(shift + 0.5 * w * w + w) / b

    def grad_u(x, y):
        w = x * x + y * y
        c = -2.0 * (w + 1.0) / b
        return np.stack([c * x, c * y], axis=-1)

    def f1(x, y):
        return 8.0 * (x * x + y * y) + 4.0

    def v(x, y):
        return 1.0 - x * x - y * y

    def grad_v(x, y):
        return np.stack([-2.0 * x, -2.0 * y], axis=-1)

    return ProblemSpec(
        problem_id=1,
        name=PROBLEM_NAMES[1],
        domain=Rect(-1.0, 1.0, -1.0, 1.0),
        curve=Circle(0.0, 0.0, 0.5),
        region1_mask=_circle_region1,
        branches=(
            Branch(_const(b), u, grad_u, f1),
            Branch(_const(2.0), v, grad_v, _const(8.0)),
        ),
        params={"b": b},
    )


def _problem_helmholtz(kappa: float) -> ProblemSpec:
    kappa = float(kappa)
    k1sq = 10.0 * kappa * kappa  # sigma_1 = sqrt(10)
    k2sq = kappa * kappa

    def u(x, y):
        return -np.sin(kappa * x) * np.cos(kappa * y)

    def grad_u(x, y):
        return np.stack(
            [
                -kappa * np.cos(kappa * x) * np.cos(kappa * y),
                kappa * np.sin(kappa * x) * np.sin(kappa * y),
            ],
            axis=-1,
        )

    def f1(x, y):
        # -a1 lap(u) - k1^2 u with a1 = 1: lap(u) = -2 kappa^2 u
        return 8.0 * kappa * kappa * np.sin(kappa * x) * np.cos(kappa * y)

    def v(x, y):
        return -(x * x + y * y)

    def grad_v(x, y):
        return np.stack([-2.0 * x, -2.0 * y], axis=-1)

    def f2(x, y):
        return 40.0 + kappa * kappa * (x * x + y * y)

    return ProblemSpec(
        problem_id=2,
        name=PROBLEM_NAMES[2],
        domain=Rect(-1.0, 1.0, -1.0, 1.0),
        curve=Circle(0.0, 0.0, 0.5),
        region1_mask=_circle_region1,
        branches=(
            Branch(_const(1.0), u, grad_u, f1, k2=k1sq),
            Branch(_const(10.0), v, grad_v, f2, k2=k2sq),
        ),
        params={"kappa": kappa},
    )


def _problem_ellipse(b: float) -> ProblemSpec:
    ax, ay = 10.0 / 27.0, 18.0 / 27.0

    def region1(x, y):
        return (x / ax) ** 2 + (y / ay) ** 2 > 1.0

    def u(x, y):
        return 5.0 * np.exp(-x * x - y * y)

    def grad_u(x, y):
        e = np.exp(-x * x - y * y)
        return np.stack([-10.0 * x * e, -10.0 * y * e], axis=-1)

    def f1(x, y):
        w = x * x + y * y
        return 20.0 * (1.0 - w) * np.exp(-w)

    def v(x, y):
        return np.exp(x) * np.cos(y)

    def grad_v(x, y):
        return np.stack([np.exp(x) * np.cos(y), -np.exp(x) * np.sin(y)], axis=-1)

    return ProblemSpec(
        problem_id=3,
        name=PROBLEM_NAMES[3],
        domain=Rect(-1.0, 1.0, -1.0, 1.0),
        curve=Ellipse(0.0, 0.0, ax, ay),
        region1_mask=region1,
        branches=(
            Branch(_const(1.0), u, grad_u, f1),
            Branch(_const(float(b)), v, grad_v, _const(0.0)),  # v is harmonic
        ),
        params={"b": float(b)},
    )


def _flower_r(theta):
    return 0.5 + np.sin(5.0 * theta) / 7.0


def _problem_flower() -> ProblemSpec:
    def region1(x, y):
        return np.hypot(x, y) > _flower_r(np.arctan2(y, x))

    def u(x, y):
        w = x * x + y * y
        return 0.1 * w * w - 0.01 * np.log(2.0 * np.sqrt(w))

    def grad_u(x, y):
        w = x * x + y * y
        c = 0.4 * w - 0.01 / w
        return np.stack([c * x, c * y], axis=-1)

    def f1(x, y):
        # lap(u) = 1.6 w; the log term is harmonic away from the origin
        return -16.0 * (x * x + y * y)

    def v(x, y):
        return np.exp(x * x + y * y)

    def grad_v(x, y):
        e = np.exp(x * x + y * y)
        return np.stack([2.0 * x * e, 2.0 * y * e], axis=-1)

    def f2(x, y):
        w = x * x + y * y
        return -4.0 * (1.0 + w) * np.exp(w)

    radial = lambda x, y: np.hypot(x, y)
    return ProblemSpec(
        problem_id=4,
        name=PROBLEM_NAMES[4],
        domain=Rect(-1.0, 1.0, -1.0, 1.0),
        curve=PolarCurve(_flower_r),
        region1_mask=region1,
        branches=(
            Branch(_const(10.0), u, grad_u, f1,
                   hazard=radial, singular_points=((0.0, 0.0),)),
            Branch(_const(1.0), v, grad_v, f2),
        ),
    )


# Interface pieces shared by problems 5-7: y = 2x + x^2 left of the origin
# (where x + y <= 0 on the curve) and y = 2x to the right.
_C1_INTERFACE = PiecewiseGraph(
    [
        (lambda x: 2.0 * x + x * x, lambda x: 2.0 + 2.0 * x, -1.0, 0.0),
        (lambda x: 2.0 * x, lambda x: np.full(np.shape(x), 2.0), 0.0, 0.5),
    ]
)

# Corner interface shared by problems 8-10: y = -x/2 then y = 2x.
_KINK_INTERFACE = Polyline([(-1.0, 0.5), (0.0, 0.0), (0.5, 1.0)])


def _c1_region1(x, y):
    return np.where(x + y > 0.0, y > 2.0 * x, y > 2.0 * x + x * x)


def _kink_region1(x, y):
    return np.where(x + y > 0.0, y > 2.0 * x, y > -0.5 * x)


def _a_window(x, y):
    return (x * y + 2.0) / 5.0


def _a_saddle(x, y):
    return (x * x - y * y + 3.0) / 7.0


def _half_plane_distance(x, y):
    return np.abs(np.asarray(x, float) + np.asarray(y, float)) / np.sqrt(2.0)


def _sine_branch():
    def v(x, y):
        s = x + y
        return np.where(s <= 0.0, np.sin(s), s)

    def grad_v(x, y):
        s = x + y
        g = np.where(s <= 0.0, np.cos(s), 1.0)
        return np.stack([g, g], axis=-1)

    def f2(x, y):
        s = x + y
        left = (2.0 / 7.0) * (
            (x * x - y * y + 3.0) * np.sin(s) - (x - y) * np.cos(s)
        )
        right = (2.0 / 7.0) * (y - x)
        return np.where(s <= 0.0, left, right)

    return v, grad_v, f2


def _mixed_branch():
    def v(x, y):
        s = x + y
        return np.where(s <= 0.0, np.sin(s) + np.cos(s), s + 1.0)

    def grad_v(x, y):
        s = x + y
        g = np.where(s <= 0.0, np.cos(s) - np.sin(s), 1.0)
        return np.stack([g, g], axis=-1)

    def f2(x, y):
        s = x + y
        left = (2.0 / 7.0) * (
            (x * x - y * y + 3.0) * (np.sin(s) + np.cos(s))
            - (x - y) * (np.cos(s) - np.sin(s))
        )
        right = (2.0 / 7.0) * (y - x)
        return np.where(s <= 0.0, left, right)

    return v, grad_v, f2


def _singular_branch():
    def v(x, y):
        w = x * x + y * y
        return w ** (5.0 / 6.0) + np.sin(x + y)

    def grad_v(x, y):
        w = np.maximum(x * x + y * y, 1e-300)
        c = (5.0 / 3.0) * w ** (-1.0 / 6.0)
        g = np.cos(x + y)
        return np.stack([c * x + g, c * y + g], axis=-1)

    def f2(x, y):
        # a2 = 2 + sin(x+y); lap(w^{5/6}) = (25/9) w^{-1/6}
        w = np.maximum(x * x + y * y, 1e-300)
        s = np.sin(x + y)
        c = np.cos(x + y)
        wm = w ** (-1.0 / 6.0)
        return -(c * ((5.0 / 3.0) * (x + y) * wm + 2.0 * c)
                 + (2.0 + s) * ((25.0 / 9.0) * wm - 2.0 * s))

    return v, grad_v, f2


def _problem_piecewise(pid: int) -> ProblemSpec:
    wide = Rect(-1.0, 3.0, -1.0, 1.0)
    square = Rect(-1.0, 1.0, -1.0, 1.0)
    if pid in (5, 6, 7):
        curve, region1 = _C1_INTERFACE, _c1_region1
    else:
        curve, region1 = _KINK_INTERFACE, _kink_region1
    domain = square if pid in (5, 6) else wide

    if pid in (5, 8):
        v, grad_v, f2 = _sine_branch()
    elif pid in (6, 9):
        v, grad_v, f2 = _mixed_branch()
    else:
        v, grad_v, f2 = _singular_branch()

    if pid in (7, 10):
        a1 = _const(1.0)
        a2 = lambda x, y: 2.0 + np.sin(x + y)
        u_val = 8.0
        radial = lambda x, y: np.hypot(x, y)
        branch2 = Branch(a2, v, grad_v, f2, hazard=radial,
                         singular_points=((0.0, 0.0),))
    else:
        a1 = _a_window
        a2 = _a_saddle
        u_val = 2.0 if pid in (5, 6) else 8.0
        branch2 = Branch(a2, v, grad_v, f2, hazard=_half_plane_distance)

    u = _const(u_val)
    grad_u = lambda x, y: np.zeros(np.broadcast(x, y).shape + (2,))
    branch1 = Branch(a1, u, grad_u, _const(0.0))

    return ProblemSpec(
        problem_id=pid,
        name=PROBLEM_NAMES[pid],
        domain=domain,
        curve=curve,
        region1_mask=region1,
        branches=(branch1, branch2),
    )


def builtin_problem(
    problem_id: int,
    b: float | None = None,
    kappa: float | None = None,
    forcing_mode: str = "fd",
    h_fd: float = 1e-3,
) -> ProblemSpec:
    """Instantiate one of the ten benchmark problems.

    ``b`` selects the coefficient contrast for problems 1 (default 10) and 3
    (default 10, the tables also use 1000); ``kappa`` the wavenumber for
    problem 2 (default 2, the tables use 2 and 8).
    """
    pid = int(problem_id)
    if pid == 1:
        spec = _problem_circle(10.0 if b is None else b)
    elif pid == 2:
        spec = _problem_helmholtz(2.0 if kappa is None else kappa)
    elif pid == 3:
        spec = _problem_ellipse(10.0 if b is None else b)
    elif pid == 4:
        spec = _problem_flower()
    elif 5 <= pid <= 10:
        spec = _problem_piecewise(pid)
    else:
        raise ValueError(f"unknown problem id {problem_id} (expected 1..10)")
    if forcing_mode not in ("fd", "analytic"):
        raise ValueError(f"bad forcing mode {forcing_mode!r}")
    return replace(spec, forcing_mode=forcing_mode, h_fd=float(h_fd))


# Mesh-size targets per refinement level used by the study harness.
_LEVELS = {
    1: [2.8553e-01, 1.5110e-01, 7.7543e-02, 3.9258e-02, 1.9749e-02],
    (2, 2.0): [3.1778e-01, 1.5889e-01, 7.9444e-02, 3.9722e-02, 1.9861e-02],
    (2, 8.0): [1.5837e-01, 7.9186e-02, 3.9593e-02, 1.9796e-02, 9.8982e-03],
    3: [5.6522e-01, 2.8261e-01, 1.4130e-01, 7.0652e-02, 3.5326e-02],
    4: [3.4726e-01, 1.7363e-01, 8.9010e-02, 4.9602e-02, 2.4286e-02],
    5: [6.2575e-01, 2.9662e-01, 1.5170e-01, 7.9102e-02, 4.4180e-02],
    6: [6.2575e-01, 2.9662e-01, 1.5170e-01, 7.9102e-02, 4.4180e-02],
    7: [6.5801e-01, 3.4551e-01, 1.7932e-01, 9.1176e-02, 4.6365e-02],
    8: [5.6919e-01, 2.8459e-01, 1.4230e-01, 7.1149e-02, 3.5574e-02],
    9: [5.6919e-01, 2.8459e-01, 1.4230e-01, 7.1149e-02, 3.5574e-02],
    10: [7.1020e-01, 3.5510e-01, 1.7755e-01, 8.8775e-02, 4.4387e-02],
}


def default_level_h(problem_id: int, kappa: float | None = None) -> list[float]:
    """Target h_max per level (halving families matching the benchmark tables)."""
    if problem_id == 2:
        return list(_LEVELS[(2, float(kappa if kappa is not None else 2.0))])
    return list(_LEVELS[int(problem_id)])
