"""Planar geometry used by the mesh generators and the benchmark problems.

A curve object describes an interface as one polyline chain per connected
component. Closed curves (circle, ellipse, polar graphs) produce a single
closed chain; open curves (graphs of piecewise functions, explicit
polylines) produce a chain whose endpoints are expected to lie on the
domain boundary. Sampling is arc-length uniform so mesh edge lengths along
the interface stay comparable. ``distance`` only has to be accurate near
the curve; it is used for tolerance-scale point classification and for
shrinking finite-difference steps, never for far-field geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Rect",
    "Curve",
    "Circle",
    "Ellipse",
    "PolarCurve",
    "PiecewiseGraph",
    "Polyline",
]


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [x0, x1] x [y0, y1]."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("degenerate rectangle")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.width, self.height))

    def corners(self) -> np.ndarray:
        """Corner coordinates in counterclockwise order from (x0, y0)."""
        return np.array(
            [
                [self.x0, self.y0],
                [self.x1, self.y0],
                [self.x1, self.y1],
                [self.x0, self.y1],
            ]
        )

    def contains(self, x, y, tol: float = 0.0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (
            (x >= self.x0 - tol)
            & (x <= self.x1 + tol)
            & (y >= self.y0 - tol)
            & (y <= self.y1 + tol)
        )

    def boundary_distance(self, x, y):
        """Distance to the rectangle's boundary for points inside it."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        dx = np.minimum(x - self.x0, self.x1 - x)
        dy = np.minimum(y - self.y0, self.y1 - y)
        return np.minimum(dx, dy)

    def perimeter_coordinate(self, x, y) -> float:
        """Arc-length position of a boundary point, counterclockwise from (x0, y0)."""
        w, h = self.width, self.height
        tol = 1e-9 * self.diameter
        if abs(y - self.y0) <= tol:
            return float(x - self.x0)
        if abs(x - self.x1) <= tol:
            return float(w + (y - self.y0))
        if abs(y - self.y1) <= tol:
            return float(w + h + (self.x1 - x))
        if abs(x - self.x0) <= tol:
            return float(2 * w + h + (self.y1 - y))
        raise ValueError(f"point ({x}, {y}) is not on the rectangle boundary")


def _resample_by_arclength(pts: np.ndarray, n: int, closed: bool) -> np.ndarray:
    """Pick n points (n segments if closed) at uniform arc length along pts."""
    if closed:
        pts = np.vstack([pts, pts[:1]])
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if closed:
        targets = np.linspace(0.0, total, n, endpoint=False)
    else:
        targets = np.linspace(0.0, total, n)
    x = np.interp(targets, s, pts[:, 0])
    y = np.interp(targets, s, pts[:, 1])
    return np.column_stack([x, y])


class Curve:
    """Interface description. Subclasses fill in the chain geometry."""

    closed: bool = True

    def chains(self, samples: int) -> list[np.ndarray]:
        """Sampled polyline chains; a closed chain omits the repeated endpoint."""
        raise NotImplementedError

    def distance(self, x, y) -> np.ndarray:
        """Approximate unsigned distance to the curve (accurate near it)."""
        raise NotImplementedError

    def perimeter(self) -> float:
        raise NotImplementedError

    def project(self, pts: np.ndarray) -> np.ndarray:
        """Map points near the curve onto it (used when refining fitted meshes)."""
        raise NotImplementedError


class Circle(Curve):
    def __init__(self, cx: float, cy: float, radius: float):
        self.cx, self.cy, self.radius = float(cx), float(cy), float(radius)

    def chains(self, samples: int) -> list[np.ndarray]:
        t = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
        pts = np.column_stack(
            [self.cx + self.radius * np.cos(t), self.cy + self.radius * np.sin(t)]
        )
        return [pts]

    def distance(self, x, y):
        r = np.hypot(np.asarray(x, float) - self.cx, np.asarray(y, float) - self.cy)
        return np.abs(r - self.radius)

    def perimeter(self) -> float:
        return 2 * np.pi * self.radius

    def project(self, pts):
        d = pts - [self.cx, self.cy]
        r = np.linalg.norm(d, axis=-1, keepdims=True)
        return [self.cx, self.cy] + d * (self.radius / r)


class Ellipse(Curve):
    def __init__(self, cx: float, cy: float, ax: float, ay: float):
        self.cx, self.cy, self.ax, self.ay = float(cx), float(cy), float(ax), float(ay)

    def _dense(self, n: int = 4096) -> np.ndarray:
        t = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        return np.column_stack(
            [self.cx + self.ax * np.cos(t), self.cy + self.ay * np.sin(t)]
        )

    def chains(self, samples: int) -> list[np.ndarray]:
        pts = _resample_by_arclength(self._dense(), samples, closed=True)
        return [self.project(pts)]  # resampling interpolates chords; snap back

    def distance(self, x, y):
        # First-order (Sampson) distance |F| / |grad F| of the level set F = 0.
        dx = (np.asarray(x, float) - self.cx) / self.ax
        dy = (np.asarray(y, float) - self.cy) / self.ay
        f = dx * dx + dy * dy - 1.0
        g = 2.0 * np.hypot(dx / self.ax, dy / self.ay)
        return np.abs(f) / np.maximum(g, 1e-30)

    def perimeter(self) -> float:
        pts = self._dense()
        return float(
            np.linalg.norm(np.diff(np.vstack([pts, pts[:1]]), axis=0), axis=1).sum()
        )

    def project(self, pts):
        # radial projection from the center: scale each ray to hit the ellipse
        d = pts - [self.cx, self.cy]
        t = np.sqrt((d[..., 0] / self.ax) ** 2 + (d[..., 1] / self.ay) ** 2)
        return [self.cx, self.cy] + d / t[..., None]


class PolarCurve(Curve):
    """Closed curve r = r(theta) around a center point."""

    def __init__(self, rfunc, cx: float = 0.0, cy: float = 0.0):
        self.rfunc = rfunc
        self.cx, self.cy = float(cx), float(cy)

    def _dense(self, n: int = 8192) -> np.ndarray:
        t = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        r = self.rfunc(t)
        return np.column_stack([self.cx + r * np.cos(t), self.cy + r * np.sin(t)])

    def chains(self, samples: int) -> list[np.ndarray]:
        pts = _resample_by_arclength(self._dense(), samples, closed=True)
        return [self.project(pts)]

    def distance(self, x, y):
        dx = np.asarray(x, float) - self.cx
        dy = np.asarray(y, float) - self.cy
        theta = np.arctan2(dy, dx)
        return np.abs(np.hypot(dx, dy) - self.rfunc(theta))

    def perimeter(self) -> float:
        pts = self._dense()
        return float(
            np.linalg.norm(np.diff(np.vstack([pts, pts[:1]]), axis=0), axis=1).sum()
        )

    def project(self, pts):
        d = pts - [self.cx, self.cy]
        theta = np.arctan2(d[..., 1], d[..., 0])
        r = self.rfunc(theta)
        return np.stack(
            [self.cx + r * np.cos(theta), self.cy + r * np.sin(theta)], axis=-1
        )


class PiecewiseGraph(Curve):
    """Open curve made of graph pieces y = f_k(x), x in [a_k, b_k].

    Pieces must connect end to start so the chain is a single open polyline.
    Breakpoints between pieces are always sampled exactly.
    """

    closed = False

    def __init__(self, pieces):
        # pieces: list of (f, dfdx, a, b) with f vectorized
        self.pieces = list(pieces)

    def _dense_piece(self, k: int, n: int = 2048) -> np.ndarray:
        f, _, a, b = self.pieces[k]
        x = np.linspace(a, b, n)
        return np.column_stack([x, f(x)])

    def chains(self, samples: int) -> list[np.ndarray]:
        lengths = []
        dense = []
        for k in range(len(self.pieces)):
            pts = self._dense_piece(k)
            dense.append(pts)
            lengths.append(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())
        total = sum(lengths)
        out = []
        for k, pts in enumerate(dense):
            f = self.pieces[k][0]
            n_k = max(2, int(round(samples * lengths[k] / total)) + 1)
            piece = _resample_by_arclength(pts, n_k, closed=False)
            piece[:, 1] = f(piece[:, 0])  # resampling interpolates chords
            out.append(piece if k == 0 else piece[1:])
        return [np.vstack(out)]

    def distance(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        best = np.full(np.broadcast(x, y).shape, np.inf)
        for f, dfdx, a, b in self.pieces:
            xc = np.clip(x, a, b)
            d = np.abs(y - f(xc)) / np.sqrt(1.0 + dfdx(xc) ** 2)
            # Beyond the x-range the foot point is the piece endpoint.
            d = np.maximum(d, np.abs(x - xc))
            best = np.minimum(best, d)
        return best

    def perimeter(self) -> float:
        return float(
            sum(
                np.linalg.norm(np.diff(self._dense_piece(k), axis=0), axis=1).sum()
                for k in range(len(self.pieces))
            )
        )

    def project(self, pts):
        # vertical projection onto the covering graph piece (pieces tile in x)
        x = pts[..., 0]
        y = pts[..., 1]
        best = np.full(x.shape, np.inf)
        out_y = np.array(y, copy=True)
        for f, _, a, b in self.pieces:
            inside = (x >= a) & (x <= b)
            if not inside.any():
                continue
            fy = f(np.clip(x, a, b))
            cand = np.where(inside, np.abs(y - fy), np.inf)
            better = cand < best
            best = np.where(better, cand, best)
            out_y = np.where(better, fy, out_y)
        return np.stack([x, out_y], axis=-1)


class Polyline(Curve):
    """Explicit polyline interface; closed when the loop flag is set."""

    def __init__(self, points, closed: bool = False):
        self.points = np.asarray(points, dtype=float)
        self.closed = closed
        if self.points.ndim != 2 or self.points.shape[1] != 2 or len(self.points) < 2:
            raise ValueError("polyline needs at least two 2D points")

    def chains(self, samples: int) -> list[np.ndarray]:
        # Vertices are kept verbatim; `samples` controls how many pieces the
        # segments are split into overall.
        pts = self.points
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        total = seg.sum() + (np.linalg.norm(pts[0] - pts[-1]) if self.closed else 0.0)
        target = total / max(samples, 1)
        out = [pts[0]]
        closing = [(pts[-1], pts[0])] if self.closed else []
        for p, q in list(zip(pts[:-1], pts[1:])) + closing:
            n_div = max(1, int(np.ceil(np.linalg.norm(q - p) / target)))
            for j in range(1, n_div + 1):
                out.append(p + (q - p) * (j / n_div))
        if self.closed:
            out.pop()
        return [np.asarray(out)]

    def distance(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        px = np.ravel(np.broadcast_to(x, shape)).astype(float)
        py = np.ravel(np.broadcast_to(y, shape)).astype(float)
        pts = self.points
        segs = list(zip(pts[:-1], pts[1:]))
        if self.closed:
            segs.append((pts[-1], pts[0]))
        best = np.full(px.shape, np.inf)
        for p, q in segs:
            d = q - p
            L2 = d @ d
            t = np.clip(((px - p[0]) * d[0] + (py - p[1]) * d[1]) / L2, 0.0, 1.0)
            best = np.minimum(
                best, np.hypot(px - (p[0] + t * d[0]), py - (p[1] + t * d[1]))
            )
        return best.reshape(shape)

    def perimeter(self) -> float:
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum()
        if self.closed:
            seg += np.linalg.norm(self.points[0] - self.points[-1])
        return float(seg)

    def project(self, pts):
        p = self.points
        segs = list(zip(p[:-1], p[1:]))
        if self.closed:
            segs.append((p[-1], p[0]))
        x, y = pts[..., 0], pts[..., 1]
        best = np.full(x.shape, np.inf)
        out = np.array(pts, copy=True, dtype=float)
        for a, b in segs:
            d = b - a
            t = np.clip(((x - a[0]) * d[0] + (y - a[1]) * d[1]) / (d @ d), 0.0, 1.0)
            fx, fy = a[0] + t * d[0], a[1] + t * d[1]
            dist = np.hypot(x - fx, y - fy)
            better = dist < best
            best = np.where(better, dist, best)
            out[..., 0] = np.where(better, fx, out[..., 0])
            out[..., 1] = np.where(better, fy, out[..., 1])
        return out
