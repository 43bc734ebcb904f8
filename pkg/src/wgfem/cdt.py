"""Mutable planar triangulation with constrained-edge recovery.

The bulk triangulation comes from Qhull (scipy.spatial.Delaunay). On top of
that this module maintains an edge-indexed structure that supports diagonal
flips, which is all that is needed to (a) force given segments to appear as
edges and (b) restore the local Delaunay property afterwards. An optional
umbrella smoothing pass rebuilds the triangulation between iterations, so
constraints survive by vertex index.

Only the mesh generators use this module; solvers never see it.
"""

from __future__ import annotations

from collections import defaultdict, deque

import numpy as np
from scipy.spatial import Delaunay as _Delaunay


class TriangulationError(Exception):
    """Raised when constraint recovery or flipping cannot proceed."""


def _orient(pa, pb, pc) -> float:
    return (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0])


def _proper_cross(p1, p2, q1, q2) -> bool:
    """True if open segments p1-p2 and q1-q2 intersect in a single interior point."""
    o1 = _orient(p1, p2, q1)
    o2 = _orient(p1, p2, q2)
    o3 = _orient(q1, q2, p1)
    o4 = _orient(q1, q2, p2)
    return (o1 * o2 < 0.0) and (o3 * o4 < 0.0)


def _incircle_violated(pa, pb, pc, pd) -> bool:
    """True if pd lies strictly inside the circumcircle of ccw (pa, pb, pc).

    The determinant is compared against a relative threshold built from its
    own terms so that near-cocircular configurations (structured grids) are
    treated as legal regardless of the absolute length scale.
    """
    adx, ady = pa[0] - pd[0], pa[1] - pd[1]
    bdx, bdy = pb[0] - pd[0], pb[1] - pd[1]
    cdx, cdy = pc[0] - pd[0], pc[1] - pd[1]
    ad2 = adx * adx + ady * ady
    bd2 = bdx * bdx + bdy * bdy
    cd2 = cdx * cdx + cdy * cdy
    t1 = adx * (bdy * cd2 - cdy * bd2)
    t2 = -ady * (bdx * cd2 - cdx * bd2)
    t3 = ad2 * (bdx * cdy - cdx * bdy)
    det = t1 + t2 + t3
    mag = abs(t1) + abs(t2) + abs(t3)
    return det > 1e-12 * mag


def _key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


class Triangulation:
    def __init__(self, points: np.ndarray, triangles, payload=None):
        self.points = np.asarray(points, dtype=float)
        self.tris: list = []  # vertex triples, None for removed slots
        self.payload: list = []  # per-triangle tag carried through flips
        self.edge2t: dict = defaultdict(list)
        self.v2t: dict = defaultdict(set)
        self.constrained: set = set()
        scale = float(np.abs(self.points).max()) if len(self.points) else 1.0
        self._eps = 1e-13 * max(scale, 1.0) ** 2
        for k, t in enumerate(triangles):
            self._add_tri(
                tuple(int(v) for v in t),
                None if payload is None else payload[k],
            )

    # -- construction ----------------------------------------------------

    @classmethod
    def delaunay(cls, points: np.ndarray) -> "Triangulation":
        points = np.asarray(points, dtype=float)
        dt = _Delaunay(points)
        if len(dt.coplanar):
            raise TriangulationError(
                f"{len(dt.coplanar)} duplicate/unused points in Delaunay input"
            )
        tris = dt.simplices.copy()
        # enforce counterclockwise orientation
        p = points[tris]
        area2 = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
            p[:, 1, 1] - p[:, 0, 1]
        ) * (p[:, 2, 0] - p[:, 0, 0])
        flip = area2 < 0.0
        tris[flip] = tris[flip][:, [0, 2, 1]]
        return cls(points, tris)

    # -- bookkeeping -----------------------------------------------------

    def _add_tri(self, verts: tuple, payload=None) -> int:
        tid = len(self.tris)
        self.tris.append(verts)
        self.payload.append(payload)
        a, b, c = verts
        for e in (_key(a, b), _key(b, c), _key(c, a)):
            self.edge2t[e].append(tid)
        for v in verts:
            self.v2t[v].add(tid)
        return tid

    def _remove_tri(self, tid: int) -> None:
        a, b, c = self.tris[tid]
        for e in (_key(a, b), _key(b, c), _key(c, a)):
            lst = self.edge2t[e]
            lst.remove(tid)
            if not lst:
                del self.edge2t[e]
        for v in (a, b, c):
            self.v2t[v].discard(tid)
        self.tris[tid] = None
        self.payload[tid] = None

    def edge_exists(self, u: int, v: int) -> bool:
        return _key(u, v) in self.edge2t

    def _opposite(self, tid: int, u: int, v: int) -> int:
        for w in self.tris[tid]:
            if w != u and w != v:
                return w
        raise TriangulationError("edge not part of triangle")

    # -- flipping --------------------------------------------------------

    def flippable(self, u: int, v: int) -> bool:
        tids = self.edge2t.get(_key(u, v), ())
        if len(tids) != 2:
            return False
        a = self._opposite(tids[0], u, v)
        b = self._opposite(tids[1], u, v)
        pa, pb = self.points[a], self.points[b]
        pu, pv = self.points[u], self.points[v]
        # the new edge a-b must split the quad into two ccw triangles
        return (
            _orient(pa, pb, pu) * _orient(pa, pb, pv) < 0.0
            and abs(_orient(pa, pb, pu)) > self._eps
            and abs(_orient(pa, pb, pv)) > self._eps
        )

    def flip(self, u: int, v: int) -> tuple[int, int]:
        """Replace diagonal u-v of the surrounding quad by the other diagonal."""
        key = _key(u, v)
        tids = self.edge2t.get(key, ())
        if len(tids) != 2:
            raise TriangulationError("cannot flip a boundary edge")
        if key in self.constrained:
            raise TriangulationError("cannot flip a constrained edge")
        t1, t2 = tids
        a = self._opposite(t1, u, v)
        b = self._opposite(t2, u, v)
        tag1, tag2 = self.payload[t1], self.payload[t2]
        if tag1 != tag2:
            raise TriangulationError("flip would mix differently tagged triangles")
        pa, pb, pu, pv = (self.points[i] for i in (a, b, u, v))
        o_u = _orient(pa, pb, pu)
        o_v = _orient(pa, pb, pv)
        if not (o_u * o_v < 0.0):
            raise TriangulationError("flip would invert a triangle")
        self._remove_tri(max(t1, t2))
        self._remove_tri(min(t1, t2))
        if o_u > 0.0:
            self._add_tri((a, b, u), tag1)
            self._add_tri((b, a, v), tag1)
        else:
            self._add_tri((b, a, u), tag1)
            self._add_tri((a, b, v), tag1)
        return a, b

    # -- constraint recovery ----------------------------------------------

    def _segment_crossings(self, u: int, v: int) -> list:
        """Edges properly crossed by segment u-v, found by walking triangles."""
        pu, pv = self.points[u], self.points[v]
        start = None
        for tid in self.v2t[u]:
            a, b = (w for w in self.tris[tid] if w != u)
            if _proper_cross(pu, pv, self.points[a], self.points[b]):
                start = (tid, a, b)
                break
        if start is None:
            raise TriangulationError(
                f"segment {u}-{v}: no crossing found (vertex on segment?)"
            )
        tid, a, b = start
        crossings = [_key(a, b)]
        guard = 4 * len(self.tris) + 16
        while guard:
            guard -= 1
            nxt = [t for t in self.edge2t[_key(a, b)] if t != tid]
            if len(nxt) != 1:
                raise TriangulationError(f"segment {u}-{v} leaves the triangulation")
            tid = nxt[0]
            w = self._opposite(tid, a, b)
            if w == v:
                return crossings
            if _proper_cross(pu, pv, self.points[a], self.points[w]):
                b = w
            elif _proper_cross(pu, pv, self.points[w], self.points[b]):
                a = w
            else:
                raise TriangulationError(
                    f"segment {u}-{v} passes through vertex {w}"
                )
            crossings.append(_key(a, b))
        raise TriangulationError(f"segment {u}-{v}: crossing walk did not terminate")

    def insert_constraint(self, u: int, v: int) -> int:
        """Force edge u-v into the triangulation by flipping; returns flip count."""
        if u == v:
            raise TriangulationError("zero-length constraint")
        key = _key(u, v)
        if key in self.edge2t:
            self.constrained.add(key)
            return 0
        pending = deque(self._segment_crossings(u, v))
        pu, pv = self.points[u], self.points[v]
        flips = 0
        stall = 0
        limit = 64 * (len(pending) + 4) ** 2
        while pending:
            if flips + stall > limit:
                raise TriangulationError(f"constraint {u}-{v} did not converge")
            cu, cv = pending.popleft()
            if _key(cu, cv) not in self.edge2t:
                continue
            if _key(cu, cv) in self.constrained:
                raise TriangulationError(
                    f"constraint {u}-{v} crosses existing constraint {cu}-{cv}"
                )
            if not self.flippable(cu, cv):
                pending.append((cu, cv))
                stall += 1
                continue
            a, b = self.flip(cu, cv)
            flips += 1
            stall = 0
            if _proper_cross(pu, pv, self.points[a], self.points[b]):
                pending.append(_key(a, b))
        if key not in self.edge2t:
            raise TriangulationError(f"constraint {u}-{v} could not be recovered")
        self.constrained.add(key)
        return flips

    # -- Delaunay restoration ---------------------------------------------

    def legalize(self, max_flips: int | None = None) -> int:
        """Lawson flips on non-constrained edges until locally Delaunay."""
        if max_flips is None:
            max_flips = 64 * len(self.tris) + 1024
        pending = deque(sorted(self.edge2t.keys()))
        queued = set(pending)
        flips = 0
        while pending:
            key = pending.popleft()
            queued.discard(key)
            if key in self.constrained or key not in self.edge2t:
                continue
            tids = self.edge2t[key]
            if len(tids) != 2:
                continue
            u, v = key
            if self.payload[tids[0]] != self.payload[tids[1]]:
                continue
            b = self._opposite(tids[1], u, v)
            t = self.tris[tids[0]]
            if not _incircle_violated(
                self.points[t[0]], self.points[t[1]], self.points[t[2]],
                self.points[b],
            ):
                continue
            if not self.flippable(u, v):
                continue
            na, nb = self.flip(u, v)
            flips += 1
            if flips > max_flips:
                raise TriangulationError("legalization did not terminate")
            for e in (_key(na, u), _key(u, nb), _key(nb, v), _key(v, na)):
                if e in self.edge2t and e not in queued:
                    pending.append(e)
                    queued.add(e)
        return flips

    # -- smoothing ---------------------------------------------------------

    def smoothed(self, fixed: np.ndarray, iterations: int) -> "Triangulation":
        """Centroidal smoothing with re-triangulation; `fixed` vertices stay.

        Each free vertex moves to the area-weighted average of its incident
        triangle centroids (a cheap approximation of one Lloyd step), then
        the point set is re-triangulated and the constraints re-inserted.
        """
        tri = self
        pts = self.points.copy()
        constraints = list(self.constrained)
        for _ in range(iterations):
            acc = np.zeros_like(pts)
            wsum = np.zeros(len(pts))
            for t in tri.tris:
                if t is None:
                    continue
                a, b, c = t
                pa, pb, pc = pts[a], pts[b], pts[c]
                area = 0.5 * abs(
                    (pb[0] - pa[0]) * (pc[1] - pa[1])
                    - (pb[1] - pa[1]) * (pc[0] - pa[0])
                )
                cen = (pa + pb + pc) / 3.0
                for v in t:
                    acc[v] += area * cen
                    wsum[v] += area
            move = (~fixed) & (wsum > 0)
            pts[move] = acc[move] / wsum[move, None]
            tri = Triangulation.delaunay(pts)
            for u, v in constraints:
                tri.insert_constraint(u, v)
            tri.legalize()
        return tri

    # -- export ------------------------------------------------------------

    def triangle_array(self) -> np.ndarray:
        out = [t for t in self.tris if t is not None]
        return np.asarray(out, dtype=np.int32)

    def payload_array(self) -> np.ndarray:
        return np.asarray(
            [p for t, p in zip(self.tris, self.payload) if t is not None]
        )
